#include "sls/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sls/errors.hpp"

namespace sls {

ConfusionMatrix::ConfusionMatrix(int num_classes) : classes_(num_classes) {
  if (num_classes < 1)
    throw UsageError("confusion matrix needs >= 1 class, got " + std::to_string(num_classes));
  counts_.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
}

void ConfusionMatrix::add(int truth, int pred, std::uint64_t count) {
  if (truth < 0 || truth >= classes_ || pred < 0 || pred >= classes_)
    throw UsageError("confusion matrix entry (" + std::to_string(truth) + "," +
                     std::to_string(pred) + ") out of range for " + std::to_string(classes_) +
                     " classes");
  counts_[static_cast<std::size_t>(truth) * classes_ + pred] += count;
}

void ConfusionMatrix::accumulate(const std::vector<int>& pred, const std::vector<int>& truth,
                                 int ignore_index) {
  if (pred.size() != truth.size())
    throw UsageError("confusion matrix: prediction size " + std::to_string(pred.size()) +
                     " != truth size " + std::to_string(truth.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] == ignore_index) {
      ++ignored_;
      continue;
    }
    add(truth[i], pred[i]);
  }
}

std::uint64_t ConfusionMatrix::at(int truth, int pred) const {
  return counts_[static_cast<std::size_t>(truth) * classes_ + pred];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto v : counts_) t += v;
  return t;
}

std::vector<double> per_class_iou(const ConfusionMatrix& cm) {
  const int C = cm.num_classes();
  std::vector<double> iou(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) {
    const std::uint64_t tp = cm.at(c, c);
    std::uint64_t fp = 0, fn = 0;
    for (int o = 0; o < C; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fn += cm.at(c, o);
    }
    const std::uint64_t uni = tp + fp + fn;
    iou[static_cast<std::size_t>(c)] =
        uni == 0 ? std::numeric_limits<double>::quiet_NaN()
                 : static_cast<double>(tp) / static_cast<double>(uni);
  }
  return iou;
}

double miou(const ConfusionMatrix& cm) {
  if (cm.empty()) throw UsageError("miou: empty confusion matrix");
  double sum = 0.0;
  int counted = 0;
  for (double v : per_class_iou(cm)) {
    if (std::isnan(v)) continue;
    sum += v;
    ++counted;
  }
  return sum / counted;
}

double pixel_accuracy(const ConfusionMatrix& cm) {
  if (cm.empty()) throw UsageError("pixel_accuracy: empty confusion matrix");
  std::uint64_t correct = 0;
  for (int c = 0; c < cm.num_classes(); ++c) correct += cm.at(c, c);
  return static_cast<double>(correct) / static_cast<double>(cm.total());
}

namespace {

struct Overlap {
  std::uint64_t a = 0, b = 0, both = 0;
};

Overlap overlap(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth) {
  if (pred.size() != truth.size())
    throw UsageError("mask shape mismatch: " + std::to_string(pred.size()) + " vs " +
                     std::to_string(truth.size()));
  Overlap o;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, t = truth[i] != 0;
    o.a += p;
    o.b += t;
    o.both += p && t;
  }
  return o;
}

}  // namespace

double dice(const std::vector<std::uint8_t>& pred_mask, const std::vector<std::uint8_t>& true_mask) {
  const Overlap o = overlap(pred_mask, true_mask);
  if (o.a + o.b == 0) return 1.0;
  return 2.0 * static_cast<double>(o.both) / static_cast<double>(o.a + o.b);
}

double jaccard(const std::vector<std::uint8_t>& pred_mask,
               const std::vector<std::uint8_t>& true_mask) {
  const Overlap o = overlap(pred_mask, true_mask);
  const std::uint64_t uni = o.a + o.b - o.both;
  if (uni == 0) return 1.0;
  return static_cast<double>(o.both) / static_cast<double>(uni);
}

}  // namespace sls
