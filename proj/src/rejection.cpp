#include "sls/rejection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sls/errors.hpp"
#include "sls/rng.hpp"

namespace sls {

std::string eval_metric_name(EvalMetric m) {
  switch (m) {
    case EvalMetric::miou: return "miou";
    case EvalMetric::dice: return "dice";
    case EvalMetric::accuracy: return "accuracy";
  }
  return "miou";
}

EvalMetric parse_eval_metric(const std::string& name) {
  if (name == "miou") return EvalMetric::miou;
  if (name == "dice") return EvalMetric::dice;
  if (name == "accuracy") return EvalMetric::accuracy;
  throw UsageError("unknown metric '" + name + "' (expected miou, dice or accuracy)");
}

double eval_labels(const std::vector<int>& pred, const std::vector<int>& truth,
                   const std::vector<std::uint8_t>& rejected, EvalMetric metric, int num_classes,
                   int ignore_index) {
  if (pred.size() != truth.size())
    throw UsageError("eval_labels: prediction size " + std::to_string(pred.size()) +
                     " != truth size " + std::to_string(truth.size()));
  if (!rejected.empty() && rejected.size() != pred.size())
    throw UsageError("eval_labels: rejection mask size mismatch");

  if (metric == EvalMetric::dice) {
    std::vector<std::uint8_t> pm, tm;
    pm.reserve(pred.size());
    tm.reserve(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (truth[i] == ignore_index) continue;
      if (!rejected.empty() && rejected[i]) continue;
      pm.push_back(pred[i] == 1);
      tm.push_back(truth[i] == 1);
    }
    return dice(pm, tm);
  }

  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] == ignore_index) continue;
    if (!rejected.empty() && rejected[i]) continue;
    cm.add(truth[i], pred[i]);
  }
  return metric == EvalMetric::miou ? miou(cm) : pixel_accuracy(cm);
}

namespace {

void validate_fractions(const std::vector<double>& fractions) {
  if (fractions.empty()) throw UsageError("rejection: empty fraction grid");
  if (fractions.front() != 0.0)
    throw UsageError("rejection: fraction grid must start at 0, got " +
                     std::to_string(fractions.front()));
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (fractions[i] < 0.0 || fractions[i] >= 1.0)
      throw UsageError("rejection: fraction " + std::to_string(fractions[i]) +
                       " outside [0, 1)");
    if (i > 0 && fractions[i] <= fractions[i - 1])
      throw UsageError("rejection: fractions must be strictly increasing");
  }
}

// Pool of evaluable pixel indices (ignored pixels never participate).
std::vector<std::size_t> evaluable(const std::vector<int>& truth, int ignore_index) {
  std::vector<std::size_t> idx;
  idx.reserve(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (truth[i] != ignore_index) idx.push_back(i);
  return idx;
}

RejectionCurve curve_from_order(const std::vector<int>& pred, const std::vector<int>& truth,
                                const std::vector<std::size_t>& order,
                                const std::vector<double>& fractions, EvalMetric metric,
                                int num_classes, int ignore_index) {
  RejectionCurve curve;
  curve.metric_name = eval_metric_name(metric);
  curve.fractions = fractions;
  std::vector<std::uint8_t> rejected(pred.size(), 0);
  const auto n = static_cast<double>(order.size());
  for (double f : fractions) {
    const auto k = static_cast<std::size_t>(std::floor(f * n));
    std::fill(rejected.begin(), rejected.end(), 0);
    for (std::size_t i = 0; i < k; ++i) rejected[order[i]] = 1;
    curve.scores.push_back(eval_labels(pred, truth, rejected, metric, num_classes, ignore_index));
  }
  return curve;
}

}  // namespace

RejectionCurve pixel_rejection_curve(const std::vector<int>& pred_labels,
                                     const std::vector<int>& true_labels,
                                     const std::vector<double>& u_norm,
                                     const std::vector<double>& fractions, EvalMetric metric,
                                     int num_classes, int ignore_index) {
  if (u_norm.size() != pred_labels.size())
    throw UsageError("pixel_rejection_curve: uncertainty size " + std::to_string(u_norm.size()) +
                     " != pixel count " + std::to_string(pred_labels.size()));
  for (double v : u_norm)
    if (v < -1e-6 || v > 1.0 + 1e-6)
      throw UsageError("pixel_rejection_curve: uncertainty not normalized to [0,1], saw " +
                       std::to_string(v));
  validate_fractions(fractions);

  auto order = evaluable(true_labels, ignore_index);
  // Descending uncertainty; ties break by ascending pixel index.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return u_norm[a] > u_norm[b]; });
  return curve_from_order(pred_labels, true_labels, order, fractions, metric, num_classes,
                          ignore_index);
}

RejectionCurve random_rejection_baseline(const std::vector<int>& pred_labels,
                                         const std::vector<int>& true_labels,
                                         const std::vector<double>& fractions, std::uint64_t seed,
                                         EvalMetric metric, int num_classes, int ignore_index) {
  validate_fractions(fractions);
  auto order = evaluable(true_labels, ignore_index);
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.bounded(i))]);
  return curve_from_order(pred_labels, true_labels, order, fractions, metric, num_classes,
                          ignore_index);
}

std::vector<double> rejection_grid_camvid() {
  std::vector<double> g;
  for (int i = 0; i <= 8; ++i) g.push_back(i * 0.025);
  return g;
}

std::vector<double> rejection_grid_tvus() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(i * 0.005);
  return g;
}

}  // namespace sls
