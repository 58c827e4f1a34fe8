#pragma once

#include <cstdint>
#include <vector>

#include "sls/tensor.hpp"

namespace sls {

// C x C counts indexed (truth, predicted), plus the ignored-pixel tally.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  void add(int truth, int pred, std::uint64_t count = 1);
  void accumulate(const std::vector<int>& pred, const std::vector<int>& truth,
                  int ignore_index = kIgnoreIndex);

  std::uint64_t at(int truth, int pred) const;
  int num_classes() const { return classes_; }
  std::uint64_t total() const;
  std::uint64_t ignored() const { return ignored_; }
  bool empty() const { return total() == 0; }

 private:
  int classes_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t ignored_ = 0;
};

// IoU_c = TP / (TP + FP + FN); classes absent from both prediction and truth
// come back as NaN and are excluded from the mean.
std::vector<double> per_class_iou(const ConfusionMatrix& cm);
double miou(const ConfusionMatrix& cm);
double pixel_accuracy(const ConfusionMatrix& cm);

// Overlap scores on binary masks; two empty masks agree perfectly (1.0).
double dice(const std::vector<std::uint8_t>& pred_mask, const std::vector<std::uint8_t>& true_mask);
double jaccard(const std::vector<std::uint8_t>& pred_mask, const std::vector<std::uint8_t>& true_mask);

}  // namespace sls
