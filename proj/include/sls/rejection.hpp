#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sls/metrics.hpp"

namespace sls {

enum class EvalMetric { miou, dice, accuracy };

std::string eval_metric_name(EvalMetric m);
EvalMetric parse_eval_metric(const std::string& name);

struct RejectionCurve {
  std::vector<double> fractions;  // strictly increasing, starting at 0
  std::vector<double> scores;
  std::string metric_name;
};

// Compute a metric over pooled (pred, truth) label arrays, minus the pixels
// whose indices appear in `rejected`. Dice treats class 1 as foreground.
double eval_labels(const std::vector<int>& pred, const std::vector<int>& truth,
                   const std::vector<std::uint8_t>& rejected, EvalMetric metric, int num_classes,
                   int ignore_index = kIgnoreIndex);

// At fraction f, the floor(f * N) most-uncertain pixels are excluded and the
// metric is recomputed on the remainder (N counts non-ignored pixels; ties
// break by ascending pixel index). Fraction 0 reproduces the base metric.
RejectionCurve pixel_rejection_curve(const std::vector<int>& pred_labels,
                                     const std::vector<int>& true_labels,
                                     const std::vector<double>& u_norm,
                                     const std::vector<double>& fractions, EvalMetric metric,
                                     int num_classes, int ignore_index = kIgnoreIndex);

// Uniform random removal instead of uncertainty-ranked removal.
RejectionCurve random_rejection_baseline(const std::vector<int>& pred_labels,
                                         const std::vector<int>& true_labels,
                                         const std::vector<double>& fractions, std::uint64_t seed,
                                         EvalMetric metric, int num_classes,
                                         int ignore_index = kIgnoreIndex);

// Paper-style grids: 0..20% step 2.5%, and 0..5% step 0.5%.
std::vector<double> rejection_grid_camvid();
std::vector<double> rejection_grid_tvus();

}  // namespace sls
