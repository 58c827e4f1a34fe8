#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sls/errors.hpp"
#include "sls/graph.hpp"
#include "sls/tensor.hpp"

namespace sls {

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool passed = false;
};

// Compares reverse-mode gradients against central finite differences on
// every coordinate of every input. `build_loss` must construct the forward
// pass on the given graph from the shared input tensors and return a scalar.
// Relative error per coordinate: |a - n| / max(1e-8, |a| + |n|).
template <class F>
GradCheckReport grad_check(F&& build_loss, const std::vector<TensorPtr<double>>& inputs,
                           double tolerance, double step = 1e-5) {
  for (auto& in : inputs) in->zero_grad();
  {
    Graph<double> g;
    auto loss = build_loss(g);
    g.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (auto& in : inputs) analytic.push_back(in->grad);

  auto eval = [&]() {
    Graph<double> g;
    return build_loss(g)->data[0];
  };

  GradCheckReport report;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto& in = *inputs[i];
    for (std::int64_t j = 0; j < in.numel(); ++j) {
      const double a = analytic[i][static_cast<std::size_t>(j)];
      if (!std::isfinite(a))
        throw NumericError("grad_check: non-finite analytic gradient at input " + std::to_string(i) +
                           " coordinate " + std::to_string(j));
      const double saved = in.data[static_cast<std::size_t>(j)];
      in.data[static_cast<std::size_t>(j)] = saved + step;
      const double lp = eval();
      in.data[static_cast<std::size_t>(j)] = saved - step;
      const double lm = eval();
      in.data[static_cast<std::size_t>(j)] = saved;
      const double numeric = (lp - lm) / (2.0 * step);
      if (!std::isfinite(numeric))
        throw NumericError("grad_check: non-finite numeric gradient at input " + std::to_string(i) +
                           " coordinate " + std::to_string(j));
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      report.max_rel_error = std::max(report.max_rel_error, rel);
    }
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace sls
