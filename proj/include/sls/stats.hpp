#pragma once

#include <vector>

namespace sls {

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  int df = 0;
  bool degenerate = false;  // zero-variance differences: t and p undefined
};

// Two-sided paired Student t-test. Inputs must have equal length >= 2.
TTestResult paired_t_test(const std::vector<double>& scores_a, const std::vector<double>& scores_b);

// P(T <= t) for Student's t with df degrees of freedom.
double student_t_cdf(double t, int df);

}  // namespace sls
