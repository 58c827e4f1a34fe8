#include "sls/stats.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sls/errors.hpp"

namespace sls {

namespace {

// Continued-fraction expansion of the regularized incomplete beta (Lentz).
double beta_cf(double a, double b, double x) {
  constexpr double eps = 3e-16;
  constexpr double tiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const int m2 = 2 * m;
    double num = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    num = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + num * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < eps) break;
  }
  return h;
}

double beta_inc(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front =
      std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
               b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace

double student_t_cdf(double t, int df) {
  if (df < 1) throw UsageError("student_t_cdf: df must be >= 1, got " + std::to_string(df));
  const double d = static_cast<double>(df);
  const double tail = 0.5 * beta_inc(d / 2.0, 0.5, d / (d + t * t));
  return t >= 0.0 ? 1.0 - tail : tail;
}

TTestResult paired_t_test(const std::vector<double>& scores_a,
                          const std::vector<double>& scores_b) {
  if (scores_a.size() != scores_b.size())
    throw UsageError("paired_t_test: length mismatch " + std::to_string(scores_a.size()) + " vs " +
                     std::to_string(scores_b.size()));
  const int n = static_cast<int>(scores_a.size());
  if (n < 2) throw UsageError("paired_t_test: needs >= 2 pairs, got " + std::to_string(n));

  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += scores_a[static_cast<std::size_t>(i)] - scores_b[static_cast<std::size_t>(i)];
  mean /= n;
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = scores_a[static_cast<std::size_t>(i)] - scores_b[static_cast<std::size_t>(i)] - mean;
    ss += d * d;
  }
  const double var = ss / (n - 1);

  TTestResult r;
  r.df = n - 1;
  if (var == 0.0) {
    r.degenerate = true;
    r.t = std::numeric_limits<double>::quiet_NaN();
    r.p = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.t = mean / std::sqrt(var / n);
  const double d = static_cast<double>(r.df);
  r.p = beta_inc(d / 2.0, 0.5, d / (d + r.t * r.t));  // two-sided
  return r;
}

}  // namespace sls
