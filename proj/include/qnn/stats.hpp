// Small statistics toolkit backing the initializer audit: running moments,
// the regularized incomplete gamma function, and chi-square tests.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "qnn/errors.hpp"

namespace qnn {

struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations (Welford)

  void add(double v) {
    ++count;
    const double delta = v - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (v - mean);
  }
  double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
  double stderr_of_mean() const {
    return count > 1 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
  }
};

namespace detail {

// Regularized lower incomplete gamma P(a, x), by series expansion for
// x < a + 1 and by Lentz's continued fraction otherwise.
inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw DegenerateInputError("gamma_p: requires x >= 0, a > 0");
  if (x == 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  // Continued fraction for Q(a, x); P = 1 - Q.
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * h;
  return 1.0 - q;
}

}  // namespace detail

/// Survival function of the chi-square distribution: P(X >= stat).
inline double chi_square_pvalue(double stat, int dof) {
  if (dof <= 0) throw DegenerateInputError("chi_square_pvalue: dof must be positive");
  if (stat <= 0.0) return 1.0;
  return 1.0 - detail::gamma_p(0.5 * dof, 0.5 * stat);
}

/// Chi-square goodness-of-fit p-value of `samples` against the uniform
/// distribution on [lo, hi), using equal-width bins.
inline double uniformity_pvalue(std::span<const double> samples, double lo, double hi, int bins) {
  if (bins < 2) throw DegenerateInputError("uniformity_pvalue: need at least 2 bins");
  if (!(hi > lo)) throw DegenerateInputError("uniformity_pvalue: empty interval");
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  std::size_t used = 0;
  for (double v : samples) {
    if (v < lo || v >= hi) continue;
    auto bin = static_cast<std::size_t>((v - lo) / (hi - lo) * bins);
    if (bin >= counts.size()) bin = counts.size() - 1;
    counts[bin] += 1.0;
    ++used;
  }
  if (used == 0) return 0.0;
  const double expected = static_cast<double>(used) / bins;
  double stat = 0.0;
  for (double c : counts) stat += (c - expected) * (c - expected) / expected;
  return chi_square_pvalue(stat, bins - 1);
}

}  // namespace qnn
