#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace loopperc {

inline constexpr double kZ95 = 1.959963984540054;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

// Wilson score interval for `successes` out of `trials`.
Interval wilson_interval(double successes, double trials, double z = kZ95);

// Kolmogorov survival function Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2).
double kolmogorov_q(double t);

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
  std::size_t n = 0;
};

// One-sample Kolmogorov-Smirnov against a continuous CDF.
KsResult ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf);
// Two-sample Kolmogorov-Smirnov.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

// CDF of Gamma(shape, scale).
double gamma_cdf(double x, double shape, double scale);

}  // namespace loopperc
