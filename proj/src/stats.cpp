#include "loopperc/stats.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "loopperc/error.hpp"

namespace loopperc {

Interval wilson_interval(double successes, double trials, double z) {
  if (!(trials > 0.0)) throw InvalidArgument("wilson_interval: no trials");
  const double p = successes / trials;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / trials;
  const double center = (p + z2 / (2.0 * trials)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom;
  // Clamp so the interval always contains the point estimate despite rounding.
  return {std::min(p, std::max(0.0, center - half)), std::max(p, std::min(1.0, center + half))};
}

double kolmogorov_q(double t) {
  if (t <= 0.0) return 1.0;
  if (t < 0.2) return 1.0;  // series converges slowly here; Q is 1 to double precision
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    sum += (k % 2 == 1) ? term : -term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

// Stephens' finite-sample correction of the asymptotic distribution.
double ks_p_value(double d, double effective_n) {
  const double root = std::sqrt(effective_n);
  return kolmogorov_q((root + 0.12 + 0.11 / root) * d);
}

}  // namespace

KsResult ks_one_sample(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw InvalidArgument("ks_one_sample: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return {d, ks_p_value(d, n), samples.size()};
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return {d, ks_p_value(d, na * nb / (na + nb)), a.size() + b.size()};
}

double gamma_cdf(double x, double shape, double scale) {
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(shape, x / scale);
}

}  // namespace loopperc
