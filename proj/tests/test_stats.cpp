#include <cmath>
#include <random>

#include "doctest.h"
#include "loopperc/stats.hpp"

using namespace loopperc;

TEST_CASE("Wilson interval reference values") {
  const Interval a = wilson_interval(50, 100);
  CHECK(a.lo == doctest::Approx(0.40383).epsilon(1e-4));
  CHECK(a.hi == doctest::Approx(0.59617).epsilon(1e-4));
  const Interval zero = wilson_interval(0, 100);
  CHECK(zero.lo == 0.0);
  CHECK(zero.hi == doctest::Approx(0.036993).epsilon(1e-4));
  const Interval all = wilson_interval(100, 100);
  CHECK(all.contains(1.0));
  CHECK(all.lo == doctest::Approx(1.0 - 0.036993).epsilon(1e-4));
}

TEST_CASE("Kolmogorov distribution tail") {
  CHECK(kolmogorov_q(1.0) == doctest::Approx(0.2699996716735).epsilon(1e-9));
  CHECK(kolmogorov_q(1.3580986) == doctest::Approx(0.05).epsilon(1e-5));
  CHECK(kolmogorov_q(0.0) == 1.0);
  CHECK(kolmogorov_q(10.0) < 1e-80);
}

TEST_CASE("Gamma CDF") {
  CHECK(gamma_cdf(1.0, 1.0, 1.0) == doctest::Approx(1.0 - std::exp(-1.0)));
  CHECK(gamma_cdf(2.0, 1.0, 2.0) == doctest::Approx(1.0 - std::exp(-1.0)));
  // Gamma(1/2, 2) is chi-square with one degree of freedom.
  CHECK(gamma_cdf(1.0, 0.5, 2.0) == doctest::Approx(std::erf(1.0 / std::sqrt(2.0))));
  CHECK(gamma_cdf(-1.0, 0.5, 2.0) == 0.0);
}

TEST_CASE("KS tests accept the true law and reject a wrong one") {
  std::mt19937_64 gen(99);
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> s(20000);
  for (auto& v : s) v = ex(gen);
  const auto good = ks_one_sample(s, [](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-x); });
  CHECK(good.p_value > 0.001);
  const auto bad = ks_one_sample(s, [](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-1.2 * x); });
  CHECK(bad.p_value < 1e-6);
  std::vector<double> t(20000);
  for (auto& v : t) v = ex(gen);
  CHECK(ks_two_sample(s, t).p_value > 0.001);
  for (auto& v : t) v *= 1.2;
  CHECK(ks_two_sample(s, t).p_value < 1e-6);
}
