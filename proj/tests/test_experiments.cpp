#include <cmath>

#include "doctest.h"
#include "loopperc/error.hpp"
#include "loopperc/experiments.hpp"
#include "loopperc/potential.hpp"

using namespace loopperc;

TEST_CASE("trivial f_n values") {
  const MetricGraph g = build_lattice_box(2, 3, 1.0, true);
  RunOptions o;
  o.replicas = 2000;
  o.master_seed = 1;
  CHECK(f_n_estimate(g, g.root(), 0, 0.0, o).estimate == 1.0);
  CHECK(f_n_estimate(g, g.root(), 3, 1.0, o).estimate == 1.0);
  CHECK_THROWS_AS(f_n_estimate(g, g.root(), 9, 0.0, o), InvalidArgument);
}

TEST_CASE("coupled estimates are monotone replica by replica") {
  const MetricGraph g = build_lattice_box(2, 4, 1.0, true);
  RunOptions o;
  o.replicas = 5000;
  o.master_seed = 2;
  const FnGrid fg = fn_grid(g, g.root(), {1, 2, 3}, {0.2, 0.0, 0.1}, o);
  const Moments& m = fg.moments();
  for (std::uint32_t n : {1u, 2u, 3u}) {
    // D = X(eps_hi) - X(eps_lo) is never negative iff sum D^2 == sum D.
    const std::size_t lo = fg.cell(fg.n_index(n), fg.eps_index(0.0));
    const std::size_t hi = fg.cell(fg.n_index(n), fg.eps_index(0.2));
    const double sum_d = m.sum(hi) - m.sum(lo);
    const double sum_d2 = m.cross(hi, hi) - 2 * m.cross(hi, lo) + m.cross(lo, lo);
    CHECK(sum_d == sum_d2);
    CHECK(fg.f(n, 0.1) >= fg.f(n, 0.0));
  }
  // Larger spheres are harder to reach on every replica.
  const std::size_t a = fg.cell(fg.n_index(1), fg.eps_index(0.1));
  const std::size_t b = fg.cell(fg.n_index(3), fg.eps_index(0.1));
  CHECK(m.sum(b) == m.cross(a, b));
}

TEST_CASE("ODE scan on the 3-vertex path") {
  const MetricGraph g = build_path(3);
  const double q = two_point_exact(green_table(g, std::nullopt), 0, 2);
  RunOptions o;
  o.replicas = 200000;
  o.master_seed = 3;
  const OdeScan scan = ode_inequality_scan(g, 0, 2, {0.0, 0.1, 0.2}, 0.02, o, 20000);
  REQUIRE(scan.rows.size() == 3);
  for (const OdeRow& row : scan.rows) {
    CHECK(std::abs(row.slope - (1.0 - q)) < 4 * row.slope_se);
    CHECK(row.positive);
    CHECK(std::abs(row.f.estimate - (1.0 - (1.0 - row.epsilon) * (1.0 - q))) < 4 * row.f.standard_error);
  }
  CHECK(scan.all_positive);
  CHECK(scan.assertion_holds);
  CHECK(std::isfinite(scan.witness_ratio));
}

TEST_CASE("ODE scan validates its grid") {
  const MetricGraph g = build_path(3);
  RunOptions o;
  o.replicas = 10;
  CHECK_THROWS_AS(ode_inequality_scan(g, 0, 2, {0.0, 0.01}, 0.01, o, 10), InvalidArgument);
  CHECK_THROWS_AS(ode_inequality_scan(g, 0, 2, {0.45}, 0.1, o, 10), InvalidArgument);
  CHECK_THROWS_AS(ode_inequality_scan(g, 0, 2, {0.1}, 0.0, o, 10), InvalidArgument);
}

TEST_CASE("epsilon threshold scan") {
  const MetricGraph g = build_lattice_box(2, 4, 1.0, true);
  RunOptions o;
  o.replicas = 4000;
  o.master_seed = 4;
  const ThresholdScan s = threshold_scan_epsilon(g, g.root(), {0.0, 1.0}, {1, 2, 4}, o);
  CHECK(s.rows.size() == 6);
  for (const auto& row : s.rows) {
    if (row.parameter == 1.0) CHECK(row.report.estimate == 1.0);
  }
  CHECK(s.diagnostics["per_epsilon"].size() == 2);
}

TEST_CASE("alpha threshold scan") {
  const MetricGraph g = build_path(5);
  RunOptions o;
  o.replicas = 2000;
  o.master_seed = 5;
  const ThresholdScan s = threshold_scan_alpha(g, 2, {0.0, 1.0}, {0, 1, 2}, 2, o);
  CHECK(s.rows.size() == 2 * 2 * 3);
  for (const auto& row : s.rows) {
    if (row.parameter == 0.0) CHECK(row.report.estimate == (row.n == 0 ? 1.0 : 0.0));
    CHECK((row.pieces == 2 || row.pieces == 4));
  }
  CHECK(s.diagnostics["m_sensitivity"].size() == 6);
  CHECK_THROWS_AS(threshold_scan_alpha(g, 2, {-1.0}, {1}, 2, o), InvalidArgument);
}

TEST_CASE("log-ratio contrast of identical cells is zero") {
  const MetricGraph g = build_lattice_box(2, 4, 1.0, true);
  RunOptions o;
  o.replicas = 4000;
  o.master_seed = 6;
  const FnGrid fg = fn_grid(g, g.root(), {1, 3}, {0.0, 0.2}, o);
  const auto c = fg.log_ratio_contrast(1, 3, 0.2, 0.2);
  CHECK(c.value == 0.0);
  CHECK(c.standard_error == 0.0);
  const auto d = fg.log_ratio_contrast(1, 3, 0.0, 0.2);
  CHECK(d.standard_error > 0.0);
}

TEST_CASE("truncation diagnostic") {
  RunOptions o;
  o.replicas = 3000;
  o.master_seed = 7;
  const TruncationDiagnostic d = truncation_diagnostic(2, 3, 1, 0.0, o);
  CHECK(d.radius == 3);
  CHECK(d.standard_error > 0.0);
  CHECK_THROWS_AS(truncation_diagnostic(2, 2, 2, 0.0, o), InvalidArgument);
}
