#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "loopperc/error.hpp"
#include "loopperc/potential.hpp"

using namespace loopperc;

namespace {

MetricGraph random_graph(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Edge> edges;
  for (VertexId x = 1; x < n; ++x) {
    edges.push_back({static_cast<VertexId>(gen() % x), x, 0.2 + 2.0 * u(gen)});
  }
  for (int extra = 0; extra < static_cast<int>(n) / 2; ++extra) {
    const VertexId a = gen() % n, b = gen() % n;
    if (a == b) continue;
    bool dup = false;
    for (const Edge& e : edges) dup = dup || (e.u == a && e.v == b) || (e.u == b && e.v == a);
    if (!dup) edges.push_back({a, b, 0.2 + 2.0 * u(gen)});
  }
  std::vector<double> kill(n, 0.0);
  kill[gen() % n] = 0.3 + u(gen);
  for (auto& k : kill) {
    if (u(gen) < 0.3) k += u(gen);
  }
  return MetricGraph(n, std::move(edges), std::move(kill));
}

VertexSet all_vertices(std::size_t n) {
  std::vector<VertexId> ids(n);
  for (VertexId i = 0; i < n; ++i) ids[i] = i;
  return VertexSet(std::move(ids));
}

}  // namespace

TEST_CASE("two-vertex Green function by hand") {
  const GreenTable g = green_table(build_two_vertex(), std::nullopt);
  CHECK(g(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(g(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(g(1, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(hitting_probability(g, 0, 1) == doctest::Approx(0.5));
  CHECK(two_point_exact(g, 0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(two_point_exact(g, 0, 0) == doctest::Approx(1.0));
  CHECK(g.solver_residual < 1e-14);
}

TEST_CASE("Green table inverts the precision matrix") {
  std::mt19937_64 gen(7);
  for (int t = 0; t < 10; ++t) {
    const MetricGraph graph = random_graph(gen, 4 + t);
    const std::size_t n = graph.vertex_count();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (VertexId x = 0; x < n; ++x) m(x, x) = graph.total_rate(x);
    for (const Edge& e : graph.edges()) m(e.u, e.v) = m(e.v, e.u) = -e.weight;
    const GreenTable g = green_table(graph, std::nullopt);
    CHECK((m * g.values - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((g.values - g.values.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("killed Green function on a subset") {
  // Keep {1} of the path 0-1-2: G = 1 / w(1) = 1 / (2 + 1).
  const MetricGraph g = build_path(3, 1.0, 1.0);
  const GreenTable t = green_table(g, VertexSet{1});
  CHECK(t(1, 1) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(t(0, 1), InvalidArgument);
}

TEST_CASE("recurrent component is rejected") {
  const MetricGraph g = build_path(4, 1.0, 0.0);
  CHECK_THROWS_AS(green_table(g, std::nullopt), NotTransientError);
  const MetricGraph h = restrict_with_killing(g, VertexSet{1, 2});
  CHECK_NOTHROW(green_table(h, std::nullopt));
}

TEST_CASE("iterative route agrees with the dense route") {
  const MetricGraph g = build_lattice_box(3, 2, 1.0, true);
  const VertexSet eval{g.root(), 0, 17, 60};
  GreenOptions dense;
  dense.evaluate_on = eval;
  GreenOptions iterative = dense;
  iterative.dense_limit = 10;
  const GreenTable a = green_table(g, dense);
  const GreenTable b = green_table(g, iterative);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-9);
  GreenOptions too_many;
  too_many.dense_limit = 10;
  CHECK_THROWS_AS(green_table(g, too_many), BudgetError);
}

TEST_CASE("Green function is invariant under subdivision") {
  std::mt19937_64 gen(2024);
  for (int t = 0; t < 5; ++t) {
    const MetricGraph g = random_graph(gen, 3 + 2 * t);
    const GreenTable base = green_table(g, std::nullopt);
    for (int m : {2, 4, 8}) {
      GreenOptions o;
      o.evaluate_on = all_vertices(g.vertex_count());
      const GreenTable fine = green_table(subdivide(g, m), o);
      CHECK((fine.values - base.values).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("two-vertex capacities") {
  const GreenTable g = green_table(build_two_vertex(), std::nullopt);
  CHECK(capacity(g, VertexSet{0}).capacity == doctest::Approx(1.5).epsilon(1e-12));
  const CapacityResult both = capacity(g, VertexSet{0, 1});
  CHECK(both.capacity == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(both.equilibrium_measure[0] == doctest::Approx(1.0));
  CHECK(both.energy == doctest::Approx(0.5));
  CHECK(both.negative_weights.empty());
}

TEST_CASE("capacity equals the inverse minimal energy over probability measures") {
  const MetricGraph g = build_path(5, 1.0, 0.4);
  const GreenTable t = green_table(g, std::nullopt);
  const VertexSet a{0, 2, 3};
  double best = 1e300;
  const int steps = 400;
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; i + j <= steps; ++j) {
      const double mu[3] = {double(i) / steps, double(j) / steps, double(steps - i - j) / steps};
      double e = 0.0;
      for (int p = 0; p < 3; ++p) {
        for (int q = 0; q < 3; ++q) e += mu[p] * mu[q] * t(a[p], a[q]);
      }
      best = std::min(best, e);
    }
  }
  CHECK(capacity(t, a).capacity == doctest::Approx(1.0 / best).epsilon(1e-4));
}

TEST_CASE("capacity grows along nested connected sets") {
  const MetricGraph g = build_lattice_box(3, 3, 1.0, true);
  std::vector<VertexSet> nested;
  std::vector<VertexId> ids;
  for (int x = -3; x <= 3; ++x) {
    const std::vector<int> c{x, 0, 0};
    ids.push_back(g.vertex_at(c).value());
    nested.emplace_back(ids);
  }
  GreenOptions o;
  o.evaluate_on = nested.back();
  const GreenTable t = green_table(g, o);
  const auto rows = cap_growth_diagnostic(g, t, nested);
  REQUIRE(rows.size() == nested.size());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].capacity > rows[i - 1].capacity);
    CHECK_FALSE(rows[i].decreasing);
  }
  std::vector<VertexSet> broken{VertexSet{ids[0]}, VertexSet{ids[0], ids[2]}};
  CHECK_THROWS_AS(cap_growth_diagnostic(g, t, broken), InvalidArgument);
}

TEST_CASE("arcsin formula guards") {
  CHECK(two_point_from_green(0.0, 1.0, 1.0) == 0.0);
  CHECK(two_point_from_green(1.0 + 1e-13, 1.0, 1.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(two_point_from_green(1.1, 1.0, 1.0), NumericError);
}

TEST_CASE("Green CSV dump") {
  std::ostringstream out;
  write_green_csv(green_table(build_two_vertex(), std::nullopt), out);
  const std::string s = out.str();
  CHECK(s.rfind("x,y,value\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 4);
}
