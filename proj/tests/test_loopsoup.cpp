#include <cmath>
#include <sstream>

#include "doctest.h"
#include "loopperc/error.hpp"
#include "loopperc/loopsoup.hpp"
#include "loopperc/potential.hpp"

using namespace loopperc;

namespace {

MetricGraph small_graph() {
  std::vector<Edge> edges{{0, 1, 1.3}, {1, 2, 0.7}, {2, 3, 2.0}, {0, 3, 0.4}, {1, 3, 1.1}, {3, 4, 0.9}};
  return MetricGraph(5, edges, {0.3, 0.0, 0.5, 0.0, 0.8});
}

}  // namespace

TEST_CASE("two-vertex levels") {
  const LoopSoupSampler s(build_two_vertex());
  REQUIRE(s.level_count() == 2);
  CHECK(s.order()[0] == 0);
  CHECK(s.return_probability(0) == doctest::Approx(0.25));
  CHECK(s.return_probability_check(0) == doctest::Approx(0.25));
  CHECK(s.return_probability(1) == doctest::Approx(0.0));
  CHECK(s.h(0, 1) == doctest::Approx(0.5));
  CHECK(s.h(0, 0) == 1.0);
  CHECK(s.h(1, 0) == 0.0);
  CHECK(s.loop_mass(0) == doctest::Approx(std::log(4.0 / 3.0)));
}

TEST_CASE("h vectors are hitting probabilities of the remaining graph") {
  const MetricGraph g = small_graph();
  const LoopSoupSampler s(g);
  for (std::size_t i = 0; i < s.level_count(); ++i) {
    CHECK(s.return_probability(i) == doctest::Approx(s.return_probability_check(i)).epsilon(1e-10));
    std::vector<VertexId> rest(s.order().begin() + static_cast<long>(i), s.order().end());
    const VertexSet kept(rest);
    const GreenTable t = green_table(g, kept);
    const VertexId base = s.order()[i];
    for (VertexId u : kept) {
      CHECK(s.h(i, u) == doctest::Approx(hitting_probability(t, u, base)).epsilon(1e-10));
    }
  }
}

TEST_CASE("logarithmic sampler") {
  const double r = 0.6;
  const double mass = -std::log1p(-r);
  Rng rng(3);
  const int n = 400000;
  double sum = 0.0;
  int ones = 0;
  for (int i = 0; i < n; ++i) {
    const auto k = sample_logarithmic(r, rng);
    sum += static_cast<double>(k);
    ones += k == 1;
  }
  const double mean = r / ((1.0 - r) * mass);
  CHECK(sum / n == doctest::Approx(mean).epsilon(0.01));
  const double p1 = r / mass;
  CHECK(std::abs(ones / double(n) - p1) < 4 * std::sqrt(p1 * (1 - p1) / n));
  CHECK(sample_logarithmic(0.0, rng) == 1);
}

TEST_CASE("loop count and structure on the two-vertex graph") {
  const LoopSoupSampler s(build_two_vertex());
  Rng rng(5);
  const int n = 200000;
  double loops = 0.0;
  for (int i = 0; i < n; ++i) {
    const LoopSoupSample x = s.sample(0.5, rng);
    loops += static_cast<double>(x.loops.size());
    for (const Loop& l : x.loops) {
      REQUIRE(l.path.front() == 0);
      REQUIRE(l.path.back() == 0);
      REQUIRE(l.edges.size() + 1 == l.path.size());
      REQUIRE(l.holds.size() == l.edges.size());
    }
  }
  const double expected = 0.5 * std::log(4.0 / 3.0);
  CHECK(expected == doctest::Approx(0.143841).epsilon(1e-5));
  CHECK(std::abs(loops / n - expected) < 4 * std::sqrt(expected / n));
}

TEST_CASE("occupation field law") {
  const MetricGraph g = small_graph();
  const LoopSoupSampler s(g);
  const GreenTable t = green_table(g, std::nullopt);
  Rng rng(8);
  for (double alpha : {0.5, 1.0}) {
    std::vector<double> at0, at3;
    for (int i = 0; i < 20000; ++i) {
      const LoopSoupSample x = s.sample(alpha, rng);
      at0.push_back(x.occupation[0]);
      at3.push_back(x.occupation[3]);
    }
    CHECK(occupation_marginal_test(at0, alpha, t(0, 0)).p_value > 0.001);
    CHECK(occupation_marginal_test(at3, alpha, t(3, 3)).p_value > 0.001);
    CHECK(occupation_marginal_test(at3, alpha, 1.3 * t(3, 3)).p_value < 1e-4);
  }
  CHECK_THROWS_AS(occupation_marginal_test(std::vector<double>(10), 0.5, 1.0), InvalidArgument);
}

TEST_CASE("subdivision clusters at m = 1 equal edge traversal") {
  const SubdivisionClusterSampler s(build_two_vertex(), 1);
  Rng rng(4);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const TraceClusters c = s.sample(0.5, rng);
    CHECK(c.connected(0, 1) == (c.open_edges[0] == 1));
    hits += c.connected(0, 1);
  }
  const double p = 1.0 - std::sqrt(0.75);
  CHECK(std::abs(hits / double(n) - p) < 4 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("subdivision connectivity matches inclusion-exclusion over untraversed edges") {
  // P[all m pieces traversed] = sum_S (-1)^|S| (det M / det M_S)^(1/2), summed by a
  // transfer recursion over the cut positions.
  const std::pair<int, double> exact[] = {{2, 0.16313670681653053}, {4, 0.19535180116405915}, {8, 0.22590044312131513}};
  for (auto [m, p] : exact) {
    const SubdivisionClusterSampler s(build_two_vertex(), m);
    Rng rng(40 + m);
    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i) hits += s.sample(0.5, rng).connected(0, 1);
    CHECK(std::abs(hits / double(n) - p) < 4 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("subdivided clusters report original vertices") {
  const MetricGraph g = build_path(3);
  const SubdivisionClusterSampler s(g, 4);
  Rng rng(1);
  const TraceClusters c = s.sample(1.0, rng);
  CHECK(c.labels.size() == 3);
  CHECK(c.open_edges.size() == 2);
  CHECK(s.soup().graph().vertex_count() == 3 + 2 * 3);
}

TEST_CASE("star cover estimate on the two-vertex graph") {
  RunOptions o;
  o.replicas = 1000;
  o.master_seed = 1;
  const StarCoverEstimate e = estimate_star_cover(build_two_vertex(), 0, 0.5, o);
  CHECK(e.cover_fraction == 1.0);
  CHECK(e.probability == doctest::Approx(1.0 - std::sqrt(0.75)).epsilon(1e-12));
  CHECK(e.probability == doctest::Approx(0.1340).epsilon(1e-3));
  CHECK(e.c_hat == doctest::Approx(1.0 / e.probability));
}

TEST_CASE("star cover estimate on the 3-vertex path") {
  // Excursions from the middle vertex go left or right with probability 1/2 and
  // r = 1/3, so a loop covers iff not all of its K excursions go the same way:
  // P = 1 - 2 E[2^-K] = 1 - 2 log(5/6) / log(2/3).
  RunOptions o;
  o.replicas = 200000;
  o.master_seed = 2;
  const StarCoverEstimate e = estimate_star_cover(build_path(3), 1, 0.5, o);
  CHECK(e.loop_mass == doctest::Approx(std::log(1.5)));
  CHECK(std::abs(e.cover_fraction - 0.10067942642641692) < 4 * e.cover_fraction_se);
  CHECK(std::abs(e.probability - 0.02020410288672875) < 4 * e.standard_error);
  CHECK(e.covered == e.loops);
}

TEST_CASE("star cover needs every edge within distance one") {
  const MetricGraph g = build_path(4);
  Loop l;
  l.base = 1;
  l.path = {1, 2, 1, 0, 1};
  l.edges = {1, 1, 0, 0};
  CHECK_FALSE(loop_covers_star(g, l, 1));
  l.path = {1, 2, 3, 2, 1, 0, 1};
  l.edges = {1, 2, 2, 1, 0, 0};
  CHECK(loop_covers_star(g, l, 1));
}

TEST_CASE("storage budget") {
  CHECK_THROWS_AS(LoopSoupSampler(build_lattice_box(2, 5, 1.0, true), {}, std::numeric_limits<std::size_t>::max(), 100),
                  BudgetError);
}

TEST_CASE("dumps") {
  const LoopSoupSampler s(build_two_vertex());
  Rng rng(2);
  LoopSoupSample x;
  while (x.loops.empty()) x = s.sample(2.0, rng);
  std::ostringstream loops, occ;
  write_loops_jsonl(x, loops);
  write_occupation_csv(x, occ);
  const auto first = nlohmann::json::parse(loops.str().substr(0, loops.str().find('\n')));
  CHECK(first["base"] == 0);
  CHECK(occ.str().rfind("vertex,l\n", 0) == 0);
}
