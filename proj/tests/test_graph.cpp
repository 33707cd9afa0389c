#include <algorithm>
#include <deque>
#include <random>

#include "doctest.h"
#include "loopperc/error.hpp"
#include "loopperc/graph.hpp"

using namespace loopperc;

namespace {

// Plain BFS from one source over an explicit adjacency matrix.
std::vector<std::uint32_t> brute_distances(const MetricGraph& g, VertexId s) {
  const std::size_t n = g.vertex_count();
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  for (const Edge& e : g.edges()) adj[e.u][e.v] = adj[e.v][e.u] = 1;
  std::vector<std::uint32_t> d(n, kUnreachable);
  std::deque<VertexId> q{s};
  d[s] = 0;
  while (!q.empty()) {
    const VertexId x = q.front();
    q.pop_front();
    for (VertexId y = 0; y < n; ++y) {
      if (adj[x][y] && d[y] == kUnreachable) {
        d[y] = d[x] + 1;
        q.push_back(y);
      }
    }
  }
  return d;
}

MetricGraph random_graph(std::mt19937_64& gen, std::size_t n, double p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Edge> edges;
  for (VertexId x = 0; x < n; ++x) {
    for (VertexId y = x + 1; y < n; ++y) {
      if (u(gen) < p) edges.push_back({x, y, 0.5 + u(gen)});
    }
  }
  std::vector<double> kill(n);
  for (auto& k : kill) k = 0.1 + u(gen);
  return MetricGraph(n, std::move(edges), std::move(kill));
}

}  // namespace

TEST_CASE("two-vertex graph") {
  const MetricGraph g = build_two_vertex();
  CHECK(g.vertex_count() == 2);
  CHECK(g.edge_count() == 1);
  CHECK(g.total_rate(0) == doctest::Approx(2.0));
  CHECK(g.edge_length(0) == doctest::Approx(0.5));
  CHECK(g.find_edge(1, 0).value() == 0);
  CHECK_FALSE(g.find_edge(0, 0).has_value());
}

TEST_CASE("constructor rejects malformed graphs") {
  CHECK_THROWS_AS(MetricGraph(2, {{0, 0, 1.0}}, {1.0, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(MetricGraph(2, {{0, 1, 1.0}, {1, 0, 1.0}}, {1.0, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(MetricGraph(2, {{0, 1, -1.0}}, {1.0, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(MetricGraph(2, {{0, 1, 1.0}}, {-1.0, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(MetricGraph(2, {{0, 2, 1.0}}, {1.0, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(MetricGraph(2, {}, {0.0, 1.0}), InvalidArgument);
}

TEST_CASE("lattice box sizes, killing and root") {
  for (int d = 1; d <= 3; ++d) {
    for (int r = 1; r <= 3; ++r) {
      const MetricGraph g = build_lattice_box(d, r, 1.0, true);
      const std::size_t side = 2 * r + 1;
      std::size_t vertices = 1;
      for (int i = 0; i < d; ++i) vertices *= side;
      CHECK(g.vertex_count() == vertices);
      CHECK(g.edge_count() == static_cast<std::size_t>(d) * vertices / side * (side - 1));
      for (VertexId x = 0; x < g.vertex_count(); ++x) {
        CHECK(g.total_rate(x) == doctest::Approx(2.0 * d));
        CHECK(g.degree(x) + g.killing(x) == doctest::Approx(2.0 * d));
      }
      const auto c = g.coordinates(g.root());
      CHECK(std::all_of(c.begin(), c.end(), [](int v) { return v == 0; }));
    }
  }
  const MetricGraph free_box = build_lattice_box(2, 2, 1.0, false, 0.25);
  CHECK(free_box.killing(free_box.root()) == doctest::Approx(0.25));
  const std::vector<int> corner{-2, -2};
  CHECK(free_box.killing(free_box.vertex_at(corner).value()) == doctest::Approx(0.25));
}

TEST_CASE("regular tree") {
  const MetricGraph g = build_regular_tree(3, 3, 1.0, true);
  CHECK(g.vertex_count() == 1 + 3 + 6 + 12);
  CHECK(g.edge_count() == g.vertex_count() - 1);
  CHECK(g.killing(21) == doctest::Approx(2.0));
  CHECK(g.killing(0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(build_regular_tree(2, 3, 1.0, true), InvalidArgument);
}

TEST_CASE("subdivision layout") {
  const MetricGraph g = build_path(3, 2.0, 0.5);
  const MetricGraph s = subdivide(g, 4);
  CHECK(s.vertex_count() == 3 + 2 * 3);
  CHECK(s.edge_count() == 8);
  for (const Edge& e : s.edges()) CHECK(e.weight == doctest::Approx(8.0));
  CHECK(s.killing(3) == 0.0);
  CHECK(s.killing(0) == doctest::Approx(0.5));
  // Original edge 0 = (0,1) becomes 0 - 3 - 4 - 5 - 1.
  CHECK(s.find_edge(0, 3).has_value());
  CHECK(s.find_edge(5, 1).has_value());
  double length = 0.0;
  for (EdgeId e = 0; e < 4; ++e) length += s.edge_length(e);
  CHECK(length == doctest::Approx(g.edge_length(0)));
  CHECK(subdivide(g, 1).edge_count() == g.edge_count());
  CHECK_THROWS_AS(subdivide(g, 0), InvalidArgument);
}

TEST_CASE("bfs distances match brute force") {
  std::mt19937_64 gen(42);
  for (int trial = 0; trial < 20; ++trial) {
    const MetricGraph g = random_graph(gen, 5 + trial, 0.2);
    for (VertexId s = 0; s < g.vertex_count(); ++s) {
      const VertexId src[] = {s};
      CHECK(bfs_distances(g, src) == brute_distances(g, s));
    }
  }
}

TEST_CASE("balls and spheres on the lattice") {
  const MetricGraph g = build_lattice_box(2, 3, 1.0, true);
  const VertexId o = g.root();
  CHECK(ball(g, o, 0) == VertexSet{o});
  CHECK(sphere(g, o, 1).size() == 4);
  CHECK(sphere(g, o, 2).size() == 8);
  CHECK(ball(g, o, 2).size() == 13);
  CHECK(sphere(g, o, 7).empty());
}

TEST_CASE("two-bond enumeration") {
  const MetricGraph g = build_lattice_box(2, 2, 1.0, true);
  const auto bonds = enumerate_two_bonds(g);
  std::size_t expected = 0;
  for (VertexId x = 0; x < g.vertex_count(); ++x) expected += g.degree(x) * (g.degree(x) - 1) / 2;
  CHECK(bonds.size() == expected);
  for (std::size_t i = 0; i < bonds.size(); ++i) {
    CHECK(bonds[i].e < bonds[i].f);
    const Edge& e = g.edge(bonds[i].e);
    const Edge& f = g.edge(bonds[i].f);
    CHECK((e.u == bonds[i].center || e.v == bonds[i].center));
    CHECK((f.u == bonds[i].center || f.v == bonds[i].center));
    if (i > 0) CHECK(bonds[i - 1].center <= bonds[i].center);
  }
  CHECK(enumerate_two_bonds(build_path(3)).size() == 1);
}

TEST_CASE("restriction converts outgoing edges into killing") {
  const MetricGraph g = build_path(4, 1.0, 0.0);
  const MetricGraph r = restrict_with_killing(g, VertexSet{1, 2});
  CHECK(r.vertex_count() == 2);
  CHECK(r.edge_count() == 1);
  CHECK(r.killing(0) == doctest::Approx(1.0));
  CHECK(r.killing(1) == doctest::Approx(1.0));
}

TEST_CASE("connected sets") {
  const MetricGraph g = build_path(5);
  CHECK(is_connected_set(g, VertexSet{1, 2, 3}));
  CHECK_FALSE(is_connected_set(g, VertexSet{1, 3}));
  CHECK_FALSE(is_connected_set(g, VertexSet{}));
}

TEST_CASE("json round trip") {
  const MetricGraph g = build_lattice_box(2, 1, 0.7, true, 0.1);
  const MetricGraph h = graph_from_json(graph_to_json(g));
  CHECK(h.vertex_count() == g.vertex_count());
  CHECK(h.edge_count() == g.edge_count());
  for (EdgeId e = 0; e < g.edge_count(); ++e) {
    CHECK(h.edge(e).u == g.edge(e).u);
    CHECK(h.edge(e).v == g.edge(e).v);
    CHECK(h.edge(e).weight == g.edge(e).weight);
  }
  CHECK(h.killing() == g.killing());
  CHECK(h.coordinate_dimension() == 2);
  CHECK(h.root() == g.root());
  auto bad = graph_to_json(g);
  bad["colour"] = "red";
  CHECK_THROWS_AS(graph_from_json(bad), InvalidArgument);
}

TEST_CASE("vertex sets") {
  const VertexSet a{3, 1, 3, 2};
  CHECK(a.size() == 3);
  CHECK(a[0] == 1);
  CHECK(a.index_of(3).value() == 2);
  CHECK_FALSE(a.index_of(7).has_value());
  CHECK(VertexSet{1, 2}.is_subset_of(a));
  CHECK_FALSE(VertexSet{1, 5}.is_subset_of(a));
}
