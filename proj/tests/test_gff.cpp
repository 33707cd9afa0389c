#include <cmath>
#include <deque>
#include <random>
#include <sstream>

#include "doctest.h"
#include "loopperc/gff.hpp"
#include "loopperc/montecarlo.hpp"
#include "loopperc/potential.hpp"

using namespace loopperc;

namespace {

// Component labels by BFS over open edges and the two edges of each open 2-bond.
std::vector<int> bfs_components(const MetricGraph& g, const std::vector<std::uint8_t>& open,
                                const std::vector<TwoBond>& bonds, const std::vector<std::uint32_t>& open_bonds) {
  const std::size_t n = g.vertex_count();
  std::vector<std::vector<VertexId>> adj(n);
  auto link = [&](VertexId a, VertexId b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  };
  for (EdgeId e = 0; e < g.edge_count(); ++e) {
    if (open[e]) link(g.edge(e).u, g.edge(e).v);
  }
  for (std::uint32_t b : open_bonds) {
    link(g.edge(bonds[b].e).u, g.edge(bonds[b].e).v);
    link(g.edge(bonds[b].f).u, g.edge(bonds[b].f).v);
  }
  std::vector<int> comp(n, -1);
  int next = 0;
  for (VertexId s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::deque<VertexId> q{s};
    comp[s] = next;
    while (!q.empty()) {
      const VertexId x = q.front();
      q.pop_front();
      for (VertexId y : adj[x]) {
        if (comp[y] < 0) {
          comp[y] = next;
          q.push_back(y);
        }
      }
    }
    ++next;
  }
  return comp;
}

}  // namespace

TEST_CASE("field covariance matches the Green function") {
  const MetricGraph g = build_path(3, 1.0, 0.5);
  const GffSampler sampler(g);
  const GreenTable green = green_table(g, std::nullopt);
  RunOptions o;
  o.replicas = 200000;
  o.master_seed = 1;
  auto fn = [&](std::uint64_t, Rng& rng, std::span<double> out) {
    double phi[3];
    sampler.sample_into(rng, phi);
    out[0] = phi[0] * phi[0];
    out[1] = phi[0] * phi[2];
    out[2] = phi[1] * phi[1];
  };
  const Moments m = run_replicas(3, o, fn);
  CHECK(std::abs(m.mean(0) - green(0, 0)) < 4 * m.standard_error(0));
  CHECK(std::abs(m.mean(1) - green(0, 2)) < 4 * m.standard_error(1));
  CHECK(std::abs(m.mean(2) - green(1, 1)) < 4 * m.standard_error(2));
}

TEST_CASE("cable crossing probability") {
  CHECK(lupu_open_probability(1.0, 1.0, -1.0) == 0.0);
  CHECK(lupu_open_probability(1.0, 0.0, 2.0) == 0.0);
  CHECK(lupu_open_probability(2.0, 0.5, 0.5) == doctest::Approx(1.0 - std::exp(-1.0)));
  CHECK(lupu_open_probability(1.0, -1.0, -2.0) == doctest::Approx(1.0 - std::exp(-4.0)));
}

TEST_CASE("two-vertex connection probability is one third") {
  const MetricGraph g = build_two_vertex();
  const GffSampler sampler(g);
  RunOptions o;
  o.replicas = 200000;
  o.master_seed = 2;
  const EstimateReport r =
      run_bernoulli(o, [&](std::uint64_t, Rng& rng) { return clusters_at_half(g, sampler, rng).connected(0, 1); });
  CHECK(std::abs(r.estimate - 1.0 / 3.0) < 4 * r.standard_error);
}

TEST_CASE("killed two-point function on a random graph") {
  std::mt19937_64 gen(5);
  std::vector<Edge> edges{{0, 1, 1.3}, {1, 2, 0.7}, {2, 3, 2.0}, {0, 3, 0.4}, {1, 3, 1.1}, {3, 4, 0.9}};
  const MetricGraph g(5, edges, {0.3, 0.0, 0.5, 0.0, 0.8});
  const GffSampler sampler(g);
  const GreenTable green = green_table(g, std::nullopt);
  RunOptions o;
  o.replicas = 100000;
  o.master_seed = 9;
  auto fn = [&](std::uint64_t, Rng& rng, std::span<double> out) {
    const TraceClusters c = clusters_at_half(g, sampler, rng);
    out[0] = c.connected(0, 2);
    out[1] = c.connected(1, 4);
  };
  const Moments m = run_replicas(2, o, fn);
  CHECK(std::abs(m.mean(0) - two_point_exact(green, 0, 2)) < 4 * m.standard_error(0));
  CHECK(std::abs(m.mean(1) - two_point_exact(green, 1, 4)) < 4 * m.standard_error(1));
}

TEST_CASE("cluster labels match BFS") {
  std::mt19937_64 gen(17);
  const MetricGraph g = build_lattice_box(2, 3, 1.0, true);
  const auto bonds = enumerate_two_bonds(g);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::uint8_t> open(g.edge_count());
    for (auto& o : open) o = gen() % 4 == 0;
    std::vector<std::uint32_t> ob;
    for (std::uint32_t b = 0; b < bonds.size(); ++b) {
      if (gen() % 40 == 0) ob.push_back(b);
    }
    const TraceClusters c = label_clusters(g, open, bonds, ob);
    const auto comp = bfs_components(g, open, bonds, ob);
    for (VertexId x = 0; x < g.vertex_count(); ++x) {
      for (VertexId y = 0; y < g.vertex_count(); ++y) {
        CHECK((c.labels[x] == c.labels[y]) == (comp[x] == comp[y]));
      }
    }
  }
}

TEST_CASE("labels are numbered by smallest member") {
  const MetricGraph g = build_path(4);
  const TraceClusters c = label_clusters(g, {0, 0, 1}, {}, {});
  CHECK(c.labels == std::vector<std::uint32_t>{0, 1, 2, 2});
  CHECK(c.cluster_count == 3);
}

TEST_CASE("open-edge bitmap round trip") {
  std::vector<std::vector<std::uint8_t>> reps{{1, 0, 1, 1, 0, 0, 0, 1, 1, 0, 1}, {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1}};
  std::stringstream buf;
  write_open_edge_bitmaps(buf, 11, reps);
  CHECK(buf.str().size() == 4 + 4 + 8 + 8 + 2 * 2);
  CHECK(read_open_edge_bitmaps(buf) == reps);
  std::stringstream bad("XXXX");
  CHECK_THROWS(read_open_edge_bitmaps(bad));
}
