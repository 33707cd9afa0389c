#include "loopperc/noise.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "loopperc/error.hpp"

namespace loopperc {

TwoBondIndex::TwoBondIndex(const MetricGraph& g) : bonds_(enumerate_two_bonds(g)) {
  ends_.reserve(bonds_.size());
  for (const TwoBond& b : bonds_) {
    ends_.push_back({g.other_end(b.e, b.center), b.center, g.other_end(b.f, b.center)});
  }
}

NoiseField draw_noise_field(Rng& rng) { return {rng()}; }

TwoBondConfig noise_at(const TwoBondIndex& index, const NoiseField& field, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidArgument("2-bond parameter epsilon must lie in [0, 1]");
  TwoBondConfig cfg;
  cfg.epsilon = epsilon;
  for (std::uint32_t b = 0; b < index.size(); ++b) {
    if (field.uniform(b) < epsilon) cfg.open.push_back(b);
  }
  return cfg;
}

TwoBondConfig sample_noise(const TwoBondIndex& index, double epsilon, Rng& rng) {
  return noise_at(index, draw_noise_field(rng), epsilon);
}

// ---- TraceState ------------------------------------------------------------------

TraceState::TraceState(const MetricGraph& g, const std::vector<std::uint8_t>& open_edges)
    : uf_(g.vertex_count()), covered_(open_edges) {
  if (open_edges.size() != g.edge_count()) throw InvalidArgument("TraceState: open-edge vector size mismatch");
  for (EdgeId e = 0; e < open_edges.size(); ++e) {
    if (open_edges[e]) uf_.unite(g.edge(e).u, g.edge(e).v);
  }
}

namespace {

TraceState state_from_clusters(const MetricGraph& g, const TraceClusters& clusters) {
  if (clusters.labels.size() != g.vertex_count() || clusters.open_edges.size() != g.edge_count()) {
    throw InvalidArgument("trace clusters do not match the graph");
  }
  TraceState st(g, clusters.open_edges);
  std::vector<std::uint32_t> first(clusters.cluster_count, 0xffffffffu);
  for (VertexId x = 0; x < g.vertex_count(); ++x) {
    const std::uint32_t l = clusters.labels[x];
    if (l >= first.size()) first.resize(l + 1, 0xffffffffu);
    if (first[l] == 0xffffffffu) {
      first[l] = x;
    } else {
      st.clusters().unite(first[l], x);
    }
  }
  return st;
}

}  // namespace

void TraceState::open_bond(const MetricGraph& g, const TwoBondIndex& index, std::uint32_t b) {
  const auto& [x, y, z] = index.ends(b);
  uf_.unite(x, y);
  uf_.unite(y, z);
  covered_[index.bond(b).e] = 1;
  covered_[index.bond(b).f] = 1;
  (void)g;
}

bool TraceState::connected(VertexId x, const VertexSet& target) {
  const std::uint32_t r = uf_.find(x);
  return std::any_of(target.begin(), target.end(), [&](VertexId t) { return uf_.find(t) == r; });
}

bool TraceState::occurs(const IncreasingEvent& event) {
  if (const auto* c = std::get_if<ConnectEvent>(&event)) {
    for (VertexId x : c->from) {
      if (connected(x, c->to)) return true;
    }
    return false;
  }
  const auto& cover = std::get<CoverEvent>(event);
  return std::all_of(cover.edges.begin(), cover.edges.end(), [&](EdgeId e) { return covered_[e] != 0; });
}

std::string describe(const IncreasingEvent& event) {
  std::ostringstream s;
  auto set = [&](const VertexSet& v) {
    s << '{';
    for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
    s << '}';
  };
  if (const auto* c = std::get_if<ConnectEvent>(&event)) {
    set(c->from);
    s << "<->";
    set(c->to);
  } else {
    s << "cover[";
    const auto& edges = std::get<CoverEvent>(event).edges;
    for (std::size_t i = 0; i < edges.size(); ++i) s << (i ? "," : "") << edges[i];
    s << ']';
  }
  return s.str();
}

std::size_t count_pivotal(TraceState& state, const TwoBondIndex& index, const std::vector<std::uint8_t>& open,
                          VertexId x0, const VertexSet& target, std::vector<char>& scratch) {
  if (state.connected(x0, target)) return 0;
  UnionFind& uf = state.clusters();
  scratch.assign(uf.size(), 0);
  for (VertexId t : target) scratch[uf.find(t)] = 1;
  const std::uint32_t r0 = uf.find(x0);
  std::size_t count = 0;
  for (std::uint32_t b = 0; b < index.size(); ++b) {
    if (open[b]) continue;
    const auto& [x, y, z] = index.ends(b);
    const std::uint32_t rx = uf.find(x), ry = uf.find(y), rz = uf.find(z);
    const bool has_root = rx == r0 || ry == r0 || rz == r0;
    const bool has_target = scratch[rx] || scratch[ry] || scratch[rz];
    if (has_root && has_target) ++count;
  }
  return count;
}

NoisedSample superpose(const MetricGraph& g, const TwoBondIndex& index, TraceClusters loop_part,
                       TwoBondConfig noise) {
  TraceState st = state_from_clusters(g, loop_part);
  for (std::uint32_t b : noise.open) {
    if (b >= index.size()) throw InvalidArgument("superpose: 2-bond id out of range");
    st.open_bond(g, index, b);
  }
  NoisedSample out;
  out.merged.labels = canonical_labels(st.clusters(), g.vertex_count(), &out.merged.cluster_count);
  out.merged.open_edges = loop_part.open_edges;
  out.merged.open_two_bonds = noise.open;
  out.loop_part = std::move(loop_part);
  out.noise = std::move(noise);
  return out;
}

namespace {

// A holds without bond `skip` (all other open bonds kept).
bool holds_without(const MetricGraph& g, const TwoBondIndex& index, const TraceClusters& loop_part,
                   const std::vector<std::uint32_t>& open, std::uint32_t skip, VertexId x0, const VertexSet& target) {
  TraceState st = state_from_clusters(g, loop_part);
  for (std::uint32_t b : open) {
    if (b != skip) st.open_bond(g, index, b);
  }
  return st.connected(x0, target);
}

}  // namespace

std::vector<std::uint32_t> pivotal_two_bonds(const MetricGraph& g, const TwoBondIndex& index,
                                             const NoisedSample& sample, VertexId x0, const VertexSet& target,
                                             PivotalMode mode) {
  g.require_vertex(x0);
  for (VertexId t : target) g.require_vertex(t);
  TraceState st = state_from_clusters(g, sample.loop_part);
  std::vector<std::uint8_t> open(index.size(), 0);
  for (std::uint32_t b : sample.noise.open) {
    open[b] = 1;
    st.open_bond(g, index, b);
  }
  std::vector<std::uint32_t> out;
  if (st.connected(x0, target)) {
    if (mode == PivotalMode::Alternative) {
      for (std::uint32_t b : sample.noise.open) {
        if (!holds_without(g, index, sample.loop_part, sample.noise.open, b, x0, target)) out.push_back(b);
      }
    }
    return out;
  }
  UnionFind& uf = st.clusters();
  std::vector<char> is_target(uf.size(), 0);
  for (VertexId t : target) is_target[uf.find(t)] = 1;
  const std::uint32_t r0 = uf.find(x0);
  for (std::uint32_t b = 0; b < index.size(); ++b) {
    if (open[b]) continue;
    const auto& [x, y, z] = index.ends(b);
    const std::uint32_t rx = uf.find(x), ry = uf.find(y), rz = uf.find(z);
    if ((rx == r0 || ry == r0 || rz == r0) && (is_target[rx] || is_target[ry] || is_target[rz])) out.push_back(b);
  }
  return out;
}

// ---- Russo ---------------------------------------------------------------------------

namespace {

// Samples the exact intensity-1/2 loop part and the 2-bond uniforms.
struct NoisedReplicaBase {
  const MetricGraph* g;
  const GffSampler* gff;
  const TwoBondIndex* index;
  std::vector<double> phi;
  std::vector<double> uniforms;

  TraceState draw(Rng& rng, std::vector<std::uint8_t>* open_edges_out = nullptr) {
    phi.resize(g->vertex_count());
    gff->sample_into(rng, phi);
    const auto open_edges = lupu_open_edges(*g, phi, rng);
    const NoiseField field = draw_noise_field(rng);
    uniforms.resize(index->size());
    for (std::uint32_t b = 0; b < index->size(); ++b) uniforms[b] = field.uniform(b);
    if (open_edges_out) *open_edges_out = open_edges;
    return TraceState(*g, open_edges);
  }
};

}  // namespace

RussoReport russo_check(const MetricGraph& g, VertexId x0, const VertexSet& target, double epsilon, double delta,
                        const RunOptions& options, PivotalMode mode) {
  if (!(epsilon >= 0.0 && epsilon < 0.5)) throw InvalidArgument("russo_check: epsilon must lie in [0, 1/2)");
  if (!(delta > 0.0 && delta < 0.5 - epsilon)) throw InvalidArgument("russo_check: delta must lie in (0, 1/2 - epsilon)");
  g.require_vertex(x0);
  if (target.empty()) throw InvalidArgument("russo_check: empty target");
  for (VertexId t : target) g.require_vertex(t);

  const GffSampler gff(g);
  const TwoBondIndex index(g);
  struct Replica : NoisedReplicaBase {
    VertexId x0;
    const VertexSet* target;
    double eps, delta;
    PivotalMode mode;
    std::vector<std::uint8_t> open;
    std::vector<std::uint8_t> open_edges;
    std::vector<char> scratch;

    void operator()(std::uint64_t, Rng& rng, std::span<double> out) {
      TraceState st = draw(rng, &open_edges);
      open.assign(index->size(), 0);
      std::vector<std::uint32_t> open_list;
      for (std::uint32_t b = 0; b < index->size(); ++b) {
        if (uniforms[b] < eps) {
          open[b] = 1;
          open_list.push_back(b);
          st.open_bond(*g, *index, b);
        }
      }
      const bool a0 = st.connected(x0, *target);
      double pivotal = 0.0;
      if (!a0) {
        pivotal = static_cast<double>(count_pivotal(st, *index, open, x0, *target, scratch));
      } else if (mode == PivotalMode::Alternative) {
        for (std::uint32_t skip : open_list) {
          TraceState without(*g, open_edges);
          for (std::uint32_t b : open_list) {
            if (b != skip) without.open_bond(*g, *index, b);
          }
          if (!without.connected(x0, *target)) pivotal += 1.0;
        }
      }
      for (std::uint32_t b = 0; b < index->size(); ++b) {
        if (uniforms[b] >= eps && uniforms[b] < eps + delta) st.open_bond(*g, *index, b);
      }
      const bool a1 = st.connected(x0, *target);
      out[0] = a0;
      out[1] = a1;
      out[2] = static_cast<double>(a1) - static_cast<double>(a0);
      out[3] = pivotal;
    }
  };
  Replica replica;
  replica.g = &g;
  replica.gff = &gff;
  replica.index = &index;
  replica.x0 = x0;
  replica.target = &target;
  replica.eps = epsilon;
  replica.delta = delta;
  replica.mode = mode;

  RunOptions opt = options;
  opt.tag = options.tag + "/russo";
  const Moments m = run_replicas(4, opt, replica);

  RussoReport r;
  r.epsilon = epsilon;
  r.delta = delta;
  r.mode = mode;
  r.replicas = m.count();
  r.seed = options.master_seed;
  const double factor = mode == PivotalMode::UpperSemi ? delta / (1.0 - epsilon) : delta;
  r.p_epsilon = m.mean(0);
  r.p_epsilon_delta = m.mean(1);
  r.mean_pivotal = m.mean(3);
  r.lhs = m.mean(2);
  r.rhs = factor * r.mean_pivotal;
  r.se_lhs = m.standard_error(2);
  r.se_rhs = factor * m.standard_error(3);
  r.se_difference = m.standard_error_of_difference(2, 3, factor);
  r.ci_lhs = {r.lhs - kZ95 * r.se_lhs, r.lhs + kZ95 * r.se_lhs};
  r.ci_rhs = {r.rhs - kZ95 * r.se_rhs, r.rhs + kZ95 * r.se_rhs};
  r.allowance = 4.0 * r.se_difference + 5.0 * delta * delta;
  r.consistent = std::abs(r.lhs - r.rhs) <= r.allowance;
  return r;
}

nlohmann::json to_json(const RussoReport& r) {
  return {{"lhs", r.lhs},
          {"rhs", r.rhs},
          {"ci_lhs", {r.ci_lhs.lo, r.ci_lhs.hi}},
          {"ci_rhs", {r.ci_rhs.lo, r.ci_rhs.hi}},
          {"se_lhs", r.se_lhs},
          {"se_rhs", r.se_rhs},
          {"se_difference", r.se_difference},
          {"discrepancy", r.lhs - r.rhs},
          {"allowance", r.allowance},
          {"consistent", r.consistent},
          {"replicas", r.replicas},
          {"seed", r.seed},
          {"params",
           {{"epsilon", r.epsilon},
            {"delta", r.delta},
            {"p_epsilon", r.p_epsilon},
            {"p_epsilon_delta", r.p_epsilon_delta},
            {"mean_pivotal", r.mean_pivotal},
            {"pivotal_mode", r.mode == PivotalMode::UpperSemi ? "upper_semi" : "alternative"}}}};
}

// ---- FKG ---------------------------------------------------------------------------------

FkgReport fkg_check(const MetricGraph& g, const std::vector<EventPair>& pairs, double epsilon,
                    const RunOptions& options) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw InvalidArgument("fkg_check: epsilon must lie in [0, 1)");
  if (pairs.empty()) throw InvalidArgument("fkg_check: no event pairs");
  auto check_event = [&](const IncreasingEvent& ev) {
    if (const auto* c = std::get_if<ConnectEvent>(&ev)) {
      if (c->from.empty() || c->to.empty()) throw InvalidArgument("fkg_check: empty vertex set in event");
      for (VertexId x : c->from) g.require_vertex(x);
      for (VertexId x : c->to) g.require_vertex(x);
    } else {
      for (EdgeId e : std::get<CoverEvent>(ev).edges) {
        if (e >= g.edge_count()) throw InvalidArgument("fkg_check: edge id out of range");
      }
    }
  };
  for (const auto& [a, b] : pairs) {
    check_event(a);
    check_event(b);
  }

  const GffSampler gff(g);
  const TwoBondIndex index(g);
  struct Replica : NoisedReplicaBase {
    const std::vector<EventPair>* pairs;
    double eps;
    void operator()(std::uint64_t, Rng& rng, std::span<double> out) {
      TraceState st = draw(rng);
      for (std::uint32_t b = 0; b < index->size(); ++b) {
        if (uniforms[b] < eps) st.open_bond(*g, *index, b);
      }
      for (std::size_t p = 0; p < pairs->size(); ++p) {
        const bool a = st.occurs((*pairs)[p].first);
        const bool b = st.occurs((*pairs)[p].second);
        out[3 * p] = a;
        out[3 * p + 1] = b;
        out[3 * p + 2] = a && b;
      }
    }
  };
  Replica replica;
  replica.g = &g;
  replica.gff = &gff;
  replica.index = &index;
  replica.pairs = &pairs;
  replica.eps = epsilon;
  RunOptions opt = options;
  opt.tag = options.tag + "/fkg";
  const Moments m = run_replicas(3 * pairs.size(), opt, replica);

  FkgReport report;
  report.epsilon = epsilon;
  report.replicas = m.count();
  report.seed = options.master_seed;
  const double n = static_cast<double>(m.count());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    FkgRow row;
    row.event_a = describe(pairs[p].first);
    row.event_b = describe(pairs[p].second);
    row.p_a = m.mean(3 * p);
    row.p_b = m.mean(3 * p + 1);
    row.p_ab = m.mean(3 * p + 2);
    row.covariance = row.p_ab - row.p_a * row.p_b;
    // Delta method: influence (A - pA)(B - pB) - cov over the 2x2 table.
    const double n11 = m.sum(3 * p + 2);
    const double n10 = m.sum(3 * p) - n11;
    const double n01 = m.sum(3 * p + 1) - n11;
    const double n00 = n - n11 - n10 - n01;
    double var = 0.0;
    const double cells[4][3] = {{1, 1, n11}, {1, 0, n10}, {0, 1, n01}, {0, 0, n00}};
    for (const auto& c : cells) {
      const double psi = (c[0] - row.p_a) * (c[1] - row.p_b) - row.covariance;
      var += c[2] / n * psi * psi;
    }
    row.standard_error = std::sqrt(var / n);
    row.violation = row.covariance < -3.0 * row.standard_error;
    report.rows.push_back(row);
  }
  return report;
}

nlohmann::json to_json(const FkgReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const FkgRow& row : r.rows) {
    rows.push_back({{"event_a", row.event_a},
                    {"event_b", row.event_b},
                    {"p_a", row.p_a},
                    {"p_b", row.p_b},
                    {"p_ab", row.p_ab},
                    {"covariance", row.covariance},
                    {"se", row.standard_error},
                    {"violation", row.violation}});
  }
  return {{"rows", rows}, {"replicas", r.replicas}, {"seed", r.seed}, {"params", {{"epsilon", r.epsilon}}}};
}

std::vector<EventPair> default_fkg_battery(const MetricGraph& g, VertexId x0) {
  g.require_vertex(x0);
  const VertexSet s1 = sphere(g, x0, 1), s2 = sphere(g, x0, 2), s3 = sphere(g, x0, 3);
  if (s1.empty() || s2.size() < 2) throw InvalidArgument("default_fkg_battery: graph too small around x0");
  const VertexId d1 = s1[0];
  const VertexId d1b = s1[s1.size() - 1];
  const VertexId d2 = s2[0];
  const VertexId d2b = s2[s2.size() - 1];
  const VertexId far = s3.empty() ? d2b : s3[0];
  auto connect = [](VertexSet a, VertexSet b) -> IncreasingEvent { return ConnectEvent{std::move(a), std::move(b)}; };
  auto star = [&](VertexId x) -> IncreasingEvent {
    CoverEvent c;
    for (const Neighbor& nb : g.neighbors(x)) c.edges.push_back(nb.edge);
    return c;
  };
  std::vector<EventPair> pairs;
  pairs.emplace_back(connect({x0}, {d1}), connect({x0}, {d2}));
  pairs.emplace_back(connect({x0}, {d1}), connect({d1}, {d2}));
  pairs.emplace_back(connect({x0}, {d2}), connect({x0}, s2));
  pairs.emplace_back(connect({x0}, s1), connect({x0}, s2));
  pairs.emplace_back(connect({x0}, {d1}), star(x0));
  pairs.emplace_back(star(x0), star(d1));
  pairs.emplace_back(connect({d1}, {d2}), connect({x0}, {far}));
  pairs.emplace_back(connect({x0}, {d1}), connect({x0}, {d1}));
  pairs.emplace_back(connect({x0}, {d2}), connect({d2b}, s2));
  pairs.emplace_back(connect({x0}, s2), star(d1b));
  pairs.emplace_back(connect({x0}, {d1}), connect({x0}, {x0}));
  pairs.emplace_back(connect({d1}, {d1b}), connect({d2}, {d2b}));
  return pairs;
}

// ---- exploration -----------------------------------------------------------------------------

ExplorationReport explore_boundary(const MetricGraph& g, const TwoBondIndex& index, const NoisedSample& sample,
                                   VertexId x0, std::uint32_t n) {
  g.require_vertex(x0);
  const std::size_t nv = g.vertex_count();
  const auto& open_edges = sample.loop_part.open_edges;
  if (open_edges.size() != g.edge_count()) throw InvalidArgument("explore_boundary: sample does not match graph");

  ExplorationReport r;
  r.ball = ball(g, x0, n);
  r.sphere = sphere(g, x0, n);
  const auto in_ball = r.ball.mask(nv);

  // Connections among ball vertices only.
  UnionFind uf(nv);
  for (EdgeId e = 0; e < g.edge_count(); ++e) {
    const Edge& edge = g.edge(e);
    if (open_edges[e] && in_ball[edge.u] && in_ball[edge.v]) uf.unite(edge.u, edge.v);
  }
  for (std::uint32_t b : sample.noise.open) {
    const auto& ends = index.ends(b);
    VertexId first = 0;
    bool have = false;
    for (VertexId v : ends) {
      if (!in_ball[v]) continue;
      if (have) {
        uf.unite(first, v);
      } else {
        first = v;
        have = true;
      }
    }
  }
  std::vector<char> sphere_root(nv, 0);
  for (VertexId s : r.sphere) sphere_root[uf.find(s)] = 1;
  std::vector<VertexId> c_ids;
  for (VertexId x : r.ball) {
    if (sphere_root[uf.find(x)]) c_ids.push_back(x);
  }
  r.c_n = VertexSet(c_ids);
  const auto in_c = r.c_n.mask(nv);
  r.x0_in_c = in_c[x0] != 0;

  std::vector<VertexId> k_ids;
  if (!r.x0_in_c) {
    std::vector<char> seen(nv, 0);
    std::vector<VertexId> stack{x0};
    seen[x0] = 1;
    while (!stack.empty()) {
      const VertexId x = stack.back();
      stack.pop_back();
      k_ids.push_back(x);
      for (const Neighbor& nb : g.neighbors(x)) {
        if (in_ball[nb.vertex] && !in_c[nb.vertex] && !seen[nb.vertex]) {
          seen[nb.vertex] = 1;
          stack.push_back(nb.vertex);
        }
      }
    }
  }
  r.k_n = VertexSet(k_ids);
  const auto in_k = r.k_n.mask(nv);

  const auto dist = bfs_distances(g, c_ids);
  std::vector<VertexId> b1, b2;
  for (VertexId x : r.k_n) {
    if (dist[x] == 1) b1.push_back(x);
    if (dist[x] == 2) b2.push_back(x);
  }
  r.inner_boundary = VertexSet(b1);
  r.inner_boundary2 = VertexSet(b2);
  r.event_a = dist[x0] == kUnreachable || dist[x0] > 2;

  for (std::uint32_t b = 0; b < index.size(); ++b) {
    const auto& [x, y, z] = index.ends(b);
    if (!in_k[y]) continue;
    if ((in_k[x] && in_c[z]) || (in_k[z] && in_c[x])) r.boundary_bonds.push_back(b);
  }

  if (!r.k_n.empty()) {
    UnionFind inner(nv);
    for (EdgeId e = 0; e < g.edge_count(); ++e) {
      const Edge& edge = g.edge(e);
      if (open_edges[e] && in_k[edge.u] && in_k[edge.v]) inner.unite(edge.u, edge.v);
    }
    for (std::uint32_t b : sample.noise.open) {
      const auto& [x, y, z] = index.ends(b);
      if (in_k[x] && in_k[y] && in_k[z]) {
        inner.unite(x, y);
        inner.unite(y, z);
      }
    }
    std::vector<VertexId> cl;
    const std::uint32_t r0 = inner.find(x0);
    for (VertexId x : r.k_n) {
      if (inner.find(x) == r0) cl.push_back(x);
    }
    r.x0_cluster_in_k = VertexSet(cl);
  }
  return r;
}

}  // namespace loopperc
