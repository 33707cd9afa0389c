#include "loopperc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <utility>

#include "loopperc/error.hpp"

namespace loopperc {

namespace {

void check_budget(double vertices, const BuildLimits& limits) {
  if (vertices > static_cast<double>(limits.max_vertices)) {
    std::ostringstream msg;
    msg << "vertex budget exceeded: " << vertices << " > " << limits.max_vertices;
    throw BudgetError(msg.str());
  }
}

void check_weight(double w) {
  if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgument("edge weight must be positive and finite");
}

}  // namespace

// ---- VertexSet ---------------------------------------------------------------

VertexSet::VertexSet(std::vector<VertexId> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

VertexSet::VertexSet(std::initializer_list<VertexId> ids) : VertexSet(std::vector<VertexId>(ids)) {}

bool VertexSet::contains(VertexId x) const { return std::binary_search(ids_.begin(), ids_.end(), x); }

std::optional<std::size_t> VertexSet::index_of(VertexId x) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), x);
  if (it == ids_.end() || *it != x) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

bool VertexSet::is_subset_of(const VertexSet& other) const {
  return std::includes(other.ids_.begin(), other.ids_.end(), ids_.begin(), ids_.end());
}

std::vector<char> VertexSet::mask(std::size_t n) const {
  std::vector<char> m(n, 0);
  for (VertexId x : ids_) {
    if (x >= n) throw InvalidArgument("vertex id " + std::to_string(x) + " outside graph");
    m[x] = 1;
  }
  return m;
}

// ---- MetricGraph -------------------------------------------------------------

MetricGraph::MetricGraph(std::size_t vertex_count, std::vector<Edge> edges,
                         std::vector<double> killing, nlohmann::json meta)
    : edges_(std::move(edges)), killing_(std::move(killing)), meta_(std::move(meta)) {
  if (vertex_count == 0) throw InvalidArgument("graph needs at least one vertex");
  if (killing_.size() != vertex_count) throw InvalidArgument("killing vector size mismatch");
  if (edges_.size() >= 0xffffffffu || vertex_count >= 0xffffffffu) throw BudgetError("graph too large for 32-bit ids");

  std::set<std::pair<VertexId, VertexId>> seen;
  std::vector<std::size_t> deg(vertex_count, 0);
  for (const Edge& e : edges_) {
    if (e.u >= vertex_count || e.v >= vertex_count) throw InvalidArgument("edge endpoint out of range");
    if (e.u == e.v) throw InvalidArgument("self-loop edges are not allowed");
    check_weight(e.weight);
    if (!seen.emplace(std::min(e.u, e.v), std::max(e.u, e.v)).second) {
      throw InvalidArgument("parallel edge between " + std::to_string(e.u) + " and " + std::to_string(e.v));
    }
    ++deg[e.u];
    ++deg[e.v];
  }
  for (double k : killing_) {
    if (!(k >= 0.0) || !std::isfinite(k)) throw InvalidArgument("killing rates must be finite and nonnegative");
  }

  offsets_.assign(vertex_count + 1, 0);
  for (std::size_t x = 0; x < vertex_count; ++x) offsets_[x + 1] = offsets_[x] + deg[x];
  adjacency_.resize(offsets_.back());
  std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (EdgeId id = 0; id < edges_.size(); ++id) {
    const Edge& e = edges_[id];
    adjacency_[fill[e.u]++] = {e.v, id};
    adjacency_[fill[e.v]++] = {e.u, id};
  }

  total_rate_.assign(killing_.begin(), killing_.end());
  for (const Edge& e : edges_) {
    total_rate_[e.u] += e.weight;
    total_rate_[e.v] += e.weight;
  }
  for (std::size_t x = 0; x < vertex_count; ++x) {
    if (!(total_rate_[x] > 0.0)) {
      throw InvalidArgument("vertex " + std::to_string(x) + " has zero total rate (isolated and unkilled)");
    }
  }
}

std::optional<EdgeId> MetricGraph::find_edge(VertexId x, VertexId y) const {
  for (const Neighbor& nb : neighbors(x)) {
    if (nb.vertex == y) return nb.edge;
  }
  return std::nullopt;
}

void MetricGraph::require_vertex(VertexId x) const {
  if (!valid_vertex(x)) throw InvalidArgument("invalid vertex id " + std::to_string(x));
}

void MetricGraph::set_coordinates(std::size_t dimension, std::vector<int> coords) {
  if (coords.size() != dimension * vertex_count()) throw InvalidArgument("coordinate array size mismatch");
  coord_dim_ = dimension;
  coords_ = std::move(coords);
}

std::optional<VertexId> MetricGraph::vertex_at(std::span<const int> coords) const {
  if (coord_dim_ == 0 || coords.size() != coord_dim_) return std::nullopt;
  for (VertexId x = 0; x < vertex_count(); ++x) {
    auto c = coordinates(x);
    if (std::equal(c.begin(), c.end(), coords.begin())) return x;
  }
  return std::nullopt;
}

VertexId MetricGraph::root() const {
  if (meta_.is_object() && meta_.contains("root")) return meta_["root"].get<VertexId>();
  return 0;
}

// ---- builders ----------------------------------------------------------------

MetricGraph build_two_vertex(double weight, double kappa) {
  check_weight(weight);
  return MetricGraph(2, {{0, 1, weight}}, {kappa, kappa},
                     {{"family", "two_vertex"}, {"weight", weight}, {"killing", kappa}, {"root", 0}});
}

MetricGraph build_path(std::size_t count, double weight, double kappa, const BuildLimits& limits) {
  if (count == 0) throw InvalidArgument("path needs at least one vertex");
  check_weight(weight);
  check_budget(static_cast<double>(count), limits);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < count; ++i) {
    edges.push_back({static_cast<VertexId>(i), static_cast<VertexId>(i + 1), weight});
  }
  return MetricGraph(count, std::move(edges), std::vector<double>(count, kappa),
                     {{"family", "path"}, {"length", count}, {"weight", weight}, {"killing", kappa}, {"root", 0}});
}

MetricGraph build_lattice_box(int dimension, int radius, double weight, bool boundary_killing,
                              double bulk_killing, const BuildLimits& limits) {
  if (dimension < 1) throw InvalidArgument("lattice dimension must be >= 1");
  if (radius < 1) throw InvalidArgument("lattice radius must be >= 1");
  check_weight(weight);
  if (!(bulk_killing >= 0.0)) throw InvalidArgument("bulk killing must be nonnegative");
  const std::size_t side = 2 * static_cast<std::size_t>(radius) + 1;
  check_budget(std::pow(static_cast<double>(side), dimension), limits);

  std::size_t n = 1;
  for (int i = 0; i < dimension; ++i) n *= side;
  const auto d = static_cast<std::size_t>(dimension);

  // Lexicographic ids, last coordinate fastest.
  std::vector<std::size_t> stride(d, 1);
  for (std::size_t i = d - 1; i > 0; --i) stride[i - 1] = stride[i] * side;

  std::vector<int> coords(n * d);
  std::vector<Edge> edges;
  std::vector<double> killing(n, bulk_killing);
  for (std::size_t x = 0; x < n; ++x) {
    std::size_t rest = x;
    for (std::size_t i = 0; i < d; ++i) {
      coords[x * d + i] = static_cast<int>(rest / stride[i]) - radius;
      rest %= stride[i];
    }
    for (std::size_t i = 0; i < d; ++i) {
      const int c = coords[x * d + i];
      if (c < radius) edges.push_back({static_cast<VertexId>(x), static_cast<VertexId>(x + stride[i]), weight});
      if (boundary_killing) {
        if (c == radius) killing[x] += weight;
        if (c == -radius) killing[x] += weight;
      }
    }
  }
  nlohmann::json meta = {{"family", "lattice_box"},   {"dimension", dimension},
                         {"radius", radius},          {"weight", weight},
                         {"boundary_killing", boundary_killing}, {"killing", bulk_killing},
                         {"root", (n - 1) / 2}};
  MetricGraph g(n, std::move(edges), std::move(killing), std::move(meta));
  g.set_coordinates(d, std::move(coords));
  return g;
}

MetricGraph build_regular_tree(int degree, int depth, double weight, bool boundary_killing,
                               const BuildLimits& limits) {
  if (degree < 3) throw InvalidArgument("regular tree degree must be >= 3");
  if (depth < 1) throw InvalidArgument("regular tree depth must be >= 1");
  check_weight(weight);
  double count = 1.0, level = degree;
  for (int h = 1; h <= depth; ++h) {
    count += level;
    level *= degree - 1;
  }
  check_budget(count, limits);

  std::vector<Edge> edges;
  std::vector<std::uint32_t> depth_of{0};
  std::size_t frontier_begin = 0, frontier_end = 1;
  for (int h = 1; h <= depth; ++h) {
    for (std::size_t p = frontier_begin; p < frontier_end; ++p) {
      const int children = (h == 1) ? degree : degree - 1;
      for (int c = 0; c < children; ++c) {
        const auto child = static_cast<VertexId>(depth_of.size());
        depth_of.push_back(static_cast<std::uint32_t>(h));
        edges.push_back({static_cast<VertexId>(p), child, weight});
      }
    }
    frontier_begin = frontier_end;
    frontier_end = depth_of.size();
  }
  std::vector<double> killing(depth_of.size(), 0.0);
  if (boundary_killing) {
    for (std::size_t x = frontier_begin; x < frontier_end; ++x) killing[x] = (degree - 1) * weight;
  }
  nlohmann::json meta = {{"family", "regular_tree"}, {"degree", degree}, {"depth", depth},
                         {"weight", weight}, {"boundary_killing", boundary_killing}, {"root", 0}};
  return MetricGraph(depth_of.size(), std::move(edges), std::move(killing), std::move(meta));
}

MetricGraph subdivide(const MetricGraph& g, int pieces, const BuildLimits& limits) {
  if (pieces < 1) throw InvalidArgument("subdivision needs pieces >= 1");
  if (pieces == 1) return g;
  const std::size_t extra = g.edge_count() * static_cast<std::size_t>(pieces - 1);
  check_budget(static_cast<double>(g.vertex_count() + extra), limits);

  std::vector<Edge> edges;
  edges.reserve(g.edge_count() * pieces);
  std::vector<double> killing(g.killing());
  killing.resize(g.vertex_count() + extra, 0.0);
  auto next = static_cast<VertexId>(g.vertex_count());
  for (const Edge& e : g.edges()) {
    const double w = e.weight * pieces;
    VertexId prev = e.u;
    for (int k = 1; k < pieces; ++k) {
      edges.push_back({prev, next, w});
      prev = next++;
    }
    edges.push_back({prev, e.v, w});
  }
  nlohmann::json meta = {{"family", "subdivided"}, {"pieces", pieces}, {"parent", g.meta()},
                         {"root", g.root()}, {"original_vertices", g.vertex_count()}};
  const std::size_t n = killing.size();
  return MetricGraph(n, std::move(edges), std::move(killing), std::move(meta));
}

MetricGraph restrict_with_killing(const MetricGraph& g, const VertexSet& kept) {
  if (kept.empty()) throw InvalidArgument("cannot restrict to an empty set");
  const auto inside = kept.mask(g.vertex_count());
  std::vector<double> killing(kept.size());
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const VertexId x = kept[i];
    killing[i] = g.killing(x);
    for (const Neighbor& nb : g.neighbors(x)) {
      const double w = g.edge(nb.edge).weight;
      if (!inside[nb.vertex]) {
        killing[i] += w;
      } else if (x < nb.vertex) {
        edges.push_back({static_cast<VertexId>(i), static_cast<VertexId>(*kept.index_of(nb.vertex)), w});
      }
    }
  }
  return MetricGraph(kept.size(), std::move(edges), std::move(killing), {{"family", "restricted"}});
}

// ---- queries -----------------------------------------------------------------

std::vector<std::uint32_t> bfs_distances(const MetricGraph& g, std::span<const VertexId> sources) {
  std::vector<std::uint32_t> dist(g.vertex_count(), kUnreachable);
  std::queue<VertexId> q;
  for (VertexId s : sources) {
    g.require_vertex(s);
    if (dist[s] != 0) {
      dist[s] = 0;
      q.push(s);
    }
  }
  while (!q.empty()) {
    const VertexId x = q.front();
    q.pop();
    for (const Neighbor& nb : g.neighbors(x)) {
      if (dist[nb.vertex] == kUnreachable) {
        dist[nb.vertex] = dist[x] + 1;
        q.push(nb.vertex);
      }
    }
  }
  return dist;
}

VertexSet ball(const MetricGraph& g, VertexId x0, std::uint32_t n) {
  const VertexId src[] = {x0};
  const auto dist = bfs_distances(g, src);
  std::vector<VertexId> out;
  for (VertexId x = 0; x < g.vertex_count(); ++x) {
    if (dist[x] <= n) out.push_back(x);
  }
  return VertexSet(std::move(out));
}

VertexSet sphere(const MetricGraph& g, VertexId x0, std::uint32_t n) {
  const VertexId src[] = {x0};
  const auto dist = bfs_distances(g, src);
  std::vector<VertexId> out;
  for (VertexId x = 0; x < g.vertex_count(); ++x) {
    if (dist[x] == n) out.push_back(x);
  }
  return VertexSet(std::move(out));
}

std::vector<TwoBond> enumerate_two_bonds(const MetricGraph& g) {
  std::vector<TwoBond> out;
  std::vector<EdgeId> incident;
  for (VertexId y = 0; y < g.vertex_count(); ++y) {
    incident.clear();
    for (const Neighbor& nb : g.neighbors(y)) incident.push_back(nb.edge);
    std::sort(incident.begin(), incident.end());
    for (std::size_t i = 0; i < incident.size(); ++i) {
      for (std::size_t j = i + 1; j < incident.size(); ++j) out.push_back({y, incident[i], incident[j]});
    }
  }
  return out;
}

bool is_connected_set(const MetricGraph& g, const VertexSet& set) {
  if (set.empty()) return false;
  const auto inside = set.mask(g.vertex_count());
  std::vector<char> seen(g.vertex_count(), 0);
  std::vector<VertexId> stack{set[0]};
  seen[set[0]] = 1;
  std::size_t reached = 0;
  while (!stack.empty()) {
    const VertexId x = stack.back();
    stack.pop_back();
    ++reached;
    for (const Neighbor& nb : g.neighbors(x)) {
      if (inside[nb.vertex] && !seen[nb.vertex]) {
        seen[nb.vertex] = 1;
        stack.push_back(nb.vertex);
      }
    }
  }
  return reached == set.size();
}

// ---- files -------------------------------------------------------------------

nlohmann::json graph_to_json(const MetricGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : g.edges()) edges.push_back({e.u, e.v, e.weight});
  nlohmann::json j = {{"vertices", g.vertex_count()}, {"edges", std::move(edges)}, {"killing", g.killing()}};
  if (!g.meta().is_null()) j["family"] = g.meta();
  if (g.coordinate_dimension() > 0) {
    j["coordinates"] = {{"dimension", g.coordinate_dimension()},
                        {"values", std::vector<int>(g.coordinates(0).data(),
                                                    g.coordinates(0).data() + g.vertex_count() * g.coordinate_dimension())}};
  }
  return j;
}

MetricGraph graph_from_json(const nlohmann::json& j) {
  try {
    for (const auto& [key, _] : j.items()) {
      if (key != "vertices" && key != "edges" && key != "killing" && key != "family" && key != "coordinates") {
        throw InvalidArgument("graph file: unknown key '" + key + "'");
      }
    }
    const auto n = j.at("vertices").get<std::size_t>();
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 3) throw InvalidArgument("graph file: edges must be [u, v, weight]");
      edges.push_back({e[0].get<VertexId>(), e[1].get<VertexId>(), e[2].get<double>()});
    }
    std::vector<double> killing = j.contains("killing") ? j["killing"].get<std::vector<double>>()
                                                        : std::vector<double>(n, 0.0);
    MetricGraph g(n, std::move(edges), std::move(killing), j.value("family", nlohmann::json{}));
    if (j.contains("coordinates")) {
      g.set_coordinates(j["coordinates"].at("dimension").get<std::size_t>(),
                        j["coordinates"].at("values").get<std::vector<int>>());
    }
    return g;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument(std::string("graph file: ") + ex.what());
  }
}

void write_graph_file(const MetricGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open " + path + " for writing");
  out << graph_to_json(g).dump(1) << '\n';
}

MetricGraph read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open graph file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument("graph file " + path + ": " + ex.what());
  }
  return graph_from_json(j);
}

}  // namespace loopperc
