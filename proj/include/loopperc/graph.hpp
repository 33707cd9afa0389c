#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace loopperc {

using VertexId = std::uint32_t;
using EdgeId = std::uint32_t;

struct Edge {
  VertexId u{0};
  VertexId v{0};
  double weight{1.0};  // conductance lambda_uv; the cable has length 1/(2*weight)
};

struct Neighbor {
  VertexId vertex;
  EdgeId edge;
};

struct BuildLimits {
  std::size_t max_vertices = 4'000'000;
};

// Sorted, duplicate-free list of vertex ids.
class VertexSet {
 public:
  VertexSet() = default;
  explicit VertexSet(std::vector<VertexId> ids);
  VertexSet(std::initializer_list<VertexId> ids);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  bool contains(VertexId x) const;
  // Position of x in the sorted list, if present.
  std::optional<std::size_t> index_of(VertexId x) const;

  const std::vector<VertexId>& ids() const { return ids_; }
  VertexId operator[](std::size_t i) const { return ids_[i]; }
  auto begin() const { return ids_.begin(); }
  auto end() const { return ids_.end(); }

  bool is_subset_of(const VertexSet& other) const;
  // Membership bitmap of length n.
  std::vector<char> mask(std::size_t n) const;

  friend bool operator==(const VertexSet&, const VertexSet&) = default;

 private:
  std::vector<VertexId> ids_;
};

// Unordered pair of distinct edges e < f sharing the vertex `center`.
// Endpoints read as (x, center)(center, z) with x the far end of e.
struct TwoBond {
  VertexId center{0};
  EdgeId e{0};
  EdgeId f{0};

  friend bool operator==(const TwoBond&, const TwoBond&) = default;
};

// Finite weighted skeleton of a metric graph. Immutable after construction.
class MetricGraph {
 public:
  MetricGraph() = default;
  MetricGraph(std::size_t vertex_count, std::vector<Edge> edges,
              std::vector<double> killing, nlohmann::json meta = {});

  std::size_t vertex_count() const { return killing_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(EdgeId e) const { return edges_[e]; }
  double edge_length(EdgeId e) const { return 0.5 / edges_[e].weight; }
  VertexId other_end(EdgeId e, VertexId x) const {
    return edges_[e].u == x ? edges_[e].v : edges_[e].u;
  }

  double killing(VertexId x) const { return killing_[x]; }
  const std::vector<double>& killing() const { return killing_; }
  // w(x) = sum of incident weights + killing.
  double total_rate(VertexId x) const { return total_rate_[x]; }

  std::span<const Neighbor> neighbors(VertexId x) const {
    return {adjacency_.data() + offsets_[x], adjacency_.data() + offsets_[x + 1]};
  }
  std::size_t degree(VertexId x) const { return offsets_[x + 1] - offsets_[x]; }
  std::optional<EdgeId> find_edge(VertexId x, VertexId y) const;

  bool valid_vertex(VertexId x) const { return x < vertex_count(); }
  void require_vertex(VertexId x) const;

  // Optional integer coordinates (lattice builders); dimension 0 means none.
  std::size_t coordinate_dimension() const { return coord_dim_; }
  std::span<const int> coordinates(VertexId x) const {
    return {coords_.data() + x * coord_dim_, coord_dim_};
  }
  void set_coordinates(std::size_t dimension, std::vector<int> coords);
  std::optional<VertexId> vertex_at(std::span<const int> coords) const;

  const nlohmann::json& meta() const { return meta_; }
  // Family-designated root (lattice center, tree root); 0 otherwise.
  VertexId root() const;

 private:
  std::vector<Edge> edges_;
  std::vector<double> killing_;
  std::vector<double> total_rate_;
  std::vector<std::size_t> offsets_;
  std::vector<Neighbor> adjacency_;
  std::size_t coord_dim_ = 0;
  std::vector<int> coords_;
  nlohmann::json meta_;
};

// ---- builders --------------------------------------------------------------

// Two vertices joined by one edge; each vertex carries killing `kappa`.
MetricGraph build_two_vertex(double weight = 1.0, double kappa = 1.0);

// Path on `count` vertices 0-1-...-(count-1).
MetricGraph build_path(std::size_t count, double weight = 1.0, double kappa = 1.0,
                       const BuildLimits& limits = {});

// Box {-radius..radius}^d with nearest-neighbour edges. With boundary_killing
// every vertex is killed at the total weight of its missing lattice neighbours
// (Dirichlet truncation of Z^d). `bulk_killing` is added everywhere.
MetricGraph build_lattice_box(int dimension, int radius, double weight,
                              bool boundary_killing, double bulk_killing = 0.0,
                              const BuildLimits& limits = {});

// Rooted truncation of the d-regular tree to depth h; leaves killed at the
// weight of their d-1 missing children when the flag is set.
MetricGraph build_regular_tree(int degree, int depth, double weight, bool boundary_killing,
                               const BuildLimits& limits = {});

// Replaces every edge of weight w by a path of m edges of weight m*w through
// m-1 fresh unkilled vertices. Original ids are kept; fresh ids are appended
// edge by edge, ordered from edge.u towards edge.v.
MetricGraph subdivide(const MetricGraph& g, int pieces, const BuildLimits& limits = {});

// Induced graph on `kept` with every edge leaving the set converted into
// killing. Vertex i of the result is kept[i].
MetricGraph restrict_with_killing(const MetricGraph& g, const VertexSet& kept);

// ---- queries ---------------------------------------------------------------

inline constexpr std::uint32_t kUnreachable = 0xffffffffu;

// Multi-source breadth-first skeleton distances.
std::vector<std::uint32_t> bfs_distances(const MetricGraph& g, std::span<const VertexId> sources);

VertexSet ball(const MetricGraph& g, VertexId x0, std::uint32_t n);
VertexSet sphere(const MetricGraph& g, VertexId x0, std::uint32_t n);

// All 2-bonds, grouped by center (ascending), then by (e, f) ascending.
std::vector<TwoBond> enumerate_two_bonds(const MetricGraph& g);

// Whether the induced subgraph on `set` is connected (empty counts as not).
bool is_connected_set(const MetricGraph& g, const VertexSet& set);

// ---- graph description files ----------------------------------------------

nlohmann::json graph_to_json(const MetricGraph& g);
MetricGraph graph_from_json(const nlohmann::json& j);
void write_graph_file(const MetricGraph& g, const std::string& path);
MetricGraph read_graph_file(const std::string& path);

}  // namespace loopperc
