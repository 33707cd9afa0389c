#pragma once

#include <Eigen/SparseCholesky>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "loopperc/graph.hpp"
#include "loopperc/potential.hpp"
#include "loopperc/rng.hpp"
#include "loopperc/union_find.hpp"

namespace loopperc {

struct FieldSample {
  std::vector<double> values;
  Seed128 seed;
};

// Vertex clusters of a trace. Two vertices share a label iff they are joined
// by open edges and open 2-bonds. Labels are numbered by smallest member.
struct TraceClusters {
  std::vector<std::uint32_t> labels;
  std::vector<std::uint8_t> open_edges;
  std::vector<std::uint32_t> open_two_bonds;  // indices into the graph's 2-bond enumeration
  std::size_t cluster_count = 0;

  bool connected(VertexId x, VertexId y) const { return labels[x] == labels[y]; }
};

// Relabels the sets of `uf` (restricted to the first `n` elements) canonically.
std::vector<std::uint32_t> canonical_labels(UnionFind& uf, std::size_t n, std::size_t* count = nullptr);

// Clusters of open edges plus every open 2-bond (both of its edges).
TraceClusters label_clusters(const MetricGraph& g, std::vector<std::uint8_t> open_edges,
                             const std::vector<TwoBond>& two_bonds, std::vector<std::uint32_t> open_two_bonds);

// Centered Gaussian vector with covariance G = M^{-1}, drawn as
// phi = P^{-1} L^{-T} z from the sparse Cholesky factor P M P^{-1} = L L^T.
// Factorisation happens once; sampling is const and safe to share.
class GffSampler {
 public:
  explicit GffSampler(const MetricGraph& g);

  std::size_t dimension() const { return n_; }
  FieldSample sample(Rng& rng) const;
  void sample_into(Rng& rng, std::span<double> out) const;

 private:
  std::size_t n_ = 0;
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> llt_;
};

// Cable-crossing rule of the isomorphism at intensity 1/2: independently per
// edge, open iff phi_x phi_y > 0 and U < 1 - exp(-2 lambda_xy phi_x phi_y).
// One uniform is consumed per edge in edge order regardless of signs.
std::vector<std::uint8_t> lupu_open_edges(const MetricGraph& g, std::span<const double> phi, Rng& rng);
double lupu_open_probability(double weight, double phi_x, double phi_y);

// Exact intensity-1/2 loop-soup vertex clusters.
TraceClusters clusters_at_half(const MetricGraph& g, const GffSampler& sampler, Rng& rng);

// Binary dump of per-replica open-edge bitmaps. Layout (little endian):
//   "LPEB" magic, u32 version = 1, u64 edge_count, u64 replica_count,
//   then per replica ceil(edge_count / 8) bytes; edge e is bit (e % 8),
//   least significant first, of byte e / 8.
void write_open_edge_bitmaps(std::ostream& out, std::size_t edge_count,
                             const std::vector<std::vector<std::uint8_t>>& replicas);
std::vector<std::vector<std::uint8_t>> read_open_edge_bitmaps(std::istream& in);

}  // namespace loopperc
