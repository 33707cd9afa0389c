#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "loopperc/gff.hpp"
#include "loopperc/graph.hpp"
#include "loopperc/montecarlo.hpp"
#include "loopperc/rng.hpp"
#include "loopperc/stats.hpp"

namespace loopperc {

struct SoupConfig {
  double alpha = 0.5;
  std::vector<VertexId> order;  // elimination order; empty means descending degree
  int subdivision = 1;
};

// Descending degree, ties broken by ascending id.
std::vector<VertexId> default_elimination_order(const MetricGraph& g);

// A discrete loop rooted at its lowest vertex (in elimination order). `path`
// starts and ends at `base`; visit j (path[j], j < path.size()-1) holds for
// holds[j] and leaves along edges[j].
struct Loop {
  VertexId base = 0;
  std::vector<VertexId> path;
  std::vector<double> holds;
  std::vector<EdgeId> edges;
};

struct LoopSoupSample {
  std::vector<Loop> loops;
  std::vector<double> trivial_occupation;  // per vertex
  std::vector<double> occupation;          // trivial part + holding times of all visits
};

struct SoupSampleOptions {
  bool include_trivial = true;  // Gamma(alpha, rate w(x)) occupation of non-jumping loops
  bool record_holds = true;
};

// Exact sampler of the skeleton loop soup at any intensity. For the i-th
// vertex v of the elimination order and G_i the graph with earlier vertices
// removed (they act as killing), the loops whose lowest vertex is v form a
// Poisson(alpha * -log(1 - r_i)) family, r_i being the jump chain's return
// probability to v inside G_i; each loop has Log(r_i) excursions, sampled by
// the Doob transform with h(u) = P_u[hit v before leaving G_i].
//
// All h vectors come from a single Cholesky factor of the precision matrix in
// reversed elimination order: the trailing graphs G_{i+1} are then leading
// blocks, and h_i = -L_k^{-T} L[k, 0:k]^T with k the position of v.
class LoopSoupSampler {
 public:
  static constexpr std::size_t kDefaultBudget = 60'000'000;  // stored h entries

  LoopSoupSampler(const MetricGraph& g, std::vector<VertexId> order = {},
                  std::size_t max_levels = std::numeric_limits<std::size_t>::max(),
                  std::size_t budget = kDefaultBudget);

  const MetricGraph& graph() const { return graph_; }
  const std::vector<VertexId>& order() const { return order_; }
  std::size_t level_count() const { return levels_.size(); }
  std::size_t level_of(VertexId v) const;

  // Return probability r_i of the level-i base inside G_i.
  double return_probability(std::size_t level) const { return levels_[level].r; }
  // Loop-measure mass -log(1 - r_i) of nontrivial loops rooted at level i.
  double loop_mass(std::size_t level) const { return levels_[level].mass; }
  // r_i recomputed from the Schur complement 1 - L(k,k)^2 / w(v_i).
  double return_probability_check(std::size_t level) const { return levels_[level].r_check; }
  // h_i(u); 1 at the base and 0 outside G_i.
  double h(std::size_t level, VertexId u) const;

  LoopSoupSample sample(double alpha, Rng& rng, const SoupSampleOptions& options = {}) const;
  // One nontrivial loop at `level` with Log(r) excursions.
  Loop sample_loop(std::size_t level, Rng& rng, bool record_holds = true) const;
  // Appends one excursion from the level base to `loop` (no holding times).
  void append_excursion(std::size_t level, Rng& rng, Loop& loop) const { excursion(levels_.at(level), rng, loop); }

 private:
  struct Level {
    VertexId base = 0;
    std::uint32_t position = 0;  // k: G_{i+1} = positions [0, k)
    double r = 0.0;
    double r_check = 0.0;
    double mass = 0.0;
    std::size_t offset = 0;  // into h_
  };

  void excursion(const Level& level, Rng& rng, Loop& loop) const;

  MetricGraph graph_;
  std::vector<VertexId> order_;
  std::vector<std::uint32_t> position_;
  std::vector<Level> levels_;
  std::vector<std::size_t> level_index_;
  std::vector<double> h_;
};

LoopSoupSample sample_discrete_soup(const MetricGraph& g, const SoupConfig& config, Rng& rng);

// Draw from the logarithmic distribution P(k) = r^k / (k * -log(1 - r)).
std::uint64_t sample_logarithmic(double r, Rng& rng);

// KS comparison of occupation samples against Gamma(alpha, scale G(x,x)).
// Requires at least 10^4 samples.
KsResult occupation_marginal_test(std::vector<double> occupations, double alpha, double green_xx);

// Loop-soup clusters approximated on subdivide(g, m), reported on the
// original vertices. Two original vertices share a label iff a chain of
// traversed sub-edges joins them. An original edge is marked open iff all of
// its m pieces are traversed.
class SubdivisionClusterSampler {
 public:
  SubdivisionClusterSampler(const MetricGraph& g, int pieces, std::size_t budget = LoopSoupSampler::kDefaultBudget);

  const MetricGraph& original() const { return original_; }
  const LoopSoupSampler& soup() const { return soup_; }
  int pieces() const { return pieces_; }
  TraceClusters sample(double alpha, Rng& rng) const;

 private:
  MetricGraph original_;
  int pieces_;
  LoopSoupSampler soup_;
};

TraceClusters metric_clusters_by_subdivision(const MetricGraph& g, double alpha, int pieces, Rng& rng);

// True iff one loop traverses every edge incident to x or to a neighbour of x.
bool single_loop_covers_star(const MetricGraph& g, const LoopSoupSample& sample, VertexId x);
bool loop_covers_star(const MetricGraph& g, const Loop& loop, VertexId x);

struct StarCoverEstimate {
  double probability = 0.0;     // P[O(x)]
  double standard_error = 0.0;
  double loop_mass = 0.0;       // mass of loops through x
  double cover_fraction = 0.0;  // probability that a loop through x covers the star
  double cover_fraction_se = 0.0;
  std::uint64_t loops = 0;      // replicas
  std::uint64_t covered = 0;    // replicas whose excursion sequence covered within max_excursions
  std::uint64_t max_excursions = 0;
  double c_hat = 0.0;           // 1 / P[O(x)] (infinite when no cover observed)
};

// P[some single loop covers the star of x] = 1 - exp(-alpha * mu(cover)).
// Loops through x are exactly the loops rooted at x when x is eliminated
// first, so mu(cover) = -log(1 - r_x) * P[a Log(r_x)-excursion loop covers].
// Each replica runs excursions until the star is covered, at step T, and
// scores P[K >= T] for K ~ Log(r_x); covering is monotone in the number of
// excursions, so the mean is unbiased. Runs stop once P[K >= k] underflows.
StarCoverEstimate estimate_star_cover(const MetricGraph& g, VertexId x, double alpha, const RunOptions& options);

// JSON-lines loop dump {base, path, holds} and occupation CSV (vertex, l).
void write_loops_jsonl(const LoopSoupSample& sample, std::ostream& out);
void write_occupation_csv(const LoopSoupSample& sample, std::ostream& out);

}  // namespace loopperc
