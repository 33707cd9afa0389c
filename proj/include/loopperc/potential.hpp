#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <iosfwd>
#include <optional>
#include <vector>

#include "loopperc/graph.hpp"

namespace loopperc {

using SparseMatrix = Eigen::SparseMatrix<double>;

// Generator matrix of the (killed) jump process restricted to `kept`:
// diagonal w(x), off-diagonal -lambda_xy for x, y both kept. Row/column i
// corresponds to kept[i].
SparseMatrix precision_matrix(const MetricGraph& g, const VertexSet& kept);

// Throws NotTransientError when some connected component of the induced
// subgraph on `kept` has neither killing nor an edge leaving the set.
void require_transient(const MetricGraph& g, const VertexSet& kept);

// Dense symmetric table of G_K(x, y) for x, y in `domain`.
struct GreenTable {
  VertexSet domain;
  Eigen::MatrixXd values;
  double solver_residual = 0.0;

  std::size_t index(VertexId x) const;  // throws InvalidArgument outside the domain
  double operator()(VertexId x, VertexId y) const { return values(index(x), index(y)); }
  bool contains(VertexId x) const { return domain.contains(x); }
};

struct GreenOptions {
  // The process is killed on leaving this set; whole graph when absent.
  std::optional<VertexSet> kept;
  // Rows/columns of the returned table; defaults to `kept`.
  std::optional<VertexSet> evaluate_on;
  // Dense Cholesky up to this many kept vertices, Jacobi-preconditioned CG above.
  std::size_t dense_limit = 4000;
  double iterative_tolerance = 1e-11;
};

GreenTable green_table(const MetricGraph& g, const GreenOptions& options = {});
inline GreenTable green_table(const MetricGraph& g, std::optional<VertexSet> kept) {
  GreenOptions o;
  o.kept = std::move(kept);
  return green_table(g, o);
}

// Probability that the process from x hits y before being killed or leaving
// the table's set: G_K(x,y) / G_K(y,y).
double hitting_probability(const GreenTable& green, VertexId x, VertexId y);

// (2/pi) arcsin(G_K(x,y) / sqrt(G_K(x,x) G_K(y,y))): probability that x and y
// are connected inside K by the intensity-1/2 metric-graph loop soup.
double two_point_exact(const GreenTable& green, VertexId x, VertexId y);
double two_point_from_green(double gxy, double gxx, double gyy);

struct CapacityResult {
  VertexSet set;
  double capacity = 0.0;
  std::vector<double> equilibrium_measure;  // aligned with set
  double energy = 0.0;                      // Green energy of the normalised measure
  std::vector<VertexId> negative_weights;   // numerically degenerate components
};

// Equilibrium measure by solving G|_{A x A} e = 1; capacity = sum(e).
CapacityResult capacity(const GreenTable& green, const VertexSet& set);

struct CapacityGrowthRow {
  std::size_t set_size = 0;
  double capacity = 0.0;
  bool flat = false;        // strict inclusion but equal capacity
  bool decreasing = false;  // monotonicity violated
};

// Capacities along a nested sequence of connected sets.
std::vector<CapacityGrowthRow> cap_growth_diagnostic(const MetricGraph& g, const GreenTable& green,
                                                     const std::vector<VertexSet>& nested);

// CSV dump "x,y,value" (upper triangle including the diagonal).
void write_green_csv(const GreenTable& green, std::ostream& out);

}  // namespace loopperc
