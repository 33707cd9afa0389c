#include "loopperc/potential.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "loopperc/error.hpp"

namespace loopperc {

namespace {

VertexSet all_vertices(const MetricGraph& g) {
  std::vector<VertexId> ids(g.vertex_count());
  for (VertexId x = 0; x < ids.size(); ++x) ids[x] = x;
  return VertexSet(std::move(ids));
}

}  // namespace

SparseMatrix precision_matrix(const MetricGraph& g, const VertexSet& kept) {
  std::vector<std::int64_t> pos(g.vertex_count(), -1);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    g.require_vertex(kept[i]);
    pos[kept[i]] = static_cast<std::int64_t>(i);
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(kept.size() * 7);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const VertexId x = kept[i];
    triplets.emplace_back(i, i, g.total_rate(x));
    for (const Neighbor& nb : g.neighbors(x)) {
      if (pos[nb.vertex] >= 0) triplets.emplace_back(i, pos[nb.vertex], -g.edge(nb.edge).weight);
    }
  }
  SparseMatrix m(kept.size(), kept.size());
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

void require_transient(const MetricGraph& g, const VertexSet& kept) {
  const auto inside = kept.mask(g.vertex_count());
  std::vector<char> seen(g.vertex_count(), 0);
  std::vector<VertexId> stack;
  for (VertexId start : kept) {
    if (seen[start]) continue;
    bool killed = false;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const VertexId x = stack.back();
      stack.pop_back();
      if (g.killing(x) > 0.0) killed = true;
      for (const Neighbor& nb : g.neighbors(x)) {
        if (!inside[nb.vertex]) {
          killed = true;
        } else if (!seen[nb.vertex]) {
          seen[nb.vertex] = 1;
          stack.push_back(nb.vertex);
        }
      }
    }
    if (!killed) {
      throw NotTransientError("not transient: the component of vertex " + std::to_string(start) +
                              " has no killing and no exit");
    }
  }
}

std::size_t GreenTable::index(VertexId x) const {
  auto i = domain.index_of(x);
  if (!i) throw InvalidArgument("vertex " + std::to_string(x) + " outside the Green table domain");
  return *i;
}

GreenTable green_table(const MetricGraph& g, const GreenOptions& options) {
  const VertexSet kept = options.kept ? *options.kept : all_vertices(g);
  if (kept.empty()) throw InvalidArgument("green_table: empty kept set");
  const VertexSet eval = options.evaluate_on ? *options.evaluate_on : kept;
  if (!eval.is_subset_of(kept)) throw InvalidArgument("green_table: evaluation set must lie inside the kept set");
  require_transient(g, kept);

  const SparseMatrix m = precision_matrix(g, kept);
  std::vector<std::size_t> rows(eval.size());
  for (std::size_t i = 0; i < eval.size(); ++i) rows[i] = *kept.index_of(eval[i]);

  GreenTable out;
  out.domain = eval;
  out.values.resize(eval.size(), eval.size());

  if (kept.size() <= options.dense_limit) {
    const Eigen::MatrixXd dense(m);
    Eigen::LLT<Eigen::MatrixXd> llt(dense);
    if (llt.info() != Eigen::Success) throw NotTransientError("green_table: precision matrix not positive definite");
    Eigen::MatrixXd full = llt.solve(Eigen::MatrixXd::Identity(kept.size(), kept.size()));
    full = 0.5 * (full + full.transpose()).eval();
    const Eigen::MatrixXd residual = m * full - Eigen::MatrixXd::Identity(kept.size(), kept.size());
    out.solver_residual = residual.cwiseAbs().maxCoeff();
    for (std::size_t i = 0; i < eval.size(); ++i) {
      for (std::size_t j = 0; j < eval.size(); ++j) out.values(i, j) = full(rows[i], rows[j]);
    }
    return out;
  }

  if (eval.size() > options.dense_limit) {
    throw BudgetError("green_table: dense table of " + std::to_string(eval.size()) +
                      " vertices requested on an iterative-size graph; pass a smaller evaluation set");
  }
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(options.iterative_tolerance);
  cg.setMaxIterations(static_cast<Eigen::Index>(std::max<std::size_t>(1000, 20 * kept.size())));
  cg.compute(m);
  double worst = 0.0;
  for (std::size_t j = 0; j < eval.size(); ++j) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(kept.size());
    rhs(rows[j]) = 1.0;
    Eigen::VectorXd col = cg.solve(rhs);
    if (cg.info() != Eigen::Success) throw NumericError("green_table: conjugate gradient did not converge");
    worst = std::max(worst, (m * col - rhs).cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < eval.size(); ++i) out.values(i, j) = col(rows[i]);
  }
  out.values = 0.5 * (out.values + out.values.transpose()).eval();
  out.solver_residual = worst;
  return out;
}

double hitting_probability(const GreenTable& green, VertexId x, VertexId y) {
  const std::size_t i = green.index(x), j = green.index(y);
  return green.values(i, j) / green.values(j, j);
}

double two_point_from_green(double gxy, double gxx, double gyy) {
  double ratio = gxy / std::sqrt(gxx * gyy);
  if (ratio > 1.0 + 1e-12 || ratio < -1e-12 || !std::isfinite(ratio)) {
    throw NumericError("two_point: correlation ratio " + std::to_string(ratio) + " outside [0, 1]");
  }
  ratio = std::clamp(ratio, 0.0, 1.0);
  return 2.0 / std::numbers::pi * std::asin(ratio);
}

double two_point_exact(const GreenTable& green, VertexId x, VertexId y) {
  const std::size_t i = green.index(x), j = green.index(y);
  return two_point_from_green(green.values(i, j), green.values(i, i), green.values(j, j));
}

CapacityResult capacity(const GreenTable& green, const VertexSet& set) {
  if (set.empty()) throw InvalidArgument("capacity: empty set");
  const std::size_t k = set.size();
  Eigen::MatrixXd sub(k, k);
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = green.index(set[i]);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) sub(i, j) = green.values(idx[i], idx[j]);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sub);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw NumericError("capacity: singular restricted Green matrix");
  const Eigen::VectorXd e = ldlt.solve(Eigen::VectorXd::Ones(k));
  if (!e.allFinite()) throw NumericError("capacity: singular restricted Green matrix");

  CapacityResult out;
  out.set = set;
  out.capacity = e.sum();
  out.equilibrium_measure.assign(e.data(), e.data() + k);
  for (std::size_t i = 0; i < k; ++i) {
    if (e(i) < 0.0) out.negative_weights.push_back(set[i]);
  }
  const Eigen::VectorXd nu = e / out.capacity;
  out.energy = nu.dot(sub * nu);
  return out;
}

std::vector<CapacityGrowthRow> cap_growth_diagnostic(const MetricGraph& g, const GreenTable& green,
                                                     const std::vector<VertexSet>& nested) {
  std::vector<CapacityGrowthRow> rows;
  for (std::size_t i = 0; i < nested.size(); ++i) {
    if (!is_connected_set(g, nested[i])) {
      throw InvalidArgument("cap_growth_diagnostic: set " + std::to_string(i) + " is not connected");
    }
    if (i > 0 && !nested[i - 1].is_subset_of(nested[i])) {
      throw InvalidArgument("cap_growth_diagnostic: sets are not nested at position " + std::to_string(i));
    }
    CapacityGrowthRow row;
    row.set_size = nested[i].size();
    row.capacity = capacity(green, nested[i]).capacity;
    if (i > 0) {
      const double prev = rows.back().capacity;
      const double tol = 1e-10 * std::max(1.0, std::abs(prev));
      const bool strict = nested[i].size() > nested[i - 1].size();
      row.flat = strict && std::abs(row.capacity - prev) <= tol;
      row.decreasing = row.capacity < prev - tol;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_green_csv(const GreenTable& green, std::ostream& out) {
  out << "x,y,value\n";
  out.precision(17);
  for (std::size_t i = 0; i < green.domain.size(); ++i) {
    for (std::size_t j = i; j < green.domain.size(); ++j) {
      out << green.domain[i] << ',' << green.domain[j] << ',' << green.values(i, j) << '\n';
    }
  }
}

}  // namespace loopperc
