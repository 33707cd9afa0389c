#include "loopperc/loopsoup.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "json.hpp"
#include "loopperc/error.hpp"
#include "loopperc/potential.hpp"

namespace loopperc {

std::vector<VertexId> default_elimination_order(const MetricGraph& g) {
  std::vector<VertexId> order(g.vertex_count());
  for (VertexId x = 0; x < order.size(); ++x) order[x] = x;
  std::stable_sort(order.begin(), order.end(),
                   [&](VertexId a, VertexId b) { return g.degree(a) > g.degree(b); });
  return order;
}

std::uint64_t sample_logarithmic(double r, Rng& rng) {
  // Mixture form: Y = 1 - (1-r)^U, then X | Y is geometric on {1, 2, ...}
  // with P(X >= k) = Y^(k-1).
  if (!(r > 0.0)) return 1;
  const double v = rng.uniform_open();
  if (v >= r) return 1;
  const double y = -std::expm1(rng.uniform_open() * std::log1p(-r));
  if (!(y > 0.0)) return 1;
  const double k = 1.0 + std::floor(std::log(v) / std::log(y));
  return k > 1e18 ? static_cast<std::uint64_t>(1e18) : static_cast<std::uint64_t>(k);
}

// ---- LoopSoupSampler ---------------------------------------------------------

LoopSoupSampler::LoopSoupSampler(const MetricGraph& g, std::vector<VertexId> order, std::size_t max_levels,
                                 std::size_t budget)
    : graph_(g), order_(order.empty() ? default_elimination_order(g) : std::move(order)) {
  const std::size_t n = graph_.vertex_count();
  if (order_.size() != n) throw InvalidArgument("elimination order must list every vertex once");
  position_.assign(n, 0xffffffffu);
  for (std::size_t i = 0; i < n; ++i) {
    graph_.require_vertex(order_[i]);
    if (position_[order_[i]] != 0xffffffffu) throw InvalidArgument("elimination order repeats a vertex");
    position_[order_[i]] = static_cast<std::uint32_t>(n - 1 - i);
  }

  const std::size_t level_count = std::min(max_levels, n);
  std::size_t storage = 0;
  for (std::size_t i = 0; i < level_count; ++i) storage += n - 1 - i;
  if (storage > budget) {
    throw BudgetError("loop soup: " + std::to_string(storage) + " stored h entries exceed the budget of " +
                      std::to_string(budget));
  }

  // Precision matrix in reversed elimination order (position order).
  std::vector<VertexId> by_position(n);
  for (VertexId x = 0; x < n; ++x) by_position[position_[x]] = x;
  {
    std::vector<VertexId> all(n);
    for (VertexId x = 0; x < n; ++x) all[x] = x;
    require_transient(graph_, VertexSet(std::move(all)));
  }
  std::vector<Eigen::Triplet<double>> triplets;
  for (VertexId x = 0; x < n; ++x) {
    triplets.emplace_back(position_[x], position_[x], graph_.total_rate(x));
    for (const Neighbor& nb : graph_.neighbors(x)) {
      triplets.emplace_back(position_[x], position_[nb.vertex], -graph_.edge(nb.edge).weight);
    }
  }
  SparseMatrix a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  a.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>> llt(a);
  if (llt.info() != Eigen::Success) throw NotTransientError("loop soup: precision matrix factorisation failed");
  const SparseMatrix lower = llt.matrixL();  // column major, rows ascending within a column

  std::vector<std::vector<std::pair<std::uint32_t, double>>> rows(n);
  std::vector<double> diag(n, 0.0);
  for (Eigen::Index j = 0; j < lower.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(lower, j); it; ++it) {
      if (it.row() == j) {
        diag[j] = it.value();
      } else {
        rows[it.row()].emplace_back(static_cast<std::uint32_t>(j), it.value());
      }
    }
  }

  levels_.resize(level_count);
  level_index_.assign(n, std::numeric_limits<std::size_t>::max());
  h_.resize(storage);
  std::vector<double> x;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < level_count; ++i) {
    Level& lv = levels_[i];
    lv.base = order_[i];
    lv.position = position_[lv.base];
    lv.offset = offset;
    level_index_[lv.base] = i;
    const std::size_t k = lv.position;

    // x = L_k^{-T} y with y = L[k, 0:k]^T; h = -x.
    x.assign(k, 0.0);
    for (const auto& [j, v] : rows[k]) x[j] = v;
    for (std::size_t jj = k; jj-- > 0;) {
      double s = x[jj];
      for (SparseMatrix::InnerIterator it(lower, static_cast<Eigen::Index>(jj)); it; ++it) {
        const auto row = static_cast<std::size_t>(it.row());
        if (row <= jj) continue;
        if (row >= k) break;
        s -= it.value() * x[row];
      }
      x[jj] = s / diag[jj];
    }
    double* hv = h_.data() + offset;
    for (std::size_t p = 0; p < k; ++p) hv[p] = std::clamp(-x[p], 0.0, 1.0);
    offset += k;

    const double w = graph_.total_rate(lv.base);
    double flux = 0.0;
    for (const Neighbor& nb : graph_.neighbors(lv.base)) {
      const std::uint32_t p = position_[nb.vertex];
      if (p < k) flux += graph_.edge(nb.edge).weight * hv[p];
    }
    lv.r = std::clamp(flux / w, 0.0, 1.0);
    lv.r_check = 1.0 - diag[k] * diag[k] / w;
    if (lv.r >= 1.0) throw NumericError("loop soup: return probability reached 1 (recurrent level)");
    lv.mass = -std::log1p(-lv.r);
  }
}

std::size_t LoopSoupSampler::level_of(VertexId v) const {
  graph_.require_vertex(v);
  const std::size_t i = level_index_[v];
  if (i == std::numeric_limits<std::size_t>::max()) throw InvalidArgument("vertex level not precomputed");
  return i;
}

double LoopSoupSampler::h(std::size_t level, VertexId u) const {
  const Level& lv = levels_[level];
  if (u == lv.base) return 1.0;
  const std::uint32_t p = position_[u];
  return p < lv.position ? h_[lv.offset + p] : 0.0;
}

void LoopSoupSampler::excursion(const Level& lv, Rng& rng, Loop& loop) const {
  const double* hv = h_.data() + lv.offset;
  VertexId current = lv.base;
  double weights[64];
  std::vector<double> big;
  do {
    const auto nbs = graph_.neighbors(current);
    double* w = weights;
    if (nbs.size() > 64) {
      big.resize(nbs.size());
      w = big.data();
    }
    double total = 0.0;
    for (std::size_t j = 0; j < nbs.size(); ++j) {
      const VertexId t = nbs[j].vertex;
      const std::uint32_t p = position_[t];
      double hw = 0.0;
      if (t == lv.base) {
        hw = current == lv.base ? 0.0 : 1.0;
      } else if (p < lv.position) {
        hw = hv[p];
      }
      w[j] = graph_.edge(nbs[j].edge).weight * hw;
      total += w[j];
    }
    if (!(total > 0.0)) throw NumericError("loop soup: excursion reached a vertex with zero h-flux");
    double u = rng.uniform() * total;
    std::size_t pick = nbs.size() - 1;
    for (std::size_t j = 0; j < nbs.size(); ++j) {
      if (u < w[j]) {
        pick = j;
        break;
      }
      u -= w[j];
    }
    while (w[pick] == 0.0) --pick;  // rounding fallback lands on a positive-weight neighbour
    loop.edges.push_back(nbs[pick].edge);
    current = nbs[pick].vertex;
    loop.path.push_back(current);
  } while (current != lv.base);
}

Loop LoopSoupSampler::sample_loop(std::size_t level, Rng& rng, bool record_holds) const {
  const Level& lv = levels_.at(level);
  if (!(lv.r > 0.0)) throw InvalidArgument("sample_loop: level has no nontrivial loops");
  Loop loop;
  loop.base = lv.base;
  loop.path.push_back(lv.base);
  const std::uint64_t excursions = sample_logarithmic(lv.r, rng);
  for (std::uint64_t e = 0; e < excursions; ++e) excursion(lv, rng, loop);
  if (record_holds) {
    loop.holds.resize(loop.path.size() - 1);
    for (std::size_t j = 0; j + 1 < loop.path.size(); ++j) {
      std::exponential_distribution<double> hold(graph_.total_rate(loop.path[j]));
      loop.holds[j] = hold(rng);
    }
  }
  return loop;
}

LoopSoupSample LoopSoupSampler::sample(double alpha, Rng& rng, const SoupSampleOptions& options) const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("loop soup intensity must be positive");
  if (levels_.size() != graph_.vertex_count()) throw InvalidArgument("sample: sampler built with truncated levels");
  const std::size_t n = graph_.vertex_count();
  LoopSoupSample out;
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const Level& lv = levels_[i];
    if (!(lv.mass > 0.0)) continue;
    std::poisson_distribution<std::uint64_t> count(alpha * lv.mass);
    const std::uint64_t loops = count(rng);
    for (std::uint64_t c = 0; c < loops; ++c) out.loops.push_back(sample_loop(i, rng, options.record_holds));
  }
  out.trivial_occupation.assign(n, 0.0);
  if (options.include_trivial) {
    for (VertexId x = 0; x < n; ++x) {
      std::gamma_distribution<double> trivial(alpha, 1.0 / graph_.total_rate(x));
      out.trivial_occupation[x] = trivial(rng);
    }
  }
  out.occupation = out.trivial_occupation;
  if (options.record_holds) {
    for (const Loop& loop : out.loops) {
      for (std::size_t j = 0; j < loop.holds.size(); ++j) out.occupation[loop.path[j]] += loop.holds[j];
    }
  }
  return out;
}

LoopSoupSample sample_discrete_soup(const MetricGraph& g, const SoupConfig& config, Rng& rng) {
  if (config.subdivision < 1) throw InvalidArgument("subdivision level must be >= 1");
  if (config.subdivision > 1) {
    const MetricGraph fine = subdivide(g, config.subdivision);
    return LoopSoupSampler(fine).sample(config.alpha, rng);
  }
  return LoopSoupSampler(g, config.order).sample(config.alpha, rng);
}

KsResult occupation_marginal_test(std::vector<double> occupations, double alpha, double green_xx) {
  if (occupations.size() < 10'000) throw InvalidArgument("occupation_marginal_test: needs at least 10^4 samples");
  if (!(alpha > 0.0) || !(green_xx > 0.0)) throw InvalidArgument("occupation_marginal_test: bad parameters");
  return ks_one_sample(std::move(occupations), [&](double v) { return gamma_cdf(v, alpha, green_xx); });
}

// ---- subdivision connectivity -------------------------------------------------

SubdivisionClusterSampler::SubdivisionClusterSampler(const MetricGraph& g, int pieces, std::size_t budget)
    : original_(g), pieces_(pieces), soup_(subdivide(g, pieces), {}, std::numeric_limits<std::size_t>::max(), budget) {}

TraceClusters SubdivisionClusterSampler::sample(double alpha, Rng& rng) const {
  const LoopSoupSample s = soup_.sample(alpha, rng, {.include_trivial = false, .record_holds = false});
  const MetricGraph& fine = soup_.graph();
  UnionFind uf(fine.vertex_count());
  std::vector<std::uint8_t> traversed(fine.edge_count(), 0);
  for (const Loop& loop : s.loops) {
    for (EdgeId e : loop.edges) {
      traversed[e] = 1;
      uf.unite(fine.edge(e).u, fine.edge(e).v);
    }
  }
  TraceClusters out;
  out.labels = canonical_labels(uf, original_.vertex_count(), &out.cluster_count);
  out.open_edges.assign(original_.edge_count(), 0);
  const auto m = static_cast<std::size_t>(pieces_);
  for (std::size_t e = 0; e < original_.edge_count(); ++e) {
    bool all = true;
    for (std::size_t p = 0; p < m && all; ++p) all = traversed[e * m + p] != 0;
    out.open_edges[e] = all ? 1 : 0;
  }
  return out;
}

TraceClusters metric_clusters_by_subdivision(const MetricGraph& g, double alpha, int pieces, Rng& rng) {
  return SubdivisionClusterSampler(g, pieces).sample(alpha, rng);
}

// ---- star coverage -------------------------------------------------------------

namespace {

std::vector<EdgeId> star_edges(const MetricGraph& g, VertexId x) {
  g.require_vertex(x);
  std::vector<EdgeId> edges;
  for (const Neighbor& nb : g.neighbors(x)) {
    edges.push_back(nb.edge);
    for (const Neighbor& nb2 : g.neighbors(nb.vertex)) edges.push_back(nb2.edge);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

bool covers(const std::vector<EdgeId>& star, const Loop& loop) {
  if (star.empty()) return false;
  std::vector<char> hit(star.size(), 0);
  std::size_t count = 0;
  for (EdgeId e : loop.edges) {
    auto it = std::lower_bound(star.begin(), star.end(), e);
    if (it != star.end() && *it == e && !hit[it - star.begin()]) {
      hit[it - star.begin()] = 1;
      if (++count == star.size()) return true;
    }
  }
  return false;
}

}  // namespace

bool loop_covers_star(const MetricGraph& g, const Loop& loop, VertexId x) { return covers(star_edges(g, x), loop); }

bool single_loop_covers_star(const MetricGraph& g, const LoopSoupSample& sample, VertexId x) {
  const auto star = star_edges(g, x);
  return std::any_of(sample.loops.begin(), sample.loops.end(), [&](const Loop& l) { return covers(star, l); });
}

StarCoverEstimate estimate_star_cover(const MetricGraph& g, VertexId x, double alpha, const RunOptions& options) {
  if (!(alpha > 0.0)) throw InvalidArgument("estimate_star_cover: alpha must be positive");
  g.require_vertex(x);
  std::vector<VertexId> order{x};
  for (VertexId v : default_elimination_order(g)) {
    if (v != x) order.push_back(v);
  }
  const LoopSoupSampler sampler(g, std::move(order), 1);
  const auto star = star_edges(g, x);

  StarCoverEstimate out;
  out.loop_mass = sampler.loop_mass(0);
  if (out.loop_mass > 0.0 && !star.empty()) {
    // tail[k] = P[K >= k] for K ~ Log(r); tail[1] = 1.
    const double r = sampler.return_probability(0);
    std::vector<double> terms{0.0};
    for (std::uint64_t k = 1;; ++k) {
      const double t = std::exp(static_cast<double>(k) * std::log(r) - std::log(static_cast<double>(k)));
      if (!(t > 0.0) || k > 100000) break;
      terms.push_back(t / out.loop_mass);
    }
    std::vector<double> tail(terms.size() + 1, 0.0);
    for (std::size_t k = terms.size() - 1; k >= 1; --k) tail[k] = tail[k + 1] + terms[k];
    tail[1] = 1.0;
    const std::uint64_t cap = terms.size() - 1;
    out.max_excursions = cap;

    RunOptions opt = options;
    opt.tag = options.tag + "/star_cover";
    const Moments m = run_replicas(2, opt, [&](std::uint64_t, Rng& rng, std::span<double> o) {
      Loop loop;
      loop.base = x;
      loop.path.push_back(x);
      std::vector<char> hit(star.size(), 0);
      std::size_t count = 0;
      o[0] = o[1] = 0.0;
      for (std::uint64_t k = 1; k <= cap; ++k) {
        const std::size_t from = loop.edges.size();
        sampler.append_excursion(0, rng, loop);
        for (std::size_t j = from; j < loop.edges.size(); ++j) {
          auto it = std::lower_bound(star.begin(), star.end(), loop.edges[j]);
          if (it != star.end() && *it == loop.edges[j] && !hit[it - star.begin()]) {
            hit[it - star.begin()] = 1;
            ++count;
          }
        }
        if (count == star.size()) {
          o[0] = tail[k];
          o[1] = 1.0;
          return;
        }
      }
    });
    out.loops = m.count();
    out.covered = static_cast<std::uint64_t>(std::llround(m.sum(1)));
    out.cover_fraction = m.mean(0);
    out.cover_fraction_se = m.standard_error(0);
    const double rate = alpha * out.loop_mass;
    out.probability = -std::expm1(-rate * out.cover_fraction);
    out.standard_error = rate * std::exp(-rate * out.cover_fraction) * out.cover_fraction_se;
  }
  out.c_hat = out.probability > 0.0 ? 1.0 / out.probability : std::numeric_limits<double>::infinity();
  return out;
}

// ---- dumps ----------------------------------------------------------------------

void write_loops_jsonl(const LoopSoupSample& sample, std::ostream& out) {
  for (const Loop& loop : sample.loops) {
    out << nlohmann::json{{"base", loop.base}, {"path", loop.path}, {"holds", loop.holds}}.dump() << '\n';
  }
}

void write_occupation_csv(const LoopSoupSample& sample, std::ostream& out) {
  out << "vertex,l\n";
  out.precision(17);
  for (std::size_t x = 0; x < sample.occupation.size(); ++x) out << x << ',' << sample.occupation[x] << '\n';
}

}  // namespace loopperc
