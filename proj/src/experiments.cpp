#include "loopperc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "loopperc/error.hpp"
#include "loopperc/gff.hpp"
#include "loopperc/noise.hpp"

namespace loopperc {

std::size_t FnGrid::n_index(std::uint32_t n) const {
  const auto it = std::find(n_grid_.begin(), n_grid_.end(), n);
  if (it == n_grid_.end()) throw InvalidArgument("FnGrid: radius not in grid");
  return static_cast<std::size_t>(it - n_grid_.begin());
}

std::size_t FnGrid::eps_index(double eps) const {
  for (std::size_t i = 0; i < eps_grid_.size(); ++i) {
    if (std::abs(eps_grid_[i] - eps) < 1e-12) return i;
  }
  throw InvalidArgument("FnGrid: epsilon not in grid");
}

EstimateReport FnGrid::report(std::uint32_t n, double eps) const {
  return bernoulli_report(moments_, cell(n_index(n), eps_index(eps)), seed_);
}

FnGrid::Contrast FnGrid::difference(std::uint32_t n_a, double eps_a, std::uint32_t n_b, double eps_b) const {
  const std::size_t a = cell(n_index(n_a), eps_index(eps_a));
  const std::size_t b = cell(n_index(n_b), eps_index(eps_b));
  return {moments_.mean(a) - moments_.mean(b), moments_.standard_error_of_difference(a, b)};
}

FnGrid::Contrast FnGrid::log_ratio_contrast(std::uint32_t n_small, std::uint32_t n_large, double eps_lo,
                                            double eps_hi) const {
  const std::size_t cells[4] = {cell(n_index(n_large), eps_index(eps_hi)), cell(n_index(n_small), eps_index(eps_hi)),
                                cell(n_index(n_large), eps_index(eps_lo)), cell(n_index(n_small), eps_index(eps_lo))};
  const double sign[4] = {1.0, -1.0, -1.0, 1.0};
  Contrast c;
  double var = 0.0;
  for (int j = 0; j < 4; ++j) {
    const double fj = moments_.mean(cells[j]);
    if (!(fj > 0.0)) throw NumericError("log-ratio contrast: an estimate is zero");
    c.value += sign[j] * std::log(fj);
    for (int k = 0; k < 4; ++k) {
      var += sign[j] * sign[k] * moments_.covariance(cells[j], cells[k]) / (fj * moments_.mean(cells[k]));
    }
  }
  c.standard_error = std::sqrt(std::max(0.0, var) / static_cast<double>(moments_.count()));
  return c;
}

namespace {

void validate_epsilons(const std::vector<double>& eps) {
  if (eps.empty()) throw InvalidArgument("empty epsilon grid");
  for (double e : eps) {
    if (!(e >= 0.0 && e <= 1.0)) throw InvalidArgument("epsilon values must lie in [0, 1]");
  }
}

}  // namespace

FnGrid fn_grid(const MetricGraph& g, VertexId x0, std::vector<std::uint32_t> n_grid, std::vector<double> eps_grid,
               const RunOptions& options) {
  g.require_vertex(x0);
  if (n_grid.empty()) throw InvalidArgument("empty radius grid");
  validate_epsilons(eps_grid);

  std::vector<VertexSet> spheres;
  for (std::uint32_t n : n_grid) {
    spheres.push_back(sphere(g, x0, n));
    if (spheres.back().empty()) throw InvalidArgument("sphere of radius " + std::to_string(n) + " lies outside the graph");
  }
  // Evaluation order: ascending epsilon; bonds are opened in buckets.
  std::vector<std::size_t> eps_order(eps_grid.size());
  for (std::size_t i = 0; i < eps_order.size(); ++i) eps_order[i] = i;
  std::stable_sort(eps_order.begin(), eps_order.end(), [&](std::size_t a, std::size_t b) { return eps_grid[a] < eps_grid[b]; });
  std::vector<double> sorted_eps;
  for (std::size_t i : eps_order) sorted_eps.push_back(eps_grid[i]);

  const GffSampler gff(g);
  const TwoBondIndex index(g);
  const std::size_t n_eps = eps_grid.size();

  struct Replica {
    const MetricGraph* g;
    const GffSampler* gff;
    const TwoBondIndex* index;
    const std::vector<VertexSet>* spheres;
    const std::vector<std::size_t>* eps_order;
    const std::vector<double>* sorted_eps;
    VertexId x0;
    std::size_t n_eps;
    std::vector<double> phi;
    std::vector<std::vector<std::uint32_t>> buckets;

    void operator()(std::uint64_t, Rng& rng, std::span<double> out) {
      phi.resize(g->vertex_count());
      gff->sample_into(rng, phi);
      TraceState st(*g, lupu_open_edges(*g, phi, rng));
      const NoiseField field = draw_noise_field(rng);
      buckets.assign(n_eps, {});
      for (std::uint32_t b = 0; b < index->size(); ++b) {
        const double u = field.uniform(b);
        const auto j = static_cast<std::size_t>(std::upper_bound(sorted_eps->begin(), sorted_eps->end(), u) -
                                                sorted_eps->begin());
        if (j < n_eps) buckets[j].push_back(b);
      }
      for (std::size_t j = 0; j < n_eps; ++j) {
        for (std::uint32_t b : buckets[j]) st.open_bond(*g, *index, b);
        const std::size_t e = (*eps_order)[j];
        for (std::size_t k = 0; k < spheres->size(); ++k) {
          out[k * n_eps + e] = st.connected(x0, (*spheres)[k]) ? 1.0 : 0.0;
        }
      }
    }
  };
  // A bond with uniform u is open at eps iff u < eps, i.e. from the first
  // sorted epsilon strictly above u onwards.
  Replica replica{&g, &gff, &index, &spheres, &eps_order, &sorted_eps, x0, n_eps, {}, {}};
  RunOptions opt = options;
  opt.tag = options.tag + "/fn";
  Moments m = run_replicas(n_grid.size() * n_eps, opt, replica);
  return FnGrid(std::move(n_grid), std::move(eps_grid), std::move(m), options.master_seed);
}

EstimateReport f_n_estimate(const MetricGraph& g, VertexId x0, std::uint32_t n, double epsilon,
                            const RunOptions& options) {
  return fn_grid(g, x0, {n}, {epsilon}, options).report(n, epsilon);
}

TruncationDiagnostic truncation_diagnostic(int dimension, int radius, std::uint32_t n, double epsilon,
                                           const RunOptions& options) {
  if (radius <= static_cast<int>(n)) throw InvalidArgument("truncation radius must exceed n");
  TruncationDiagnostic d;
  d.radius = radius;
  const MetricGraph small = build_lattice_box(dimension, radius, 1.0, true);
  const MetricGraph large = build_lattice_box(dimension, 2 * radius, 1.0, true);
  d.at_radius = f_n_estimate(small, small.root(), n, epsilon, options);
  d.at_double_radius = f_n_estimate(large, large.root(), n, epsilon, options);
  d.difference = d.at_double_radius.estimate - d.at_radius.estimate;
  d.standard_error = std::hypot(d.at_radius.standard_error, d.at_double_radius.standard_error);
  d.consistent = std::abs(d.difference) <= 3.0 * d.standard_error;
  return d;
}

nlohmann::json to_json(const TruncationDiagnostic& d) {
  return {{"radius", d.radius},
          {"estimate_M", d.at_radius.estimate},
          {"estimate_2M", d.at_double_radius.estimate},
          {"difference", d.difference},
          {"se", d.standard_error},
          {"consistent", d.consistent}};
}

// ---- ODE scan ----------------------------------------------------------------------

OdeScan ode_inequality_scan(const MetricGraph& g, VertexId x0, std::uint32_t n, const std::vector<double>& eps_grid,
                            double delta, const RunOptions& options, std::uint64_t star_replicas) {
  if (eps_grid.empty()) throw InvalidArgument("ode scan: empty epsilon grid");
  if (!(delta > 0.0)) throw InvalidArgument("ode scan: delta must be positive");
  std::vector<double> grid = eps_grid;
  std::sort(grid.begin(), grid.end());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] + delta < 0.5)) throw InvalidArgument("ode scan: grid points plus delta must lie in [0, 1/2)");
    if (i > 0 && !(grid[i] - grid[i - 1] >= 2.0 * delta)) {
      throw InvalidArgument("ode scan: delta must be at most half the grid spacing");
    }
  }

  std::vector<double> evaluation;
  for (double e : grid) {
    evaluation.push_back(e);
    evaluation.push_back(e + delta);
  }
  const FnGrid fg = fn_grid(g, x0, {n}, evaluation, options);

  OdeScan scan;
  scan.n = n;
  scan.delta = delta;
  RunOptions star_opt = options;
  star_opt.replicas = star_replicas;
  scan.star = estimate_star_cover(g, x0, 0.5, star_opt);
  const double big_c = scan.star.c_hat;

  scan.all_positive = true;
  scan.assertion_holds = true;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    OdeRow row;
    row.epsilon = grid[i];
    row.f = bernoulli_report(fg.moments(), 2 * i, options.master_seed);
    row.f_plus = fg.moments().mean(2 * i + 1);
    row.slope = (row.f_plus - row.f.estimate) / delta;
    row.slope_se = fg.moments().standard_error_of_difference(2 * i + 1, 2 * i) / delta;
    row.slope_ci = {row.slope - kZ95 * row.slope_se, row.slope + kZ95 * row.slope_se};
    row.c_hat = row.slope / (1.0 - big_c * row.f.estimate);
    row.positive = row.slope > 3.0 * row.slope_se;
    row.in_bound_region = row.f.estimate < 1.0 / (2.0 * big_c);
    scan.all_positive = scan.all_positive && row.positive;
    if (row.in_bound_region && !row.positive) scan.assertion_holds = false;
    lo = std::min(lo, std::abs(row.c_hat));
    hi = std::max(hi, std::abs(row.c_hat));
    scan.rows.push_back(row);
  }
  scan.witness_ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  return scan;
}

nlohmann::json to_json(const OdeScan& scan) {
  nlohmann::json rows = nlohmann::json::array();
  for (const OdeRow& r : scan.rows) {
    rows.push_back({{"epsilon", r.epsilon},
                    {"f", to_json(r.f)},
                    {"f_plus", r.f_plus},
                    {"slope", r.slope},
                    {"slope_se", r.slope_se},
                    {"slope_ci", {r.slope_ci.lo, r.slope_ci.hi}},
                    {"c_hat", r.c_hat},
                    {"positive", r.positive},
                    {"in_bound_region", r.in_bound_region}});
  }
  return {{"n", scan.n},
          {"delta", scan.delta},
          {"star_cover",
           {{"probability", scan.star.probability},
            {"se", scan.star.standard_error},
            {"C", scan.star.c_hat},
            {"cover_fraction", scan.star.cover_fraction},
            {"loops", scan.star.loops},
            {"covered", scan.star.covered}}},
          {"rows", rows},
          {"all_positive", scan.all_positive},
          {"assertion_holds", scan.assertion_holds},
          {"witness_ratio", scan.witness_ratio}};
}

// ---- threshold scan ------------------------------------------------------------------

ThresholdScan threshold_scan_epsilon(const MetricGraph& g, VertexId x0, const std::vector<double>& eps_grid,
                                     const std::vector<std::uint32_t>& n_grid, const RunOptions& options) {
  ThresholdScan scan;
  scan.epsilon_grid = fn_grid(g, x0, n_grid, eps_grid, options);
  const FnGrid& fg = scan.epsilon_grid;
  for (double e : eps_grid) {
    for (std::uint32_t n : n_grid) scan.rows.push_back({"epsilon", e, n, 0, fg.report(n, e)});
  }
  nlohmann::json per_eps = nlohmann::json::array();
  for (double e : eps_grid) {
    bool decreasing = true;
    for (std::size_t i = 0; i + 1 < n_grid.size(); ++i) {
      const auto c = fg.difference(n_grid[i], e, n_grid[i + 1], e);
      decreasing = decreasing && c.z() > 3.0;
    }
    const double first = fg.f(n_grid.front(), e), last = fg.f(n_grid.back(), e);
    per_eps.push_back({{"epsilon", e},
                       {"strictly_decreasing_3sigma", decreasing},
                       {"ratio_last_first", first > 0.0 ? last / first : 0.0}});
  }
  scan.diagnostics = {{"per_epsilon", per_eps}};
  return scan;
}

ThresholdScan threshold_scan_alpha(const MetricGraph& g, VertexId x0, const std::vector<double>& alpha_grid,
                                   const std::vector<std::uint32_t>& n_grid, int pieces, const RunOptions& options) {
  g.require_vertex(x0);
  if (pieces < 1) throw InvalidArgument("threshold scan: subdivision must be at least 1");
  if (alpha_grid.empty() || n_grid.empty()) throw InvalidArgument("threshold scan: empty grid");
  for (double a : alpha_grid) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw InvalidArgument("threshold scan: alpha must be nonnegative");
  }
  std::vector<VertexSet> spheres;
  for (std::uint32_t n : n_grid) {
    spheres.push_back(sphere(g, x0, n));
    if (spheres.back().empty()) throw InvalidArgument("sphere of radius " + std::to_string(n) + " lies outside the graph");
  }

  ThresholdScan scan;
  nlohmann::json sensitivity = nlohmann::json::array();
  for (int m : {pieces, 2 * pieces}) {
    const SubdivisionClusterSampler sampler(g, m);
    for (double alpha : alpha_grid) {
      auto fn = [&, alpha](std::uint64_t, Rng& rng, std::span<double> out) {
        if (alpha == 0.0) {
          for (std::size_t k = 0; k < spheres.size(); ++k) out[k] = spheres[k].contains(x0) ? 1.0 : 0.0;
          return;
        }
        const TraceClusters c = sampler.sample(alpha, rng);
        for (std::size_t k = 0; k < spheres.size(); ++k) {
          const auto& s = spheres[k];
          out[k] = std::any_of(s.begin(), s.end(), [&](VertexId y) { return c.labels[y] == c.labels[x0]; }) ? 1.0 : 0.0;
        }
      };
      RunOptions opt = options;
      opt.tag = options.tag + "/alpha";
      const Moments mm = run_replicas(n_grid.size(), opt, fn);
      for (std::size_t k = 0; k < n_grid.size(); ++k) {
        scan.rows.push_back({"alpha", alpha, n_grid[k], m, bernoulli_report(mm, k, options.master_seed)});
      }
    }
  }
  // m-sensitivity: row at m versus the same cell at 2m.
  const std::size_t half = scan.rows.size() / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const auto& a = scan.rows[i];
    const auto& b = scan.rows[half + i];
    sensitivity.push_back({{"alpha", a.parameter},
                           {"n", a.n},
                           {"estimate_m", a.report.estimate},
                           {"estimate_2m", b.report.estimate},
                           {"difference", b.report.estimate - a.report.estimate}});
  }
  scan.diagnostics = {{"m_sensitivity", sensitivity}, {"pieces", pieces}};
  return scan;
}

}  // namespace loopperc
