#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "loopperc/graph.hpp"
#include "loopperc/loopsoup.hpp"
#include "loopperc/montecarlo.hpp"

namespace loopperc {

// Joint CRN estimates of f_n(eps) = P[x0 <-> sphere(n)] under the exact
// intensity-1/2 trace plus Bernoulli 2-bond noise. Every replica evaluates
// all (n, eps) cells on one loop sample and one noise field.
class FnGrid {
 public:
  FnGrid() = default;
  FnGrid(std::vector<std::uint32_t> n_grid, std::vector<double> eps_grid, Moments moments, std::uint64_t seed)
      : n_grid_(std::move(n_grid)), eps_grid_(std::move(eps_grid)), moments_(std::move(moments)), seed_(seed) {}

  const std::vector<std::uint32_t>& n_grid() const { return n_grid_; }
  const std::vector<double>& eps_grid() const { return eps_grid_; }
  const Moments& moments() const { return moments_; }
  std::size_t cell(std::size_t n_index, std::size_t eps_index) const { return n_index * eps_grid_.size() + eps_index; }
  std::size_t n_index(std::uint32_t n) const;
  std::size_t eps_index(double eps) const;

  double f(std::uint32_t n, double eps) const { return moments_.mean(cell(n_index(n), eps_index(eps))); }
  EstimateReport report(std::uint32_t n, double eps) const;

  // f_a - f_b over paired replicas; z = difference / se.
  struct Contrast {
    double value = 0.0;
    double standard_error = 0.0;
    double z() const { return standard_error > 0.0 ? value / standard_error : (value > 0 ? 1e300 : value < 0 ? -1e300 : 0.0); }
  };
  Contrast difference(std::uint32_t n_a, double eps_a, std::uint32_t n_b, double eps_b) const;
  // log(f(n_large, hi) / f(n_small, hi)) - log(f(n_large, lo) / f(n_small, lo)), delta method.
  Contrast log_ratio_contrast(std::uint32_t n_small, std::uint32_t n_large, double eps_lo, double eps_hi) const;

 private:
  std::vector<std::uint32_t> n_grid_;
  std::vector<double> eps_grid_;
  Moments moments_;
  std::uint64_t seed_ = 0;
};

// Requires a nonempty sphere for every n (B_n inside the truncation).
FnGrid fn_grid(const MetricGraph& g, VertexId x0, std::vector<std::uint32_t> n_grid, std::vector<double> eps_grid,
               const RunOptions& options);

EstimateReport f_n_estimate(const MetricGraph& g, VertexId x0, std::uint32_t n, double epsilon,
                            const RunOptions& options);

// f_n(eps) on Z^d boxes of radius M and 2M (Dirichlet boundary) around the centre.
struct TruncationDiagnostic {
  int radius = 0;
  EstimateReport at_radius;
  EstimateReport at_double_radius;
  double difference = 0.0;
  double standard_error = 0.0;
  bool consistent = false;  // |difference| <= 3 se
};

TruncationDiagnostic truncation_diagnostic(int dimension, int radius, std::uint32_t n, double epsilon,
                                           const RunOptions& options);
nlohmann::json to_json(const TruncationDiagnostic& d);

// ---- ODE scan -------------------------------------------------------------------

struct OdeRow {
  double epsilon = 0.0;
  EstimateReport f;
  double f_plus = 0.0;  // f_n(eps + delta)
  double slope = 0.0;
  double slope_se = 0.0;
  Interval slope_ci;
  double c_hat = 0.0;              // slope / (1 - C f)
  bool positive = false;           // slope > 3 se
  bool in_bound_region = false;    // f < 1 / (2C)
};

struct OdeScan {
  std::uint32_t n = 0;
  double delta = 0.0;
  StarCoverEstimate star;
  std::vector<OdeRow> rows;
  bool all_positive = false;
  bool assertion_holds = false;    // positive wherever f < 1/(2C)
  double witness_ratio = 0.0;      // max |c_hat| / min |c_hat|
};

OdeScan ode_inequality_scan(const MetricGraph& g, VertexId x0, std::uint32_t n, const std::vector<double>& eps_grid,
                            double delta, const RunOptions& options, std::uint64_t star_replicas);
nlohmann::json to_json(const OdeScan& scan);

// ---- threshold scan --------------------------------------------------------------

struct ThresholdRow {
  std::string model;  // "epsilon" or "alpha"
  double parameter = 0.0;
  std::uint32_t n = 0;
  int pieces = 0;     // subdivision used for alpha rows, 0 for epsilon rows
  EstimateReport report;
};

struct ThresholdScan {
  std::vector<ThresholdRow> rows;
  FnGrid epsilon_grid;  // populated for epsilon scans
  nlohmann::json diagnostics;
};

// Exact 1/2-plus-noise rows. Diagnostics: decay in n at eps = 0 and the
// f_max/f_min ratio for every eps.
ThresholdScan threshold_scan_epsilon(const MetricGraph& g, VertexId x0, const std::vector<double>& eps_grid,
                                     const std::vector<std::uint32_t>& n_grid, const RunOptions& options);

// General-alpha rows from subdivision clusters at m and 2m pieces.
ThresholdScan threshold_scan_alpha(const MetricGraph& g, VertexId x0, const std::vector<double>& alpha_grid,
                                   const std::vector<std::uint32_t>& n_grid, int pieces, const RunOptions& options);

}  // namespace loopperc
