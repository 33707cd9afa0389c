#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "loopperc/graph.hpp"

namespace loopperc {

// Experiment description read from JSON. `graph` is kept in canonical JSON
// form; vertex references (ids or coordinate arrays) are resolved against the
// built graph at run time.
struct ExperimentConfig {
  std::string kind;  // two_point | occupation | russo | fkg | fn_curve | ode_scan | threshold_scan | capacity
  nlohmann::json graph;

  double alpha = 0.5;
  double epsilon = 0.0;
  double delta = 0.01;
  std::uint32_t n = 1;
  int m = 1;
  std::optional<int> truncation_radius;  // "M"
  std::vector<double> alpha_grid;
  std::vector<double> eps_grid;
  std::vector<std::uint32_t> n_grid;
  nlohmann::json pairs = nlohmann::json::array();   // two_point: [[x, y], ...]
  nlohmann::json vertex;                            // occupation
  nlohmann::json x0;                                // noise experiments; null means the graph root
  nlohmann::json target;                            // russo; null means sphere(x0, n)
  nlohmann::json events;                            // fkg; null means the default battery
  nlohmann::json sets = nlohmann::json::array();    // capacity: [[x, ...], ...]
  std::string pivotal_mode = "upper_semi";
  bool truncation_check = false;
  std::uint64_t star_samples = 200000;

  std::uint64_t replicas = 10000;
  std::optional<std::uint64_t> seed;
  std::string output = "results";
  unsigned threads = 0;
  bool dry_run = false;

  // Full form with defaults filled in, restricted to the keys of `kind`.
  nlohmann::json canonical() const;
  // The part of the canonical form that determines results (no threads,
  // output path or dry-run flag).
  nlohmann::json result_defining() const;
};

// Throws ConfigError with a JSON-path-qualified message.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig parse_config_text(const std::string& text);

MetricGraph build_graph(const nlohmann::json& graph_spec);

struct RunOutcome {
  std::string csv;
  nlohmann::json summary;
  bool dry_run = false;
};

// Runs the experiment in memory. Requires a seed unless dry_run is set.
RunOutcome run_experiment(const ExperimentConfig& config);
// Runs and writes <output>/<kind>_results.csv and <kind>_summary.json.
RunOutcome run_and_write(const ExperimentConfig& config);

std::string version_string();

}  // namespace loopperc
