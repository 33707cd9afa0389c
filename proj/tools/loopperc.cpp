#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "loopperc/config.hpp"
#include "loopperc/error.hpp"

namespace {

constexpr const char* kKinds[] = {"two_point", "occupation", "russo", "fkg",
                                  "fn_curve", "ode_scan", "threshold_scan", "capacity"};

struct Overrides {
  std::string config_path;
  std::string graph_json;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> replicas;
  std::optional<unsigned> threads;
  std::optional<std::string> output;
  std::optional<double> alpha;
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::optional<std::uint32_t> n;
  std::optional<int> m;
  bool dry_run = false;
};

void add_common_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("-c,--config", o.config_path, "experiment config (JSON)");
  sub->add_option("--graph", o.graph_json, "graph spec as inline JSON, overrides the config's graph");
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_option("-N,--replicas", o.replicas, "replica count");
  sub->add_option("-j,--threads", o.threads, "worker threads (0: all cores)");
  sub->add_option("-o,--output", o.output, "output directory");
  sub->add_option("--alpha", o.alpha, "loop soup intensity");
  sub->add_option("--epsilon", o.epsilon, "2-bond noise parameter");
  sub->add_option("--delta", o.delta, "finite-difference step");
  sub->add_option("--n", o.n, "radius");
  sub->add_option("--m", o.m, "subdivision");
  sub->add_flag("--dry-run", o.dry_run, "validate and print the plan without sampling");
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw loopperc::ConfigError("$: cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw loopperc::ConfigError(std::string("$: malformed JSON: ") + e.what());
  }
}

int emit_error(const std::string& type, const std::string& message, int code) {
  const nlohmann::json err = {{"error", {{"type", type}, {"message", message}, {"exit_code", code}}}};
  std::cerr << err.dump() << '\n';
  return code;
}

int run(const std::string& kind, const Overrides& o) {
  nlohmann::json j = o.config_path.empty() ? nlohmann::json::object() : load_json(o.config_path);
  if (!j.is_object()) throw loopperc::ConfigError("$: expected a JSON object");
  if (j.contains("kind") && j["kind"] != kind) {
    throw loopperc::ConfigError("$.kind: config is for '" + j["kind"].get<std::string>() + "', not '" + kind + "'");
  }
  j["kind"] = kind;
  if (!o.graph_json.empty()) {
    try {
      j["graph"] = nlohmann::json::parse(o.graph_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw loopperc::ConfigError(std::string("$.graph: malformed JSON: ") + e.what());
    }
  }
  if (o.seed) j["seed"] = *o.seed;
  if (o.replicas) j["replicas"] = *o.replicas;
  if (o.threads) j["threads"] = *o.threads;
  if (o.output) j["output"] = *o.output;
  if (o.alpha) j["alpha"] = *o.alpha;
  if (o.epsilon) j["epsilon"] = *o.epsilon;
  if (o.delta) j["delta"] = *o.delta;
  if (o.n) j["n"] = *o.n;
  if (o.m) j["m"] = *o.m;
  if (o.dry_run) j["dry_run"] = true;

  loopperc::ExperimentConfig config = loopperc::parse_config(j);
  if (!config.seed && !config.dry_run && config.kind != "capacity") {
    std::random_device rd;
    config.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "seed: " << *config.seed << '\n';
  }
  const loopperc::RunOutcome outcome = loopperc::run_and_write(config);
  if (outcome.dry_run) {
    std::cout << outcome.summary.dump(2) << '\n';
  } else {
    std::cout << "wrote " << config.output << '/' << config.kind << "_results.csv and " << config.kind
              << "_summary.json (seed " << config.seed.value_or(0) << ", config " << outcome.summary["config_hash"].get<std::string>()
              << ")\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loop-soup percolation experiments"};
  app.set_version_flag("--version", loopperc::version_string());
  app.require_subcommand(1);
  Overrides o;
  std::string selected;
  for (const char* kind : kKinds) {
    CLI::App* sub = app.add_subcommand(kind, std::string("run the ") + kind + " experiment");
    add_common_flags(sub, o);
    sub->callback([&selected, kind] { selected = kind; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return emit_error("usage", e.what(), 2);
  }
  try {
    return run(selected, o);
  } catch (const loopperc::BudgetError& e) {
    return emit_error("budget", e.what(), 4);
  } catch (const loopperc::NumericError& e) {
    return emit_error("numeric", e.what(), 3);
  } catch (const loopperc::Error& e) {
    return emit_error("config", e.what(), 2);
  } catch (const nlohmann::json::exception& e) {
    return emit_error("config", e.what(), 2);
  } catch (const std::exception& e) {
    return emit_error("internal", e.what(), 1);
  }
}
