#include "loopperc/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "loopperc/error.hpp"
#include "loopperc/experiments.hpp"
#include "loopperc/gff.hpp"
#include "loopperc/loopsoup.hpp"
#include "loopperc/montecarlo.hpp"
#include "loopperc/noise.hpp"
#include "loopperc/potential.hpp"

#ifndef LOOPPERC_VERSION
#define LOOPPERC_VERSION "unknown"
#endif

namespace loopperc {

std::string version_string() { return LOOPPERC_VERSION; }

namespace {

const std::set<std::string> kCommonKeys = {"kind", "graph", "replicas", "seed", "output", "threads", "dry_run"};

const std::map<std::string, std::set<std::string>> kKindKeys = {
    {"two_point", {"pairs"}},
    {"occupation", {"alpha", "vertex"}},
    {"russo", {"x0", "target", "n", "epsilon", "delta", "pivotal_mode"}},
    {"fkg", {"x0", "epsilon", "events"}},
    {"fn_curve", {"x0", "n_grid", "eps_grid", "truncation_check", "M"}},
    {"ode_scan", {"x0", "n", "eps_grid", "delta", "star_samples"}},
    {"threshold_scan", {"x0", "n_grid", "eps_grid", "alpha_grid", "m"}},
    {"capacity", {"sets"}},
};

const std::map<std::string, std::set<std::string>> kGraphKeys = {
    {"two_vertex", {"weight", "kappa"}},
    {"path", {"count", "weight", "kappa"}},
    {"lattice_box", {"dimension", "radius", "weight", "boundary_killing", "bulk_killing"}},
    {"regular_tree", {"degree", "depth", "weight", "boundary_killing"}},
    {"file", {"path"}},
};

[[noreturn]] void fail(const std::string& path, const std::string& message) {
  throw ConfigError(path + ": " + message);
}

double get_number(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

double get_in_range(const nlohmann::json& j, const std::string& path, double lo, double hi, bool hi_open = false) {
  const double v = get_number(j, path);
  if (v < lo || v > hi || (hi_open && v == hi)) {
    std::ostringstream s;
    s << "value " << v << " out of range [" << lo << ", " << hi << (hi_open ? ")" : "]");
    fail(path, s.str());
  }
  return v;
}

std::int64_t get_integer(const nlohmann::json& j, const std::string& path, std::int64_t lo, std::int64_t hi) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  const std::int64_t v = j.get<std::int64_t>();
  if (v < lo || v > hi) fail(path, "value " + std::to_string(v) + " out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

std::uint64_t get_unsigned(const nlohmann::json& j, const std::string& path, std::uint64_t lo) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    fail(path, "expected a nonnegative integer");
  }
  const std::uint64_t v = j.get<std::uint64_t>();
  if (v < lo) fail(path, "value " + std::to_string(v) + " below minimum " + std::to_string(lo));
  return v;
}

bool get_bool(const nlohmann::json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected true or false");
  return j.get<bool>();
}

std::string get_string(const nlohmann::json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

std::vector<double> get_grid(const nlohmann::json& j, const std::string& path, double lo, double hi) {
  if (!j.is_array() || j.empty()) fail(path, "expected a nonempty array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_in_range(j[i], path + "[" + std::to_string(i) + "]", lo, hi));
  return out;
}

void check_vertex_ref(const nlohmann::json& j, const std::string& path) {
  if (j.is_number_integer()) {
    if (j.get<std::int64_t>() < 0) fail(path, "vertex id must be nonnegative");
    return;
  }
  if (j.is_array() && !j.empty() && std::all_of(j.begin(), j.end(), [](const auto& c) { return c.is_number_integer(); })) return;
  fail(path, "expected a vertex id or a coordinate array");
}

void check_vertex_list(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a nonempty array of vertices");
  for (std::size_t i = 0; i < j.size(); ++i) check_vertex_ref(j[i], path + "[" + std::to_string(i) + "]");
}

nlohmann::json canonical_graph(const nlohmann::json& j) {
  const std::string path = "$.graph";
  if (!j.is_object()) fail(path, "expected an object");
  if (!j.contains("family")) fail(path + ".family", "missing required key");
  const std::string family = get_string(j["family"], path + ".family");
  const auto it = kGraphKeys.find(family);
  if (it == kGraphKeys.end()) fail(path + ".family", "unknown graph family '" + family + "'");
  for (const auto& [key, _] : j.items()) {
    if (key != "family" && !it->second.count(key)) fail(path + "." + key, "unknown key for family " + family);
  }
  auto opt = [&](const char* key, const nlohmann::json& def) { return j.contains(key) ? j[key] : def; };
  nlohmann::json out = {{"family", family}};
  if (family == "two_vertex") {
    out["weight"] = get_in_range(opt("weight", 1.0), path + ".weight", 1e-300, 1e300);
    out["kappa"] = get_in_range(opt("kappa", 1.0), path + ".kappa", 0.0, 1e300);
  } else if (family == "path") {
    if (!j.contains("count")) fail(path + ".count", "missing required key");
    out["count"] = get_integer(j["count"], path + ".count", 1, 4'000'000);
    out["weight"] = get_in_range(opt("weight", 1.0), path + ".weight", 1e-300, 1e300);
    out["kappa"] = get_in_range(opt("kappa", 1.0), path + ".kappa", 0.0, 1e300);
  } else if (family == "lattice_box") {
    for (const char* key : {"dimension", "radius"}) {
      if (!j.contains(key)) fail(path + "." + key, "missing required key");
    }
    out["dimension"] = get_integer(j["dimension"], path + ".dimension", 1, 6);
    out["radius"] = get_integer(j["radius"], path + ".radius", 1, 1000);
    out["weight"] = get_in_range(opt("weight", 1.0), path + ".weight", 1e-300, 1e300);
    out["boundary_killing"] = get_bool(opt("boundary_killing", true), path + ".boundary_killing");
    out["bulk_killing"] = get_in_range(opt("bulk_killing", 0.0), path + ".bulk_killing", 0.0, 1e300);
  } else if (family == "regular_tree") {
    for (const char* key : {"degree", "depth"}) {
      if (!j.contains(key)) fail(path + "." + key, "missing required key");
    }
    out["degree"] = get_integer(j["degree"], path + ".degree", 3, 64);
    out["depth"] = get_integer(j["depth"], path + ".depth", 1, 64);
    out["weight"] = get_in_range(opt("weight", 1.0), path + ".weight", 1e-300, 1e300);
    out["boundary_killing"] = get_bool(opt("boundary_killing", true), path + ".boundary_killing");
  } else {
    if (!j.contains("path")) fail(path + ".path", "missing required key");
    out["path"] = get_string(j["path"], path + ".path");
  }
  return out;
}

}  // namespace

MetricGraph build_graph(const nlohmann::json& spec) {
  const nlohmann::json g = canonical_graph(spec);
  const std::string family = g["family"];
  if (family == "two_vertex") return build_two_vertex(g["weight"], g["kappa"]);
  if (family == "path") return build_path(g["count"].get<std::size_t>(), g["weight"], g["kappa"]);
  if (family == "lattice_box") {
    return build_lattice_box(g["dimension"], g["radius"], g["weight"], g["boundary_killing"], g["bulk_killing"]);
  }
  if (family == "regular_tree") return build_regular_tree(g["degree"], g["depth"], g["weight"], g["boundary_killing"]);
  return read_graph_file(g["path"]);
}

ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) fail("$", "expected a JSON object");
  if (!j.contains("kind")) fail("$.kind", "missing required key");
  ExperimentConfig c;
  c.kind = get_string(j["kind"], "$.kind");
  const auto kind_it = kKindKeys.find(c.kind);
  if (kind_it == kKindKeys.end()) fail("$.kind", "unknown experiment kind '" + c.kind + "'");
  const auto& allowed = kind_it->second;
  for (const auto& [key, _] : j.items()) {
    if (kCommonKeys.count(key) || allowed.count(key)) continue;
    bool known = false;
    for (const auto& [kind, keys] : kKindKeys) known = known || keys.count(key);
    fail("$." + key, known ? "key not used by kind " + c.kind : "unknown key");
  }
  if (!j.contains("graph")) fail("$.graph", "missing required key");
  c.graph = canonical_graph(j["graph"]);

  auto has = [&](const char* key) { return j.contains(key); };
  auto require = [&](const char* key) {
    if (!has(key)) fail(std::string("$.") + key, "missing required key for kind " + c.kind);
    return j[key];
  };

  if (has("replicas")) c.replicas = get_unsigned(j["replicas"], "$.replicas", 1);
  if (has("seed") && !j["seed"].is_null()) c.seed = get_unsigned(j["seed"], "$.seed", 0);
  if (has("output")) c.output = get_string(j["output"], "$.output");
  if (has("threads")) c.threads = static_cast<unsigned>(get_integer(j["threads"], "$.threads", 0, 4096));
  if (has("dry_run")) c.dry_run = get_bool(j["dry_run"], "$.dry_run");

  if (c.kind == "two_point") {
    const auto& pairs = require("pairs");
    if (!pairs.is_array() || pairs.empty()) fail("$.pairs", "expected a nonempty array of vertex pairs");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const std::string p = "$.pairs[" + std::to_string(i) + "]";
      if (!pairs[i].is_array() || pairs[i].size() != 2) fail(p, "expected [x, y]");
      check_vertex_ref(pairs[i][0], p + "[0]");
      check_vertex_ref(pairs[i][1], p + "[1]");
    }
    c.pairs = pairs;
  } else if (c.kind == "occupation") {
    c.alpha = get_in_range(require("alpha"), "$.alpha", 1e-12, 1e6);
    c.vertex = require("vertex");
    check_vertex_ref(c.vertex, "$.vertex");
    if (c.replicas < 10000) fail("$.replicas", "occupation law test needs at least 10000 replicas");
  } else if (c.kind == "russo") {
    c.epsilon = get_in_range(require("epsilon"), "$.epsilon", 0.0, 0.5, true);
    c.delta = get_in_range(require("delta"), "$.delta", 0.0, 0.5, true);
    if (!(c.delta > 0.0)) fail("$.delta", "value must be positive");
    if (!(c.epsilon + c.delta < 0.5)) fail("$.delta", "epsilon + delta must stay below 1/2");
    if (has("target")) {
      c.target = j["target"];
      check_vertex_list(c.target, "$.target");
    } else {
      c.n = static_cast<std::uint32_t>(get_integer(require("n"), "$.n", 1, 1000));
    }
    if (has("n") && has("target")) fail("$.n", "give either n or target, not both");
    if (has("pivotal_mode")) {
      c.pivotal_mode = get_string(j["pivotal_mode"], "$.pivotal_mode");
      if (c.pivotal_mode != "upper_semi" && c.pivotal_mode != "alternative") {
        fail("$.pivotal_mode", "expected \"upper_semi\" or \"alternative\"");
      }
    }
  } else if (c.kind == "fkg") {
    c.epsilon = get_in_range(require("epsilon"), "$.epsilon", 0.0, 1.0, true);
    if (has("events")) {
      const auto& ev = j["events"];
      if (!ev.is_array() || ev.empty()) fail("$.events", "expected a nonempty array of {a, b} pairs");
      for (std::size_t i = 0; i < ev.size(); ++i) {
        const std::string p = "$.events[" + std::to_string(i) + "]";
        if (!ev[i].is_object()) fail(p, "expected {\"a\": event, \"b\": event}");
        for (const auto& [key, e] : ev[i].items()) {
          if (key != "a" && key != "b") fail(p + "." + key, "unknown key");
          const std::string q = p + "." + key;
          if (!e.is_object() || e.size() != 1) fail(q, "expected {\"connect\": [from, to]} or {\"cover\": [edges]}");
          if (e.contains("connect")) {
            const auto& cn = e["connect"];
            if (!cn.is_array() || cn.size() != 2) fail(q + ".connect", "expected [from, to]");
            check_vertex_list(cn[0], q + ".connect[0]");
            check_vertex_list(cn[1], q + ".connect[1]");
          } else if (e.contains("cover")) {
            const auto& cv = e["cover"];
            if (!cv.is_array() || cv.empty()) fail(q + ".cover", "expected a nonempty edge list");
            for (std::size_t k = 0; k < cv.size(); ++k) get_unsigned(cv[k], q + ".cover[" + std::to_string(k) + "]", 0);
          } else {
            fail(q, "expected \"connect\" or \"cover\"");
          }
        }
        if (!ev[i].contains("a") || !ev[i].contains("b")) fail(p, "both a and b are required");
      }
      c.events = ev;
    }
  } else if (c.kind == "fn_curve") {
    c.eps_grid = get_grid(require("eps_grid"), "$.eps_grid", 0.0, 1.0);
    const auto& ng = require("n_grid");
    if (!ng.is_array() || ng.empty()) fail("$.n_grid", "expected a nonempty array");
    for (std::size_t i = 0; i < ng.size(); ++i) {
      c.n_grid.push_back(static_cast<std::uint32_t>(get_integer(ng[i], "$.n_grid[" + std::to_string(i) + "]", 0, 1000)));
    }
    if (has("truncation_check")) c.truncation_check = get_bool(j["truncation_check"], "$.truncation_check");
    if (has("M")) c.truncation_radius = static_cast<int>(get_integer(j["M"], "$.M", 1, 1000));
    if (c.truncation_check && c.graph["family"] != "lattice_box") {
      fail("$.truncation_check", "the truncation diagnostic needs a lattice_box graph");
    }
  } else if (c.kind == "ode_scan") {
    c.n = static_cast<std::uint32_t>(get_integer(require("n"), "$.n", 1, 1000));
    c.eps_grid = get_grid(require("eps_grid"), "$.eps_grid", 0.0, 0.5);
    c.delta = get_in_range(require("delta"), "$.delta", 0.0, 0.5, true);
    if (!(c.delta > 0.0)) fail("$.delta", "value must be positive");
    std::vector<double> sorted = c.eps_grid;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (!(sorted[i] + c.delta < 0.5)) fail("$.eps_grid", "grid point plus delta must stay below 1/2");
      if (i > 0 && !(sorted[i] - sorted[i - 1] >= 2.0 * c.delta)) fail("$.delta", "delta must be at most half the grid spacing");
    }
    if (has("star_samples")) c.star_samples = get_unsigned(j["star_samples"], "$.star_samples", 1);
  } else if (c.kind == "threshold_scan") {
    const auto& ng = require("n_grid");
    if (!ng.is_array() || ng.empty()) fail("$.n_grid", "expected a nonempty array");
    for (std::size_t i = 0; i < ng.size(); ++i) {
      c.n_grid.push_back(static_cast<std::uint32_t>(get_integer(ng[i], "$.n_grid[" + std::to_string(i) + "]", 0, 1000)));
    }
    if (has("eps_grid") == has("alpha_grid")) fail("$", "give exactly one of eps_grid and alpha_grid");
    if (has("eps_grid")) c.eps_grid = get_grid(j["eps_grid"], "$.eps_grid", 0.0, 1.0);
    if (has("alpha_grid")) {
      c.alpha_grid = get_grid(j["alpha_grid"], "$.alpha_grid", 0.0, 1e6);
      c.m = static_cast<int>(get_integer(require("m"), "$.m", 1, 1024));
    } else if (has("m")) {
      fail("$.m", "subdivision only applies to alpha_grid scans");
    }
  } else if (c.kind == "capacity") {
    const auto& sets = require("sets");
    if (!sets.is_array() || sets.empty()) fail("$.sets", "expected a nonempty array of vertex sets");
    for (std::size_t i = 0; i < sets.size(); ++i) check_vertex_list(sets[i], "$.sets[" + std::to_string(i) + "]");
    c.sets = sets;
  }
  if (has("x0")) {
    check_vertex_ref(j["x0"], "$.x0");
    c.x0 = j["x0"];
  }
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("$: malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

nlohmann::json ExperimentConfig::canonical() const {
  nlohmann::json j = result_defining();
  j["output"] = output;
  j["threads"] = threads;
  j["dry_run"] = dry_run;
  return j;
}

nlohmann::json ExperimentConfig::result_defining() const {
  nlohmann::json j = {{"kind", kind}, {"graph", graph}, {"replicas", replicas}};
  j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
  if (kind == "two_point") {
    j["pairs"] = pairs;
  } else if (kind == "occupation") {
    j["alpha"] = alpha;
    j["vertex"] = vertex;
  } else if (kind == "russo") {
    j["x0"] = x0;
    j["epsilon"] = epsilon;
    j["delta"] = delta;
    if (target.is_null()) {
      j["n"] = n;
    } else {
      j["target"] = target;
    }
    j["pivotal_mode"] = pivotal_mode;
  } else if (kind == "fkg") {
    j["x0"] = x0;
    j["epsilon"] = epsilon;
    j["events"] = events;
  } else if (kind == "fn_curve") {
    j["x0"] = x0;
    j["n_grid"] = n_grid;
    j["eps_grid"] = eps_grid;
    j["truncation_check"] = truncation_check;
    j["M"] = truncation_radius ? nlohmann::json(*truncation_radius) : nlohmann::json(nullptr);
  } else if (kind == "ode_scan") {
    j["x0"] = x0;
    j["n"] = n;
    j["eps_grid"] = eps_grid;
    j["delta"] = delta;
    j["star_samples"] = star_samples;
  } else if (kind == "threshold_scan") {
    j["x0"] = x0;
    j["n_grid"] = n_grid;
    if (alpha_grid.empty()) {
      j["eps_grid"] = eps_grid;
    } else {
      j["alpha_grid"] = alpha_grid;
      j["m"] = m;
    }
  } else if (kind == "capacity") {
    j["sets"] = sets;
  }
  return j;
}

// ---- running -------------------------------------------------------------------

namespace {

VertexId resolve_vertex(const MetricGraph& g, const nlohmann::json& ref, const std::string& path) {
  if (ref.is_null()) return g.root();
  if (ref.is_number_integer()) {
    const auto id = ref.get<std::int64_t>();
    if (id < 0 || static_cast<std::uint64_t>(id) >= g.vertex_count()) fail(path, "vertex id out of range");
    return static_cast<VertexId>(id);
  }
  const std::vector<int> coords = ref.get<std::vector<int>>();
  const auto v = g.vertex_at(coords);
  if (!v) fail(path, "no vertex at these coordinates");
  return *v;
}

VertexSet resolve_set(const MetricGraph& g, const nlohmann::json& refs, const std::string& path) {
  std::vector<VertexId> ids;
  for (std::size_t i = 0; i < refs.size(); ++i) ids.push_back(resolve_vertex(g, refs[i], path + "[" + std::to_string(i) + "]"));
  return VertexSet(std::move(ids));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// Results CSV: experiment, kind-specific parameter columns, estimate, se,
// ci_lo, ci_hi, N, seed, config_hash, version.
class CsvTable {
 public:
  CsvTable(std::string experiment, std::vector<std::string> params, std::string hash)
      : experiment_(std::move(experiment)), params_(std::move(params)), hash_(std::move(hash)) {}

  void add(const std::vector<std::string>& params, double estimate, double se, Interval ci, std::uint64_t n,
           std::uint64_t seed) {
    std::ostringstream row;
    row << experiment_;
    for (const auto& p : params) row << ',' << p;
    row << ',' << fmt(estimate) << ',' << fmt(se) << ',' << fmt(ci.lo) << ',' << fmt(ci.hi) << ',' << n << ',' << seed
        << ',' << hash_ << ',' << version_string() << '\n';
    rows_ += row.str();
  }
  void add(const std::vector<std::string>& params, const EstimateReport& r) {
    add(params, r.estimate, r.standard_error, r.interval, r.replicas, r.master_seed);
  }

  std::string str() const {
    std::string head = "experiment";
    for (const auto& p : params_) head += "," + p;
    head += ",estimate,se,ci_lo,ci_hi,N,seed,config_hash,version\n";
    return head + rows_;
  }

 private:
  std::string experiment_;
  std::vector<std::string> params_;
  std::string hash_;
  std::string rows_;
};

nlohmann::json plan(const ExperimentConfig& c, const MetricGraph& g) {
  return {{"kind", c.kind},
          {"vertices", g.vertex_count()},
          {"edges", g.edge_count()},
          {"replicas", c.replicas},
          {"threads", resolve_threads(c.threads)},
          {"config", c.canonical()}};
}

IncreasingEvent parse_event(const MetricGraph& g, const nlohmann::json& e, const std::string& path) {
  if (e.contains("connect")) {
    return ConnectEvent{resolve_set(g, e["connect"][0], path + ".connect[0]"),
                        resolve_set(g, e["connect"][1], path + ".connect[1]")};
  }
  CoverEvent cover;
  for (const auto& id : e["cover"]) {
    const auto edge = id.get<std::uint64_t>();
    if (edge >= g.edge_count()) fail(path + ".cover", "edge id out of range");
    cover.edges.push_back(static_cast<EdgeId>(edge));
  }
  return cover;
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& c) {
  const MetricGraph g = build_graph(c.graph);
  RunOutcome outcome;
  if (c.dry_run) {
    outcome.dry_run = true;
    outcome.summary = plan(c, g);
    return outcome;
  }
  const bool samples = c.kind != "capacity";
  if (samples && !c.seed) throw ConfigError("$.seed: a seed is required to sample");
  const std::uint64_t seed = c.seed.value_or(0);
  const nlohmann::json defining = c.result_defining();
  const std::string hash = config_hash(defining);
  RunOptions opt;
  opt.replicas = c.replicas;
  opt.master_seed = seed;
  opt.tag = c.kind;
  opt.threads = c.threads;

  nlohmann::json results;
  std::string csv;

  if (c.kind == "two_point") {
    std::vector<std::pair<VertexId, VertexId>> pairs;
    for (std::size_t i = 0; i < c.pairs.size(); ++i) {
      const std::string p = "$.pairs[" + std::to_string(i) + "]";
      pairs.emplace_back(resolve_vertex(g, c.pairs[i][0], p + "[0]"), resolve_vertex(g, c.pairs[i][1], p + "[1]"));
    }
    const GffSampler sampler(g);
    auto fn = [&](std::uint64_t, Rng& rng, std::span<double> out) {
      const TraceClusters cl = clusters_at_half(g, sampler, rng);
      for (std::size_t k = 0; k < pairs.size(); ++k) out[k] = cl.labels[pairs[k].first] == cl.labels[pairs[k].second];
    };
    const Moments m = run_replicas(pairs.size(), opt, fn);
    std::vector<VertexId> touched;
    for (const auto& [x, y] : pairs) {
      touched.push_back(x);
      touched.push_back(y);
    }
    GreenOptions go;
    go.evaluate_on = VertexSet(touched);
    const GreenTable green = green_table(g, go);
    CsvTable table("two_point", {"x", "y", "exact"}, hash);
    results = nlohmann::json::array();
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto [x, y] = pairs[k];
      const EstimateReport r = bernoulli_report(m, k, seed, hash);
      const double exact = two_point_exact(green, x, y);
      const double z = r.standard_error > 0 ? (r.estimate - exact) / r.standard_error : 0.0;
      table.add({std::to_string(x), std::to_string(y), fmt(exact)}, r);
      results.push_back({{"x", x}, {"y", y}, {"exact", exact}, {"z", z}, {"report", to_json(r)}});
    }
    csv = table.str();
  } else if (c.kind == "occupation") {
    const VertexId x = resolve_vertex(g, c.vertex, "$.vertex");
    const LoopSoupSampler soup(g);
    std::vector<double> samples(c.replicas);
    auto fn = [&](std::uint64_t i, Rng& rng, std::span<double> out) {
      const LoopSoupSample s = soup.sample(c.alpha, rng, {.include_trivial = true, .record_holds = true});
      samples[i] = s.occupation[x];
      out[0] = samples[i];
    };
    const Moments m = run_replicas(1, opt, fn);
    GreenOptions go;
    go.evaluate_on = VertexSet{x};
    const double gxx = green_table(g, go)(x, x);
    const KsResult ks = occupation_marginal_test(samples, c.alpha, gxx);
    const EstimateReport r = mean_report(m, 0, seed, hash);
    CsvTable table("occupation", {"vertex", "alpha", "expected_mean", "ks_statistic", "ks_p_value"}, hash);
    table.add({std::to_string(x), fmt(c.alpha), fmt(c.alpha * gxx), fmt(ks.statistic), fmt(ks.p_value)}, r);
    csv = table.str();
    results = {{"vertex", x},
               {"alpha", c.alpha},
               {"green_xx", gxx},
               {"expected_mean", c.alpha * gxx},
               {"ks_statistic", ks.statistic},
               {"ks_p_value", ks.p_value},
               {"report", to_json(r)}};
  } else if (c.kind == "russo") {
    const VertexId x0 = resolve_vertex(g, c.x0, "$.x0");
    const VertexSet target = c.target.is_null() ? sphere(g, x0, c.n) : resolve_set(g, c.target, "$.target");
    if (target.empty()) fail("$.n", "sphere lies outside the graph");
    const PivotalMode mode = c.pivotal_mode == "alternative" ? PivotalMode::Alternative : PivotalMode::UpperSemi;
    const RussoReport r = russo_check(g, x0, target, c.epsilon, c.delta, opt, mode);
    CsvTable table("russo", {"side", "epsilon", "delta"}, hash);
    table.add({"lhs", fmt(c.epsilon), fmt(c.delta)}, r.lhs, r.se_lhs, r.ci_lhs, r.replicas, seed);
    table.add({"rhs", fmt(c.epsilon), fmt(c.delta)}, r.rhs, r.se_rhs, r.ci_rhs, r.replicas, seed);
    csv = table.str();
    results = to_json(r);
  } else if (c.kind == "fkg") {
    const VertexId x0 = resolve_vertex(g, c.x0, "$.x0");
    std::vector<EventPair> pairs;
    if (c.events.is_null()) {
      pairs = default_fkg_battery(g, x0);
    } else {
      for (std::size_t i = 0; i < c.events.size(); ++i) {
        const std::string p = "$.events[" + std::to_string(i) + "]";
        pairs.emplace_back(parse_event(g, c.events[i]["a"], p + ".a"), parse_event(g, c.events[i]["b"], p + ".b"));
      }
    }
    const FkgReport r = fkg_check(g, pairs, c.epsilon, opt);
    CsvTable table("fkg", {"event_a", "event_b", "violation"}, hash);
    for (const FkgRow& row : r.rows) {
      const Interval ci{row.covariance - kZ95 * row.standard_error, row.covariance + kZ95 * row.standard_error};
      table.add({'"' + row.event_a + '"', '"' + row.event_b + '"', row.violation ? "1" : "0"}, row.covariance,
                row.standard_error, ci, r.replicas, seed);
    }
    csv = table.str();
    results = to_json(r);
  } else if (c.kind == "fn_curve") {
    const VertexId x0 = resolve_vertex(g, c.x0, "$.x0");
    const FnGrid fg = fn_grid(g, x0, c.n_grid, c.eps_grid, opt);
    CsvTable table("fn_curve", {"n", "epsilon"}, hash);
    results = {{"rows", nlohmann::json::array()}};
    for (std::uint32_t n : c.n_grid) {
      for (double e : c.eps_grid) {
        const EstimateReport r = fg.report(n, e);
        table.add({std::to_string(n), fmt(e)}, r);
        results["rows"].push_back({{"n", n}, {"epsilon", e}, {"report", to_json(r)}});
      }
    }
    csv = table.str();
    if (c.truncation_check) {
      const int radius = c.truncation_radius.value_or(c.graph["radius"].get<int>());
      nlohmann::json diag = nlohmann::json::array();
      for (std::uint32_t n : c.n_grid) {
        if (static_cast<int>(n) >= radius) continue;
        for (double e : c.eps_grid) {
          auto d = to_json(truncation_diagnostic(c.graph["dimension"], radius, n, e, opt));
          d["n"] = n;
          d["epsilon"] = e;
          diag.push_back(d);
        }
      }
      results["truncation"] = diag;
    }
  } else if (c.kind == "ode_scan") {
    const VertexId x0 = resolve_vertex(g, c.x0, "$.x0");
    const OdeScan scan = ode_inequality_scan(g, x0, c.n, c.eps_grid, c.delta, opt, c.star_samples);
    CsvTable table("ode_scan", {"n", "epsilon", "quantity"}, hash);
    for (const OdeRow& row : scan.rows) {
      table.add({std::to_string(c.n), fmt(row.epsilon), "f"}, row.f);
      table.add({std::to_string(c.n), fmt(row.epsilon), "slope"}, row.slope, row.slope_se, row.slope_ci,
                row.f.replicas, seed);
    }
    csv = table.str();
    results = to_json(scan);
  } else if (c.kind == "threshold_scan") {
    const VertexId x0 = resolve_vertex(g, c.x0, "$.x0");
    const ThresholdScan scan = c.alpha_grid.empty() ? threshold_scan_epsilon(g, x0, c.eps_grid, c.n_grid, opt)
                                                    : threshold_scan_alpha(g, x0, c.alpha_grid, c.n_grid, c.m, opt);
    CsvTable table("threshold_scan", {"model", "parameter", "n", "m"}, hash);
    results = {{"rows", nlohmann::json::array()}, {"diagnostics", scan.diagnostics}};
    for (const ThresholdRow& row : scan.rows) {
      table.add({row.model, fmt(row.parameter), std::to_string(row.n), std::to_string(row.pieces)}, row.report);
      results["rows"].push_back(
          {{"model", row.model}, {"parameter", row.parameter}, {"n", row.n}, {"m", row.pieces}, {"report", to_json(row.report)}});
    }
    csv = table.str();
  } else if (c.kind == "capacity") {
    std::vector<VertexSet> sets;
    std::vector<VertexId> all;
    for (std::size_t i = 0; i < c.sets.size(); ++i) {
      sets.push_back(resolve_set(g, c.sets[i], "$.sets[" + std::to_string(i) + "]"));
      all.insert(all.end(), sets.back().begin(), sets.back().end());
    }
    GreenOptions go;
    go.evaluate_on = VertexSet(all);
    const GreenTable green = green_table(g, go);
    CsvTable table("capacity", {"set_size", "energy"}, hash);
    results = nlohmann::json::array();
    for (const VertexSet& s : sets) {
      const CapacityResult cap = capacity(green, s);
      table.add({std::to_string(s.size()), fmt(cap.energy)}, cap.capacity, 0.0, {cap.capacity, cap.capacity}, 0, seed);
      results.push_back({{"set", s.ids()},
                         {"capacity", cap.capacity},
                         {"energy", cap.energy},
                         {"equilibrium_measure", cap.equilibrium_measure},
                         {"negative_weights", cap.negative_weights}});
    }
    csv = table.str();
  }

  outcome.csv = std::move(csv);
  outcome.summary = {{"kind", c.kind},
                     {"version", version_string()},
                     {"config_hash", hash},
                     {"seed", seed},
                     {"config", defining},
                     {"results", results}};
  return outcome;
}

RunOutcome run_and_write(const ExperimentConfig& config) {
  RunOutcome outcome = run_experiment(config);
  if (outcome.dry_run) return outcome;
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(config.output, ec);
  if (ec) throw ConfigError("$.output: cannot create directory " + config.output + ": " + ec.message());
  const fs::path dir(config.output);
  {
    std::ofstream out(dir / (config.kind + "_results.csv"), std::ios::binary);
    if (!out) throw ConfigError("$.output: cannot write results CSV");
    out << outcome.csv;
  }
  {
    std::ofstream out(dir / (config.kind + "_summary.json"), std::ios::binary);
    if (!out) throw ConfigError("$.output: cannot write summary JSON");
    out << outcome.summary.dump(2) << '\n';
  }
  return outcome;
}

}  // namespace loopperc
