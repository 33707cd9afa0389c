#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "loopperc/config.hpp"
#include "loopperc/error.hpp"

using namespace loopperc;

namespace {

std::string message_of(const nlohmann::json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

nlohmann::json minimal_two_point() {
  return {{"kind", "two_point"}, {"graph", {{"family", "two_vertex"}}}, {"pairs", {{0, 1}}}};
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("minimal config round-trips to its canonical form") {
  const ExperimentConfig c = parse_config(minimal_two_point());
  const nlohmann::json canon = c.canonical();
  CHECK(parse_config(canon).canonical() == canon);
  CHECK(canon["replicas"] == 10000);
  CHECK(canon["graph"]["kappa"] == 1.0);
  CHECK(canon["seed"].is_null());
}

TEST_CASE("range and key errors name the offending key") {
  nlohmann::json j = {{"kind", "russo"}, {"graph", {{"family", "lattice_box"}, {"dimension", 2}, {"radius", 2}}},
                      {"n", 2}, {"epsilon", 1.5}, {"delta", 0.01}};
  CHECK(message_of(j).find("$.epsilon") == 0);
  CHECK(message_of(j).find("out of range") != std::string::npos);

  nlohmann::json k = minimal_two_point();
  k["colour"] = "red";
  CHECK(message_of(k).find("$.colour: unknown key") == 0);

  nlohmann::json l = minimal_two_point();
  l["delta"] = 0.1;
  CHECK(message_of(l).find("$.delta: key not used by kind two_point") == 0);

  nlohmann::json m = minimal_two_point();
  m["graph"]["radius"] = 3;
  CHECK(message_of(m).find("$.graph.radius") == 0);

  nlohmann::json n = minimal_two_point();
  n.erase("pairs");
  CHECK(message_of(n).find("$.pairs: missing required key") == 0);

  CHECK(message_of({{"kind", "nope"}, {"graph", {{"family", "two_vertex"}}}}).find("$.kind") == 0);
  CHECK_THROWS_AS(parse_config_text("{not json"), ConfigError);
}

TEST_CASE("golden config reproduces one third") {
  std::ifstream in(std::string(LOOPPERC_SOURCE_DIR) + "/configs/two_vertex_two_point.json");
  REQUIRE(in);
  std::stringstream s;
  s << in.rdbuf();
  ExperimentConfig c = parse_config_text(s.str());
  CHECK(c.replicas == 1000000);
  c.replicas = 200000;
  const RunOutcome out = run_experiment(c);
  const auto& row = out.summary["results"][0];
  CHECK(row["exact"].get<double>() == doctest::Approx(1.0 / 3.0));
  CHECK(std::abs(row["z"].get<double>()) < 4.0);
  CHECK(out.summary["config_hash"].get<std::string>().size() == 16);
  CHECK(out.summary["seed"] == 20240611);
  CHECK(out.summary.contains("version"));
}

TEST_CASE("dry run validates without sampling") {
  nlohmann::json j = {{"kind", "threshold_scan"},
                      {"graph", {{"family", "lattice_box"}, {"dimension", 3}, {"radius", 8}}},
                      {"n_grid", {2, 4, 6}},
                      {"eps_grid", {0.0, 0.2}},
                      {"dry_run", true}};
  const RunOutcome out = run_experiment(parse_config(j));
  CHECK(out.dry_run);
  CHECK(out.summary["vertices"] == 17 * 17 * 17);
  j["dry_run"] = false;
  CHECK_THROWS_AS(run_experiment(parse_config(j)), ConfigError);
}

TEST_CASE("reruns and thread counts give byte-identical files") {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "loopperc_config_test";
  fs::remove_all(base);
  nlohmann::json j = {{"kind", "fn_curve"},
                      {"graph", {{"family", "lattice_box"}, {"dimension", 2}, {"radius", 3}}},
                      {"n_grid", {1, 2}},
                      {"eps_grid", {0.0, 0.1}},
                      {"replicas", 3000},
                      {"seed", 99}};
  std::string csv[3], summary[3];
  const unsigned threads[3] = {1, 1, 4};
  for (int i = 0; i < 3; ++i) {
    j["threads"] = threads[i];
    j["output"] = (base / std::to_string(i)).string();
    run_and_write(parse_config(j));
    csv[i] = read_file(base / std::to_string(i) / "fn_curve_results.csv");
    summary[i] = read_file(base / std::to_string(i) / "fn_curve_summary.json");
  }
  CHECK(!csv[0].empty());
  CHECK(csv[0] == csv[1]);
  CHECK(csv[0] == csv[2]);
  CHECK(summary[0] == summary[2]);
  CHECK(csv[0].rfind("experiment,n,epsilon,estimate,se,ci_lo,ci_hi,N,seed,config_hash,version\n", 0) == 0);
  fs::remove_all(base);
}

TEST_CASE("occupation run follows the Gamma law") {
  nlohmann::json j = {{"kind", "occupation"},
                      {"graph", {{"family", "lattice_box"}, {"dimension", 3}, {"radius", 2}}},
                      {"alpha", 0.5},
                      {"vertex", {0, 0, 0}},
                      {"replicas", 20000},
                      {"seed", 5}};
  const RunOutcome out = run_experiment(parse_config(j));
  const auto& r = out.summary["results"];
  CHECK(r["ks_p_value"].get<double>() > 0.001);
  CHECK(r["expected_mean"].get<double>() == doctest::Approx(0.5 * r["green_xx"].get<double>()));
}

TEST_CASE("vertex references by coordinates") {
  nlohmann::json j = {{"kind", "capacity"},
                      {"graph", {{"family", "lattice_box"}, {"dimension", 2}, {"radius", 2}}},
                      {"sets", {{{0, 0}}, {{0, 0}, {1, 0}}}}};
  const RunOutcome out = run_experiment(parse_config(j));
  const auto& rows = out.summary["results"];
  CHECK(rows[1]["capacity"].get<double>() > rows[0]["capacity"].get<double>());
  j["sets"] = {{{5, 0}}};
  CHECK_THROWS_AS(run_experiment(parse_config(j)), ConfigError);
}

TEST_CASE("every example config parses") {
  for (const auto& entry : std::filesystem::directory_iterator(std::string(LOOPPERC_SOURCE_DIR) + "/configs")) {
    std::ifstream in(entry.path());
    std::stringstream s;
    s << in.rdbuf();
    CHECK_NOTHROW(parse_config_text(s.str()));
  }
}
