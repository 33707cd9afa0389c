#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "loopperc/gff.hpp"
#include "loopperc/graph.hpp"
#include "loopperc/montecarlo.hpp"

namespace loopperc {

// 2-bond enumeration of a graph with resolved endpoints (x, center, z).
class TwoBondIndex {
 public:
  explicit TwoBondIndex(const MetricGraph& g);

  std::size_t size() const { return bonds_.size(); }
  const std::vector<TwoBond>& bonds() const { return bonds_; }
  const TwoBond& bond(std::uint32_t b) const { return bonds_[b]; }
  const std::array<VertexId, 3>& ends(std::uint32_t b) const { return ends_[b]; }

 private:
  std::vector<TwoBond> bonds_;
  std::vector<std::array<VertexId, 3>> ends_;
};

// Bernoulli 2-bond configuration. Bond b is open iff U_b < epsilon, where
// U_b = keyed_uniform(key, b) is addressed by bond id, so configurations at
// different epsilon drawn from one key are nested.
struct NoiseField {
  std::uint64_t key = 0;
  double uniform(std::uint32_t bond) const { return keyed_uniform(key, bond); }
};

struct TwoBondConfig {
  std::vector<std::uint32_t> open;  // ascending bond ids
  double epsilon = 0.0;
};

NoiseField draw_noise_field(Rng& rng);
TwoBondConfig noise_at(const TwoBondIndex& index, const NoiseField& field, double epsilon);
TwoBondConfig sample_noise(const TwoBondIndex& index, double epsilon, Rng& rng);

struct NoisedSample {
  TraceClusters loop_part;
  TwoBondConfig noise;
  TraceClusters merged;
};

NoisedSample superpose(const MetricGraph& g, const TwoBondIndex& index, TraceClusters loop_part,
                       TwoBondConfig noise);

enum class PivotalMode {
  UpperSemi,    // closed ef with w + ef in A and w not in A
  Alternative,  // w + ef in A and (w minus ef) not in A
};

// Pivotal 2-bonds for A = {x0 <-> target} in the merged trace.
std::vector<std::uint32_t> pivotal_two_bonds(const MetricGraph& g, const TwoBondIndex& index,
                                             const NoisedSample& sample, VertexId x0, const VertexSet& target,
                                             PivotalMode mode = PivotalMode::UpperSemi);

// ---- built-in increasing events --------------------------------------------

// {from <-> to}: some vertex of `from` shares a cluster with some vertex of `to`.
struct ConnectEvent {
  VertexSet from;
  VertexSet to;
};

// Every listed edge lies in the trace: open in the loop part or covered by an open 2-bond.
struct CoverEvent {
  std::vector<EdgeId> edges;
};

using IncreasingEvent = std::variant<ConnectEvent, CoverEvent>;

std::string describe(const IncreasingEvent& event);

// Mutable trace used inside replicas: clusters plus per-edge coverage.
class TraceState {
 public:
  TraceState() = default;
  TraceState(const MetricGraph& g, const std::vector<std::uint8_t>& open_edges);

  void open_bond(const MetricGraph& g, const TwoBondIndex& index, std::uint32_t b);
  bool occurs(const IncreasingEvent& event);
  bool connected(VertexId x, const VertexSet& target);
  UnionFind& clusters() { return uf_; }
  const std::vector<std::uint8_t>& covered() const { return covered_; }

 private:
  UnionFind uf_;
  std::vector<std::uint8_t> covered_;
};

// Upper semi-pivotal count for {x0 <-> target} given the current state and
// the bonds that are still closed (`open[b] == 0`). Zero when A already holds.
std::size_t count_pivotal(TraceState& state, const TwoBondIndex& index, const std::vector<std::uint8_t>& open,
                          VertexId x0, const VertexSet& target, std::vector<char>& scratch);

// ---- Russo's formula ----------------------------------------------------------

struct RussoReport {
  double epsilon = 0.0;
  double delta = 0.0;
  double lhs = 0.0;  // P_{eps+delta}[A] - P_eps[A] under coupled noise
  double rhs = 0.0;  // delta/(1-eps) E_eps[#pivotal] (delta E[#pivotal] in the alternative mode)
  double se_lhs = 0.0;
  double se_rhs = 0.0;
  double se_difference = 0.0;  // paired standard error of lhs - rhs
  Interval ci_lhs;
  Interval ci_rhs;
  double p_epsilon = 0.0;
  double p_epsilon_delta = 0.0;
  double mean_pivotal = 0.0;
  double allowance = 0.0;  // 4 se_difference + 5 delta^2
  bool consistent = false;
  std::uint64_t replicas = 0;
  std::uint64_t seed = 0;
  PivotalMode mode = PivotalMode::UpperSemi;
};

RussoReport russo_check(const MetricGraph& g, VertexId x0, const VertexSet& target, double epsilon, double delta,
                        const RunOptions& options, PivotalMode mode = PivotalMode::UpperSemi);
nlohmann::json to_json(const RussoReport& r);

// ---- FKG -------------------------------------------------------------------------

using EventPair = std::pair<IncreasingEvent, IncreasingEvent>;

struct FkgRow {
  std::string event_a;
  std::string event_b;
  double p_a = 0.0;
  double p_b = 0.0;
  double p_ab = 0.0;
  double covariance = 0.0;  // P[A and B] - P[A] P[B]
  double standard_error = 0.0;
  bool violation = false;   // covariance below -3 standard errors
};

struct FkgReport {
  double epsilon = 0.0;
  std::vector<FkgRow> rows;
  std::uint64_t replicas = 0;
  std::uint64_t seed = 0;
};

FkgReport fkg_check(const MetricGraph& g, const std::vector<EventPair>& pairs, double epsilon,
                    const RunOptions& options);
nlohmann::json to_json(const FkgReport& r);

// At least ten increasing event pairs around x0 (connections to nearby
// vertices and spheres, star coverage, the A = B and certain-event cases).
std::vector<EventPair> default_fkg_battery(const MetricGraph& g, VertexId x0);

// ---- boundary exploration -------------------------------------------------------

struct ExplorationReport {
  VertexSet ball;
  VertexSet sphere;
  VertexSet c_n;             // ball vertices joined to the sphere inside the ball
  VertexSet k_n;             // component of x0 in ball \ c_n (empty if x0 in c_n)
  VertexSet inner_boundary;  // d(x, c_n) = 1
  VertexSet inner_boundary2; // d(x, c_n) = 2
  std::vector<std::uint32_t> boundary_bonds;  // (x,y)(y,z) with x,y in K_n, z in C_n
  VertexSet x0_cluster_in_k; // vertices joined to x0 by connections inside K_n
  bool x0_in_c = false;
  bool event_a = false;      // d(x0, c_n) > 2
};

ExplorationReport explore_boundary(const MetricGraph& g, const TwoBondIndex& index, const NoisedSample& sample,
                                   VertexId x0, std::uint32_t n);

}  // namespace loopperc
