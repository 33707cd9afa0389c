#include "loopperc/gff.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>

#include "loopperc/error.hpp"

namespace loopperc {

std::vector<std::uint32_t> canonical_labels(UnionFind& uf, std::size_t n, std::size_t* count) {
  std::vector<std::uint32_t> root_label(uf.size(), 0xffffffffu);
  std::vector<std::uint32_t> labels(n);
  std::uint32_t next = 0;
  for (std::uint32_t x = 0; x < n; ++x) {
    const std::uint32_t r = uf.find(x);
    if (root_label[r] == 0xffffffffu) root_label[r] = next++;
    labels[x] = root_label[r];
  }
  if (count) *count = next;
  return labels;
}

TraceClusters label_clusters(const MetricGraph& g, std::vector<std::uint8_t> open_edges,
                             const std::vector<TwoBond>& two_bonds, std::vector<std::uint32_t> open_two_bonds) {
  if (open_edges.size() != g.edge_count()) throw InvalidArgument("label_clusters: open-edge vector size mismatch");
  UnionFind uf(g.vertex_count());
  for (EdgeId e = 0; e < open_edges.size(); ++e) {
    if (open_edges[e]) uf.unite(g.edge(e).u, g.edge(e).v);
  }
  for (std::uint32_t b : open_two_bonds) {
    if (b >= two_bonds.size()) throw InvalidArgument("label_clusters: 2-bond id out of range");
    const TwoBond& tb = two_bonds[b];
    uf.unite(tb.center, g.other_end(tb.e, tb.center));
    uf.unite(tb.center, g.other_end(tb.f, tb.center));
  }
  TraceClusters out;
  out.labels = canonical_labels(uf, g.vertex_count(), &out.cluster_count);
  out.open_edges = std::move(open_edges);
  out.open_two_bonds = std::move(open_two_bonds);
  return out;
}

GffSampler::GffSampler(const MetricGraph& g) : n_(g.vertex_count()) {
  std::vector<VertexId> ids(n_);
  for (VertexId x = 0; x < n_; ++x) ids[x] = x;
  const VertexSet all(std::move(ids));
  require_transient(g, all);
  llt_.compute(precision_matrix(g, all));
  if (llt_.info() != Eigen::Success) throw NumericError("GffSampler: Cholesky factorisation of the precision matrix failed");
}

void GffSampler::sample_into(Rng& rng, std::span<double> out) const {
  if (out.size() != n_) throw InvalidArgument("GffSampler: output size mismatch");
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) z(i) = normal(rng);
  const Eigen::VectorXd y = llt_.matrixU().solve(z);
  const Eigen::VectorXd phi = llt_.permutationPinv() * y;
  std::memcpy(out.data(), phi.data(), n_ * sizeof(double));
}

FieldSample GffSampler::sample(Rng& rng) const {
  FieldSample s;
  s.seed = rng.seed();
  s.values.resize(n_);
  sample_into(rng, s.values);
  return s;
}

double lupu_open_probability(double weight, double phi_x, double phi_y) {
  const double prod = phi_x * phi_y;
  if (!(prod > 0.0)) return 0.0;
  return -std::expm1(-2.0 * weight * prod);
}

std::vector<std::uint8_t> lupu_open_edges(const MetricGraph& g, std::span<const double> phi, Rng& rng) {
  if (phi.size() != g.vertex_count()) throw InvalidArgument("lupu_open_edges: field size mismatch");
  std::vector<std::uint8_t> open(g.edge_count(), 0);
  for (EdgeId e = 0; e < g.edge_count(); ++e) {
    const Edge& edge = g.edge(e);
    const double u = rng.uniform();
    open[e] = u < lupu_open_probability(edge.weight, phi[edge.u], phi[edge.v]) ? 1 : 0;
  }
  return open;
}

TraceClusters clusters_at_half(const MetricGraph& g, const GffSampler& sampler, Rng& rng) {
  std::vector<double> phi(g.vertex_count());
  sampler.sample_into(rng, phi);
  static const std::vector<TwoBond> kNoBonds;
  return label_clusters(g, lupu_open_edges(g, phi, rng), kNoBonds, {});
}

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), sizeof buf);
}

template <class T>
T get_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof buf)) throw InvalidArgument("bitmap dump: truncated header");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(buf[i]) << (8 * i);
  return value;
}

}  // namespace

void write_open_edge_bitmaps(std::ostream& out, std::size_t edge_count,
                             const std::vector<std::vector<std::uint8_t>>& replicas) {
  out.write("LPEB", 4);
  put_le<std::uint32_t>(out, 1);
  put_le<std::uint64_t>(out, edge_count);
  put_le<std::uint64_t>(out, replicas.size());
  std::vector<char> bytes((edge_count + 7) / 8);
  for (const auto& open : replicas) {
    if (open.size() != edge_count) throw InvalidArgument("bitmap dump: replica size mismatch");
    std::fill(bytes.begin(), bytes.end(), 0);
    for (std::size_t e = 0; e < edge_count; ++e) {
      if (open[e]) bytes[e / 8] = static_cast<char>(bytes[e / 8] | (1 << (e % 8)));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
}

std::vector<std::vector<std::uint8_t>> read_open_edge_bitmaps(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "LPEB", 4) != 0) throw InvalidArgument("bitmap dump: bad magic");
  if (get_le<std::uint32_t>(in) != 1) throw InvalidArgument("bitmap dump: unsupported version");
  const auto edge_count = get_le<std::uint64_t>(in);
  const auto replicas = get_le<std::uint64_t>(in);
  std::vector<std::vector<std::uint8_t>> out;
  std::vector<char> bytes((edge_count + 7) / 8);
  for (std::uint64_t r = 0; r < replicas; ++r) {
    if (!in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()))) throw InvalidArgument("bitmap dump: truncated body");
    std::vector<std::uint8_t> open(edge_count);
    for (std::size_t e = 0; e < edge_count; ++e) open[e] = (bytes[e / 8] >> (e % 8)) & 1;
    out.push_back(std::move(open));
  }
  return out;
}

}  // namespace loopperc
