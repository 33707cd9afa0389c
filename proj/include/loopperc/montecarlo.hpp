#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "loopperc/error.hpp"
#include "loopperc/rng.hpp"
#include "loopperc/stats.hpp"

namespace loopperc {

// Sufficient statistics of a vector-valued replica observable: count, sums,
// and the full matrix of cross-product sums.
class Moments {
 public:
  Moments() = default;
  explicit Moments(std::size_t dim) : dim_(dim), sum_(dim, 0.0), cross_(dim * dim, 0.0) {}

  void add(std::span<const double> x);
  void merge(const Moments& other);

  std::size_t dim() const { return dim_; }
  std::uint64_t count() const { return count_; }
  double sum(std::size_t j) const { return sum_[j]; }
  double cross(std::size_t j, std::size_t k) const { return cross_[j * dim_ + k]; }

  double mean(std::size_t j) const;
  // Sample covariance with denominator N - 1 (0 when N < 2).
  double covariance(std::size_t j, std::size_t k) const;
  double variance(std::size_t j) const { return covariance(j, j); }
  // Standard error of mean(j).
  double standard_error(std::size_t j) const;
  // Standard error of mean(j) - c * mean(k) from paired replicas.
  double standard_error_of_difference(std::size_t j, std::size_t k, double c = 1.0) const;

  friend bool operator==(const Moments&, const Moments&) = default;

 private:
  std::size_t dim_ = 0;
  std::uint64_t count_ = 0;
  std::vector<double> sum_;
  std::vector<double> cross_;
};

struct RunOptions {
  std::uint64_t replicas = 0;
  std::uint64_t master_seed = 0;
  std::string tag = "default";
  unsigned threads = 0;            // 0: hardware concurrency
  std::uint64_t block_size = 512;  // fixed fold granularity, independent of thread count
};

unsigned resolve_threads(unsigned requested);

// Runs `replicas` independent evaluations of `fn(index, rng, out)`. Replica i
// draws from Rng(derive_seed(master_seed, i, tag)) and writes `dim`
// observables into `out` (zeroed beforehand). Each worker thread owns a copy
// of `fn`, so mutable scratch inside the functor is thread-private. Partial
// sums are formed over fixed replica blocks and folded in block order, which
// makes the result independent of scheduling and thread count.
template <class ReplicaFn>
Moments run_replicas(std::size_t dim, const RunOptions& options, const ReplicaFn& fn) {
  if (options.replicas == 0) throw InvalidArgument("run_replicas: replica count must be positive");
  const std::uint64_t block = std::max<std::uint64_t>(1, options.block_size);
  const std::uint64_t blocks = (options.replicas + block - 1) / block;
  std::vector<Moments> partial(blocks, Moments(dim));
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    try {
      ReplicaFn local = fn;
      std::vector<double> out(dim);
      for (std::uint64_t b = next++; b < blocks; b = next++) {
        const std::uint64_t end = std::min(options.replicas, (b + 1) * block);
        for (std::uint64_t i = b * block; i < end; ++i) {
          Rng rng(derive_seed(options.master_seed, i, options.tag));
          std::fill(out.begin(), out.end(), 0.0);
          local(i, rng, std::span<double>(out));
          partial[b].add(out);
        }
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = blocks;
    }
  };

  const unsigned n_threads =
      static_cast<unsigned>(std::min<std::uint64_t>(resolve_threads(options.threads), blocks));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  Moments total(dim);
  for (const Moments& m : partial) total.merge(m);
  return total;
}

struct EstimateReport {
  double estimate = 0.0;
  std::uint64_t replicas = 0;
  double standard_error = 0.0;
  Interval interval;  // Wilson 95% for Bernoulli observables, normal 95% otherwise
  std::uint64_t master_seed = 0;
  std::string config_hash;
  bool bernoulli = true;
};

EstimateReport bernoulli_report(const Moments& m, std::size_t j, std::uint64_t master_seed,
                                std::string config_hash = {});
EstimateReport mean_report(const Moments& m, std::size_t j, std::uint64_t master_seed,
                           std::string config_hash = {});
nlohmann::json to_json(const EstimateReport& r);

// Scalar Bernoulli experiment: fn(index, rng) -> bool or 0/1 value.
template <class ScalarFn>
EstimateReport run_bernoulli(const RunOptions& options, const ScalarFn& fn, std::string config_hash = {}) {
  auto wrapped = [fn](std::uint64_t i, Rng& rng, std::span<double> out) mutable {
    out[0] = static_cast<double>(fn(i, rng));
  };
  const Moments m = run_replicas(1, options, wrapped);
  return bernoulli_report(m, 0, options.master_seed, std::move(config_hash));
}

// 16-hex-digit FNV-1a of the canonical JSON dump.
std::string config_hash(const nlohmann::json& canonical);

}  // namespace loopperc
