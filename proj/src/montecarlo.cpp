#include "loopperc/montecarlo.hpp"

#include <cmath>
#include <cstdio>

namespace loopperc {

void Moments::add(std::span<const double> x) {
  ++count_;
  for (std::size_t j = 0; j < dim_; ++j) {
    sum_[j] += x[j];
    double* row = cross_.data() + j * dim_;
    for (std::size_t k = 0; k < dim_; ++k) row[k] += x[j] * x[k];
  }
}

void Moments::merge(const Moments& other) {
  if (other.dim_ != dim_) throw InvalidArgument("Moments::merge: dimension mismatch");
  count_ += other.count_;
  for (std::size_t j = 0; j < dim_; ++j) sum_[j] += other.sum_[j];
  for (std::size_t j = 0; j < cross_.size(); ++j) cross_[j] += other.cross_[j];
}

double Moments::mean(std::size_t j) const { return count_ ? sum_[j] / static_cast<double>(count_) : 0.0; }

double Moments::covariance(std::size_t j, std::size_t k) const {
  if (count_ < 2) return 0.0;
  const double n = static_cast<double>(count_);
  return (cross(j, k) - sum_[j] * sum_[k] / n) / (n - 1.0);
}

double Moments::standard_error(std::size_t j) const {
  if (count_ == 0) return 0.0;
  return std::sqrt(std::max(0.0, variance(j)) / static_cast<double>(count_));
}

double Moments::standard_error_of_difference(std::size_t j, std::size_t k, double c) const {
  if (count_ == 0) return 0.0;
  const double v = variance(j) + c * c * variance(k) - 2.0 * c * covariance(j, k);
  return std::sqrt(std::max(0.0, v) / static_cast<double>(count_));
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

EstimateReport bernoulli_report(const Moments& m, std::size_t j, std::uint64_t master_seed,
                                std::string config_hash) {
  EstimateReport r;
  r.replicas = m.count();
  r.estimate = m.mean(j);
  const double n = static_cast<double>(r.replicas);
  r.standard_error = std::sqrt(std::max(0.0, r.estimate * (1.0 - r.estimate)) / n);
  r.interval = wilson_interval(m.sum(j), n);
  r.master_seed = master_seed;
  r.config_hash = std::move(config_hash);
  r.bernoulli = true;
  return r;
}

EstimateReport mean_report(const Moments& m, std::size_t j, std::uint64_t master_seed,
                           std::string config_hash) {
  EstimateReport r;
  r.replicas = m.count();
  r.estimate = m.mean(j);
  r.standard_error = m.standard_error(j);
  r.interval = {r.estimate - kZ95 * r.standard_error, r.estimate + kZ95 * r.standard_error};
  r.master_seed = master_seed;
  r.config_hash = std::move(config_hash);
  r.bernoulli = false;
  return r;
}

nlohmann::json to_json(const EstimateReport& r) {
  return {{"estimate", r.estimate},
          {"se", r.standard_error},
          {"ci_lo", r.interval.lo},
          {"ci_hi", r.interval.hi},
          {"N", r.replicas},
          {"seed", r.master_seed},
          {"config_hash", r.config_hash},
          {"interval", r.bernoulli ? "wilson95" : "normal95"}};
}

std::string config_hash(const nlohmann::json& canonical) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical.dump())));
  return buf;
}

}  // namespace loopperc
