#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace loopperc {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t state) : state_(state) {}
  constexpr std::uint64_t operator()() { return splitmix64_mix(state_ += 0x9E3779B97F4A7C15ULL); }

 private:
  std::uint64_t state_;
};

// FNV-1a, used to fold experiment tags into seeds and to hash configs.
inline constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Seed128 {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;
  friend bool operator==(const Seed128&, const Seed128&) = default;
};

// Replica seed: two independently keyed splitmix finalisers over
// (master, index, fnv1a64(tag)). Lane constants are fixed; changing them
// changes every derived stream.
inline constexpr Seed128 derive_seed(std::uint64_t master, std::uint64_t index, std::string_view tag) {
  const std::uint64_t t = fnv1a64(tag);
  const std::uint64_t a = splitmix64_mix(master ^ 0x6A09E667F3BCC909ULL);
  const std::uint64_t b = splitmix64_mix(a ^ splitmix64_mix(index + 0xBB67AE8584CAA73BULL));
  const std::uint64_t hi = splitmix64_mix(b ^ splitmix64_mix(t ^ 0x3C6EF372FE94F82BULL));
  const std::uint64_t lo = splitmix64_mix(hi ^ splitmix64_mix(b + t + 0xA54FF53A5F1D36F1ULL));
  return {hi, lo};
}

// xoshiro256++ seeded by splitmix64 expansion of a 128-bit seed.
// Satisfies UniformRandomBitGenerator so it plugs into <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(Seed128 seed) : seed_(seed) {
    SplitMix64 a(seed.hi), b(seed.lo);
    s_[0] = a();
    s_[1] = a();
    s_[2] = b();
    s_[3] = b();
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }
  explicit Rng(std::uint64_t seed) : Rng(Seed128{seed, ~seed}) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  // Uniform on (0, 1).
  double uniform_open() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  Seed128 seed() const { return seed_; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
  Seed128 seed_;
};

// Stateless uniform keyed by (key, index); used where a stream must be
// addressable by element id (2-bond noise under common random numbers).
inline double keyed_uniform(std::uint64_t key, std::uint64_t index) {
  const std::uint64_t z = splitmix64_mix(key ^ splitmix64_mix(index * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL));
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

}  // namespace loopperc
