#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace nbvoi {

// SplitMix64 finalizer (Steele, Lea & Flood). Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

// Tags for the independent random streams consumed by one engine iteration
// (or one generator draw). A stream's identity is (master_seed, t, phase).
enum class Phase : std::uint64_t {
  outer_weights = 1,
  future_indices = 2,
  future_outcomes = 3,
  synth_covariates = 4,
  synth_outcomes = 5,
  oracle_covariates = 6,
};

struct RngSpec {
  std::uint64_t master_seed = 0;
};

// Substream identifier for (master_seed, t, phase). Chained SplitMix64
// mixing; injective in t and in phase for a fixed seed. This derivation is
// part of the output contract: identical (seed, t, phase) always selects
// the same stream, independent of thread count or execution order.
inline std::uint64_t stream_key(std::uint64_t master_seed, std::uint64_t t,
                                Phase phase) {
  std::uint64_t k = mix64(master_seed + 0x9e3779b97f4a7c15ULL);
  k = mix64(k ^ (t + 0xbf58476d1ce4e5b9ULL));
  k = mix64(k ^ (static_cast<std::uint64_t>(phase) + 0x94d049bb133111ebULL));
  return k;
}

// xoshiro256++ (Blackman & Vigna, public domain reference implementation),
// state filled from a SplitMix64 sequence seeded with the stream key.
// Distributions are generated by explicit inversion formulas below, not
// std::<random> distributions, so that sequences are identical across
// standard library implementations.
class Stream {
 public:
  Stream(RngSpec spec, std::uint64_t t, Phase phase)
      : Stream(stream_key(spec.master_seed, t, phase)) {}

  explicit Stream(std::uint64_t key) {
    std::uint64_t sm = key;
    for (auto& word : state_) {
      sm += 0x9e3779b97f4a7c15ULL;
      word = mix64(sm);
    }
    if (state_[0] == 0 && state_[1] == 0 && state_[2] == 0 && state_[3] == 0) {
      state_[0] = key | 1;  // xoshiro state must not be all zero
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard exponential via inversion; one uniform per draw.
  double next_exponential() { return -std::log1p(-next_unit()); }

  // Bernoulli(p); one uniform per draw. p = 0 never fires, p = 1 always does.
  bool next_bernoulli(double p) { return next_unit() < p; }

  // Normal(mean, sd) by Box-Muller; consumes exactly two uniforms per draw.
  double next_normal(double mean = 0.0, double sd = 1.0) {
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    return mean + sd * r * std::cos(two_pi * u2);
  }

  // Uniform index on {0, ..., n-1}; one uniform per draw.
  std::uint64_t next_index(std::uint64_t n) {
    const auto i = static_cast<std::uint64_t>(next_unit() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

}  // namespace nbvoi
