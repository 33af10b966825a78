#pragma once

#include <cstdint>
#include <random>

namespace simlab {

// Deterministic random stream identified by (seed, stream id).
//
// Engine: std::mt19937_64, whose output sequence is fixed by the C++
// standard, seeded from a SplitMix64 hash of the pair. All variate
// conversions are implemented here rather than with <random>
// distributions, whose algorithms differ between standard libraries.
// Version tag: "mt19937_64+splitmix64/v1".
class RngStream {
 public:
  static constexpr const char* kVersion = "mt19937_64+splitmix64/v1";

  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Consumes exactly one uniform; true with probability p (p clamped to [0,1]).
  bool bernoulli(double p);

  // Uniform integer on [lo, hi] inclusive, unbiased (rejection sampling).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace simlab
