#pragma once

#include <cstdint>

namespace ngi {

/// xoshiro256++ generator seeded through splitmix64, with hand-rolled
/// uniform/normal/Poisson samplers. The standard library distributions are
/// implementation-defined, so all randomness goes through this class to keep
/// outputs bit-reproducible for a fixed seed and traversal order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream derived from (seed, stream index); used to make
  /// per-frame generation order-independent under concurrency.
  static Rng for_stream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1).
  double next_double();

  /// Standard normal via Box-Muller.
  double next_normal();

  /// Poisson sample: sequential inversion for small means, Hormann's PTRS
  /// transformed rejection for the mid range, normal approximation above 1e4.
  std::int64_t next_poisson(double mean);

 private:
  std::uint64_t s_[4];
};

/// splitmix64 step; also usable as a cheap 64-bit mixer.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace ngi
