#pragma once

// Platform-independent random source. The engine is std::mt19937_64 (its
// output sequence is fixed by the standard); all distributions are
// implemented here so draws are identical across standard libraries.
//
// Stream splitting: independent streams are keyed by derive_seed(seed,
// keys...), a splitmix64 chain over the base seed and the keys.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace conflens {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  /// Uniform on (0, 1].
  double uniform_open_low() { return 1.0 - uniform(); }
  /// Uniform integer in [0, n); rejection sampling, unbiased.
  std::uint64_t below(std::uint64_t n);
  double exponential();
  /// Index drawn from a discrete distribution given by non-negative weights.
  std::size_t categorical(const double* weights, std::size_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace conflens
