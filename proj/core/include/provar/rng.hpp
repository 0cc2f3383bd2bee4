#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace provar {

/// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t x);

/// Seed of the substream addressed by `keys` under `master`. Distinct key
/// paths give statistically independent streams; the mapping is fixed, so
/// a replicate's stream does not depend on scheduling or on how many other
/// replicates exist.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys);

/// Portable random stream: mt19937_64 plus hand-written transforms, so a
/// seed yields the same draws on every conforming platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}
  RngStream(std::uint64_t master, std::initializer_list<std::uint64_t> keys)
      : engine_(derive_seed(master, keys)) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double low, double high) { return low + (high - low) * uniform(); }
  /// Standard normal (Marsaglia polar method).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  /// Uniform integer in [0, bound), bound > 0, without modulo bias.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace provar
