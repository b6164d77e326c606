// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mdps {

/// Deterministic random stream. Same seed gives the same draw sequence on
/// every run; child streams split off by index are independent of the parent
/// state at split time, so fan-out work is reproducible regardless of
/// execution order. Gaussian draws use an explicit Box-Muller transform
/// instead of std::normal_distribution, whose sequence is
/// implementation-defined.
///
/// Single-owner: not safe for concurrent use; hand each task its own split.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  /// Uniform in [0,1).
  double uniform();

  /// Uniform integer in [lo, hi], inclusive. Rejection sampling, unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal draw.
  double normal();
  float normal_f() { return static_cast<float>(normal()); }

  void fill_normal(float* dst, std::size_t n);
  std::vector<float> normal_vector(std::size_t n);

  /// Child stream for fan-out index `index`. Does not consume parent state.
  Rng split(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

/// splitmix64 finalizer; used for seed derivation.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace mdps
