#pragma once

#include <cstdint>

namespace nullspace {

/// Counter-based deterministic random generator (SplitMix64 finalizer over a
/// (seed, stream, counter) triple).  Streams derived from the same seed are
/// independent, so parallel trials can each own stream = trial index without
/// sharing state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64() noexcept;

  /// Uniform double in [0, 1).
  double uniform() noexcept;

  /// Standard normal via Box-Muller.
  double gaussian() noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace nullspace
