#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fairflda {

/// Counter-based random stream. A stream is identified by a key path
/// (seed, replication, sample, ...) and every draw is a pure function of the
/// key and a counter, so results never depend on scheduling or call order.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) noexcept;

  /// Independent sub-stream identified by `id`.
  CounterRng child(std::uint64_t id) const noexcept;

  std::uint64_t key() const noexcept { return key_; }

  std::uint64_t bits(std::uint64_t counter) const noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const noexcept;
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t counter, std::uint64_t n) const noexcept;
  /// Standard normal; consecutive even/odd counters share one Box-Muller pair.
  double normal(std::uint64_t counter) const noexcept;
  /// out[i] = normal(first + i).
  void fill_normal(std::uint64_t first, std::span<double> out) const noexcept;

 private:
  explicit CounterRng(std::uint64_t key, int) noexcept : key_(key) {}
  std::uint64_t key_;
};

/// Mixes two words into one; used to derive named seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept;

/// Fisher-Yates permutation of 0..n-1 drawn from `rng`.
std::vector<std::size_t> permutation(const CounterRng& rng, std::size_t n);

}  // namespace fairflda
