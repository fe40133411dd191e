#include "fairflda/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace fairflda {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finaliser
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

CounterRng::CounterRng(std::uint64_t seed) noexcept : key_(mix64(seed + kGolden)) {}

CounterRng CounterRng::child(std::uint64_t id) const noexcept {
  return CounterRng(mix64(key_ ^ mix64(id * kGolden + 0x632BE59BD9B4E019ULL)), 0);
}

std::uint64_t CounterRng::bits(std::uint64_t counter) const noexcept {
  const std::uint64_t h = mix64(key_ + counter * kGolden);
  return mix64(h ^ (key_ >> 17 | key_ << 47));
}

double CounterRng::uniform(std::uint64_t counter) const noexcept {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::below(std::uint64_t counter, std::uint64_t n) const noexcept {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(bits(counter)) * n) >> 64);
}

double CounterRng::normal(std::uint64_t counter) const noexcept {
  const std::uint64_t pair = counter & ~std::uint64_t{1};
  // 1 - u keeps the log argument in (0, 1]
  const double r = std::sqrt(-2.0 * std::log(1.0 - uniform(pair)));
  const double theta = kTwoPi * uniform(pair + 1);
  return (counter & 1) ? r * std::sin(theta) : r * std::cos(theta);
}

void CounterRng::fill_normal(std::uint64_t first, std::span<double> out) const noexcept {
  std::size_t i = 0;
  if ((first & 1) && i < out.size()) out[i++] = normal(first);
  for (; i + 1 < out.size(); i += 2) {
    const std::uint64_t pair = first + i;
    const double r = std::sqrt(-2.0 * std::log(1.0 - uniform(pair)));
    const double theta = kTwoPi * uniform(pair + 1);
    out[i] = r * std::cos(theta);
    out[i + 1] = r * std::sin(theta);
  }
  if (i < out.size()) out[i] = normal(first + i);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  return mix64(mix64(seed + kGolden) ^ (salt * 0xD6E8FEB86659FD93ULL));
}

std::vector<std::size_t> permutation(const CounterRng& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i, i));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

}  // namespace fairflda
