#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace thermo {

/// Stable 64-bit FNV-1a hash; used to derive per-purpose seeds from labels
/// so the streams stay reproducible across platforms and std library
/// versions (std::hash makes no such promise).
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : s) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for a named stream of a given experiment seed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  return splitmix64(base ^ fnv1a64(label));
}

/// Deterministic random stream. Uniform and normal variates are generated
/// with explicit algorithms (not std::*_distribution) so that outputs are
/// bit-stable across standard libraries.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}
  RngStream(std::uint64_t base, std::string_view label)
      : eng_(derive_seed(base, label)) {}

  /// Uniform in [0, 1).
  double uniform01() {
    // 53 random bits -> double in [0,1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller (polar form rejected for determinism
  /// of consumed engine outputs).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::uint64_t raw() { return eng_(); }

private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

} // namespace thermo
