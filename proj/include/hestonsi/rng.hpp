#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>

namespace hestonsi {

/// SplitMix64 finalizer, used to derive decorrelated substream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent normal stream for one path. The draws of path i depend only on
/// (seed, i), so a path is identical whatever the total path count or thread
/// layout. Backed by mt19937_64, whose output sequence is fixed by the C++
/// standard; the normal transform is Box-Muller, written out here because
/// std::normal_distribution is implementation-defined.
class PathStream {
 public:
  PathStream(std::uint64_t seed, std::uint64_t path)
      : engine_(splitmix64(splitmix64(seed) ^ splitmix64(path + 0x632BE59BD9B4E019ULL))) {}

  /// Uniform on (0, 1].
  double uniform_open_closed() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Two independent standard normals.
  std::pair<double, double> normal_pair() {
    const double r = std::sqrt(-2.0 * std::log(uniform_open_closed()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    return {r * std::cos(angle), r * std::sin(angle)};
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hestonsi
