#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "ilbsde/error.hpp"

namespace ilbsde {

/// `points` values x_j = (1+xmax)^{j/(points-1)} - 1, so x_0 = 0 and the last is xmax.
inline std::vector<double> log_grid(double xmax, std::size_t points) {
  detail::require(points >= 1, ErrorKind::empty_grid, "log_grid needs at least one point");
  detail::require(xmax >= 0 && std::isfinite(xmax), ErrorKind::parameter, "log_grid upper end must be finite and >= 0");
  std::vector<double> g(points);
  if (points == 1) {
    g[0] = 0.0;
    return g;
  }
  const double top = std::log1p(xmax);
  for (std::size_t j = 0; j < points; ++j) {
    g[j] = std::expm1(top * static_cast<double>(j) / static_cast<double>(points - 1));
  }
  g.back() = xmax;
  return g;
}

/// Geometric grid on [lo, hi] with lo > 0.
inline std::vector<double> geometric_grid(double lo, double hi, std::size_t points) {
  detail::require(points >= 1, ErrorKind::empty_grid, "geometric_grid needs at least one point");
  detail::require(lo > 0 && hi >= lo, ErrorKind::parameter, "geometric_grid needs 0 < lo <= hi");
  std::vector<double> g(points);
  if (points == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t j = 0; j < points; ++j) {
    g[j] = std::exp(a + (b - a) * static_cast<double>(j) / static_cast<double>(points - 1));
  }
  g.front() = lo;
  g.back() = hi;
  return g;
}

/// Uniform grid on [lo, hi].
inline std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
  detail::require(points >= 1, ErrorKind::empty_grid, "linear_grid needs at least one point");
  std::vector<double> g(points);
  if (points == 1) {
    g[0] = lo;
    return g;
  }
  for (std::size_t j = 0; j < points; ++j) {
    g[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(points - 1);
  }
  g.back() = hi;
  return g;
}

/// Counter-based random numbers: every draw is a pure function of
/// (seed, stream, index), so sampled checks do not depend on scheduling.
struct CounterRng {
  std::uint64_t seed = 0;

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  [[nodiscard]] std::uint64_t bits(std::uint64_t stream, std::uint64_t index) const noexcept {
    return mix(mix(mix(seed) ^ stream) ^ index);
  }

  /// Uniform double in [0, 1).
  [[nodiscard]] double uniform(std::uint64_t stream, std::uint64_t index) const noexcept {
    return static_cast<double>(bits(stream, index) >> 11) * 0x1.0p-53;
  }

  [[nodiscard]] double uniform(std::uint64_t stream, std::uint64_t index, double lo, double hi) const noexcept {
    return lo + (hi - lo) * uniform(stream, index);
  }
};

}  // namespace ilbsde
