#pragma once

// Iterated logarithms, tower constants and the growth modulus
//   IL_{n,k}^lambda(x) = prod_{i<n} sqrt(ln^(i)(k+x)) * (ln^(n)(k+x))^lambda.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>

#include "ilbsde/error.hpp"

namespace ilbsde {

inline constexpr int kMaxDepth = 3;

/// Tower constant e^(n): e^(1) = e, e^(n) = exp(e^(n-1)). Depth 4 overflows binary64.
inline double tower(int n) {
  if (n < 1 || n > kMaxDepth) {
    throw Error(ErrorKind::depth_out_of_range, "tower depth " + std::to_string(n) + " outside [1, 3]");
  }
  double v = std::numbers::e;
  for (int i = 1; i < n; ++i) v = std::exp(v);
  return v;
}

/// ln applied n times. Every intermediate argument must be >= 1.
inline double ln_iter(int n, double x) {
  if (n < 1) throw Error(ErrorKind::depth_out_of_range, "ln_iter depth must be >= 1");
  double v = x;
  for (int i = 0; i < n; ++i) {
    if (!(v >= 1.0)) {
      throw Error(ErrorKind::domain, "ln_iter intermediate argument " + std::to_string(v) + " < 1");
    }
    v = std::log(v);
  }
  return v;
}

/// ln^(1)(u), ..., ln^(n)(u), computed once and reused by every formula that
/// needs the chain.
struct LogChain {
  int n = 0;
  double arg = 0;                 // u = k + x
  std::array<double, kMaxDepth + 1> l{};  // l[i] = ln^(i)(u), l[0] = u

  [[nodiscard]] double operator[](int i) const { return l[static_cast<std::size_t>(i)]; }

  /// prod_{j=1}^{i} ln^(j)(u); the empty product is 1.
  [[nodiscard]] double prod(int i) const {
    double p = 1.0;
    for (int j = 1; j <= i; ++j) p *= l[static_cast<std::size_t>(j)];
    return p;
  }
};

inline LogChain log_chain(int n, double u) {
  if (n < 1 || n > kMaxDepth) {
    throw Error(ErrorKind::depth_out_of_range, "log chain depth " + std::to_string(n) + " outside [1, 3]");
  }
  LogChain c;
  c.n = n;
  c.arg = u;
  c.l[0] = u;
  for (int i = 1; i <= n; ++i) {
    const double prev = c.l[static_cast<std::size_t>(i - 1)];
    if (!(prev >= 1.0)) {
      throw Error(ErrorKind::domain, "iterated log argument " + std::to_string(prev) + " < 1");
    }
    c.l[static_cast<std::size_t>(i)] = std::log(prev);
  }
  return c;
}

/// Parameters (n, lambda, k) of the modulus family.
struct IterLogSpec {
  int n = 1;
  double lambda = 0.0;
  double k = std::numbers::e;

  /// Validating constructor: 1 <= n <= 3, lambda >= 0, k >= e^(n).
  static IterLogSpec make(int n, double lambda, double k) {
    if (n < 1 || n > kMaxDepth) {
      throw Error(ErrorKind::depth_out_of_range, "depth " + std::to_string(n) + " outside [1, 3]");
    }
    detail::require(lambda >= 0 && std::isfinite(lambda), ErrorKind::parameter, "lambda must be finite and >= 0");
    detail::require(std::isfinite(k) && k >= tower(n) * (1 - 1e-12), ErrorKind::precondition,
                    "k = " + std::to_string(k) + " below tower constant e^(" + std::to_string(n) + ")");
    return IterLogSpec{n, lambda, k};
  }

  /// The unshifted family of the assumptions: k = e^(n).
  static IterLogSpec standard(int n, double lambda) { return make(n, lambda, tower(n)); }
};

/// IL evaluated from a precomputed chain at u = k + x.
inline double il_from_chain(const LogChain& c, double lambda) {
  double v = 1.0;
  for (int i = 1; i < c.n; ++i) v *= std::sqrt(c[i]);
  if (lambda != 0.0) v *= std::pow(c[c.n], lambda);
  return v;
}

inline double il(const IterLogSpec& spec, double x) {
  detail::require(x >= 0, ErrorKind::domain, "il argument must be >= 0");
  return il_from_chain(log_chain(spec.n, spec.k + x), spec.lambda);
}

/// Empirical K with IL_{n+1}^lambda(x) <= K * IL_n^lambda(x) on the grid,
/// using the standard shifts k = e^(n+1) and k = e^(n).
inline double depth_comparison_constant(int n, double lambda, std::span<const double> grid) {
  detail::require(!grid.empty(), ErrorKind::empty_grid, "depth_comparison_constant: empty grid");
  detail::require(n >= 1 && n + 1 <= kMaxDepth, ErrorKind::depth_out_of_range, "n must lie in {1, 2}");
  detail::require(lambda > 0.5, ErrorKind::parameter, "lambda must exceed 1/2");
  const auto deep = IterLogSpec::standard(n + 1, lambda);
  const auto shallow = IterLogSpec::standard(n, lambda);
  double k_sup = 0.0;
  for (double x : grid) k_sup = std::max(k_sup, il(deep, x) / il(shallow, x));
  return k_sup;
}

/// Empirical K with x^alpha <= K x / IL(x) on a grid of positive points.
inline double holder_domination_constant(double alpha, const IterLogSpec& spec, std::span<const double> grid) {
  detail::require(alpha > 0 && alpha < 1, ErrorKind::parameter, "alpha must lie in (0, 1)");
  detail::require(!grid.empty(), ErrorKind::empty_grid, "holder_domination_constant: empty grid");
  double k_sup = 0.0;
  for (double x : grid) {
    detail::require(x > 0, ErrorKind::parameter, "holder grid points must be > 0");
    k_sup = std::max(k_sup, std::pow(x, alpha - 1.0) * il(spec, x));
  }
  return k_sup;
}

}  // namespace ilbsde
