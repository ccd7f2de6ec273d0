#pragma once

// Explicit test function
//   phi(s, x) = (k+x) [1 - (ln^(n)(k+x))^{1-2 lambda}] mu_s,
//   mu_s = exp(2 (beta + 2 gamma^2 / (2 lambda - 1)) s),
// its closed-form derivatives, and grid checks of the bounds and of the
// supersolution inequality it is built to satisfy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ilbsde/error.hpp"
#include "ilbsde/grid.hpp"
#include "ilbsde/ineq.hpp"
#include "ilbsde/iterlog.hpp"
#include "ilbsde/parallel.hpp"

namespace ilbsde {

struct TestFunctionSpec {
  double beta = 0;
  double gamma = 1;
  int n = 2;
  double lambda = 0.75;
  double k = 0;
  double horizon = 1;

  [[nodiscard]] IterLogSpec modulus() const { return IterLogSpec{n, lambda, k}; }
  /// 2 (beta + 2 gamma^2 / (2 lambda - 1)).
  [[nodiscard]] double mu_rate() const { return 2.0 * (beta + 2.0 * gamma * gamma / (2.0 * lambda - 1.0)); }

  /// Validating constructor. Requires ln^(n)(k) >= 2 so that the bracket
  /// 1 - (ln^(n)(k+x))^{1-2 lambda} stays bounded away from zero.
  static TestFunctionSpec make(double beta, double gamma, int n, double lambda, double k, double horizon) {
    detail::require(beta >= 0, ErrorKind::parameter, "beta must be >= 0");
    detail::require(gamma > 0, ErrorKind::parameter, "gamma must be > 0");
    detail::require(lambda > 0.5, ErrorKind::parameter, "lambda must exceed 1/2");
    detail::require(horizon > 0, ErrorKind::parameter, "horizon must be > 0");
    (void)IterLogSpec::make(n, lambda, k);
    detail::require(ln_iter(n, k) >= 2.0, ErrorKind::precondition,
                    "k too small: ln^(n)(k) = " + std::to_string(ln_iter(n, k)) + " < 2");
    return TestFunctionSpec{beta, gamma, n, lambda, k, horizon};
  }
};

inline double mu(const TestFunctionSpec& spec, double s) {
  if (!(s >= -1e-12 * spec.horizon && s <= spec.horizon * (1 + 1e-12))) {
    throw Error(ErrorKind::domain, "time " + std::to_string(s) + " outside [0, T]");
  }
  return std::exp(spec.mu_rate() * s);
}

/// phi and its partial derivatives at one point.
struct PhiValues {
  double phi = 0;
  double phi_x = 0;
  double phi_xx = 0;
  double phi_s = 0;
  double mu = 1;
  double il = 1;  ///< IL_{n,k}^lambda(x)
};

inline PhiValues phi(const TestFunctionSpec& spec, double s, double x) {
  detail::require(x >= 0, ErrorKind::domain, "phi needs x >= 0");
  const double m = mu(spec, s);
  const LogChain c = log_chain(spec.n, spec.k + x);
  const double a = 2.0 * spec.lambda - 1.0;
  const double deep = c[spec.n];
  const double prod_n = c.prod(spec.n);
  const double deep_pow = std::pow(deep, -a);
  double inv_sum = 0.0;  // sum_{j=1}^{n} 1 / prod_{i<=j} L_i
  for (int j = 1; j <= spec.n; ++j) inv_sum += 1.0 / c.prod(j);

  PhiValues v;
  v.mu = m;
  v.il = il_from_chain(c, spec.lambda);
  const double bracket = 1.0 - deep_pow;
  v.phi = c.arg * bracket * m;
  v.phi_x = (1.0 - deep_pow * (1.0 - a / prod_n)) * m;
  v.phi_xx = a / (c.arg * v.il * v.il) * (1.0 - a / prod_n - inv_sum) * m;
  v.phi_s = v.phi * spec.mu_rate();
  return v;
}

struct BoundsReport {
  TestFunctionSpec spec;
  // Relative margins (>= 0 means the inequality holds).
  double phi_x_lower = std::numeric_limits<double>::infinity();   // phi_x >= mu/2
  double phi_x_upper = std::numeric_limits<double>::infinity();   // phi_x <= mu
  double phi_xx_lower = std::numeric_limits<double>::infinity();  // phi_xx >= a mu / (2 (k+x) IL^2)
  double phi_xx_upper = std::numeric_limits<double>::infinity();  // phi_xx <= a mu / ((k+x) IL^2)
  double phi_s_lower = std::numeric_limits<double>::infinity();   // phi_s >= (k+x) mu' / 2
  double ratio_lower = std::numeric_limits<double>::infinity();   // gamma phi_x/phi_xx >= gamma (k+x) IL^2 / (2a)
  double ratio_floor = std::numeric_limits<double>::infinity();   // gamma (k+x) IL^2 / (2a) >= k + x
  bool positive = true;
  std::size_t points = 0;
  double tolerance = kDefaultRelTol;
  bool pass = false;

  [[nodiscard]] double min_margin() const {
    return std::min({phi_x_lower, phi_x_upper, phi_xx_lower, phi_xx_upper, phi_s_lower, ratio_lower, ratio_floor});
  }
};

/// Checks the derivative sandwich bounds on grid_s x grid_x. The spec object is not
/// re-validated so that undersized k can be examined.
inline BoundsReport verify_bounds(const TestFunctionSpec& spec, std::span<const double> grid_s,
                                  std::span<const double> grid_x, double tol = kDefaultRelTol) {
  detail::require(!grid_s.empty() && !grid_x.empty(), ErrorKind::empty_grid, "verify_bounds: empty grid");
  BoundsReport r;
  r.spec = spec;
  r.tolerance = tol;
  const double a = 2.0 * spec.lambda - 1.0;
  for (double s : grid_s) {
    for (double x : grid_x) {
      const PhiValues v = phi(spec, s, x);
      const double kx = spec.k + x;
      const double il2 = v.il * v.il;
      const double xx_top = a * v.mu / (kx * il2);
      const double mu_prime = spec.mu_rate() * v.mu;
      const double ratio_rhs = spec.gamma / (2.0 * a) * kx * il2;
      r.phi_x_lower = std::min(r.phi_x_lower, (v.phi_x - 0.5 * v.mu) / v.mu);
      r.phi_x_upper = std::min(r.phi_x_upper, (v.mu - v.phi_x) / v.mu);
      r.phi_xx_lower = std::min(r.phi_xx_lower, (v.phi_xx - 0.5 * xx_top) / xx_top);
      r.phi_xx_upper = std::min(r.phi_xx_upper, (xx_top - v.phi_xx) / xx_top);
      r.phi_s_lower = std::min(r.phi_s_lower, (v.phi_s - 0.5 * kx * mu_prime) / (kx * mu_prime));
      r.ratio_lower = std::min(r.ratio_lower, (spec.gamma * v.phi_x / v.phi_xx - ratio_rhs) / ratio_rhs);
      r.ratio_floor = std::min(r.ratio_floor, (ratio_rhs - kx) / ratio_rhs);
      if (!(v.phi > 0 && v.phi_x > 0 && v.phi_xx > 0 && v.phi_s > 0)) r.positive = false;
      ++r.points;
    }
  }
  r.pass = r.positive && r.min_margin() >= -tol;
  return r;
}

struct SupersolutionPoint {
  double s = 0, x = 0, z = 0;
};

struct SupersolutionReport {
  TestFunctionSpec spec;
  /// Minimum of margin / scale over the triple grid.
  double worst_relative_margin = std::numeric_limits<double>::infinity();
  double worst_margin = std::numeric_limits<double>::infinity();
  SupersolutionPoint worst_point;
  /// Same for the z-free reduced inequality, on the (s, x) grid.
  double reduced_worst_relative_margin = std::numeric_limits<double>::infinity();
  SupersolutionPoint reduced_worst_point;
  std::size_t points = 0;
  std::size_t violations = 0;
  double tolerance = 1e-10;
  bool pass = false;
};

/// Terms of -beta phi_x x - phi_x gamma z / IL(z) + phi_xx z^2 / 2 + phi_s.
struct SupersolutionTerms {
  double drift = 0, growth = 0, diffusion = 0, time = 0;
  [[nodiscard]] double margin() const { return drift + growth + diffusion + time; }
  [[nodiscard]] double scale() const {
    return std::max({std::abs(drift), std::abs(growth), std::abs(diffusion), std::abs(time), 1.0});
  }
};

inline SupersolutionTerms supersolution_terms(const TestFunctionSpec& spec, const PhiValues& v, double x, double z) {
  SupersolutionTerms t;
  t.drift = -spec.beta * v.phi_x * x;
  t.growth = -v.phi_x * spec.gamma * z / il(spec.modulus(), z);
  t.diffusion = 0.5 * v.phi_xx * z * z;
  t.time = v.phi_s;
  return t;
}

/// z-free lower bound -beta phi_x x - gamma^2 phi_x^2 / (phi_xx IL(gamma phi_x/phi_xx)^2) + phi_s.
inline SupersolutionTerms reduced_supersolution_terms(const TestFunctionSpec& spec, const PhiValues& v, double x) {
  SupersolutionTerms t;
  const double arg = spec.gamma * v.phi_x / v.phi_xx;
  const double il_arg = il(spec.modulus(), arg);
  t.drift = -spec.beta * v.phi_x * x;
  t.growth = -spec.gamma * spec.gamma * v.phi_x * v.phi_x / (v.phi_xx * il_arg * il_arg);
  t.time = v.phi_s;
  return t;
}

inline SupersolutionReport verify_supersolution(const TestFunctionSpec& spec, std::span<const double> grid_s,
                                                std::span<const double> grid_x, std::span<const double> grid_z,
                                                const Exec& exec = {}, double tol = 1e-10) {
  detail::require(!grid_s.empty() && !grid_x.empty() && !grid_z.empty(), ErrorKind::empty_grid,
                  "verify_supersolution: empty grid");
  struct Partial {
    double rel = std::numeric_limits<double>::infinity();
    double raw = std::numeric_limits<double>::infinity();
    SupersolutionPoint at;
    double reduced = std::numeric_limits<double>::infinity();
    SupersolutionPoint reduced_at;
    std::size_t violations = 0;
  };
  Exec by_time = exec;
  by_time.chunk = 1;
  const Partial worst = map_reduce_chunks(
      by_time, grid_s.size(), Partial{},
      [&](std::size_t b, std::size_t e) {
        Partial part;
        for (std::size_t is = b; is < e; ++is) {
          const double s = grid_s[is];
          for (double x : grid_x) {
            const PhiValues v = phi(spec, s, x);
            const auto red = reduced_supersolution_terms(spec, v, x);
            const double red_rel = red.margin() / red.scale();
            if (red_rel < part.reduced) {
              part.reduced = red_rel;
              part.reduced_at = {s, x, spec.gamma * v.phi_x / v.phi_xx};
            }
            for (double z : grid_z) {
              const auto t = supersolution_terms(spec, v, x, z);
              const double rel = t.margin() / t.scale();
              if (rel < -tol) ++part.violations;
              if (rel < part.rel) {
                part.rel = rel;
                part.raw = t.margin();
                part.at = {s, x, z};
              }
            }
          }
        }
        return part;
      },
      [](Partial acc, Partial next) {
        acc.violations += next.violations;
        if (next.rel < acc.rel) {
          acc.rel = next.rel;
          acc.raw = next.raw;
          acc.at = next.at;
        }
        if (next.reduced < acc.reduced) {
          acc.reduced = next.reduced;
          acc.reduced_at = next.reduced_at;
        }
        return acc;
      });
  SupersolutionReport r;
  r.spec = spec;
  r.worst_relative_margin = worst.rel;
  r.worst_margin = worst.raw;
  r.worst_point = worst.at;
  r.reduced_worst_relative_margin = worst.reduced;
  r.reduced_worst_point = worst.reduced_at;
  r.points = grid_s.size() * grid_x.size() * grid_z.size();
  r.violations = worst.violations;
  r.tolerance = tol;
  r.pass = worst.violations == 0;
  return r;
}

/// Relative margins on the (x, z) plane at one time, for plotting.
struct SliceRow {
  double x = 0, z = 0, relative_margin = 0;
};

inline std::vector<SliceRow> supersolution_slice(const TestFunctionSpec& spec, double s, std::span<const double> grid_x,
                                                 std::span<const double> grid_z) {
  std::vector<SliceRow> rows;
  rows.reserve(grid_x.size() * grid_z.size());
  for (double x : grid_x) {
    const PhiValues v = phi(spec, s, x);
    for (double z : grid_z) {
      const auto t = supersolution_terms(spec, v, x, z);
      rows.push_back({x, z, t.margin() / t.scale()});
    }
  }
  return rows;
}

/// Grids used by the default verification: 50 times, 200 x and 200 z points
/// log-spaced up to 1e6.
struct TestFunctionGrids {
  std::vector<double> s, x, z;

  static TestFunctionGrids defaults(double horizon, std::size_t ns = 50, std::size_t nx = 200, std::size_t nz = 200,
                                    double xmax = 1e6, double zmax = 1e6) {
    return TestFunctionGrids{linear_grid(0.0, horizon, ns), log_grid(xmax, nx), log_grid(zmax, nz)};
  }
};

/// Inverse of ln^(n): exp applied n times; nullopt-like +inf on overflow.
inline double exp_iter(int n, double v) {
  for (int i = 0; i < n; ++i) v = std::exp(v);
  return v;
}

/// Selects k by scanning ln^(n)(k) = 2 * 1.1^j until the sandwich bounds hold
/// on the given grids and the key inequality with p = 2 holds on a 200 x 200
/// log grid over [0, 1e8]^2.
inline TestFunctionSpec auto_k_spec(double beta, double gamma, int n, double lambda, double horizon,
                                    const TestFunctionGrids& grids, const Exec& exec = {}) {
  const auto key_grid = log_grid(1e8, 200);
  for (int j = 0; j < 400; ++j) {
    const double level = 2.0 * std::pow(1.1, j);
    const double k = exp_iter(n, level);
    if (!std::isfinite(k)) break;
    if (k < tower(n)) continue;
    const auto spec = TestFunctionSpec::make(beta, gamma, n, lambda, k, horizon);
    if (!verify_bounds(spec, grids.s, grids.x).pass) continue;
    if (!check_key_inequality(spec.modulus(), 2.0, key_grid, key_grid, exec).pass) continue;
    return spec;
  }
  throw Error(ErrorKind::overflow, "no representable k satisfies the test-function bounds for n = " +
                                       std::to_string(n) + ", lambda = " + std::to_string(lambda));
}

}  // namespace ilbsde
