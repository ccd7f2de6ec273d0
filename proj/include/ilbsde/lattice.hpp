#pragma once

// Recombining binomial lattice for one-dimensional Brownian motion on [0, T]:
// node (i, j), 0 <= j <= i <= N, carries b(i, j) = (2j - i) sqrt(dt). The
// children of (i, j) are (i+1, j) (down) and (i+1, j+1) (up), each with
// probability 1/2.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "ilbsde/error.hpp"
#include "ilbsde/grid.hpp"
#include "ilbsde/parallel.hpp"

namespace ilbsde {

struct BrownianLattice {
  double horizon = 1.0;
  int steps = 1;
  double dt = 1.0;
  double sqdt = 1.0;

  static BrownianLattice make(int steps, double horizon) {
    detail::require(steps >= 1, ErrorKind::parameter, "lattice needs N >= 1");
    detail::require(horizon > 0 && std::isfinite(horizon), ErrorKind::parameter, "lattice needs T > 0");
    const double dt = horizon / steps;
    return BrownianLattice{horizon, steps, dt, std::sqrt(dt)};
  }

  [[nodiscard]] double t(int i) const { return i == steps ? horizon : i * dt; }
  [[nodiscard]] double b(int i, int j) const { return (2.0 * j - i) * sqdt; }
  [[nodiscard]] std::size_t nodes() const {
    const auto n = static_cast<std::size_t>(steps);
    return (n + 1) * (n + 2) / 2;
  }
};

/// Nodewise values: level i holds i + 1 entries (levels 0..N for Y, 0..N-1 for Z).
using Field = std::vector<std::vector<double>>;

template <class Fn>
Field make_field(const BrownianLattice& lat, Fn&& fn, int levels = -1) {
  const int L = levels < 0 ? lat.steps + 1 : levels;
  Field f(static_cast<std::size_t>(L));
  for (int i = 0; i < L; ++i) {
    auto& row = f[static_cast<std::size_t>(i)];
    row.resize(static_cast<std::size_t>(i) + 1);
    for (int j = 0; j <= i; ++j) row[static_cast<std::size_t>(j)] = fn(i, j);
  }
  return f;
}

/// The values b(i, .) at one level.
inline std::vector<double> level_b(const BrownianLattice& lat, int i) {
  std::vector<double> v(static_cast<std::size_t>(i) + 1);
  for (int j = 0; j <= i; ++j) v[static_cast<std::size_t>(j)] = lat.b(i, j);
  return v;
}

namespace detail {
inline void require_child_level(const std::vector<double>& next) {
  require(next.size() >= 2, ErrorKind::shape_mismatch, "child level must have at least two nodes");
}
}  // namespace detail

/// E[X_{i+1} | node (i, j)] = (down + up) / 2.
inline std::vector<double> conditional_expectation(const std::vector<double>& next) {
  detail::require_child_level(next);
  std::vector<double> out(next.size() - 1);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = 0.5 * (next[j] + next[j + 1]);
  return out;
}

inline std::vector<double> conditional_expectation(const BrownianLattice& lat, const std::vector<double>& next) {
  detail::require(next.size() >= 2 && static_cast<int>(next.size()) <= lat.steps + 1, ErrorKind::shape_mismatch,
                  "level size does not fit the lattice");
  return conditional_expectation(next);
}

/// Martingale-representation slope (up - down) / (2 sqrt(dt)).
inline std::vector<double> z_estimate(const BrownianLattice& lat, const std::vector<double>& next) {
  detail::require(next.size() >= 2 && static_cast<int>(next.size()) <= lat.steps + 1, ErrorKind::shape_mismatch,
                  "level size does not fit the lattice");
  std::vector<double> out(next.size() - 1);
  const double inv = 1.0 / (2.0 * lat.sqdt);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = (next[j + 1] - next[j]) * inv;
  return out;
}

/// Applies the conditional expectation from level N down to level 0.
inline double root_expectation(const BrownianLattice& lat, std::vector<double> terminal) {
  detail::require(static_cast<int>(terminal.size()) == lat.steps + 1, ErrorKind::shape_mismatch,
                  "terminal level must have N + 1 nodes");
  while (terminal.size() > 1) terminal = conditional_expectation(terminal);
  return terminal[0];
}

/// Probability of reaching node (i, j): C(i, j) / 2^i, computed by forward averaging.
inline Field node_probabilities(const BrownianLattice& lat) {
  Field p(static_cast<std::size_t>(lat.steps) + 1);
  p[0] = {1.0};
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    p[i + 1].assign(i + 2, 0.0);
    for (std::size_t j = 0; j <= i; ++j) {
      p[i + 1][j] += 0.5 * p[i][j];
      p[i + 1][j + 1] += 0.5 * p[i][j];
    }
  }
  return p;
}

inline void require_shape(const BrownianLattice& lat, const Field& f, int levels) {
  detail::require(static_cast<int>(f.size()) == levels, ErrorKind::shape_mismatch,
                  "field has " + std::to_string(f.size()) + " levels, expected " + std::to_string(levels));
  for (std::size_t i = 0; i < f.size(); ++i) {
    detail::require(f[i].size() == i + 1, ErrorKind::shape_mismatch, "level " + std::to_string(i) + " has wrong size");
  }
  (void)lat;
}

// ---------------------------------------------------------------------------
// Path norms.

inline constexpr int kExhaustiveMaxSteps = 20;

namespace detail {

/// Sum over all 2^N paths of stat(path); the path with bit pattern m moves up
/// at step i when bit i of m is set.
template <class PathStat>
double enumerate_paths(int steps, const Exec& exec, PathStat&& stat) {
  const std::size_t paths = std::size_t{1} << steps;
  Exec e = exec;
  e.chunk = 4096;
  const double sum = map_reduce_chunks(
      e, paths, 0.0,
      [&](std::size_t b, std::size_t end) {
        double s = 0.0;
        for (std::size_t m = b; m < end; ++m) s += stat(static_cast<std::uint64_t>(m));
        return s;
      },
      [](double a, double b) { return a + b; });
  return sum / static_cast<double>(paths);
}

inline double outer_power(double e, double p) { return std::pow(e, std::min(1.0 / p, 1.0)); }

}  // namespace detail

/// E[max_i |Y_i|^p] by exhaustive enumeration (N <= 20).
inline double sup_moment_exhaustive(const BrownianLattice& lat, const Field& y, double p, const Exec& exec = {}) {
  require_shape(lat, y, lat.steps + 1);
  detail::require(lat.steps <= kExhaustiveMaxSteps, ErrorKind::parameter, "exhaustive enumeration needs N <= 20");
  return detail::enumerate_paths(lat.steps, exec, [&](std::uint64_t m) {
    std::size_t j = 0;
    double mx = std::abs(y[0][0]);
    for (int i = 0; i < lat.steps; ++i) {
      j += (m >> i) & 1U;
      mx = std::max(mx, std::abs(y[static_cast<std::size_t>(i) + 1][j]));
    }
    return std::pow(mx, p);
  });
}

/// E[max_i |Y_i|^p] by forward propagation of the running-maximum distribution.
inline double sup_moment_augmented(const BrownianLattice& lat, const Field& y, double p) {
  require_shape(lat, y, lat.steps + 1);
  using Dist = std::map<double, double>;  // running max -> probability
  std::vector<Dist> cur(1);
  cur[0][std::abs(y[0][0])] = 1.0;
  for (int i = 0; i < lat.steps; ++i) {
    const auto& row = y[static_cast<std::size_t>(i) + 1];
    std::vector<Dist> next(static_cast<std::size_t>(i) + 2);
    for (std::size_t j = 0; j < cur.size(); ++j) {
      for (const auto& [mx, pr] : cur[j]) {
        next[j][std::max(mx, std::abs(row[j]))] += 0.5 * pr;
        next[j + 1][std::max(mx, std::abs(row[j + 1]))] += 0.5 * pr;
      }
    }
    cur = std::move(next);
  }
  double e = 0.0;
  for (const auto& d : cur) {
    for (const auto& [mx, pr] : d) e += pr * std::pow(mx, p);
  }
  return e;
}

/// ||Y||_{S^p} = (E[sup |Y|^p])^{(1/p) ^ 1}.
inline double sp_norm(const BrownianLattice& lat, const Field& y, double p, const Exec& exec = {}) {
  detail::require(p > 0, ErrorKind::parameter, "sp_norm needs p > 0");
  const double e = lat.steps <= kExhaustiveMaxSteps ? sup_moment_exhaustive(lat, y, p, exec)
                                                    : sup_moment_augmented(lat, y, p);
  return detail::outer_power(e, p);
}

struct MpNormResult {
  double value = 0;
  std::string method;  ///< "exhaustive", "exact-p2" or "monte-carlo"
  std::size_t samples = 0;
};

/// ||Z||_{M^p} = (E[(sum_i Z_i^2 dt)^{p/2}])^{(1/p) ^ 1}. Exact for N <= 20 or
/// p = 2; otherwise a seeded Monte Carlo estimate over `mc_paths` paths.
inline MpNormResult mp_norm(const BrownianLattice& lat, const Field& z, double p, const Exec& exec = {},
                            std::uint64_t seed = 1, std::size_t mc_paths = 200000) {
  detail::require(p > 0, ErrorKind::parameter, "mp_norm needs p > 0");
  require_shape(lat, z, lat.steps);
  MpNormResult r;
  if (lat.steps <= kExhaustiveMaxSteps) {
    r.method = "exhaustive";
    r.samples = std::size_t{1} << lat.steps;
    const double e = detail::enumerate_paths(lat.steps, exec, [&](std::uint64_t m) {
      std::size_t j = 0;
      double q = 0.0;
      for (int i = 0; i < lat.steps; ++i) {
        const double v = z[static_cast<std::size_t>(i)][j];
        q += v * v * lat.dt;
        j += (m >> i) & 1U;
      }
      return std::pow(q, 0.5 * p);
    });
    r.value = detail::outer_power(e, p);
    return r;
  }
  if (p == 2.0) {
    // E[sum Z^2 dt] is additive: weight each node by its reach probability.
    r.method = "exact-p2";
    const Field prob = node_probabilities(lat);
    double e = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      for (std::size_t j = 0; j <= i; ++j) e += prob[i][j] * z[i][j] * z[i][j] * lat.dt;
    }
    r.value = detail::outer_power(e, p);
    return r;
  }
  r.method = "monte-carlo";
  r.samples = mc_paths;
  const CounterRng rng{seed};
  const double sum = map_reduce_chunks(
      exec, mc_paths, 0.0,
      [&](std::size_t b, std::size_t e) {
        double s = 0.0;
        for (std::size_t k = b; k < e; ++k) {
          std::size_t j = 0;
          double q = 0.0;
          for (int i = 0; i < lat.steps; ++i) {
            const double v = z[static_cast<std::size_t>(i)][j];
            q += v * v * lat.dt;
            j += rng.bits(static_cast<std::uint64_t>(i), k) >> 63;
          }
          s += std::pow(q, 0.5 * p);
        }
        return s;
      },
      [](double a, double b) { return a + b; });
  r.value = detail::outer_power(sum / static_cast<double>(mc_paths), p);
  return r;
}

// ---------------------------------------------------------------------------
// Class (D) proxy.

struct ClassDRow {
  double threshold = 0;
  double sup_tail = 0;  ///< max over the stopping-time family of E[|Y_tau| 1{|Y_tau| > c}]
  std::string argmax;   ///< "t=<i>" or "hit>=<h>"
};

struct ClassDReport {
  std::vector<ClassDRow> rows;
  double tolerance = 1e-8;
  bool decreasing = true;
  bool pass = false;
  std::string note = "proxy: hitting times of the threshold levels plus deterministic times";
};

/// Tail expectations over hitting times of |Y| >= h (h among the thresholds,
/// capped at T) and all deterministic grid times.
inline ClassDReport class_d_proxy(const BrownianLattice& lat, const Field& y, std::vector<double> thresholds,
                                  double tol = 1e-8) {
  require_shape(lat, y, lat.steps + 1);
  detail::require(!thresholds.empty(), ErrorKind::empty_grid, "class_d_proxy: empty threshold list");
  detail::require(std::is_sorted(thresholds.begin(), thresholds.end()), ErrorKind::parameter,
                  "thresholds must be ascending");
  const Field prob = node_probabilities(lat);
  ClassDReport r;
  r.tolerance = tol;
  for (double c : thresholds) {
    ClassDRow row;
    row.threshold = c;
    row.argmax = "t=0";
    auto tail = [c](double v) { return std::abs(v) > c ? std::abs(v) : 0.0; };
    for (int i = 0; i <= lat.steps; ++i) {
      double e = 0.0;
      for (int j = 0; j <= i; ++j) {
        e += prob[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
             tail(y[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      }
      if (e > row.sup_tail) {
        row.sup_tail = e;
        row.argmax = "t=" + std::to_string(i);
      }
    }
    for (double h : thresholds) {
      std::vector<double> v(y.back().size());
      for (std::size_t j = 0; j < v.size(); ++j) v[j] = tail(y.back()[j]);
      for (int i = lat.steps - 1; i >= 0; --i) {
        auto ce = conditional_expectation(v);
        const auto& yi = y[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < ce.size(); ++j) {
          if (std::abs(yi[j]) >= h) ce[j] = tail(yi[j]);
        }
        v = std::move(ce);
      }
      if (v[0] > row.sup_tail) {
        row.sup_tail = v[0];
        row.argmax = "hit>=" + std::to_string(h);
      }
    }
    r.rows.push_back(std::move(row));
  }
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    if (r.rows[i].sup_tail > r.rows[i - 1].sup_tail * (1 + 1e-12)) r.decreasing = false;
  }
  r.pass = r.rows.back().sup_tail <= tol;
  return r;
}

/// Shortest decimal form that round-trips.
inline std::string csv_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// CSV rows step,index,t,b,Y,Z (Z empty on the terminal level).
inline void write_lattice_csv(std::ostream& os, const BrownianLattice& lat, const Field& y, const Field& z) {
  os << "step,index,t,b,Y,Z\n";
  for (int i = 0; i <= lat.steps; ++i) {
    for (int j = 0; j <= i; ++j) {
      os << i << ',' << j << ',' << csv_number(lat.t(i)) << ',' << csv_number(lat.b(i, j)) << ','
         << csv_number(y[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) << ',';
      if (i < lat.steps) os << csv_number(z[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      os << '\n';
    }
  }
}

}  // namespace ilbsde
