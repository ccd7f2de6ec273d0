#pragma once

// Backward induction for Y_t = xi + int_t^T g(s, B_s, Y_s, Z_s) ds - int_t^T Z_s dB_s
// on the binomial lattice.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ilbsde/error.hpp"
#include "ilbsde/genmodel.hpp"
#include "ilbsde/lattice.hpp"
#include "ilbsde/parallel.hpp"

namespace ilbsde {

enum class TerminalKind { constant, linear, square, sine, abs, exp_linear, heavy };

constexpr std::string_view to_string(TerminalKind k) noexcept {
  switch (k) {
    case TerminalKind::constant: return "constant";
    case TerminalKind::linear: return "linear";
    case TerminalKind::square: return "square";
    case TerminalKind::sine: return "sine";
    case TerminalKind::abs: return "abs";
    case TerminalKind::exp_linear: return "exp_linear";
    case TerminalKind::heavy: return "heavy";
  }
  return "?";
}

inline std::optional<TerminalKind> terminal_kind_from_string(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(TerminalKind::heavy); ++i) {
    const auto k = static_cast<TerminalKind>(i);
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

/// xi = scale * F(B_T) + shift, with F one of
///   constant: 1, linear: b, square: b^2, sine: sin b, abs: |b|,
///   exp_linear: exp(param b), heavy: exp(b^2 / (2 T (1 + param))).
/// The heavy functional is integrable but not square-integrable for
/// param < 1; the lattice truncates it at its extreme nodes.
struct Terminal {
  TerminalKind kind = TerminalKind::linear;
  double scale = 1.0;
  double shift = 0.0;
  double param = 0.0;

  [[nodiscard]] double operator()(double b, double horizon) const {
    double v = 0.0;
    switch (kind) {
      case TerminalKind::constant: v = 1.0; break;
      case TerminalKind::linear: v = b; break;
      case TerminalKind::square: v = b * b; break;
      case TerminalKind::sine: v = std::sin(b); break;
      case TerminalKind::abs: v = std::abs(b); break;
      case TerminalKind::exp_linear: v = std::exp(param * b); break;
      case TerminalKind::heavy: v = std::exp(b * b / (2.0 * horizon * (1.0 + param))); break;
    }
    return scale * v + shift;
  }
};

struct BsdeProblem {
  Terminal terminal;
  GeneratorModel model;
  double horizon = 1.0;
  int dim = 1;
};

enum class Scheme { explicit_y, picard_implicit };

constexpr std::string_view to_string(Scheme s) noexcept {
  return s == Scheme::explicit_y ? "explicit" : "picard-implicit";
}

struct SolverConfig {
  int steps = 100;
  double picard_tol = 1e-10;
  int picard_max_iter = 50;
  Scheme scheme = Scheme::picard_implicit;
  Exec exec{};
};

struct StepDiagnostics {
  int step = 0;
  int iterations = 0;
  double residual = 0.0;         ///< final max-norm change over the level
  std::vector<double> history;   ///< max-norm change after each sweep
};

struct SolutionLattice {
  BrownianLattice lattice;
  Field Y;       ///< levels 0..N
  Field Z;       ///< levels 0..N-1
  /// int_0^{t_i} f ds (left endpoint) is path dependent; the node keeps its
  /// conditional mean and the min/max over paths reaching it.
  Field f_mean, f_min, f_max;
  std::vector<StepDiagnostics> diagnostics;  ///< ordered by step, N-1 down to 0
  double terminal_max_abs_b = 0;
  double terminal_max_abs_xi = 0;
  Scheme scheme = Scheme::picard_implicit;
  bool diverged = false;
  std::string divergence_message;

  [[nodiscard]] double root() const { return Y[0][0]; }
};

/// Forward DP for the path integral of the driver.
inline void fill_driver_integral(SolutionLattice& s, const GeneratorModel& model) {
  const auto& lat = s.lattice;
  const std::size_t L = static_cast<std::size_t>(lat.steps) + 1;
  s.f_mean.assign(L, {});
  s.f_min.assign(L, {});
  s.f_max.assign(L, {});
  s.f_mean[0] = s.f_min[0] = s.f_max[0] = {0.0};
  for (int i = 0; i < lat.steps; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const std::size_t w = ui + 2;
    std::vector<double> mean(w, 0.0);
    std::vector<double> lo(w, std::numeric_limits<double>::infinity());
    std::vector<double> hi(w, -std::numeric_limits<double>::infinity());
    // Child j of level i+1 is reached from parent j-1 with weight j and from
    // parent j with weight i+1-j (ratio of binomial coefficients).
    const double denom = static_cast<double>(ui + 1);
    for (std::size_t j = 0; j <= ui; ++j) {
      const double inc = model.f(lat.t(i), lat.b(i, static_cast<int>(j))) * lat.dt;
      const double here = s.f_mean[ui][j] + inc;
      mean[j] += static_cast<double>(ui + 1 - j) / denom * here;
      mean[j + 1] += static_cast<double>(j + 1) / denom * here;
      for (std::size_t child : {j, j + 1}) {
        lo[child] = std::min(lo[child], s.f_min[ui][j] + inc);
        hi[child] = std::max(hi[child], s.f_max[ui][j] + inc);
      }
    }
    s.f_mean[ui + 1] = std::move(mean);
    s.f_min[ui + 1] = std::move(lo);
    s.f_max[ui + 1] = std::move(hi);
  }
}

namespace detail {

inline SolutionLattice solve_impl(const BsdeProblem& problem, const SolverConfig& cfg, bool throw_on_divergence) {
  if (problem.dim != 1 || problem.model.dim != 1) {
    throw Error(ErrorKind::unsupported_dimension, "the lattice solver supports d = 1 only");
  }
  require(cfg.steps >= 1, ErrorKind::parameter, "solver needs N >= 1");
  require(cfg.picard_tol > 0, ErrorKind::parameter, "picard_tol must be > 0");
  require(cfg.picard_max_iter >= 1, ErrorKind::parameter, "picard_max_iter must be >= 1");

  SolutionLattice s;
  s.lattice = BrownianLattice::make(cfg.steps, problem.horizon);
  s.scheme = cfg.scheme;
  const auto& lat = s.lattice;
  const auto N = static_cast<std::size_t>(lat.steps);
  s.Y.resize(N + 1);
  s.Z.resize(N);

  auto& term = s.Y[N];
  term.resize(N + 1);
  for (std::size_t j = 0; j <= N; ++j) {
    const double b = lat.b(lat.steps, static_cast<int>(j));
    term[j] = problem.terminal(b, problem.horizon);
    require(std::isfinite(term[j]), ErrorKind::overflow, "terminal value is not finite at node " + std::to_string(j));
    s.terminal_max_abs_b = std::max(s.terminal_max_abs_b, std::abs(b));
    s.terminal_max_abs_xi = std::max(s.terminal_max_abs_xi, std::abs(term[j]));
  }

  Exec node_exec = cfg.exec;
  node_exec.chunk = 256;
  const auto& g = problem.model;
  for (int i = lat.steps - 1; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto& next = s.Y[ui + 1];
    const std::vector<double> ey = conditional_expectation(next);
    s.Z[ui] = z_estimate(lat, next);
    const auto& z = s.Z[ui];
    const double t = lat.t(i);
    std::vector<double> y(ey.size());
    StepDiagnostics d;
    d.step = i;

    auto sweep = [&](const std::vector<double>& at) {
      std::vector<double> out(at.size());
      for_chunks(node_exec, at.size(), [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j) out[j] = ey[j] + g(t, lat.b(i, static_cast<int>(j)), at[j], z[j]) * lat.dt;
      });
      return out;
    };

    if (cfg.scheme == Scheme::explicit_y) {
      y = sweep(ey);
      d.iterations = 1;
    } else {
      y = ey;
      for (;;) {
        std::vector<double> nxt = sweep(y);
        double res = 0.0;
        bool finite = true;
        for (std::size_t j = 0; j < y.size(); ++j) {
          if (!std::isfinite(nxt[j])) finite = false;
          res = std::max(res, std::abs(nxt[j] - y[j]));
        }
        y = std::move(nxt);
        ++d.iterations;
        d.residual = finite ? res : std::numeric_limits<double>::infinity();
        d.history.push_back(d.residual);
        if (finite && res <= cfg.picard_tol) break;
        if (!finite || d.iterations >= cfg.picard_max_iter) {
          s.diverged = true;
          s.divergence_message = "Picard iteration at step " + std::to_string(i) + " stopped after " +
                                 std::to_string(d.iterations) + " sweeps with residual " +
                                 std::to_string(d.residual);
          s.diagnostics.push_back(std::move(d));
          if (throw_on_divergence) throw Error(ErrorKind::picard_divergence, s.divergence_message);
          return s;
        }
      }
    }
    for (double v : y) {
      require(std::isfinite(v), ErrorKind::overflow, "non-finite Y at step " + std::to_string(i));
    }
    s.Y[ui] = std::move(y);
    s.diagnostics.push_back(std::move(d));
  }
  fill_driver_integral(s, g);
  return s;
}

}  // namespace detail

inline SolutionLattice solve(const BsdeProblem& problem, const SolverConfig& cfg) {
  return detail::solve_impl(problem, cfg, true);
}

/// Per-step sweep counts and residuals; stops at the first step that fails to
/// converge instead of throwing.
inline std::vector<StepDiagnostics> picard_residual_history(const BsdeProblem& problem, const SolverConfig& cfg) {
  return detail::solve_impl(problem, cfg, false).diagnostics;
}

}  // namespace ilbsde
