#pragma once

// A priori bound |Y_t| + int_0^t f <= C E[|xi| + int_0^T f | F_t] + C and the
// comparison property, checked nodewise on solved lattices.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ilbsde/error.hpp"
#include "ilbsde/genmodel.hpp"
#include "ilbsde/lattice.hpp"
#include "ilbsde/solver.hpp"
#include "ilbsde/testfn.hpp"

namespace ilbsde {

/// Constants behind C = 2 k1 max(k, 1) with k1 = exp(2 (beta + 2 gamma^2 / (2 lambda - 1)) T).
/// k may exceed binary64; log_k and log_C are always finite.
struct AprioriConstants {
  double beta = 0;
  double gamma = 1;
  int n = 2;
  double lambda = 0.75;
  double horizon = 1;
  double k_level = 0;  ///< ln^(n)(k)
  double log_k = 0;
  double k = 0;        ///< +inf when not representable
  std::string k_source;
  double k1 = 1;
  double log_C = 0;
  double C = 0;        ///< +inf when not representable
};

inline double k1_constant(double beta, double gamma, double lambda, double horizon) {
  return std::exp(2.0 * (beta + 2.0 * gamma * gamma / (2.0 * lambda - 1.0)) * horizon);
}

inline AprioriConstants apriori_constants_for_k(double beta, double gamma, int n, double lambda, double horizon,
                                                double log_k, std::string source) {
  detail::require(lambda > 0.5, ErrorKind::parameter, "lambda must exceed 1/2");
  detail::require(gamma > 0 && beta >= 0 && horizon > 0, ErrorKind::parameter, "need beta >= 0, gamma > 0, T > 0");
  AprioriConstants c;
  c.beta = beta;
  c.gamma = gamma;
  c.n = n;
  c.lambda = lambda;
  c.horizon = horizon;
  c.log_k = log_k;
  c.k = std::exp(log_k);
  c.k_level = n == 1 ? log_k : ln_iter(n - 1, log_k);
  c.k_source = std::move(source);
  c.k1 = k1_constant(beta, gamma, lambda, horizon);
  c.log_C = std::log(2.0) + std::log(c.k1) + std::max(log_k, 0.0);
  c.C = std::exp(c.log_C);
  return c;
}

inline AprioriConstants apriori_constants(const TestFunctionSpec& spec) {
  return apriori_constants_for_k(spec.beta, spec.gamma, spec.n, spec.lambda, spec.horizon, std::log(spec.k),
                                 "test-function");
}

/// Uses the grid-verified test-function k when it is representable. Otherwise
/// sets ln^(n)(k) = 1.1 * 2^{1/(2 lambda - 1)}, the level at which
/// phi_x >= mu/2 holds, and records that k lies beyond binary64.
inline AprioriConstants apriori_constants(double beta, double gamma, int n, double lambda, double horizon,
                                          const Exec& exec = {}) {
  try {
    const auto grids = TestFunctionGrids::defaults(horizon, 10, 100, 10);
    return apriori_constants(auto_k_spec(beta, gamma, n, lambda, horizon, grids, exec));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::overflow) throw;
  }
  const double level = 1.1 * std::pow(2.0, 1.0 / (2.0 * lambda - 1.0));
  const double log_k = n == 1 ? level : exp_iter(n - 1, level);
  return apriori_constants_for_k(beta, gamma, n, lambda, horizon, log_k, "analytic-level (k beyond binary64)");
}

struct NodeRef {
  int step = 0;
  int index = 0;
};

struct AprioriReport {
  AprioriConstants constants;
  int steps = 0;
  /// Margins divided by C:
  ///   A + I (1 - 1/C) + 1 - |Y| / C, A = E[|xi| + int_t^T f | node], I = min path integral.
  Field margins;
  double min_margin = std::numeric_limits<double>::infinity();
  double min_scaled_margin = std::numeric_limits<double>::infinity();  ///< margin / max(1, A + I + 1)
  NodeRef worst;
  double tolerance = 1e-8;
  bool tampered = false;
  bool pass = false;
  std::string note = "margins are normalized by C; the path integral enters at its minimum over paths to the node";
};

/// Per-step summary for plotting: t, max |Y|, max (|Y| + I_max), max A, min margin.
struct AprioriProfileRow {
  double t = 0, max_abs_y = 0, max_ybar = 0, max_a = 0, min_margin = 0;
};

/// E[|xi| + sum_{m >= i} f(t_m, b) dt | node (i, j)] by backward averaging.
inline Field expected_remaining(const SolutionLattice& sol, const GeneratorModel& model) {
  const auto& lat = sol.lattice;
  Field a(static_cast<std::size_t>(lat.steps) + 1);
  auto& last = a.back();
  last.resize(sol.Y.back().size());
  for (std::size_t j = 0; j < last.size(); ++j) last[j] = std::abs(sol.Y.back()[j]);
  for (int i = lat.steps - 1; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    a[ui] = conditional_expectation(a[ui + 1]);
    for (std::size_t j = 0; j < a[ui].size(); ++j) a[ui][j] += model.f(lat.t(i), lat.b(i, static_cast<int>(j))) * lat.dt;
  }
  return a;
}

/// Checks the bound nodewise. The model must carry an H2 certificate whose
/// (beta, gamma, n, lambda) match the constants. `y_scale` multiplies Y before
/// the check (a tampering control when != 1).
inline AprioriReport apriori_check(const SolutionLattice& sol, const BsdeProblem& problem, const AprioriConstants& c,
                                   double y_scale = 1.0, double tol = 1e-8) {
  const auto* cert = problem.model.find("H2");
  if (cert == nullptr) {
    throw Error(ErrorKind::certificate_missing, "model " + problem.model.name + " has no H2 certificate");
  }
  const auto& h2 = std::get<CertH2>(*cert);
  const bool match = h2.n == c.n && std::abs(h2.lambda - c.lambda) <= 1e-12 && std::abs(h2.beta - c.beta) <= 1e-12 &&
                     std::abs(h2.gamma - c.gamma) <= 1e-12;
  detail::require(match, ErrorKind::parameter, "constants do not match the model's H2 certificate");
  detail::require(std::abs(c.horizon - problem.horizon) <= 1e-12 * problem.horizon, ErrorKind::parameter,
                  "constants and problem use different horizons");
  require_shape(sol.lattice, sol.Y, sol.lattice.steps + 1);

  AprioriReport r;
  r.constants = c;
  r.steps = sol.lattice.steps;
  r.tolerance = tol;
  r.tampered = y_scale != 1.0;
  const Field a = expected_remaining(sol, problem.model);
  const double inv_c = std::exp(-c.log_C);
  r.margins.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    r.margins[i].resize(a[i].size());
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      const double I = sol.f_min[i][j];
      const double y = std::abs(y_scale * sol.Y[i][j]);
      const double m = a[i][j] + I * (1.0 - inv_c) + 1.0 - y * inv_c;
      r.margins[i][j] = m;
      const double scaled = m / std::max(1.0, a[i][j] + I + 1.0);
      if (scaled < r.min_scaled_margin) {
        r.min_scaled_margin = scaled;
        r.min_margin = m;
        r.worst = NodeRef{static_cast<int>(i), static_cast<int>(j)};
      }
    }
  }
  r.pass = r.min_scaled_margin >= -tol;
  return r;
}

inline std::vector<AprioriProfileRow> apriori_profile(const SolutionLattice& sol, const BsdeProblem& problem,
                                                      const AprioriReport& rep, double y_scale = 1.0) {
  const Field a = expected_remaining(sol, problem.model);
  std::vector<AprioriProfileRow> rows;
  for (std::size_t i = 0; i < a.size(); ++i) {
    AprioriProfileRow row;
    row.t = sol.lattice.t(static_cast<int>(i));
    row.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      const double y = std::abs(y_scale * sol.Y[i][j]);
      row.max_abs_y = std::max(row.max_abs_y, y);
      row.max_ybar = std::max(row.max_ybar, y + sol.f_max[i][j]);
      row.max_a = std::max(row.max_a, a[i][j]);
      row.min_margin = std::min(row.min_margin, rep.margins[i][j]);
    }
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Comparison.

struct ComparisonReport {
  int steps = 0;
  Field gaps;  ///< Y' - Y
  double min_gap = std::numeric_limits<double>::infinity();
  double max_gap = -std::numeric_limits<double>::infinity();
  NodeRef worst;
  bool z_free = false;
  double scale = 1;
  double tolerance = 0;
  std::size_t generator_samples = 0;
  bool pass = false;
  std::string note =
      "every lattice process is bounded, so the class (D) requirement on (Y - Y')^+ holds trivially";
};

/// Solves both problems and reports Y' - Y. Requires xi <= xi' at every
/// terminal node and g <= g' at `gen_samples` points of the first model's box.
inline ComparisonReport comparison_check(const BsdeProblem& lower, const BsdeProblem& upper, const SolverConfig& cfg,
                                         const SampleOptions& gen_samples) {
  detail::require(std::abs(lower.horizon - upper.horizon) <= 0, ErrorKind::parameter,
                  "compared problems must share the horizon");
  const auto lat = BrownianLattice::make(cfg.steps, lower.horizon);
  for (int j = 0; j <= lat.steps; ++j) {
    const double b = lat.b(lat.steps, j);
    const double xi = lower.terminal(b, lower.horizon), xi2 = upper.terminal(b, upper.horizon);
    if (!(xi <= xi2)) {
      throw Error(ErrorKind::hypothesis_violation,
                  "xi > xi' at terminal node " + std::to_string(j) + " (b = " + std::to_string(b) + ")");
    }
  }
  // g <= g' on sampled points; the lower model's box is used for both.
  GeneratorModel probe = lower.model;
  probe.name = lower.model.name + " vs " + upper.model.name;
  const auto gen = detail::run_sampled(probe, "g<=g'", gen_samples, [&](const Sample& s) {
    return std::pair{upper.model(s.t, s.b, s.y, s.z), lower.model(s.t, s.b, s.y, s.z)};
  });
  if (!gen.pass) {
    throw Error(ErrorKind::hypothesis_violation,
                "g > g' at a sampled point (relative margin " + std::to_string(gen.min_margin) + ")");
  }

  const auto s1 = solve(lower, cfg);
  const auto s2 = solve(upper, cfg);
  ComparisonReport r;
  r.steps = cfg.steps;
  r.z_free = lower.model.z_free() && upper.model.z_free();
  r.generator_samples = gen_samples.samples;
  double ymax = 0.0;
  r.gaps.resize(s1.Y.size());
  for (std::size_t i = 0; i < s1.Y.size(); ++i) {
    r.gaps[i].resize(s1.Y[i].size());
    for (std::size_t j = 0; j < s1.Y[i].size(); ++j) {
      const double gap = s2.Y[i][j] - s1.Y[i][j];
      r.gaps[i][j] = gap;
      ymax = std::max({ymax, std::abs(s1.Y[i][j]), std::abs(s2.Y[i][j])});
      r.max_gap = std::max(r.max_gap, gap);
      if (gap < r.min_gap) {
        r.min_gap = gap;
        r.worst = NodeRef{static_cast<int>(i), static_cast<int>(j)};
      }
    }
  }
  r.scale = std::max(1.0, ymax);
  r.tolerance = r.z_free ? 0.0 : 1e-6 * r.scale;
  r.pass = r.min_gap >= -r.tolerance;
  return r;
}

}  // namespace ilbsde
