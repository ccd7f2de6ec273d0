#pragma once

// Grid verification of the crucial inequality
//   2xy / psi(y) <= p x^2 / psi(x)^2 + y^2,    psi = IL_{n,k}^lambda,
// and of the three sufficient conditions on psi that imply it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ilbsde/error.hpp"
#include "ilbsde/iterlog.hpp"
#include "ilbsde/parallel.hpp"

namespace ilbsde {

inline constexpr double kDefaultRelTol = 1e-12;

namespace psi {

/// x (ln psi)'(x) from the closed form of the log-derivative.
inline double x_log_derivative(const LogChain& c, double lambda, double x) {
  double s = 0.0;
  for (int i = 1; i < c.n; ++i) s += 0.5 / c.prod(i);
  s += lambda / c.prod(c.n);
  return x / c.arg * s;
}

/// psi_0 = sum_{i<n} prod_{j=i+1}^{n-1} L_j + 2 lambda / L_n, so that
/// psi' = psi_0 psi / (2 (k+x) prod_{j<n} L_j).
inline double psi0(const LogChain& c, double lambda) {
  double s = 0.0;
  for (int i = 1; i < c.n; ++i) {
    double p = 1.0;
    for (int j = i + 1; j < c.n; ++j) p *= c[j];
    s += p;
  }
  return s + 2.0 * lambda / c[c.n];
}

inline double psi0_derivative(const LogChain& c, double lambda) {
  double s = 0.0;
  for (int i = 1; i < c.n; ++i) {
    double inner = 0.0;
    for (int j = i + 1; j < c.n; ++j) {
      double p = 1.0;
      for (int l = j + 1; l < c.n; ++l) p *= c[l];
      inner += p;
    }
    s += inner / (c.arg * c.prod(i));
  }
  return s - 2.0 * lambda / (c.arg * c.prod(c.n) * c[c.n]);
}

/// psi'(x).
inline double derivative(const LogChain& c, double lambda) {
  return psi0(c, lambda) * il_from_chain(c, lambda) / (2.0 * c.arg * c.prod(c.n - 1));
}

/// -x (ln psi')'(x), assembled from psi_0 and psi_0'.
inline double neg_x_log_second(const LogChain& c, double lambda, double x) {
  double tail = 0.0;
  for (int i = 0; i < c.n; ++i) tail += 1.0 / c.prod(i);
  const double log_deriv = x_log_derivative(c, lambda, 1.0);  // (ln psi)'
  return x * (-psi0_derivative(c, lambda) / psi0(c, lambda) - log_deriv + tail / c.arg);
}

}  // namespace psi

/// Where a worst margin was attained.
struct GridPoint {
  double x = 0;
  double y = 0;
};

struct PsiConditionReport {
  IterLogSpec spec;
  double p = 2;
  double cond_growth_margin = std::numeric_limits<double>::infinity();
  double cond_logderiv_margin = std::numeric_limits<double>::infinity();
  double cond_selfmap_margin = std::numeric_limits<double>::infinity();
  double growth_worst_x = 0;
  double logderiv_worst_x = 0;
  double selfmap_worst_x = 0;
  std::size_t grid_size = 0;
  std::size_t selfmap_skipped_overflow = 0;
  double tolerance = kDefaultRelTol;
  bool pass = false;
};

/// Resolves lambda = 0 to the equivalent (n-1, 1/2) family; n = 1 with
/// lambda = 0 has psi' = 0 and is rejected.
inline IterLogSpec reduce_zero_lambda(const IterLogSpec& spec) {
  if (spec.lambda != 0.0) return spec;
  detail::require(spec.n >= 2, ErrorKind::precondition, "n = 1 with lambda = 0 has constant psi");
  return IterLogSpec{spec.n - 1, 0.5, spec.k};
}

/// Checks x (ln psi)' <= 1/4 ^ (1 - 1/sqrt p), -x (ln psi')' <= 3/2 and
/// psi(sqrt(p) x psi(x)) <= sqrt(p) psi(x) on every grid point. Margins are
/// (RHS - LHS) / max(|RHS|, 1).
inline PsiConditionReport verify_psi_conditions(const IterLogSpec& spec_in, double p, std::span<const double> grid,
                                                double tol = kDefaultRelTol) {
  detail::require(!grid.empty(), ErrorKind::empty_grid, "verify_psi_conditions: empty grid");
  detail::require(p > 1, ErrorKind::precondition, "verify_psi_conditions needs p > 1");
  const IterLogSpec spec = reduce_zero_lambda(spec_in);
  const double sqrt_p = std::sqrt(p);
  const double growth_rhs = std::min(0.25, 1.0 - 1.0 / sqrt_p);
  const double growth_scale = std::max(std::abs(growth_rhs), 1.0);
  constexpr double logderiv_rhs = 1.5;

  PsiConditionReport r;
  r.spec = spec_in;
  r.p = p;
  r.grid_size = grid.size();
  r.tolerance = tol;
  std::size_t evaluated_selfmap = 0;
  for (double x : grid) {
    detail::require(x >= 0, ErrorKind::domain, "psi grid points must be >= 0");
    const LogChain c = log_chain(spec.n, spec.k + x);
    const double m1 = (growth_rhs - psi::x_log_derivative(c, spec.lambda, x)) / growth_scale;
    if (m1 < r.cond_growth_margin) {
      r.cond_growth_margin = m1;
      r.growth_worst_x = x;
    }
    const double m2 = (logderiv_rhs - psi::neg_x_log_second(c, spec.lambda, x)) / logderiv_rhs;
    if (m2 < r.cond_logderiv_margin) {
      r.cond_logderiv_margin = m2;
      r.logderiv_worst_x = x;
    }
    const double psi_x = il_from_chain(c, spec.lambda);
    const double image = sqrt_p * x * psi_x;
    if (!std::isfinite(image) || !std::isfinite(spec.k + image)) {
      ++r.selfmap_skipped_overflow;
      continue;
    }
    ++evaluated_selfmap;
    const double rhs = sqrt_p * psi_x;
    const double m3 = (rhs - il(spec, image)) / std::max(rhs, 1.0);
    if (m3 < r.cond_selfmap_margin) {
      r.cond_selfmap_margin = m3;
      r.selfmap_worst_x = x;
    }
  }
  if (evaluated_selfmap == 0) {
    throw Error(ErrorKind::overflow, "every self-map image overflowed; nothing verified");
  }
  r.pass = r.cond_growth_margin >= -tol && r.cond_logderiv_margin >= -tol && r.cond_selfmap_margin >= -tol;
  return r;
}

struct KeyInequalityReport {
  IterLogSpec spec;
  double p = 2;
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_relative_margin = std::numeric_limits<double>::infinity();
  GridPoint worst_point;
  std::size_t pairs = 0;
  std::size_t violations = 0;
  double tolerance = kDefaultRelTol;
  bool pass = false;
};

/// Exhaustive pairwise check of p x^2/psi(x)^2 + y^2 - 2xy/psi(y) >= 0.
/// A pair violates when the margin is below -tol * max(RHS, 1).
inline KeyInequalityReport check_key_inequality(const IterLogSpec& spec, double p, std::span<const double> grid_x,
                                                std::span<const double> grid_y, const Exec& exec = {},
                                                double tol = kDefaultRelTol) {
  detail::require(!grid_x.empty() && !grid_y.empty(), ErrorKind::empty_grid, "check_key_inequality: empty grid");
  detail::require(p > 0, ErrorKind::parameter, "check_key_inequality needs p > 0");
  std::vector<double> px_term(grid_x.size()), inv_psi_y(grid_y.size());
  for (std::size_t i = 0; i < grid_x.size(); ++i) {
    const double x = grid_x[i];
    const double s = il(spec, x);
    px_term[i] = p * x * x / (s * s);
  }
  for (std::size_t j = 0; j < grid_y.size(); ++j) inv_psi_y[j] = 1.0 / il(spec, grid_y[j]);

  struct Partial {
    double rel = std::numeric_limits<double>::infinity();
    double raw = std::numeric_limits<double>::infinity();
    std::size_t i = 0, j = 0;
    std::size_t violations = 0;
  };
  Exec rows = exec;
  rows.chunk = 16;
  const Partial worst = map_reduce_chunks(
      rows, grid_x.size(), Partial{},
      [&](std::size_t b, std::size_t e) {
        Partial part;
        for (std::size_t i = b; i < e; ++i) {
          const double x = grid_x[i];
          for (std::size_t j = 0; j < grid_y.size(); ++j) {
            const double y = grid_y[j];
            const double rhs = px_term[i] + y * y;
            const double margin = rhs - 2.0 * x * y * inv_psi_y[j];
            const double rel = margin / std::max(rhs, 1.0);
            if (rel < -tol) ++part.violations;
            if (rel < part.rel) part = Partial{rel, margin, i, j, part.violations};
          }
        }
        return part;
      },
      [](Partial acc, Partial next) {
        acc.violations += next.violations;
        if (next.rel < acc.rel) {
          const auto v = acc.violations;
          acc = next;
          acc.violations = v;
        }
        return acc;
      });

  KeyInequalityReport r;
  r.spec = spec;
  r.p = p;
  r.worst_margin = worst.raw;
  r.worst_relative_margin = worst.rel;
  r.worst_point = GridPoint{grid_x[worst.i], grid_y[worst.j]};
  r.pairs = grid_x.size() * grid_y.size();
  r.violations = worst.violations;
  r.tolerance = tol;
  r.pass = worst.violations == 0;
  return r;
}

/// Default candidate ladder: e^(n) followed by e^2, e^4, ..., e^32 above it.
inline std::vector<double> default_k_ladder(int n) {
  std::vector<double> ladder{tower(n)};
  for (int e = 2; e <= 32; e *= 2) {
    const double k = std::exp(static_cast<double>(e));
    if (k > ladder.front()) ladder.push_back(k);
  }
  return ladder;
}

struct FindKResult {
  int n = 1;
  double lambda = 0;
  double p = 2;
  double k = 0;
  std::size_t candidate_index = 0;
  std::vector<double> candidates;
  PsiConditionReport psi;
  KeyInequalityReport key;
  bool next_candidate_checked = false;
  bool next_candidate_passed = false;
};

/// Smallest ladder candidate for which both the psi conditions and the key
/// inequality pass; the following candidate is spot-checked for monotonicity.
inline FindKResult find_min_k(int n, double lambda, double p, std::span<const double> k_candidates,
                              std::span<const double> grid_x, std::span<const double> grid_y, const Exec& exec = {},
                              double tol = kDefaultRelTol) {
  detail::require(!k_candidates.empty(), ErrorKind::not_found, "find_min_k: no candidates");
  const double floor = tower(n);
  for (double k : k_candidates) {
    detail::require(k >= floor * (1 - 1e-12), ErrorKind::precondition,
                    "candidate k = " + std::to_string(k) + " below e^(" + std::to_string(n) + ")");
  }
  detail::require(std::is_sorted(k_candidates.begin(), k_candidates.end()), ErrorKind::parameter,
                  "k candidates must be ascending");

  auto passes = [&](double k, PsiConditionReport* psi_out, KeyInequalityReport* key_out) {
    const auto spec = IterLogSpec::make(n, lambda, k);
    auto psi = verify_psi_conditions(spec, p, grid_x, tol);
    bool ok = psi.pass;
    KeyInequalityReport key;
    if (ok) {
      key = check_key_inequality(spec, p, grid_x, grid_y, exec, tol);
      ok = key.pass;
    }
    if (psi_out) *psi_out = std::move(psi);
    if (key_out) *key_out = std::move(key);
    return ok;
  };

  FindKResult r;
  r.n = n;
  r.lambda = lambda;
  r.p = p;
  r.candidates.assign(k_candidates.begin(), k_candidates.end());
  for (std::size_t idx = 0; idx < k_candidates.size(); ++idx) {
    if (!passes(k_candidates[idx], &r.psi, &r.key)) continue;
    r.k = k_candidates[idx];
    r.candidate_index = idx;
    if (idx + 1 < k_candidates.size()) {
      r.next_candidate_checked = true;
      r.next_candidate_passed = passes(k_candidates[idx + 1], nullptr, nullptr);
    }
    return r;
  }
  throw Error(ErrorKind::not_found, "no candidate k passes for n = " + std::to_string(n) +
                                        ", lambda = " + std::to_string(lambda) + ", p = " + std::to_string(p));
}

/// Sufficient k from the explicit conditions of the existence argument.
struct AnalyticKFloor {
  int n = 1;
  double lambda = 0;
  double p = 2;
  /// max(e^(n), exp(((n-1)/2 + lambda) / (1/4 ^ (1 - 1/sqrt p)))).
  double k_logderiv = 0;
  /// p^{1/(n-1+2 lambda)}.
  double delta = 1;
  /// "found", "not-applicable" (n = 1) or "beyond-double-range".
  std::string selfmap_status;
  std::optional<double> k_selfmap;
  /// Joined value when representable.
  std::optional<double> k_sufficient;
};

/// Both parts of the self-map sufficient condition at k, checked on `grid`:
///   sqrt(p) (k+x) psi(x) <= (k+x)^delta  and  delta ln^(i)(k+x) <= (ln^(i)(k+x))^delta.
/// Evaluated in log form so that large k do not overflow.
inline bool selfmap_sufficient_condition(int n, double lambda, double p, double k, std::span<const double> grid) {
  const double delta = std::pow(p, 1.0 / (n - 1 + 2 * lambda));
  const double log_sqrt_p = 0.5 * std::log(p);
  const double log_delta = std::log(delta);
  for (double x : grid) {
    const LogChain c = log_chain(n, k + x);
    if (log_sqrt_p + std::log(il_from_chain(c, lambda)) > (delta - 1.0) * c[1]) return false;
    for (int i = 1; i <= n; ++i) {
      if (!(c[i] > 0) || log_delta > (delta - 1.0) * std::log(c[i])) return false;
    }
  }
  return true;
}

inline AnalyticKFloor analytic_k_floor(int n, double lambda, double p, std::span<const double> grid) {
  detail::require(p > 1, ErrorKind::precondition, "analytic_k_floor needs p > 1");
  detail::require(lambda > 0, ErrorKind::precondition, "analytic_k_floor needs lambda > 0");
  AnalyticKFloor r;
  r.n = n;
  r.lambda = lambda;
  r.p = p;
  const double bound = std::min(0.25, 1.0 - 1.0 / std::sqrt(p));
  r.k_logderiv = std::max(tower(n), std::exp(((n - 1) / 2.0 + lambda) / bound));
  r.delta = std::pow(p, 1.0 / (n - 1 + 2 * lambda));
  if (n == 1) {
    r.selfmap_status = "not-applicable";
    r.k_sufficient = r.k_logderiv;
    return r;
  }
  // Conditions depend on ln k; scan s = ln k on a geometric ladder.
  const double s0 = std::log(r.k_logderiv);
  const double s_max = std::log(std::numeric_limits<double>::max()) - 1.0;
  for (int j = 0;; ++j) {
    const double s = s0 * std::pow(2.0, j / 8.0);
    if (s > s_max) break;
    const double k = std::exp(s);
    if (selfmap_sufficient_condition(n, lambda, p, k, grid)) {
      r.selfmap_status = "found";
      r.k_selfmap = k;
      r.k_sufficient = std::max(k, r.k_logderiv);
      return r;
    }
  }
  r.selfmap_status = "beyond-double-range";
  return r;
}

struct Counterexample {
  IterLogSpec spec;
  double p = 1;
  double x = 0;
  double y = 0;
  double psi_x = 1;
  double psi_y = 1;
  double margin = 0;
};

/// For p <= 1: picks y > 0, sets x = y psi(y), and returns the strictly
/// negative value of y^2 - 2xy/psi(y) + p x^2/psi(x)^2.
inline Counterexample counterexample_p_le_1(const IterLogSpec& spec, double p, double y = 10.0) {
  detail::require(spec.lambda > 0, ErrorKind::precondition, "counterexample needs lambda > 0");
  detail::require(p > 0 && p <= 1, ErrorKind::precondition, "counterexample needs 0 < p <= 1");
  detail::require(y > 0 && std::isfinite(y), ErrorKind::parameter, "counterexample needs y > 0");
  Counterexample c;
  c.spec = spec;
  c.p = p;
  c.y = y;
  c.psi_y = il(spec, y);
  c.x = y * c.psi_y;
  c.psi_x = il(spec, c.x);
  c.margin = y * y - 2.0 * c.x * y / c.psi_y + p * c.x * c.x / (c.psi_x * c.psi_x);
  if (!(c.margin < 0)) {
    throw Error(ErrorKind::degenerate, "constructed pair has non-negative margin " + std::to_string(c.margin));
  }
  return c;
}

}  // namespace ilbsde
