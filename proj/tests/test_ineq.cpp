#include <cmath>
#include <numbers>
#include <vector>

#include "ilbsde/grid.hpp"
#include "ilbsde/ineq.hpp"
#include "support.hpp"

using namespace ilbsde;
using Catch::Approx;

namespace {

// Key inequality margin from raw il calls.
double key_margin(const IterLogSpec& s, double p, double x, double y) {
  const double px = il(s, x), py = il(s, y);
  return p * x * x / (px * px) + y * y - 2.0 * x * y / py;
}

}  // namespace

TEST_CASE("psi conditions at a large shift pass", "[ineq]") {
  const auto grid = log_grid(1e6, 2000);
  const auto r = verify_psi_conditions(IterLogSpec::make(1, 1.0, std::exp(9.0)), 2.0, grid);
  CHECK(r.pass);
  // x (ln psi)' <= lambda / ln k = 1/9.
  const double bound = std::min(0.25, 1 - 1 / std::sqrt(2.0));
  CHECK(r.cond_growth_margin >= (bound - 1.0 / 9.0) / 1.0 - 1e-12);
  CHECK(r.grid_size == grid.size());
}

TEST_CASE("psi growth condition fails at k = e", "[ineq]") {
  const auto grid = log_grid(1e6, 2000);
  const auto r = verify_psi_conditions(IterLogSpec::make(1, 1.0, std::numbers::e), 2.0, grid);
  CHECK_FALSE(r.pass);
  CHECK(r.cond_growth_margin < 0);
  CHECK(r.growth_worst_x < 10.0);
}

TEST_CASE("empty grids are rejected", "[ineq]") {
  const std::vector<double> none;
  const auto s = IterLogSpec::standard(2, 0.75);
  REQUIRE_ERROR_KIND(verify_psi_conditions(s, 2.0, none), ErrorKind::empty_grid);
  REQUIRE_ERROR_KIND(check_key_inequality(s, 2.0, none, none), ErrorKind::empty_grid);
}

TEST_CASE("x = 0 row of the key inequality has margin y^2", "[ineq]") {
  const auto s = IterLogSpec::standard(2, 0.75);
  const std::vector<double> xs{0.0};
  const auto ys = log_grid(1e8, 200);
  const auto r = check_key_inequality(s, 2.0, xs, ys);
  CHECK(r.pass);
  CHECK(r.worst_margin == 0.0);
  for (double y : ys) CHECK(key_margin(s, 2.0, 0.0, y) == Approx(y * y));
}

TEST_CASE("key inequality at the searched k on the full grid", "[ineq]") {
  const auto grid = log_grid(1e8, 1000);
  const auto ladder = default_k_ladder(2);
  const auto fk = find_min_k(2, 0.75, 2.0, ladder, grid, grid);
  CHECK(fk.key.pass);
  CHECK(fk.psi.pass);
  CHECK(fk.key.pairs == grid.size() * grid.size());
  // Independent recomputation of the worst pair.
  const auto s = IterLogSpec::make(2, 0.75, fk.k);
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); i += 7) {
    for (std::size_t j = 0; j < grid.size(); j += 7) {
      const double rhs = 2.0 * grid[i] * grid[i] / std::pow(il(s, grid[i]), 2) + grid[j] * grid[j];
      worst = std::min(worst, key_margin(s, 2.0, grid[i], grid[j]) / std::max(rhs, 1.0));
    }
  }
  CHECK(worst >= -1e-12);
}

TEST_CASE("find_min_k ladder search", "[ineq]") {
  const auto grid = log_grid(1e8, 300);
  const std::vector<double> ladder{std::numbers::e, std::exp(2.0), std::exp(4.0), std::exp(8.0), std::exp(16.0)};
  const auto r1 = find_min_k(1, 1.0, 2.0, ladder, grid, grid);
  CHECK(r1.k == ladder[r1.candidate_index]);
  // Every smaller candidate fails one of the two checks.
  for (std::size_t i = 0; i < r1.candidate_index; ++i) {
    const auto s = IterLogSpec::make(1, 1.0, ladder[i]);
    const bool ok = verify_psi_conditions(s, 2.0, grid).pass && check_key_inequality(s, 2.0, grid, grid).pass;
    CHECK_FALSE(ok);
  }
  if (r1.next_candidate_checked) CHECK(r1.next_candidate_passed);

  const auto r2 = find_min_k(2, 0.75, 2.0, default_k_ladder(2), grid, grid);
  CHECK(r2.psi.pass);
  CHECK(r2.key.pass);

  const std::vector<double> low{2.0, 2.5};
  REQUIRE_ERROR_KIND(find_min_k(1, 1.0, 2.0, low, grid, grid), ErrorKind::precondition);
}

TEST_CASE("analytic k floor", "[ineq]") {
  const auto grid = log_grid(1e8, 300);
  const auto a1 = analytic_k_floor(1, 1.0, 2.0, grid);
  CHECK(a1.k_logderiv == Approx(std::exp(4.0)).epsilon(1e-14));
  CHECK(a1.selfmap_status == "not-applicable");

  const auto a2 = analytic_k_floor(2, 0.75, 2.0, grid);
  CHECK(a2.k_logderiv == Approx(std::exp(5.0)).epsilon(1e-14));
  CHECK(a2.delta == Approx(std::pow(2.0, 1.0 / 2.5)).epsilon(1e-15));
  REQUIRE(a2.k_sufficient.has_value());
  CHECK(*a2.k_sufficient >= a2.k_logderiv);
  CHECK(verify_psi_conditions(IterLogSpec::make(2, 0.75, *a2.k_sufficient), 2.0, grid).pass);

  REQUIRE_ERROR_KIND(analytic_k_floor(1, 1.0, 1.0, grid), ErrorKind::precondition);
  REQUIRE_ERROR_KIND(analytic_k_floor(1, 1.0, 0.5, grid), ErrorKind::precondition);
}

TEST_CASE("counterexample for p <= 1", "[ineq]") {
  const auto s1 = IterLogSpec::make(1, 1.0, std::exp(4.0));
  const auto c = counterexample_p_le_1(s1, 1.0, 10.0);
  CHECK(c.x == Approx(10.0 * std::log(std::exp(4.0) + 10.0)).epsilon(1e-14));
  CHECK(c.x == Approx(41.68).margin(0.01));
  const double expected = c.x * c.x / (c.psi_x * c.psi_x) - c.x * c.x / (c.psi_y * c.psi_y);
  CHECK(c.margin == Approx(expected).epsilon(1e-10));
  CHECK(c.margin < 0);

  const auto c2 = counterexample_p_le_1(IterLogSpec::make(2, 0.75, std::exp(std::numbers::e)), 1.0, 100.0);
  CHECK(c2.margin < 0);

  // A grid containing the pair fails the key inequality.
  const std::vector<double> xs{c.x}, ys{c.y};
  CHECK_FALSE(check_key_inequality(s1, 1.0, xs, ys).pass);

  REQUIRE_ERROR_KIND(counterexample_p_le_1(IterLogSpec::make(1, 0.0, std::numbers::e), 1.0), ErrorKind::precondition);
  REQUIRE_ERROR_KIND(counterexample_p_le_1(s1, 1.5), ErrorKind::precondition);
}

TEST_CASE("counterexample soundness across configurations", "[ineq][property]") {
  CounterRng rng{7};
  for (std::uint64_t i = 0; i < 300; ++i) {
    const int n = 1 + static_cast<int>(rng.bits(1, i) % 3);
    const double lam = rng.uniform(2, i, 0.05, 3.0);
    const double k = tower(n) * rng.uniform(3, i, 1.0, 50.0);
    const double p = rng.uniform(4, i, 0.05, 1.0);
    const double y = std::pow(10.0, rng.uniform(5, i, -1.0, 6.0));
    const auto spec = IterLogSpec::make(n, lam, k);
    const auto c = counterexample_p_le_1(spec, p, y);
    // Re-evaluate with the extended-precision reference.
    const long double px = oracle::il(n, lam, k, c.x), py = oracle::il(n, lam, k, c.y);
    const long double m = (long double)c.y * c.y - 2.0L * c.x * c.y / py + p * (long double)c.x * c.x / (px * px);
    REQUIRE(m < 0);
  }
}

TEST_CASE("psi conditions imply the key inequality", "[ineq][property]") {
  const auto grid = log_grid(1e8, 300);
  struct Cfg {
    int n;
    double lambda, p, k;
  };
  const Cfg cfgs[] = {{1, 1.0, 2.0, std::exp(8.0)}, {1, 0.6, 4.0, std::exp(4.0)}, {2, 0.75, 2.0, std::exp(8.0)},
                      {2, 1.0, 3.0, std::exp(16.0)}, {3, 0.6, 2.0, tower(3)},     {2, 2.0 / 3.0, 2.0, std::exp(32.0)}};
  int checked = 0;
  for (const auto& c : cfgs) {
    const auto s = IterLogSpec::make(c.n, c.lambda, c.k);
    const auto psi = verify_psi_conditions(s, c.p, grid, 0.0);
    if (!psi.pass) continue;
    ++checked;
    CHECK(check_key_inequality(s, c.p, grid, grid).pass);
  }
  CHECK(checked >= 5);
}

TEST_CASE("key inequality is monotone in k", "[ineq][property]") {
  const auto grid = log_grid(1e8, 300);
  const std::tuple<int, double, double> cfgs[] = {{1, 1.0, 2.0}, {2, 0.75, 2.0}, {3, 0.6, 3.0}};
  for (const auto& [n, lam, p] : cfgs) {
    for (double k = tower(n); k < 1e30; k *= 7.0) {
      const bool here = check_key_inequality(IterLogSpec::make(n, lam, k), p, grid, grid).pass;
      if (here) CHECK(check_key_inequality(IterLogSpec::make(n, lam, 2 * k), p, grid, grid).pass);
    }
  }
}

TEST_CASE("zero lambda reduces one depth with lambda 1/2", "[ineq][property]") {
  CounterRng rng{3};
  for (int m : {2, 3}) {
    const double k = tower(m) * 2.0;
    for (std::uint64_t i = 0; i < 10; ++i) {
      const double x = std::pow(10.0, rng.uniform(static_cast<std::uint64_t>(m), i, -3.0, 8.0));
      const LogChain c = log_chain(m, k + x);
      const double a = il(IterLogSpec::make(m, 0.0, k), x);
      const double b = il_from_chain(LogChain{m - 1, c.arg, c.l}, 0.5);
      REQUIRE(std::abs(a - b) <= 1e-12 * b);
    }
  }
  const auto r = reduce_zero_lambda(IterLogSpec::make(3, 0.0, tower(3)));
  CHECK(r.n == 2);
  CHECK(r.lambda == 0.5);
  REQUIRE_ERROR_KIND(reduce_zero_lambda(IterLogSpec::make(1, 0.0, std::numbers::e)), ErrorKind::precondition);
}

TEST_CASE("closed-form derivatives agree with finite differences", "[ineq]") {
  for (int n = 1; n <= 3; ++n) {
    const auto s = IterLogSpec::make(n, 0.8, tower(n) * 3);
    for (double x : {1.0, 50.0, 1e4, 1e7}) {
      const long double h = 1e-4L * (1 + x);
      const long double fd = (oracle::il(n, 0.8L, s.k, x + h) - oracle::il(n, 0.8L, s.k, x - h)) / (2 * h);
      const double an = psi::derivative(log_chain(n, s.k + x), s.lambda);
      CHECK(an == Approx(static_cast<double>(fd)).epsilon(1e-6));
    }
  }
}
