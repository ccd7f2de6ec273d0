#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "ilbsde/genmodel.hpp"
#include "ilbsde/solver.hpp"
#include "support.hpp"

using namespace ilbsde;
using Catch::Approx;

namespace {

GeneratorModel model_of(std::vector<Atom> atoms, Driver d = {}) {
  GeneratorModel m;
  m.name = "test";
  m.atoms = std::move(atoms);
  m.driver = d;
  return m;
}

BsdeProblem problem(GeneratorModel m, Terminal xi, double T = 1.0) {
  return BsdeProblem{xi, std::move(m), T, 1};
}

SolverConfig config(int steps, Scheme s = Scheme::picard_implicit) {
  SolverConfig c;
  c.steps = steps;
  c.scheme = s;
  return c;
}

const Terminal kLinear{TerminalKind::linear, 1.0, 0.0, 0.0};
const Terminal kSquare{TerminalKind::square, 1.0, 0.0, 0.0};
const Terminal kOne{TerminalKind::constant, 1.0, 0.0, 0.0};

}  // namespace

TEST_CASE("zero generator examples", "[solver]") {
  const auto zero = model_of({});
  const auto lin = solve(problem(zero, kLinear), config(50));
  CHECK(lin.root() == Approx(0.0).margin(1e-15));
  for (const auto& level : lin.Z) {
    for (double z : level) CHECK(z == Approx(1.0).epsilon(1e-13));
  }
  for (int n : {1, 3, 100, 500}) {
    for (double T : {1.0, 2.5}) {
      const auto sq = solve(problem(zero, kSquare, T), config(n));
      CHECK(sq.root() == Approx(T).epsilon(1e-12));
    }
  }
}

TEST_CASE("terminal layer is exact", "[solver]") {
  const Terminal xi{TerminalKind::sine, 2.0, -0.3, 0.0};
  const auto sol = solve(problem(example_26(), xi), config(40));
  for (int j = 0; j <= 40; ++j) {
    REQUIRE(sol.Y[40][static_cast<std::size_t>(j)] == xi(sol.lattice.b(40, j), 1.0));
  }
  CHECK(sol.terminal_max_abs_b == Approx(std::sqrt(40.0)).epsilon(1e-14));
}

TEST_CASE("zero generator reproduces conditional expectations", "[solver][property]") {
  const Terminal xi{TerminalKind::exp_linear, 1.0, 0.0, 0.7};
  const auto sol = solve(problem(model_of({}), xi), config(30));
  std::vector<double> level = sol.Y[30];
  for (int i = 29; i >= 0; --i) {
    const auto z = z_estimate(sol.lattice, level);
    level = conditional_expectation(level);
    REQUIRE(sol.Y[static_cast<std::size_t>(i)] == level);
    REQUIRE(sol.Z[static_cast<std::size_t>(i)] == z);
  }
}

TEST_CASE("linear generator matches the exponential solution", "[solver]") {
  const auto m = model_of({make_atom(AtomKind::linear_y, 0.5)});
  const double exact = std::exp(0.5);
  double prev = 0;
  for (int n : {100, 200, 400, 800}) {
    const double err = std::abs(solve(problem(m, kOne), config(n)).root() - exact) / exact;
    if (n == 200) CHECK(err <= 2e-3);
    if (prev > 0) {
      CHECK(err / prev >= 0.4);
      CHECK(err / prev <= 0.6);
    }
    prev = err;
  }
  // Explicit scheme converges too, from below.
  const double ex = solve(problem(m, kOne), config(200, Scheme::explicit_y)).root();
  CHECK(ex < exact);
  CHECK(std::abs(ex - exact) / exact <= 2e-3);
}

TEST_CASE("Picard diagnostics", "[solver]") {
  const auto zero = picard_residual_history(problem(model_of({}), kSquare), config(20));
  REQUIRE(zero.size() == 20u);
  for (const auto& d : zero) CHECK(d.iterations == 1);
  CHECK(zero.front().step == 19);
  CHECK(zero.back().step == 0);

  const double L = 4.0;
  const auto lip = picard_residual_history(problem(model_of({make_atom(AtomKind::linear_y, L)}), kOne), config(50));
  for (const auto& d : lip) {
    REQUIRE(d.history.size() >= 3);
    CHECK(d.history[1] / d.history[0] == Approx(L / 50).epsilon(1e-6));
    CHECK(d.residual <= 1e-10);
  }
}

TEST_CASE("Picard divergence", "[solver]") {
  const auto stiff = problem(model_of({make_atom(AtomKind::linear_y, 100.0)}), kOne);
  REQUIRE_ERROR_KIND(solve(stiff, config(10)), ErrorKind::picard_divergence);
  const auto hist = picard_residual_history(stiff, config(10));
  REQUIRE(hist.size() == 1u);
  CHECK(hist[0].iterations >= 2);
  CHECK(hist[0].history.back() > hist[0].history.front());
  // Explicit steps never iterate.
  CHECK(std::isfinite(solve(stiff, config(10, Scheme::explicit_y)).root()));
}

TEST_CASE("unsupported dimension and bad config", "[solver]") {
  auto p = problem(model_of({}), kLinear);
  p.dim = 2;
  REQUIRE_ERROR_KIND(solve(p, config(10)), ErrorKind::unsupported_dimension);
  p.dim = 1;
  REQUIRE_ERROR_KIND(solve(p, config(0)), ErrorKind::parameter);
  auto c = config(10);
  c.picard_tol = 0;
  REQUIRE_ERROR_KIND(solve(p, c), ErrorKind::parameter);
}

TEST_CASE("order preservation for z-free generators", "[solver][property]") {
  Atom sinb = make_atom(AtomKind::brownian, 0.3);
  const auto g = model_of({make_atom(AtomKind::linear_y, 0.5), sinb});
  const auto gp = shifted(g, 0.1);
  const Terminal xi{TerminalKind::sine, 1.0, 0.0, 0.0};
  const Terminal xip{TerminalKind::sine, 1.0, 0.05, 0.0};
  for (auto scheme : {Scheme::picard_implicit, Scheme::explicit_y}) {
    const auto a = solve(problem(g, xi), config(80, scheme));
    const auto b = solve(problem(gp, xip), config(80, scheme));
    for (std::size_t i = 0; i < a.Y.size(); ++i) {
      for (std::size_t j = 0; j < a.Y[i].size(); ++j) REQUIRE(a.Y[i][j] <= b.Y[i][j]);
    }
  }
}

TEST_CASE("linear generators superpose", "[solver][property]") {
  const auto g = model_of({make_atom(AtomKind::linear_y, 0.3), make_atom(AtomKind::linear_z, 0.2)});
  auto cfg = config(60);
  cfg.picard_tol = 1e-15;
  const Terminal x1{TerminalKind::sine, 1.0, 0.0, 0.0};
  const Terminal x2{TerminalKind::square, 1.0, 0.0, 0.0};
  const auto a = solve(problem(g, x1), cfg);
  const auto b = solve(problem(g, x2), cfg);
  // Homogeneity.
  const auto a2 = solve(problem(g, Terminal{TerminalKind::sine, 2.0, 0.0, 0.0}), cfg);
  const auto b3 = solve(problem(g, Terminal{TerminalKind::square, 3.0, 0.0, 0.0}), cfg);
  for (std::size_t i = 0; i < a.Y.size(); ++i) {
    for (std::size_t j = 0; j < a.Y[i].size(); ++j) {
      REQUIRE(a2.Y[i][j] == Approx(2 * a.Y[i][j]).margin(1e-12));
      REQUIRE(b3.Y[i][j] == Approx(3 * b.Y[i][j]).margin(1e-12));
    }
  }
  // Additivity: sin b + 1 solves as the sum of the two separate solutions.
  const auto shifted_xi = solve(problem(g, Terminal{TerminalKind::sine, 1.0, 1.0, 0.0}), cfg);
  const auto unit = solve(problem(g, kOne), cfg);
  for (std::size_t i = 0; i < a.Y.size(); ++i) {
    for (std::size_t j = 0; j < a.Y[i].size(); ++j) {
      REQUIRE(shifted_xi.Y[i][j] == Approx(a.Y[i][j] + unit.Y[i][j]).margin(1e-12));
    }
  }
}

TEST_CASE("driver integral", "[solver]") {
  const auto m = model_of({}, Driver{DriverKind::constant, 2.5});
  const auto s = solve(problem(m, kLinear), config(16));
  for (int i = 0; i <= 16; ++i) {
    for (std::size_t j = 0; j <= static_cast<std::size_t>(i); ++j) {
      CHECK(s.f_mean[static_cast<std::size_t>(i)][j] == Approx(2.5 * s.lattice.t(i)).margin(1e-14));
      CHECK(s.f_min[static_cast<std::size_t>(i)][j] == Approx(2.5 * s.lattice.t(i)).margin(1e-14));
    }
  }

  // Path-dependent driver |B| + 1: compare with path enumeration on N = 10.
  const int N = 10;
  const auto m2 = model_of({}, Driver{DriverKind::abs_b_plus_1, 0.0});
  const auto s2 = solve(problem(m2, kLinear), config(N));
  const auto& lat = s2.lattice;
  std::vector<std::vector<double>> sum(N + 1), lo(N + 1), hi(N + 1), cnt(N + 1);
  for (int i = 0; i <= N; ++i) {
    sum[i].assign(i + 1, 0.0);
    cnt[i].assign(i + 1, 0.0);
    lo[i].assign(i + 1, std::numeric_limits<double>::infinity());
    hi[i].assign(i + 1, -std::numeric_limits<double>::infinity());
  }
  for (std::uint64_t path = 0; path < (1u << N); ++path) {
    int j = 0;
    double acc = 0;
    for (int i = 0; i <= N; ++i) {
      sum[i][j] += acc;
      cnt[i][j] += 1;
      lo[i][j] = std::min(lo[i][j], acc);
      hi[i][j] = std::max(hi[i][j], acc);
      if (i == N) break;
      acc += (std::abs(lat.b(i, j)) + 1.0) * lat.dt;
      j += static_cast<int>((path >> i) & 1U);
    }
  }
  for (int i = 0; i <= N; ++i) {
    for (int j = 0; j <= i; ++j) {
      const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
      CHECK(s2.f_mean[ui][uj] == Approx(sum[ui][uj] / cnt[ui][uj]).epsilon(1e-13));
      CHECK(s2.f_min[ui][uj] == Approx(lo[ui][uj]).epsilon(1e-13));
      CHECK(s2.f_max[ui][uj] == Approx(hi[ui][uj]).epsilon(1e-13));
    }
  }
}

TEST_CASE("heavy-tailed terminal stays finite", "[solver]") {
  const Terminal heavy{TerminalKind::heavy, 1.0, 0.0, 0.5};
  const auto s = solve(problem(model_of({}), heavy), config(60));
  CHECK(std::isfinite(s.root()));
  CHECK(s.terminal_max_abs_xi == Approx(std::exp(60.0 / (2.0 * 1.5))).epsilon(1e-12));
  // E[xi] = (1+p)^{1/2} / p^{1/2} in the continuum; the lattice is below it.
  CHECK(s.root() > 1.0);
  CHECK(s.root() < std::sqrt(1.5 / 0.5));
}
