#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "ilbsde/grid.hpp"
#include "ilbsde/lattice.hpp"
#include "support.hpp"

using namespace ilbsde;
using Catch::Approx;

namespace {

// Path enumeration oracle: bit i of m is the move at step i (1 = up).
template <class Stat>
double path_average(int steps, Stat&& stat) {
  double sum = 0.0;
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << steps); ++m) {
    std::vector<std::size_t> idx{0};
    for (int i = 0; i < steps; ++i) idx.push_back(idx.back() + ((m >> i) & 1U));
    sum += stat(idx);
  }
  return sum / static_cast<double>(std::uint64_t{1} << steps);
}

Field integer_field(const BrownianLattice& lat, std::uint64_t seed, int levels = -1) {
  const CounterRng rng{seed};
  return make_field(
      lat, [&](int i, int j) { return std::floor(rng.uniform(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j), -1000, 1000)); },
      levels);
}

}  // namespace

TEST_CASE("lattice geometry", "[lattice]") {
  const auto lat = BrownianLattice::make(8, 2.0);
  CHECK(lat.dt == 0.25);
  CHECK(lat.sqdt == 0.5);
  CHECK(lat.t(8) == 2.0);
  CHECK(lat.nodes() == 45u);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j <= i; ++j) {
      CHECK(lat.b(i + 1, j + 1) - lat.b(i, j) == Approx(lat.sqdt));
      CHECK(lat.b(i + 1, j) - lat.b(i, j) == Approx(-lat.sqdt));
      CHECK(0.5 * (lat.b(i + 1, j) + lat.b(i + 1, j + 1)) == Approx(lat.b(i, j)).margin(1e-15));
    }
  }
  REQUIRE_ERROR_KIND(BrownianLattice::make(0, 1.0), ErrorKind::parameter);
  REQUIRE_ERROR_KIND(BrownianLattice::make(5, 0.0), ErrorKind::parameter);
}

TEST_CASE("conditional expectation examples", "[lattice]") {
  const auto lat = BrownianLattice::make(10, 1.0);
  for (int i = 0; i < 10; ++i) {
    const auto ce = conditional_expectation(lat, level_b(lat, i + 1));
    for (int j = 0; j <= i; ++j) CHECK(ce[static_cast<std::size_t>(j)] == Approx(lat.b(i, j)).margin(1e-15));
    const auto c = conditional_expectation(lat, std::vector<double>(static_cast<std::size_t>(i) + 2, 3.5));
    for (double v : c) CHECK(v == 3.5);
  }
  for (int n : {1, 7, 50, 400}) {
    const auto l = BrownianLattice::make(n, 1.5);
    auto sq = level_b(l, n);
    for (double& v : sq) v *= v;
    CHECK(root_expectation(l, sq) == Approx(1.5).epsilon(1e-13));
  }
  REQUIRE_ERROR_KIND(conditional_expectation(lat, std::vector<double>{1.0}), ErrorKind::shape_mismatch);
  REQUIRE_ERROR_KIND(conditional_expectation(lat, std::vector<double>(13, 0.0)), ErrorKind::shape_mismatch);
}

TEST_CASE("martingale slope examples", "[lattice]") {
  const auto lat = BrownianLattice::make(6, 1.0);
  for (int i = 0; i < 6; ++i) {
    for (double v : z_estimate(lat, level_b(lat, i + 1))) CHECK(v == Approx(1.0).epsilon(1e-14));
    for (double v : z_estimate(lat, std::vector<double>(static_cast<std::size_t>(i) + 2, -2.0))) CHECK(v == 0.0);
    auto sq = level_b(lat, i + 1);
    for (double& v : sq) v *= v;
    const auto z = z_estimate(lat, sq);
    for (int j = 0; j <= i; ++j) CHECK(z[static_cast<std::size_t>(j)] == Approx(2 * lat.b(i, j)).margin(1e-14));
  }
  REQUIRE_ERROR_KIND(z_estimate(lat, std::vector<double>{}), ErrorKind::shape_mismatch);
}

TEST_CASE("martingale representation identity", "[lattice][property]") {
  const auto lat = BrownianLattice::make(12, 0.7);
  const auto f = integer_field(lat, 9);
  for (int i = 0; i < 12; ++i) {
    const auto& next = f[static_cast<std::size_t>(i) + 1];
    const auto y = conditional_expectation(lat, next);
    const auto z = z_estimate(lat, next);
    for (std::size_t j = 0; j < y.size(); ++j) {
      REQUIRE(y[j] + z[j] * lat.sqdt == Approx(next[j + 1]).epsilon(1e-14));
      REQUIRE(y[j] - z[j] * lat.sqdt == Approx(next[j]).epsilon(1e-14));
    }
  }
}

TEST_CASE("tower property against path enumeration", "[lattice][property]") {
  for (int n = 1; n <= 12; ++n) {
    const auto lat = BrownianLattice::make(n, 1.0);
    const auto f = integer_field(lat, 100 + static_cast<std::uint64_t>(n));
    const auto& terminal = f.back();
    const double oracle = path_average(n, [&](const std::vector<std::size_t>& idx) { return terminal[idx.back()]; });
    REQUIRE(root_expectation(lat, terminal) == oracle);
  }
}

TEST_CASE("node probabilities", "[lattice]") {
  const auto lat = BrownianLattice::make(10, 1.0);
  const auto p = node_probabilities(lat);
  double binom = 1.0;
  for (int j = 0; j <= 10; ++j) {
    CHECK(p[10][static_cast<std::size_t>(j)] == Approx(binom / 1024.0).epsilon(1e-15));
    binom = binom * (10 - j) / (j + 1);
  }
}

TEST_CASE("S^p norm", "[lattice]") {
  const auto lat = BrownianLattice::make(4, 1.0);
  const auto c = make_field(lat, [](int, int) { return -9.0; });
  CHECK(sp_norm(lat, c, 0.5) == Approx(3.0).epsilon(1e-15));
  CHECK(sp_norm(lat, c, 2.0) == Approx(9.0).epsilon(1e-15));
  const auto b = make_field(lat, [&](int i, int j) { return lat.b(i, j); });
  const double oracle = path_average(4, [&](const std::vector<std::size_t>& idx) {
    double mx = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) mx = std::max(mx, std::abs(b[i][idx[i]]));
    return mx;
  });
  CHECK(sp_norm(lat, b, 1.0) == Approx(oracle).epsilon(1e-15));
  REQUIRE_ERROR_KIND(sp_norm(lat, b, 0.0), ErrorKind::parameter);
  REQUIRE_ERROR_KIND(sp_norm(lat, b, -1.0), ErrorKind::parameter);
}

TEST_CASE("S^1 norm matches enumeration exactly", "[lattice][property]") {
  for (int n = 1; n <= 12; ++n) {
    const auto lat = BrownianLattice::make(n, 1.0);
    const auto y = integer_field(lat, 300 + static_cast<std::uint64_t>(n));
    const double oracle = path_average(n, [&](const std::vector<std::size_t>& idx) {
      double mx = 0;
      for (std::size_t i = 0; i < idx.size(); ++i) mx = std::max(mx, std::abs(y[i][idx[i]]));
      return mx;
    });
    REQUIRE(sp_norm(lat, y, 1.0) == oracle);
    REQUIRE(sup_moment_augmented(lat, y, 1.0) == oracle);
  }
}

TEST_CASE("exhaustive and augmented sup moments agree", "[lattice][property]") {
  for (int n : {5, 14, 20}) {
    const auto lat = BrownianLattice::make(n, 1.0);
    const auto y = make_field(lat, [&](int i, int j) { return std::sin(3 * lat.b(i, j)) + 0.1 * i; });
    for (double p : {0.5, 1.0, 3.0}) {
      CHECK(sup_moment_exhaustive(lat, y, p) == Approx(sup_moment_augmented(lat, y, p)).epsilon(1e-12));
    }
  }
  const auto big = BrownianLattice::make(21, 1.0);
  const auto y = make_field(big, [](int, int) { return 1.0; });
  REQUIRE_ERROR_KIND(sup_moment_exhaustive(big, y, 1.0), ErrorKind::parameter);
  CHECK(sp_norm(big, y, 1.0) == Approx(1.0));
}

TEST_CASE("M^p norm", "[lattice]") {
  const auto lat = BrownianLattice::make(6, 1.0);
  const auto zero = make_field(lat, [](int, int) { return 0.0; }, 6);
  CHECK(mp_norm(lat, zero, 1.0).value == 0.0);
  const auto one = make_field(lat, [](int, int) { return 2.0; }, 6);
  // (int Z^2 dt)^{p/2} = 4^{p/2}.
  CHECK(mp_norm(lat, one, 2.0).value == Approx(2.0).epsilon(1e-14));
  CHECK(mp_norm(lat, one, 0.5).value == Approx(std::sqrt(2.0)).epsilon(1e-14));

  const auto z = make_field(lat, [&](int i, int j) { return lat.b(i, j) + 0.5; }, 6);
  const double oracle = path_average(6, [&](const std::vector<std::size_t>& idx) {
    double q = 0;
    for (std::size_t i = 0; i < 6; ++i) q += z[i][idx[i]] * z[i][idx[i]] * lat.dt;
    return std::pow(q, 1.5);
  });
  CHECK(mp_norm(lat, z, 3.0).value == Approx(std::cbrt(oracle)).epsilon(1e-13));

  // Exact p = 2 formula and the Monte Carlo estimate beyond enumeration.
  const auto big = BrownianLattice::make(40, 1.0);
  const auto zb = make_field(big, [&](int i, int j) { return big.b(i, j); }, 40);
  const auto exact = mp_norm(big, zb, 2.0);
  CHECK(exact.method == "exact-p2");
  // E int_0^T B^2 dt on the grid = sum_i t_i dt.
  double ref = 0;
  for (int i = 0; i < 40; ++i) ref += big.t(i) * big.dt;
  CHECK(exact.value == Approx(std::sqrt(ref)).epsilon(1e-12));
  const auto mc = mp_norm(big, zb, 1.0, {}, 7, 100000);
  CHECK(mc.method == "monte-carlo");
  CHECK(mc.samples == 100000u);
  CHECK(mc.value > 0);
  CHECK(mc.value < std::sqrt(ref) * 1.01);
  REQUIRE_ERROR_KIND(mp_norm(lat, zero, 0.0), ErrorKind::parameter);
  REQUIRE_ERROR_KIND(mp_norm(lat, make_field(lat, [](int, int) { return 0.0; }), 1.0), ErrorKind::shape_mismatch);
}

TEST_CASE("class D proxy", "[lattice]") {
  const auto lat = BrownianLattice::make(30, 1.0);
  const auto bounded = make_field(lat, [&](int i, int j) { return std::tanh(lat.b(i, j)); });
  const auto r = class_d_proxy(lat, bounded, {0.5, 0.9, 1.0, 2.0});
  CHECK(r.pass);
  CHECK(r.rows.back().sup_tail == 0.0);
  CHECK(r.rows[2].sup_tail == 0.0);
  CHECK(r.rows[0].sup_tail > 0.0);
  CHECK(r.decreasing);

  // Y_t = E[exp(|B_T|) | F_t] built by backward averaging.
  Field y(31);
  y[30].resize(31);
  for (int j = 0; j <= 30; ++j) y[30][static_cast<std::size_t>(j)] = std::exp(std::abs(lat.b(30, j)));
  for (int i = 29; i >= 0; --i) y[static_cast<std::size_t>(i)] = conditional_expectation(y[static_cast<std::size_t>(i) + 1]);
  const auto tail = class_d_proxy(lat, y, geometric_grid(1.0, 1e6, 25));
  CHECK(tail.decreasing);
  CHECK(tail.pass);
  CHECK(tail.rows.front().sup_tail > tail.rows[10].sup_tail);

  REQUIRE_ERROR_KIND(class_d_proxy(lat, bounded, {}), ErrorKind::empty_grid);
  REQUIRE_ERROR_KIND(class_d_proxy(lat, bounded, {2.0, 1.0}), ErrorKind::parameter);
}

TEST_CASE("shape checks", "[lattice]") {
  const auto lat = BrownianLattice::make(5, 1.0);
  const auto short_field = make_field(lat, [](int, int) { return 0.0; }, 3);
  REQUIRE_ERROR_KIND(sp_norm(lat, short_field, 1.0), ErrorKind::shape_mismatch);
  REQUIRE_ERROR_KIND(root_expectation(lat, std::vector<double>(4, 0.0)), ErrorKind::shape_mismatch);
}

TEST_CASE("lattice CSV", "[lattice]") {
  const auto lat = BrownianLattice::make(2, 1.0);
  const auto y = make_field(lat, [](int i, int j) { return i + 0.5 * j; });
  const auto z = make_field(lat, [](int, int) { return 0.25; }, 2);
  std::ostringstream os;
  write_lattice_csv(os, lat, y, z);
  const std::string csv = os.str();
  CHECK(csv.rfind("step,index,t,b,Y,Z\n0,0,0,0,0,0.25\n", 0) == 0);
  CHECK(csv.find('\r') == std::string::npos);
  const std::string last = "2,2,1,1.4142135623730951,3,\n";
  CHECK(csv.compare(csv.size() - last.size(), last.size(), last) == 0);
  CHECK(csv_number(0.1) == "0.1");
  CHECK(csv_number(1e-300) == "1e-300");
}
