#include <cmath>
#include <vector>

#include "ilbsde/genmodel.hpp"
#include "ilbsde/solver.hpp"
#include "ilbsde/testfn.hpp"
#include "ilbsde/validate.hpp"
#include "support.hpp"

using namespace ilbsde;
using Catch::Approx;

namespace {

SolverConfig config(int steps) {
  SolverConfig c;
  c.steps = steps;
  return c;
}

SampleOptions gen_samples(std::size_t n = 20000) {
  SampleOptions o;
  o.samples = n;
  return o;
}

GeneratorModel certified_zero() {
  GeneratorModel m;
  m.name = "zero";
  m.certificates = {CertH2{2, 0.75, 0.0, 1.0}};
  return m;
}

const Terminal kSine{TerminalKind::sine, 1.0, 0.0, 0.0};

AprioriConstants constants_for(const GeneratorModel& m, double T) {
  const auto& h2 = std::get<CertH2>(*m.find("H2"));
  return apriori_constants(h2.beta, h2.gamma, h2.n, h2.lambda, T);
}

}  // namespace

TEST_CASE("constants", "[validate]") {
  const auto c = apriori_constants_for_k(1.0, 1.0, 2, 0.75, 1.0, 5.0, "given");
  CHECK(c.k1 == Approx(std::exp(10.0)).epsilon(1e-14));
  CHECK(c.log_C == Approx(std::log(2.0) + 10.0 + 5.0).epsilon(1e-14));
  CHECK(c.C == Approx(2 * std::exp(10.0) * std::exp(5.0)).epsilon(1e-13));
  CHECK(c.k_level == Approx(std::log(5.0)).epsilon(1e-15));
  // k1 is mu at the horizon.
  const auto spec = TestFunctionSpec::make(1.0, 1.0, 2, 0.75, exp_iter(2, 3.0), 1.0);
  CHECK(apriori_constants(spec).k1 == Approx(mu(spec, 1.0)).epsilon(1e-14));
  REQUIRE_ERROR_KIND(apriori_constants_for_k(0.0, 1.0, 2, 0.5, 1.0, 5.0, "x"), ErrorKind::parameter);
}

TEST_CASE("C never decreases with T or gamma", "[validate][property]") {
  const double log_k = 20.0;
  double prev = 0;
  for (double T : {0.1, 0.5, 1.0, 2.0, 4.0}) {
    const double c = apriori_constants_for_k(0.5, 1.0, 2, 0.75, T, log_k, "fixed").log_C;
    CHECK(c >= prev);
    prev = c;
  }
  prev = 0;
  for (double g : {0.1, 0.5, 1.0, 1.5, 3.0}) {
    const double c = apriori_constants_for_k(0.5, g, 2, 0.75, 1.0, log_k, "fixed").log_C;
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("analytic fallback beyond binary64", "[validate]") {
  const auto c = apriori_constants(0.0, 1.0, 2, 2.0 / 3.0, 1.0);
  CHECK(c.k_source.find("analytic") != std::string::npos);
  CHECK(std::isinf(c.k));
  CHECK(std::isfinite(c.log_C));
  CHECK(c.k_level == Approx(1.1 * 8.0).epsilon(1e-12));
  const auto d = apriori_constants(0.0, 1.0, 2, 0.75, 1.0);
  CHECK(d.k_source == "test-function");
  CHECK(std::isfinite(d.C));
}

TEST_CASE("zero generator a priori margins", "[validate]") {
  const auto m = certified_zero();
  const BsdeProblem p{kSine, m, 1.0, 1};
  const auto sol = solve(p, config(40));
  const auto c = constants_for(m, 1.0);
  const auto r = apriori_check(sol, p, c);
  CHECK(r.pass);
  // A = E[|xi| | node], margin = A + 1 - |E[xi | node]| / C.
  const Field a = expected_remaining(sol, m);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      REQUIRE(r.margins[i][j] == Approx(a[i][j] + 1.0 - std::abs(sol.Y[i][j]) / c.C).epsilon(1e-14));
      REQUIRE(r.margins[i][j] >= 1.0);
    }
  }
}

TEST_CASE("a priori bound on the shipped examples", "[validate]") {
  for (const auto& m : {example_26(), example_27()}) {
    const BsdeProblem p{kSine, m, 1.0, 1};
    const auto c = constants_for(m, 1.0);
    for (int n : {50, 100, 200}) {
      const auto sol = solve(p, config(n));
      const auto r = apriori_check(sol, p, c);
      INFO(m.name << " N=" << n << " min scaled margin " << r.min_scaled_margin);
      CHECK(r.pass);
      const double tamper = 10.0 * c.C;
      if (std::isfinite(tamper)) {
        const auto bad = apriori_check(sol, p, c, tamper);
        CHECK(bad.tampered);
        CHECK_FALSE(bad.pass);
      }
    }
  }
}

TEST_CASE("a priori preconditions", "[validate]") {
  GeneratorModel bare;
  bare.name = "bare";
  const BsdeProblem p{kSine, bare, 1.0, 1};
  const auto sol = solve(p, config(10));
  const auto c = apriori_constants_for_k(0.0, 1.0, 2, 0.75, 1.0, 10.0, "x");
  REQUIRE_ERROR_KIND(apriori_check(sol, p, c), ErrorKind::certificate_missing);
  const BsdeProblem q{kSine, certified_zero(), 1.0, 1};
  const auto other = apriori_constants_for_k(0.0, 2.0, 2, 0.75, 1.0, 10.0, "x");
  REQUIRE_ERROR_KIND(apriori_check(sol, q, other), ErrorKind::parameter);
}

TEST_CASE("comparison examples", "[validate]") {
  GeneratorModel zero;
  zero.name = "zero";
  const Terminal lin{TerminalKind::linear, 1.0, 0.0, 0.0};
  const Terminal lin1{TerminalKind::linear, 1.0, 1.0, 0.0};
  const auto r = comparison_check(BsdeProblem{lin, zero, 1.0, 1}, BsdeProblem{lin1, zero, 1.0, 1}, config(100),
                                  gen_samples());
  CHECK(r.pass);
  CHECK(r.z_free);
  CHECK(r.tolerance == 0.0);
  for (const auto& level : r.gaps) {
    for (double g : level) REQUIRE(g == Approx(1.0).epsilon(1e-13));
  }

  const auto m = example_27();
  const auto up = comparison_check(BsdeProblem{kSine, m, 1.0, 1}, BsdeProblem{kSine, shifted(m, 0.1), 1.0, 1},
                                   config(100), gen_samples());
  CHECK(up.pass);
  CHECK_FALSE(up.z_free);
  CHECK(up.max_gap > 0);
  CHECK(up.tolerance == Approx(1e-6 * up.scale));

  const Terminal lower_xi{TerminalKind::linear, 0.5, 0.0, 0.0};
  REQUIRE_ERROR_KIND(comparison_check(BsdeProblem{lin, zero, 1.0, 1}, BsdeProblem{lower_xi, zero, 1.0, 1},
                                      config(20), gen_samples()),
                     ErrorKind::hypothesis_violation);
  REQUIRE_ERROR_KIND(comparison_check(BsdeProblem{kSine, shifted(m, 0.1), 1.0, 1}, BsdeProblem{kSine, m, 1.0, 1},
                                      config(20), gen_samples()),
                     ErrorKind::hypothesis_violation);
}

TEST_CASE("comparison is reflexive", "[validate][property]") {
  for (const auto& m : {example_26(), example_27()}) {
    const BsdeProblem p{kSine, m, 1.0, 1};
    const auto r = comparison_check(p, p, config(100), gen_samples(2000));
    CHECK(r.pass);
    CHECK(r.min_gap == 0.0);
    CHECK(r.max_gap == 0.0);
  }
}
