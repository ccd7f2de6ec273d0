#pragma once

// Multiprecision reference for the test function, used for finite-difference
// checks. At k ~ 1e31 the second difference cancels about 75 digits, so the
// reference runs at 100 decimal digits.

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace mp_oracle {

using Real = boost::multiprecision::cpp_bin_float_100;

struct Params {
  double beta, gamma;
  int n;
  double lambda, k;
};

inline Real phi(const Params& p, const Real& s, const Real& x) {
  using boost::multiprecision::exp;
  using boost::multiprecision::log;
  using boost::multiprecision::pow;
  const Real u = Real(p.k) + x;
  Real deep = u;
  for (int i = 0; i < p.n; ++i) deep = log(deep);
  const Real a = 2 * Real(p.lambda) - 1;
  const Real rate = 2 * (Real(p.beta) + 2 * Real(p.gamma) * Real(p.gamma) / a);
  return u * (1 - pow(deep, -a)) * exp(rate * s);
}

struct Derivatives {
  double phi_x, phi_xx, phi_s;
};

/// Central differences with h = 1e-5 (1 + x) in x and 1e-5 T in s.
inline Derivatives central_differences(const Params& p, double horizon, double s, double x) {
  const Real S(s), X(x);
  const Real h = Real(1e-5) * (1 + X);
  const Real hs = Real(1e-5) * Real(horizon);
  const Real f0 = phi(p, S, X), fp = phi(p, S, X + h), fm = phi(p, S, X - h);
  const Real d1 = (fp - fm) / (2 * h);
  const Real d2 = (fp - 2 * f0 + fm) / (h * h);
  const Real ds = (phi(p, S + hs, X) - phi(p, S - hs, X)) / (2 * hs);
  return {static_cast<double>(d1), static_cast<double>(d2), static_cast<double>(ds)};
}

}  // namespace mp_oracle
