#pragma once

// Generator models g(t, b, y, z) assembled from a fixed catalogue of atoms,
// assumption certificates, and sampling-based certificate checks.
//
// Randomness enters a generator only through the current Brownian value b.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ilbsde/error.hpp"
#include "ilbsde/grid.hpp"
#include "ilbsde/iterlog.hpp"
#include "ilbsde/parallel.hpp"

namespace ilbsde {

using ZView = std::span<const double>;

inline double norm(ZView z) {
  double s = 0.0;
  for (double v : z) s += v * v;
  return std::sqrt(s);
}

/// sgn(x) = 1 for x > 0 and -1 for x <= 0.
constexpr double sgn(double x) noexcept { return x > 0 ? 1.0 : -1.0; }

// ---------------------------------------------------------------------------
// The concave modulus l(u) = u |ln u| ln|ln u| near zero, extended linearly.

enum class LExtension {
  continuous,  ///< l(eps) + l'_-(eps) (u - eps)
  verbatim,    ///< l'_-(eps) (u - l(eps)), discontinuous at eps
};

struct LogLogModulus {
  double eps = 1e-3;
  LExtension extension = LExtension::continuous;

  static double core(double u) {
    if (u <= 0) return 0.0;
    const double L = -std::log(u);
    return u * L * std::log(L);
  }
  /// Left derivative of the core at eps.
  [[nodiscard]] double slope() const {
    const double L = -std::log(eps);
    return L * std::log(L) - std::log(L) - 1.0;
  }
  double operator()(double u) const {
    if (u <= eps) return core(u);
    if (extension == LExtension::continuous) return core(eps) + slope() * (u - eps);
    return slope() * (u - core(eps));
  }

  /// eps must be small enough that the core is increasing and concave on [0, eps];
  /// checked on a 1000-point grid (midpoint concavity).
  static LogLogModulus make(double eps, LExtension ext = LExtension::continuous) {
    detail::require(eps > 0 && eps < std::exp(-std::numbers::e), ErrorKind::parameter,
                    "l needs 0 < eps < exp(-e)");
    const auto g = linear_grid(0.0, eps, 1000);
    for (std::size_t i = 1; i + 1 < g.size(); ++i) {
      const double a = core(g[i - 1]), b = core(g[i]), c = core(g[i + 1]);
      detail::require(b > a, ErrorKind::parameter, "l is not increasing on [0, eps]");
      detail::require(b >= 0.5 * (a + c), ErrorKind::parameter, "l is not midpoint-concave on [0, eps]");
    }
    return LogLogModulus{eps, ext};
  }
};

// ---------------------------------------------------------------------------
// Atoms.

enum class AtomKind {
  constant,           ///< c
  brownian,           ///< c b
  linear_y,           ///< c y
  exp_y,              ///< c e^y
  quartic_neg_y,      ///< c y^4 1{y <= 0}
  l_abs_y,            ///< c l(|y|)
  abs_z,              ///< c |z|
  linear_z,           ///< c z_0
  quadratic_z,        ///< c |z|^2
  power_z,            ///< c |z|^alpha
  iterlog_z,          ///< c |z| / IL_{n,k}^lambda(|z|)
  cos_iterlog_z,      ///< c |z| cos|z| / IL_{n,k}^lambda(|z|)
  log_z,              ///< c |z| / ln(e + |z|)
  sin_abs_z,          ///< c sin|z|
  exp_y_sin2_z,       ///< c e^y sin^2|z|
  quadratic_z_sin_y,  ///< c |z|^2 sin y
  tanh_y_power_z,     ///< c tanh(y) |z|^alpha
};

constexpr std::string_view to_string(AtomKind k) noexcept {
  switch (k) {
    case AtomKind::constant: return "const";
    case AtomKind::brownian: return "brownian";
    case AtomKind::linear_y: return "linear_y";
    case AtomKind::exp_y: return "exp_y";
    case AtomKind::quartic_neg_y: return "quartic_neg_y";
    case AtomKind::l_abs_y: return "l_abs_y";
    case AtomKind::abs_z: return "abs_z";
    case AtomKind::linear_z: return "linear_z";
    case AtomKind::quadratic_z: return "quadratic_z";
    case AtomKind::power_z: return "power_z";
    case AtomKind::iterlog_z: return "iterlog_z";
    case AtomKind::cos_iterlog_z: return "cos_iterlog_z";
    case AtomKind::log_z: return "log_z";
    case AtomKind::sin_abs_z: return "sin_abs_z";
    case AtomKind::exp_y_sin2_z: return "exp_y_sin2_z";
    case AtomKind::quadratic_z_sin_y: return "quadratic_z_sin_y";
    case AtomKind::tanh_y_power_z: return "tanh_y_power_z";
  }
  return "?";
}

inline std::optional<AtomKind> atom_kind_from_string(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(AtomKind::tanh_y_power_z); ++i) {
    const auto k = static_cast<AtomKind>(i);
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct Atom {
  AtomKind kind = AtomKind::constant;
  double coef = 1.0;
  double alpha = 0.5;     ///< power_z, tanh_y_power_z
  IterLogSpec modulus{};  ///< iterlog_z, cos_iterlog_z
  LogLogModulus l{};      ///< l_abs_y

  [[nodiscard]] double eval(double b, double y, double zn, ZView z) const {
    switch (kind) {
      case AtomKind::constant: return coef;
      case AtomKind::brownian: return coef * b;
      case AtomKind::linear_y: return coef * y;
      case AtomKind::exp_y: return coef * std::exp(y);
      case AtomKind::quartic_neg_y: return y <= 0 ? coef * y * y * y * y : 0.0;
      case AtomKind::l_abs_y: return coef * l(std::abs(y));
      case AtomKind::abs_z: return coef * zn;
      case AtomKind::linear_z: return z.empty() ? 0.0 : coef * z[0];
      case AtomKind::quadratic_z: return coef * zn * zn;
      case AtomKind::power_z: return coef * std::pow(zn, alpha);
      case AtomKind::iterlog_z: return coef * zn / il(modulus, zn);
      case AtomKind::cos_iterlog_z: return coef * zn * std::cos(zn) / il(modulus, zn);
      case AtomKind::log_z: return coef * zn / std::log(std::numbers::e + zn);
      case AtomKind::sin_abs_z: return coef * std::sin(zn);
      case AtomKind::exp_y_sin2_z: {
        const double s = std::sin(zn);
        return coef * std::exp(y) * s * s;
      }
      case AtomKind::quadratic_z_sin_y: return coef * zn * zn * std::sin(y);
      case AtomKind::tanh_y_power_z: return coef * std::tanh(y) * std::pow(zn, alpha);
    }
    return 0.0;
  }

  [[nodiscard]] bool depends_on_z() const {
    switch (kind) {
      case AtomKind::constant:
      case AtomKind::brownian:
      case AtomKind::linear_y:
      case AtomKind::exp_y:
      case AtomKind::quartic_neg_y:
      case AtomKind::l_abs_y: return false;
      default: return true;
    }
  }

  /// Subadditive modulus of u -> atom(|z|) for z-only atoms of the form c F(|z|)
  /// with F concave in S; nullopt when no such modulus is known.
  [[nodiscard]] std::optional<std::function<double(double)>> z_modulus() const {
    const double c = std::abs(coef);
    switch (kind) {
      case AtomKind::abs_z:
      case AtomKind::linear_z: return [c](double u) { return c * u; };
      case AtomKind::power_z:
        if (alpha > 1) return std::nullopt;
        return [c, a = alpha](double u) { return c * std::pow(u, a); };
      case AtomKind::iterlog_z: return [c, m = modulus](double u) { return c * u / il(m, u); };
      case AtomKind::log_z: return [c](double u) { return c * u / std::log(std::numbers::e + u); };
      case AtomKind::sin_abs_z: return [c](double u) { return c * std::min(u, 2.0); };
      case AtomKind::constant: return [](double) { return 0.0; };
      default: return std::nullopt;
    }
  }
};

inline Atom make_atom(AtomKind kind, double coef) {
  Atom a;
  a.kind = kind;
  a.coef = coef;
  return a;
}

// ---------------------------------------------------------------------------
// Driver process f_t = f(t, B_t) >= 0.

enum class DriverKind { zero, constant, b_plus_1, abs_b_plus_1 };

constexpr std::string_view to_string(DriverKind k) noexcept {
  switch (k) {
    case DriverKind::zero: return "zero";
    case DriverKind::constant: return "constant";
    case DriverKind::b_plus_1: return "b_plus_1";
    case DriverKind::abs_b_plus_1: return "abs_b_plus_1";
  }
  return "?";
}

struct Driver {
  DriverKind kind = DriverKind::zero;
  double value = 0.0;

  [[nodiscard]] double operator()(double /*t*/, double b) const {
    switch (kind) {
      case DriverKind::zero: return 0.0;
      case DriverKind::constant: return value;
      case DriverKind::b_plus_1: return b + 1.0;
      case DriverKind::abs_b_plus_1: return std::abs(b) + 1.0;
    }
    return 0.0;
  }
};

// ---------------------------------------------------------------------------
// Moduli and certificates.

/// A function in S (continuous, nondecreasing, zero at zero) with a declared
/// linear-growth constant: m(u) <= growth * (1 + u). growth < 0 means no
/// linear-growth claim.
struct Modulus {
  std::string name;
  std::function<double(double)> fn;
  double growth = -1.0;
  double operator()(double u) const { return fn(u); }
};

struct MembershipResult {
  bool zero_at_zero = true;
  bool nondecreasing = true;
  bool nonnegative = true;
  bool linear_growth = true;
  [[nodiscard]] bool ok() const { return zero_at_zero && nondecreasing && nonnegative && linear_growth; }
};

/// Grid spot-check of membership in S (and of linear growth when declared).
/// `require_zero` is off for growth envelopes such as h(u) = e^u, whose value
/// at zero is a constant that can be moved into f.
inline MembershipResult check_modulus_membership(const Modulus& m, double umax = 1e6, std::size_t points = 2000,
                                                 bool require_zero = true) {
  MembershipResult r;
  r.zero_at_zero = !require_zero || std::abs(m(0.0)) <= 1e-300;
  const auto g = log_grid(umax, points);
  double prev = m(0.0);
  for (double u : g) {
    const double v = m(u);
    if (!(v >= 0)) r.nonnegative = false;
    if (v < prev - 1e-12 * std::max(1.0, std::abs(prev))) r.nondecreasing = false;
    if (m.growth >= 0 && v > m.growth * (1 + u) * (1 + 1e-12)) r.linear_growth = false;
    prev = v;
  }
  return r;
}

struct CertH1 {};
struct CertH2 {
  int n = 2;
  double lambda = 0.75;
  double beta = 0;
  double gamma = 1;
};
struct CertH3 {
  double c = 1;
  Modulus h;
};
struct CertH4 {
  Modulus rho;
  double divergence_lo = 1e-8;
  double divergence_hi = 1e-2;
  double divergence_threshold = 10.0;
};
struct CertH5 {
  int n = 2;
  double lambda = 0.75;
  Modulus kappa;
};
struct CertH2S {
  double alpha = 0.5;
  double beta = 0;
  double gamma = 1;
};
struct CertH5S {
  double alpha = 0.5;
  Modulus kappa_bar;
};
struct CertH5Prime {
  double A = 1;
  Modulus kappa_tilde;
  int n = 2;
  double lambda = 0.75;
};
struct CertH5SPrime {
  double alpha = 0.5;
  double A = 1;
  Modulus kappa_tilde;
};

using AssumptionCertificate =
    std::variant<CertH1, CertH2, CertH3, CertH4, CertH5, CertH2S, CertH5S, CertH5Prime, CertH5SPrime>;

inline std::string certificate_label(const AssumptionCertificate& c) {
  struct V {
    std::string operator()(const CertH1&) const { return "H1"; }
    std::string operator()(const CertH2&) const { return "H2"; }
    std::string operator()(const CertH3&) const { return "H3"; }
    std::string operator()(const CertH4&) const { return "H4"; }
    std::string operator()(const CertH5&) const { return "H5"; }
    std::string operator()(const CertH2S&) const { return "H2S"; }
    std::string operator()(const CertH5S&) const { return "H5S"; }
    std::string operator()(const CertH5Prime&) const { return "H5prime"; }
    std::string operator()(const CertH5SPrime&) const { return "H5Sprime"; }
  };
  return std::visit(V{}, c);
}

// ---------------------------------------------------------------------------
// Models.

/// Region over which sampled checks draw (t, b, y, z).
struct SampleBox {
  double t_max = 1.0;
  double b_max = 4.0;
  double y_max = 10.0;
  double z_max = 1e3;
};

struct GeneratorModel {
  std::string name;
  int dim = 1;
  std::vector<Atom> atoms;
  Driver driver;
  SampleBox box;
  std::vector<AssumptionCertificate> certificates;

  double operator()(double t, double b, double y, ZView z) const {
    (void)t;
    const double zn = norm(z);
    double g = 0.0;
    for (const auto& a : atoms) g += a.eval(b, y, zn, z);
    return g;
  }
  double operator()(double t, double b, double y, double z) const { return (*this)(t, b, y, ZView(&z, 1)); }

  [[nodiscard]] double f(double t, double b) const { return driver(t, b); }

  [[nodiscard]] bool z_free() const {
    return std::none_of(atoms.begin(), atoms.end(), [](const Atom& a) { return a.depends_on_z(); });
  }

  [[nodiscard]] const AssumptionCertificate* find(std::string_view label) const {
    for (const auto& c : certificates) {
      if (certificate_label(c) == label) return &c;
    }
    return nullptr;
  }
};

/// g + c, keeping the driver and box; certificates are dropped.
inline GeneratorModel shifted(GeneratorModel m, double c) {
  m.name += "+" + std::to_string(c);
  m.atoms.push_back(make_atom(AtomKind::constant, c));
  m.certificates.clear();
  return m;
}

// ---------------------------------------------------------------------------
// Sampling checks.

struct SampleOptions {
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  double tolerance = 1e-10;
  Exec exec{};
  std::optional<SampleBox> box;  ///< overrides the model's declared box
};

struct Sample {
  double t = 0, b = 0, y = 0, y2 = 0;
  std::vector<double> z, z2;
};

struct MarginReport {
  std::string model;
  std::string assumption;
  SampleBox box;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double min_margin = std::numeric_limits<double>::infinity();  ///< relative
  double min_raw_margin = std::numeric_limits<double>::infinity();
  Sample worst;
  std::size_t violations = 0;
  double tolerance = 1e-10;
  bool modulus_in_S = true;
  std::optional<double> divergence_integral;  ///< H4 spot-check value
  std::optional<bool> divergence_flag;
  std::string note;
  bool pass = false;
};

namespace detail {

/// Draws sample `i` deterministically from (seed, i).
inline Sample draw(const CounterRng& rng, std::size_t i, const SampleBox& box, int dim) {
  Sample s;
  std::uint64_t stream = 0;
  s.t = rng.uniform(stream++, i, 0.0, box.t_max);
  s.b = rng.uniform(stream++, i, -box.b_max, box.b_max);
  s.y = (i % 64 == 0) ? 0.0 : rng.uniform(stream++, i, -box.y_max, box.y_max);
  s.y2 = rng.uniform(stream++, i, -box.y_max, box.y_max);
  const double top = std::log1p(box.z_max);
  auto component = [&](std::uint64_t st) {
    const double mag = std::expm1(top * rng.uniform(st, i));
    return rng.uniform(st + 1, i) < 0.5 ? -mag : mag;
  };
  s.z.resize(static_cast<std::size_t>(dim));
  s.z2.resize(static_cast<std::size_t>(dim));
  for (int d = 0; d < dim; ++d) s.z[static_cast<std::size_t>(d)] = component(16 + 4 * static_cast<std::uint64_t>(d));
  // Separation z2 - z1 with log-uniform length in [1e-8, 2 z_max].
  const double lo = std::log(1e-8), hi = std::log(2 * box.z_max);
  const double sep = std::exp(rng.uniform(200, i, lo, hi));
  std::vector<double> dir(static_cast<std::size_t>(dim));
  double dn = 0;
  for (int d = 0; d < dim; ++d) {
    dir[static_cast<std::size_t>(d)] = rng.uniform(300 + static_cast<std::uint64_t>(d), i, -1.0, 1.0);
    dn += dir[static_cast<std::size_t>(d)] * dir[static_cast<std::size_t>(d)];
  }
  dn = std::sqrt(dn);
  if (dn == 0) {
    dir[0] = 1;
    dn = 1;
  }
  for (int d = 0; d < dim; ++d) {
    const auto u = static_cast<std::size_t>(d);
    s.z2[u] = s.z[u] + sep * dir[u] / dn;
  }
  return s;
}

inline double rel_margin(double rhs, double lhs) {
  return (rhs - lhs) / std::max({std::abs(rhs), std::abs(lhs), 1.0});
}

template <class MarginFn>
MarginReport run_sampled(const GeneratorModel& model, std::string label, const SampleOptions& opt, MarginFn&& margin) {
  const SampleBox box = opt.box.value_or(model.box);
  const CounterRng rng{opt.seed};
  struct Partial {
    double rel = std::numeric_limits<double>::infinity();
    double raw = std::numeric_limits<double>::infinity();
    std::size_t index = 0;
    std::size_t violations = 0;
  };
  const Partial worst = map_reduce_chunks(
      opt.exec, opt.samples, Partial{},
      [&](std::size_t b, std::size_t e) {
        Partial part;
        for (std::size_t i = b; i < e; ++i) {
          const Sample s = draw(rng, i, box, model.dim);
          const auto [rhs, lhs] = margin(s);
          double rel = rel_margin(rhs, lhs);
          if (!std::isfinite(rel)) rel = -std::numeric_limits<double>::infinity();
          if (rel < -opt.tolerance) ++part.violations;
          if (rel < part.rel) {
            part.rel = rel;
            part.raw = rhs - lhs;
            part.index = i;
          }
        }
        return part;
      },
      [](Partial acc, Partial next) {
        acc.violations += next.violations;
        if (next.rel < acc.rel) {
          acc.rel = next.rel;
          acc.raw = next.raw;
          acc.index = next.index;
        }
        return acc;
      });
  MarginReport r;
  r.model = model.name;
  r.assumption = std::move(label);
  r.box = box;
  r.samples = opt.samples;
  r.seed = opt.seed;
  r.min_margin = worst.rel;
  r.min_raw_margin = worst.raw;
  if (opt.samples > 0) r.worst = draw(rng, worst.index, box, model.dim);
  r.violations = worst.violations;
  r.tolerance = opt.tolerance;
  r.pass = worst.violations == 0;
  return r;
}

}  // namespace detail

/// Continuity spot-check: with h = 1e-9 (1 + |y| + |z|), the change of g over
/// a step h in (y, z) is at most 3/4 of the change over 2h, up to rounding.
/// A smooth g gives a ratio near 1/2; a jump inside the step gives about 1.
inline MarginReport check_h1(const GeneratorModel& model, const SampleOptions& opt) {
  return detail::run_sampled(model, "H1", opt, [&](const Sample& s) {
    const double g0 = model(s.t, s.b, s.y, s.z);
    const double h = 1e-9 * (1 + std::abs(s.y) + norm(s.z));
    auto moved = [&](double step) {
      std::vector<double> zp = s.z;
      for (double& v : zp) v += step;
      return model(s.t, s.b, s.y + step, zp);
    };
    const double g1 = moved(h), g2 = moved(2 * h);
    if (!std::isfinite(g0) || !std::isfinite(g1) || !std::isfinite(g2)) {
      return std::pair{0.0, std::numeric_limits<double>::infinity()};
    }
    const double noise = 1e-13 * std::max({std::abs(g0), std::abs(g1), std::abs(g2), 1.0});
    return std::pair{0.75 * std::abs(g2 - g0) + noise, std::abs(g1 - g0)};
  });
}

/// The same test at explicit points (t, b, y, z).
inline bool h1_holds_at(const GeneratorModel& model, double t, double b, double y, double z, double h) {
  const double g0 = model(t, b, y, z), g1 = model(t, b, y + h, z + h), g2 = model(t, b, y + 2 * h, z + 2 * h);
  const double noise = 1e-13 * std::max({std::abs(g0), std::abs(g1), std::abs(g2), 1.0});
  return std::abs(g1 - g0) <= 0.75 * std::abs(g2 - g0) + noise;
}

inline MarginReport check_h2(const GeneratorModel& model, const CertH2& c, const SampleOptions& opt) {
  const auto spec = IterLogSpec::standard(c.n, c.lambda);
  return detail::run_sampled(model, "H2", opt, [&](const Sample& s) {
    const double zn = norm(s.z);
    const double rhs = model.f(s.t, s.b) + c.beta * std::abs(s.y) + c.gamma * zn / il(spec, zn);
    return std::pair{rhs, sgn(s.y) * model(s.t, s.b, s.y, s.z)};
  });
}

inline MarginReport check_h2s(const GeneratorModel& model, const CertH2S& c, const SampleOptions& opt) {
  detail::require(c.alpha > 0 && c.alpha < 1, ErrorKind::parameter, "H2S alpha must lie in (0, 1)");
  return detail::run_sampled(model, "H2S", opt, [&](const Sample& s) {
    const double rhs = model.f(s.t, s.b) + c.beta * std::abs(s.y) + c.gamma * std::pow(norm(s.z), c.alpha);
    return std::pair{rhs, sgn(s.y) * model(s.t, s.b, s.y, s.z)};
  });
}

inline MarginReport check_h3(const GeneratorModel& model, const CertH3& c, const SampleOptions& opt) {
  auto r = detail::run_sampled(model, "H3", opt, [&](const Sample& s) {
    const double zn = norm(s.z);
    const double rhs = model.f(s.t, s.b) + c.h(std::abs(s.y)) + c.c * zn * zn;
    return std::pair{rhs, std::abs(model(s.t, s.b, s.y, s.z))};
  });
  r.modulus_in_S = check_modulus_membership(c.h, 50.0, 2000, false).ok();
  r.pass = r.pass && r.modulus_in_S;
  return r;
}

/// Trapezoid estimate of int_lo^hi du / rho(u) on a log grid.
inline double divergence_integral(const Modulus& rho, double lo, double hi, std::size_t points = 20001) {
  const auto g = geometric_grid(lo, hi, points);
  double s = 0.0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    s += 0.5 * (1.0 / rho(g[i - 1]) + 1.0 / rho(g[i])) * (g[i] - g[i - 1]);
  }
  return s;
}

inline MarginReport check_h4(const GeneratorModel& model, const CertH4& c, const SampleOptions& opt) {
  auto r = detail::run_sampled(model, "H4", opt, [&](const Sample& s) {
    double y1 = std::max(s.y, s.y2), y2 = std::min(s.y, s.y2);
    if (y1 == y2) y1 = std::nextafter(y1, std::numeric_limits<double>::infinity());
    const double lhs = model(s.t, s.b, y1, s.z) - model(s.t, s.b, y2, s.z);
    return std::pair{c.rho(y1 - y2), lhs};
  });
  r.modulus_in_S = check_modulus_membership(c.rho, 1e3).ok();
  // The divergence condition at 0+ is not decidable; report a spot value only.
  r.divergence_integral = divergence_integral(c.rho, c.divergence_lo, c.divergence_hi);
  r.divergence_flag = *r.divergence_integral >= c.divergence_threshold;
  r.note = "divergence of int du/rho is attested, not proven; the integral over [" + std::to_string(c.divergence_lo) +
           ", " + std::to_string(c.divergence_hi) + "] is informational";
  r.pass = r.pass && r.modulus_in_S;
  return r;
}

namespace detail {

template <class Bound>
MarginReport run_z_pairs(const GeneratorModel& model, std::string label, const SampleOptions& opt, Bound&& bound) {
  return run_sampled(model, std::move(label), opt, [&](const Sample& s) {
    std::vector<double> dz(s.z.size());
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = s.z[i] - s.z2[i];
    const double sep = norm(dz);
    const double gap = std::abs(model(s.t, s.b, s.y, s.z) - model(s.t, s.b, s.y, s.z2));
    return std::pair{bound(sep), gap};
  });
}

}  // namespace detail

inline MarginReport check_h5(const GeneratorModel& model, const CertH5& c, const SampleOptions& opt) {
  const auto spec = IterLogSpec::standard(c.n, c.lambda);
  auto r = detail::run_z_pairs(model, "H5", opt, [&](double sep) { return c.kappa(sep / il(spec, sep)); });
  r.modulus_in_S = check_modulus_membership(c.kappa).ok();
  r.pass = r.pass && r.modulus_in_S;
  return r;
}

inline MarginReport check_h5s(const GeneratorModel& model, const CertH5S& c, const SampleOptions& opt) {
  auto r = detail::run_z_pairs(model, "H5S", opt, [&](double sep) { return c.kappa_bar(std::pow(sep, c.alpha)); });
  r.modulus_in_S = check_modulus_membership(c.kappa_bar).ok();
  r.pass = r.pass && r.modulus_in_S;
  return r;
}

inline MarginReport check_h5prime(const GeneratorModel& model, const CertH5Prime& c, const SampleOptions& opt) {
  const auto spec = IterLogSpec::standard(c.n, c.lambda);
  auto r = detail::run_z_pairs(model, "H5prime", opt, [&](double sep) {
    return std::min(c.kappa_tilde(sep), c.A * sep / il(spec, sep) + c.A);
  });
  r.modulus_in_S = check_modulus_membership(c.kappa_tilde).ok();
  r.pass = r.pass && r.modulus_in_S;
  return r;
}

inline MarginReport check_h5sprime(const GeneratorModel& model, const CertH5SPrime& c, const SampleOptions& opt) {
  auto r = detail::run_z_pairs(model, "H5Sprime", opt, [&](double sep) {
    return std::min(c.kappa_tilde(sep), c.A * std::pow(sep, c.alpha) + c.A);
  });
  r.modulus_in_S = check_modulus_membership(c.kappa_tilde).ok();
  r.pass = r.pass && r.modulus_in_S;
  return r;
}

inline MarginReport check(const GeneratorModel& model, const AssumptionCertificate& cert, const SampleOptions& opt) {
  struct V {
    const GeneratorModel& m;
    const SampleOptions& o;
    MarginReport operator()(const CertH1&) const { return check_h1(m, o); }
    MarginReport operator()(const CertH2& c) const { return check_h2(m, c, o); }
    MarginReport operator()(const CertH3& c) const { return check_h3(m, c, o); }
    MarginReport operator()(const CertH4& c) const { return check_h4(m, c, o); }
    MarginReport operator()(const CertH5& c) const { return check_h5(m, c, o); }
    MarginReport operator()(const CertH2S& c) const { return check_h2s(m, c, o); }
    MarginReport operator()(const CertH5S& c) const { return check_h5s(m, c, o); }
    MarginReport operator()(const CertH5Prime& c) const { return check_h5prime(m, c, o); }
    MarginReport operator()(const CertH5SPrime& c) const { return check_h5sprime(m, c, o); }
  };
  return std::visit(V{model, opt}, cert);
}

// ---------------------------------------------------------------------------
// From the primed continuity condition to the iterated-log one.

struct H5Transform {
  CertH5 cert;
  double K1 = 1;  ///< sup_{[0,1]} IL
  double K2 = 1;  ///< sup_{x>1} IL(x)/x
  int branch = 1;
};

/// Builds kappa(x) = kappa~(K1 x) 1{x<=1} + kappa~(K1) x 1{x>1} when
/// kappa~(K1) >= (1+K2) A, and the rescaled second branch otherwise.
/// K1 and K2 are grid sups.
inline H5Transform transform_h5prime_to_h5(const CertH5Prime& prime, int n, double lambda) {
  detail::require(prime.A > 0, ErrorKind::degenerate, "H5prime constant A must be > 0");
  const auto spec = IterLogSpec::standard(n, lambda);
  H5Transform t;
  t.K1 = 0;
  for (double x : linear_grid(0.0, 1.0, 1001)) t.K1 = std::max(t.K1, il(spec, x));
  t.K2 = 0;
  for (double x : geometric_grid(1.0, 1e8, 4001)) t.K2 = std::max(t.K2, il(spec, x) / x);
  const double kt_K1 = prime.kappa_tilde(t.K1);
  const double bound = (1.0 + t.K2) * prime.A;
  const auto kt = prime.kappa_tilde.fn;
  const double K1 = t.K1;
  Modulus kappa;
  if (kt_K1 >= bound) {
    t.branch = 1;
    kappa.fn = [kt, K1, kt_K1](double x) { return x <= 1 ? kt(K1 * x) : kt_K1 * x; };
    kappa.growth = kt_K1;
  } else {
    t.branch = 2;
    detail::require(kt_K1 > 0, ErrorKind::degenerate, "kappa~(K1) must be > 0");
    const double scale = bound / kt_K1;
    kappa.fn = [kt, K1, scale, bound](double x) { return x <= 1 ? scale * kt(K1 * x) : bound * x; };
    kappa.growth = bound;
  }
  kappa.name = "from_H5prime(" + prime.kappa_tilde.name + ")";
  if (prime.kappa_tilde.growth >= 0) kappa.growth = std::max(kappa.growth, prime.kappa_tilde.growth * K1 * 2);
  t.cert = CertH5{n, lambda, std::move(kappa)};
  return t;
}

/// kappa~ = sum of the z-atom moduli, and the smallest grid constant A with
/// kappa~(u) <= A u / IL(u) + A (inflated by 1e-6 relative).
struct ZAtomModulus {
  Modulus kappa_tilde;
  double A = 0;
};

inline ZAtomModulus z_atom_modulus(std::span<const Atom> atoms, int n, double lambda) {
  std::vector<std::function<double(double)>> parts;
  for (const auto& a : atoms) {
    if (!a.depends_on_z()) continue;
    auto m = a.z_modulus();
    detail::require(m.has_value(), ErrorKind::parameter,
                    "atom " + std::string(to_string(a.kind)) + " has no known z-modulus");
    parts.push_back(*m);
  }
  ZAtomModulus out;
  out.kappa_tilde.name = "sum_of_z_atom_moduli";
  out.kappa_tilde.fn = [parts](double u) {
    double s = 0;
    for (const auto& p : parts) s += p(u);
    return s;
  };
  const auto spec = IterLogSpec::standard(n, lambda);
  auto grid = log_grid(1e12, 100001);
  grid.push_back(2.0);  // kink of min(u, 2)
  double A = 0.0, lin = 0.0;
  for (double u : grid) {
    const double v = out.kappa_tilde(u);
    A = std::max(A, v / (u / il(spec, u) + 1.0));
    lin = std::max(lin, v / (1.0 + u));
  }
  out.A = A * (1 + 1e-6);
  out.kappa_tilde.growth = lin * (1 + 1e-6);
  return out;
}

/// H5 certificate for a model whose z-dependence is a sum of known atoms.
inline H5Transform certify_h5_from_atoms(std::span<const Atom> atoms, int n, double lambda) {
  auto zm = z_atom_modulus(atoms, n, lambda);
  return transform_h5prime_to_h5(CertH5Prime{zm.A, zm.kappa_tilde, n, lambda}, n, lambda);
}

// ---------------------------------------------------------------------------
// The two worked examples.

inline Atom iterlog_atom(AtomKind kind, double coef, int n, double lambda, double k) {
  Atom a = make_atom(kind, coef);
  a.modulus = IterLogSpec::make(n, lambda, k);
  return a;
}

/// g = B_t - e^y sin^2|z| + |z| cos|z| / IL_{2,e^8}^{3/4}(|z|) - |z|^2 sin y.
///
/// Certificates: H1, H2(2, 3/4, beta = 0, gamma = 1) and H3(c = 2, h = e^u).
/// The growth bound in y of the |z|^2 sin y term holds only for |y| <= pi,
/// which is the declared sampling box. `repaired_driver` selects
/// f = |B| + 1 instead of f = B + 1 (which is not nonnegative).
inline GeneratorModel example_26(bool repaired_driver = true) {
  GeneratorModel m;
  m.name = repaired_driver ? "example_26" : "example_26_verbatim";
  m.atoms = {
      make_atom(AtomKind::brownian, 1.0),
      make_atom(AtomKind::exp_y_sin2_z, -1.0),
      iterlog_atom(AtomKind::cos_iterlog_z, 1.0, 2, 0.75, std::exp(8.0)),
      make_atom(AtomKind::quadratic_z_sin_y, -1.0),
  };
  m.driver = Driver{repaired_driver ? DriverKind::abs_b_plus_1 : DriverKind::b_plus_1, 0.0};
  m.box = SampleBox{1.0, 4.0, std::numbers::pi, 1e3};
  m.certificates = {
      CertH1{},
      CertH2{2, 0.75, 0.0, 1.0},
      CertH3{2.0, Modulus{"exp", [](double u) { return std::exp(u); }, -1.0}},
  };
  return m;
}

/// The growth certificate with the constant c = 1, which the |z| cos|z| term
/// violates near sin y = +-1 for large |z|.
inline CertH3 example_26_unit_c_h3() {
  return CertH3{1.0, Modulus{"exp", [](double u) { return std::exp(u); }, -1.0}};
}

/// z-atoms of the second example: sin|z| + sqrt|z| + |z|^{1/3} + |z|/ln(e+|z|)
/// + |z| / IL_{2,e^8}^{2/3}(|z|).
inline std::vector<Atom> example_27_z_atoms() {
  Atom sqrt_z = make_atom(AtomKind::power_z, 1.0);
  sqrt_z.alpha = 0.5;
  Atom cbrt_z = make_atom(AtomKind::power_z, 1.0);
  cbrt_z.alpha = 1.0 / 3.0;
  return {
      make_atom(AtomKind::sin_abs_z, 1.0),
      sqrt_z,
      cbrt_z,
      make_atom(AtomKind::log_z, 1.0),
      iterlog_atom(AtomKind::iterlog_z, 1.0, 2, 2.0 / 3.0, std::exp(8.0)),
  };
}

/// g = y^4 1{y<=0} + l(|y|) + (z-atoms above), with constant driver
/// f = l(eps) + 2A. Certificates: H1, H2(2, 2/3, l'(eps), A),
/// H3(A, u^4 + l(u)), H4(rho = l) and H5(2, 2/3) built from the atom moduli.
inline GeneratorModel example_27(double eps = 1e-3, LExtension ext = LExtension::continuous) {
  const auto l = LogLogModulus::make(eps, ext);
  GeneratorModel m;
  m.name = ext == LExtension::continuous ? "example_27" : "example_27_verbatim";
  Atom quartic = make_atom(AtomKind::quartic_neg_y, 1.0);
  Atom labs = make_atom(AtomKind::l_abs_y, 1.0);
  labs.l = l;
  m.atoms = {quartic, labs};
  for (auto& a : example_27_z_atoms()) m.atoms.push_back(a);

  const auto h5 = certify_h5_from_atoms(m.atoms, 2, 2.0 / 3.0);
  const double A = z_atom_modulus(m.atoms, 2, 2.0 / 3.0).A;
  m.driver = Driver{DriverKind::constant, LogLogModulus::core(eps) + 2.0 * A};
  m.box = SampleBox{1.0, 4.0, 10.0, 1e3};
  Modulus rho{"l", [l](double u) { return l(u); }, std::max(l.slope(), LogLogModulus::core(eps))};
  Modulus h{"u^4+l(u)", [l](double u) { return u * u * u * u + l(u); }, -1.0};
  m.certificates = {
      CertH1{}, CertH2{2, 2.0 / 3.0, l.slope(), A}, CertH3{A, h}, CertH4{rho}, h5.cert,
  };
  return m;
}

}  // namespace ilbsde
