#pragma once

// Command implementations shared by the command-line tool and the suite
// runner. Each command reads a JSON configuration, fills in defaults, and
// returns a report whose "config" field echoes the effective configuration.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ilbsde/config.hpp"
#include "ilbsde/error.hpp"
#include "ilbsde/genmodel.hpp"
#include "ilbsde/ineq.hpp"
#include "ilbsde/lattice.hpp"
#include "ilbsde/report.hpp"
#include "ilbsde/solver.hpp"
#include "ilbsde/testfn.hpp"
#include "ilbsde/validate.hpp"

namespace ilbsde {

inline constexpr const char* kToolVersion = "1.0.0";

struct RunContext {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::optional<double> tolerance;  ///< replaces every command's "tolerance"

  [[nodiscard]] Exec exec() const { return Exec{threads, 1024}; }
};

struct OutputFile {
  std::string name;
  std::string content;
};

struct CommandOutput {
  Json report;
  bool pass = false;
  std::vector<OutputFile> files;
};

// ---------------------------------------------------------------------------
// Config access with defaults; the effective object keeps request order.

class Cfg {
 public:
  explicit Cfg(const Json& in, std::string where = "config") : in_(in), where_(std::move(where)) {
    if (!in_.is_null() && !in_.is_object()) fail("expected a table");
  }

  template <class T>
  T get(const std::string& key, T def) {
    used_.push_back(key);
    Json v = in_.is_object() && in_.contains(key) ? in_.at(key) : Json(def);
    try {
      T out = v.get<T>();
      out_[key] = v;
      return out;
    } catch (const nlohmann::json::exception&) {
      fail("key '" + key + "' has the wrong type");
    }
  }

  /// Raw value with a default.
  Json raw(const std::string& key, Json def) {
    used_.push_back(key);
    Json v = in_.is_object() && in_.contains(key) ? in_.at(key) : std::move(def);
    out_[key] = v;
    return v;
  }

  [[nodiscard]] bool has(const std::string& key) const { return in_.is_object() && in_.contains(key); }

  /// Records a resolved value in the effective config.
  void set(const std::string& key, Json v) { out_[key] = std::move(v); }

  /// Rejects keys that were never requested.
  Json finish() const {
    if (in_.is_object()) {
      for (const auto& [k, v] : in_.items()) {
        if (std::find(used_.begin(), used_.end(), k) == used_.end()) fail("unknown key '" + k + "'");
      }
    }
    return out_.is_null() ? Json::object() : out_;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw Error(ErrorKind::config, where_ + ": " + msg); }

 private:
  Json in_;
  std::string where_;
  Json out_ = Json::object();
  std::vector<std::string> used_;
};

inline double tolerance_or(const RunContext& ctx, Cfg& cfg, double def) {
  const double t = cfg.get<double>("tolerance", def);
  if (ctx.tolerance) {
    cfg.set("tolerance", *ctx.tolerance);
    return *ctx.tolerance;
  }
  return t;
}

inline Json start_report(const std::string& command) {
  return Json{{"command", command}, {"version", kToolVersion}};
}

// ---------------------------------------------------------------------------
// Model, certificate and problem construction.

inline Modulus modulus_from_json(const Json& j, const std::string& where) {
  Cfg c(j.is_string() ? Json{{"name", j}} : j, where);
  const auto name = c.get<std::string>("name", "identity");
  const double scale = c.get<double>("scale", 1.0);
  Modulus m;
  if (name == "zero") {
    m = Modulus{name, [](double) { return 0.0; }, 0.0};
  } else if (name == "identity" || name == "linear") {
    m = Modulus{name, [scale](double u) { return scale * u; }, scale};
  } else if (name == "sqrt") {
    m = Modulus{name, [scale](double u) { return scale * std::sqrt(u); }, scale};
  } else if (name == "exp") {
    m = Modulus{name, [scale](double u) { return scale * std::exp(u); }, -1.0};
  } else if (name == "min2") {
    m = Modulus{name, [scale](double u) { return scale * std::min(u, 2.0); }, scale};
  } else if (name == "l") {
    const auto l = LogLogModulus::make(c.get<double>("eps", 1e-3));
    m = Modulus{name, [l, scale](double u) { return scale * l(u); },
                scale * std::max(l.slope(), LogLogModulus::core(l.eps))};
  }
  if (m.fn) {
    (void)c.finish();
    return m;
  }
  c.fail("unknown modulus '" + name + "'");
}

inline Atom atom_from_json(const Json& j, std::size_t idx) {
  Cfg c(j, "atoms[" + std::to_string(idx) + "]");
  const auto kind_name = c.get<std::string>("kind", "const");
  const auto kind = atom_kind_from_string(kind_name);
  if (!kind) c.fail("unknown atom kind '" + kind_name + "'");
  Atom a = make_atom(*kind, c.get<double>("coef", 1.0));
  switch (*kind) {
    case AtomKind::power_z:
    case AtomKind::tanh_y_power_z: a.alpha = c.get<double>("alpha", 0.5); break;
    case AtomKind::iterlog_z:
    case AtomKind::cos_iterlog_z: {
      const int n = c.get<int>("n", 2);
      const double lambda = c.get<double>("lambda", 0.75);
      const double k = c.get<double>("k", tower(n));
      a.modulus = IterLogSpec::make(n, lambda, k);
      break;
    }
    case AtomKind::l_abs_y: {
      const double eps = c.get<double>("eps", 1e-3);
      const auto ext = c.get<std::string>("extension", "continuous");
      if (ext != "continuous" && ext != "verbatim") c.fail("extension must be continuous or verbatim");
      a.l = LogLogModulus::make(eps, ext == "continuous" ? LExtension::continuous : LExtension::verbatim);
      break;
    }
    default: break;
  }
  (void)c.finish();
  return a;
}

inline AssumptionCertificate certificate_from_json(const Json& j, const GeneratorModel& model, std::size_t idx) {
  Cfg c(j, "certificates[" + std::to_string(idx) + "]");
  const auto kind = c.get<std::string>("kind", "H1");
  auto kappa_or_atoms = [&](const char* key, int n, double lambda) {
    const Json v = c.raw(key, "from_atoms");
    if (v.is_string() && v.get<std::string>() == "from_atoms") return certify_h5_from_atoms(model.atoms, n, lambda);
    H5Transform t;
    t.cert = CertH5{n, lambda, modulus_from_json(v, key)};
    return t;
  };
  AssumptionCertificate out;
  if (kind == "H1") {
    out = CertH1{};
  } else if (kind == "H2") {
    out = CertH2{c.get<int>("n", 2), c.get<double>("lambda", 0.75), c.get<double>("beta", 0.0),
                 c.get<double>("gamma", 1.0)};
  } else if (kind == "H2S") {
    out = CertH2S{c.get<double>("alpha", 0.5), c.get<double>("beta", 0.0), c.get<double>("gamma", 1.0)};
  } else if (kind == "H3") {
    const double cc = c.get<double>("c", 1.0);
    out = CertH3{cc, modulus_from_json(c.raw("h", "exp"), "h")};
  } else if (kind == "H4") {
    CertH4 h4{modulus_from_json(c.raw("rho", "identity"), "rho")};
    h4.divergence_threshold = c.get<double>("divergence_threshold", 10.0);
    out = h4;
  } else if (kind == "H5") {
    const int n = c.get<int>("n", 2);
    const double lambda = c.get<double>("lambda", 0.75);
    out = kappa_or_atoms("kappa", n, lambda).cert;
  } else if (kind == "H5S") {
    out = CertH5S{c.get<double>("alpha", 0.5), modulus_from_json(c.raw("kappa_bar", "identity"), "kappa_bar")};
  } else if (kind == "H5prime") {
    const int n = c.get<int>("n", 2);
    const double lambda = c.get<double>("lambda", 0.75);
    const Json kt = c.raw("kappa_tilde", "from_atoms");
    if (kt.is_string() && kt.get<std::string>() == "from_atoms") {
      auto zm = z_atom_modulus(model.atoms, n, lambda);
      out = CertH5Prime{c.get<double>("A", zm.A), zm.kappa_tilde, n, lambda};
    } else {
      out = CertH5Prime{c.get<double>("A", 1.0), modulus_from_json(kt, "kappa_tilde"), n, lambda};
    }
  } else if (kind == "H5Sprime") {
    out = CertH5SPrime{c.get<double>("alpha", 0.5), c.get<double>("A", 1.0),
                       modulus_from_json(c.raw("kappa_tilde", "identity"), "kappa_tilde")};
  } else {
    c.fail("unknown certificate kind '" + kind + "'");
  }
  (void)c.finish();
  return out;
}

inline GeneratorModel builtin_model(const std::string& name, Cfg& c) {
  if (name == "example_26") return example_26(true);
  if (name == "example_26_verbatim") return example_26(false);
  if (name == "example_27" || name == "example_27_verbatim") {
    const double eps = c.get<double>("eps", 1e-3);
    return example_27(eps, name == "example_27" ? LExtension::continuous : LExtension::verbatim);
  }
  if (name == "zero") {
    GeneratorModel m;
    m.name = "zero";
    m.certificates = {CertH1{}, CertH2{2, 0.75, 0.0, 1.0}, CertH3{1.0, Modulus{"zero", [](double) { return 0.0; }, 0}},
                      CertH4{Modulus{"identity", [](double u) { return u; }, 1.0}}};
    return m;
  }
  if (name == "linear_y") {
    const double beta = c.get<double>("beta", 0.5);
    GeneratorModel m;
    m.name = "linear_y";
    m.atoms = {make_atom(AtomKind::linear_y, beta)};
    m.certificates = {CertH1{}, CertH2{2, 0.75, std::abs(beta), 1.0},
                      CertH4{Modulus{"linear", [beta](double u) { return std::abs(beta) * u; }, std::abs(beta)}}};
    return m;
  }
  if (name == "quadratic_z") {
    // |z|^2 paired with the second example's continuity certificate.
    GeneratorModel m;
    m.name = "quadratic_z";
    m.atoms = {make_atom(AtomKind::quadratic_z, 1.0)};
    m.certificates = {CertH1{}, certify_h5_from_atoms(example_27_z_atoms(), 2, 2.0 / 3.0).cert};
    return m;
  }
  if (name == "closure") {
    // First-example z-atom plus the second example's z-atoms; certified at (2, 2/3).
    GeneratorModel m;
    m.name = "closure";
    m.atoms = {iterlog_atom(AtomKind::iterlog_z, 1.0, 2, 0.75, std::exp(8.0))};
    for (auto& a : example_27_z_atoms()) m.atoms.push_back(a);
    m.certificates = {CertH1{}, certify_h5_from_atoms(m.atoms, 2, 2.0 / 3.0).cert};
    return m;
  }
  c.fail("unknown built-in model '" + name + "'");
}

inline SampleBox box_from_json(const Json& j, SampleBox def) {
  Cfg c(j, "box");
  SampleBox b{c.get<double>("t_max", def.t_max), c.get<double>("b_max", def.b_max), c.get<double>("y_max", def.y_max),
              c.get<double>("z_max", def.z_max)};
  (void)c.finish();
  detail::require(b.t_max > 0 && b.b_max >= 0 && b.y_max >= 0 && b.z_max > 0, ErrorKind::config,
                  "box extents must be nonnegative (t_max, z_max positive)");
  return b;
}

/// A model is a built-in name, or a table with either `builtin` or `atoms`.
inline GeneratorModel model_from_json(const Json& j) {
  if (j.is_string()) {
    Cfg c(Json::object(), "model");
    return builtin_model(j.get<std::string>(), c);
  }
  Cfg c(j, "model");
  GeneratorModel m;
  if (c.has("builtin")) {
    m = builtin_model(c.get<std::string>("builtin", ""), c);
  } else {
    m.name = c.get<std::string>("name", "custom");
    const Json atoms = c.raw("atoms", Json::array());
    if (!atoms.is_array()) c.fail("atoms must be an array");
    for (std::size_t i = 0; i < atoms.size(); ++i) m.atoms.push_back(atom_from_json(atoms[i], i));
    const Json drv = c.raw("driver", Json{{"kind", "zero"}});
    Cfg dc(drv, "driver");
    const auto dk = dc.get<std::string>("kind", "zero");
    const double dv = dc.get<double>("value", 0.0);
    (void)dc.finish();
    if (dk == "zero") m.driver = Driver{DriverKind::zero, 0};
    else if (dk == "constant") m.driver = Driver{DriverKind::constant, dv};
    else if (dk == "b_plus_1") m.driver = Driver{DriverKind::b_plus_1, 0};
    else if (dk == "abs_b_plus_1") m.driver = Driver{DriverKind::abs_b_plus_1, 0};
    else dc.fail("unknown driver kind '" + dk + "'");
  }
  if (c.has("box")) m.box = box_from_json(c.raw("box", Json::object()), m.box);
  if (c.has("certificates")) {
    const Json certs = c.raw("certificates", Json::array());
    if (!certs.is_array()) c.fail("certificates must be an array");
    std::vector<AssumptionCertificate> list;
    for (std::size_t i = 0; i < certs.size(); ++i) list.push_back(certificate_from_json(certs[i], m, i));
    m.certificates = std::move(list);
  }
  if (c.has("shift")) m = shifted(m, c.get<double>("shift", 0.0));
  (void)c.finish();
  return m;
}

inline Terminal terminal_from_json(const Json& j) {
  Cfg c(j.is_string() ? Json{{"kind", j}} : j, "terminal");
  const auto kn = c.get<std::string>("kind", "linear");
  const auto kind = terminal_kind_from_string(kn);
  if (!kind) c.fail("unknown terminal kind '" + kn + "'");
  Terminal t{*kind, c.get<double>("scale", 1.0), c.get<double>("shift", 0.0), c.get<double>("param", 0.0)};
  (void)c.finish();
  return t;
}

inline BsdeProblem problem_from_json(const Json& j) {
  Cfg c(j, "problem");
  BsdeProblem p;
  p.model = model_from_json(c.raw("model", "zero"));
  p.terminal = terminal_from_json(c.raw("terminal", Json{{"kind", "linear"}}));
  p.horizon = c.get<double>("horizon", 1.0);
  p.dim = c.get<int>("dim", 1);
  detail::require(p.horizon > 0, ErrorKind::config, "horizon must be > 0");
  (void)c.finish();
  return p;
}

inline SolverConfig solver_config_from(Cfg& c, const RunContext& ctx) {
  SolverConfig s;
  s.steps = c.get<int>("steps", 100);
  const auto scheme = c.get<std::string>("scheme", "picard-implicit");
  if (scheme == "picard-implicit") s.scheme = Scheme::picard_implicit;
  else if (scheme == "explicit") s.scheme = Scheme::explicit_y;
  else c.fail("scheme must be picard-implicit or explicit");
  s.picard_tol = c.get<double>("picard_tol", 1e-10);
  s.picard_max_iter = c.get<int>("picard_max_iter", 50);
  s.exec = ctx.exec();
  detail::require(s.steps >= 1 && s.picard_tol > 0 && s.picard_max_iter >= 1, ErrorKind::config,
                  "need steps >= 1, picard_tol > 0, picard_max_iter >= 1");
  return s;
}

// ---------------------------------------------------------------------------
// CSV helpers (LF line endings, round-trip precision).

// ---------------------------------------------------------------------------
// Analytic-inequality commands.

struct IneqGrid {
  std::vector<double> x;
};

inline std::vector<double> ineq_grid(Cfg& c) {
  const int pts = c.get<int>("grid_points", 1000);
  const double xmax = c.get<double>("grid_max", 1e8);
  detail::require(pts >= 2 && xmax > 0, ErrorKind::config, "need grid_points >= 2 and grid_max > 0");
  return log_grid(xmax, static_cast<std::size_t>(pts));
}

inline std::vector<double> ladder_from(Cfg& c, int n) {
  const Json v = c.raw("ladder", "default");
  if (v.is_string()) {
    if (v.get<std::string>() != "default") c.fail("ladder must be \"default\" or an array");
    return default_k_ladder(n);
  }
  try {
    return v.get<std::vector<double>>();
  } catch (const nlohmann::json::exception&) {
    c.fail("ladder must be an array of numbers");
  }
}

inline CommandOutput cmd_find_k(const Json& in, const RunContext& ctx) {
  Cfg c(in);
  const int n = c.get<int>("n", 2);
  const double lambda = c.get<double>("lambda", 0.75);
  const double p = c.get<double>("p", 2.0);
  const auto ladder = ladder_from(c, n);
  const auto grid = ineq_grid(c);
  const double tol = tolerance_or(ctx, c, kDefaultRelTol);
  const auto r = find_min_k(n, lambda, p, ladder, grid, grid, ctx.exec(), tol);
  const auto floor = analytic_k_floor(n, lambda, p, grid);
  CommandOutput out;
  out.report = start_report("find-k");
  out.report["config"] = c.finish();
  out.report["result"] = to_json(r);
  out.report["analytic_floor"] = to_json(floor);
  out.pass = r.psi.pass && r.key.pass;
  out.report["pass"] = out.pass;
  return out;
}

/// Resolves "auto" (ladder search), "floor" (analytic floor), "standard" (e^(n)) or a number.
inline double resolve_k(Cfg& c, int n, double lambda, double p, std::span<const double> grid, const RunContext& ctx,
                        double tol, std::optional<FindKResult>* found = nullptr) {
  const Json v = c.raw("k", "auto");
  if (v.is_number()) return v.get<double>();
  const auto s = v.is_string() ? v.get<std::string>() : std::string();
  if (s == "standard") return tower(n);
  if (s == "floor") return analytic_k_floor(n, lambda, p, grid).k_logderiv;
  if (s == "auto") {
    const auto ladder = default_k_ladder(n);
    auto r = find_min_k(n, lambda, p, ladder, grid, grid, ctx.exec(), tol);
    const double k = r.k;
    if (found) *found = std::move(r);
    return k;
  }
  c.fail("k must be a number or one of auto, floor, standard");
}

inline CommandOutput cmd_verify_psi(const Json& in, const RunContext& ctx) {
  Cfg c(in);
  const int n = c.get<int>("n", 2);
  const double lambda = c.get<double>("lambda", 0.75);
  const double p = c.get<double>("p", 2.0);
  const auto grid = ineq_grid(c);
  const double tol = tolerance_or(ctx, c, kDefaultRelTol);
  const double k = resolve_k(c, n, lambda, p, grid, ctx, tol);
  const bool check_floor = c.get<bool>("check_floor", true);
  const auto r = verify_psi_conditions(IterLogSpec::make(n, lambda, k), p, grid, tol);
  CommandOutput out;
  out.report = start_report("verify-psi");
  out.report["config"] = c.finish();
  out.report["k"] = k;
  out.report["psi_conditions"] = to_json(r);
  out.pass = r.pass;
  const auto floor = analytic_k_floor(n, lambda, p, grid);
  out.report["analytic_floor"] = to_json(floor);
  if (check_floor) {
    const auto rf = verify_psi_conditions(IterLogSpec::make(n, lambda, floor.k_logderiv), p, grid, tol);
    out.report["psi_conditions_at_floor"] = to_json(rf);
    out.pass = out.pass && rf.pass;
  }
  out.report["pass"] = out.pass;
  return out;
}

inline CommandOutput cmd_check_ineq(const Json& in, const RunContext& ctx) {
  Cfg c(in);
  const int n = c.get<int>("n", 2);
  const double lambda = c.get<double>("lambda", 0.75);
  const double p = c.get<double>("p", 2.0);
  const auto grid = ineq_grid(c);
  const double tol = tolerance_or(ctx, c, kDefaultRelTol);
  std::optional<FindKResult> found;
  const double k = resolve_k(c, n, lambda, p, grid, ctx, tol, &found);
  const auto key = found ? found->key : check_key_inequality(IterLogSpec::make(n, lambda, k), p, grid, grid,
                                                             ctx.exec(), tol);
  CommandOutput out;
  out.report = start_report("check-ineq");
  out.report["config"] = c.finish();
  out.report["k"] = k;
  out.report["k_search"] = found ? Json{{"candidates", found->candidates}, {"candidate_index", found->candidate_index}}
                                 : Json(nullptr);
  out.report["key_inequality"] = to_json(key);
  out.pass = key.pass;
  out.report["pass"] = out.pass;
  return out;
}

inline CommandOutput cmd_counterexample(const Json& in, const RunContext& /*ctx*/) {
  Cfg c(in);
  const int n = c.get<int>("n", 1);
  const double lambda = c.get<double>("lambda", 1.0);
  const double log_k = c.get<double>("log_k", 4.0);
  const double p = c.get<double>("p", 1.0);
  const double y = c.get<double>("y", 10.0);
  const double threshold = c.get<double>("threshold", -1e-6);
  const auto spec = IterLogSpec::make(n, lambda, std::exp(log_k));
  const auto cx = counterexample_p_le_1(spec, p, y);
  // Re-evaluation through the factored form y^2 (p psi(y)^2 / psi(x)^2 - 1).
  const double py = il(spec, cx.y), px = il(spec, cx.x);
  const double factored = cx.y * cx.y * (p * py * py / (px * px) - 1.0);
  CommandOutput out;
  out.report = start_report("counterexample");
  out.report["config"] = c.finish();
  out.report["counterexample"] = to_json(cx);
  out.report["margin_factored"] = factored;
  out.report["agreement"] = std::abs(factored - cx.margin) / std::max(1.0, std::abs(cx.margin));
  out.pass = cx.margin < threshold && factored < threshold;
  out.report["pass"] = out.pass;
  return out;
}

// ---------------------------------------------------------------------------
// Test function.

inline CommandOutput cmd_verify_testfn(const Json& in, const RunContext& ctx) {
  Cfg c(in);
  const double beta = c.get<double>("beta", 0.0);
  const double gamma = c.get<double>("gamma", 1.0);
  const int n = c.get<int>("n", 2);
  const double lambda = c.get<double>("lambda", 0.75);
  const double horizon = c.get<double>("horizon", 1.0);
  const Json kv = c.raw("k", "auto");
  TestFunctionGrids grids;
  grids.s = linear_grid(0.0, horizon, static_cast<std::size_t>(c.get<int>("grid_s", 50)));
  const double xmax = c.get<double>("x_max", 1e6), zmax = c.get<double>("z_max", 1e6);
  grids.x = log_grid(xmax, static_cast<std::size_t>(c.get<int>("grid_x", 200)));
  grids.z = log_grid(zmax, static_cast<std::size_t>(c.get<int>("grid_z", 200)));
  const double bounds_tol = c.get<double>("bounds_tolerance", kDefaultRelTol);
  const double tol = tolerance_or(ctx, c, 1e-10);
  const double slice_s = c.get<double>("slice_s", 0.0);
  TestFunctionSpec spec;
  if (kv.is_number()) {
    spec = TestFunctionSpec::make(beta, gamma, n, lambda, kv.get<double>(), horizon);
  } else if (kv.is_string() && kv.get<std::string>() == "auto") {
    spec = auto_k_spec(beta, gamma, n, lambda, horizon, grids, ctx.exec());
  } else {
    c.fail("k must be a number or \"auto\"");
  }
  const auto bounds = verify_bounds(spec, grids.s, grids.x, bounds_tol);
  const auto sup = verify_supersolution(spec, grids.s, grids.x, grids.z, ctx.exec(), tol);
  CommandOutput out;
  out.report = start_report("verify-testfn");
  out.report["config"] = c.finish();
  out.report["spec"] = to_json(spec);
  out.report["bounds"] = to_json(bounds);
  out.report["supersolution"] = to_json(sup);
  out.pass = bounds.pass && sup.pass;
  out.report["pass"] = out.pass;
  std::string csv = "x,z,relative_margin\n";
  for (const auto& row : supersolution_slice(spec, slice_s, grids.x, grids.z)) {
    csv += csv_number(row.x) + "," + csv_number(row.z) + "," + csv_number(row.relative_margin) + "\n";
  }
  out.files.push_back({"supersolution_slice.csv", std::move(csv)});
  return out;
}

// ---------------------------------------------------------------------------
// Generator certificates.

inline CommandOutput cmd_check_generator(const Json& in, const RunContext& ctx) {
  Cfg c(in);
  const GeneratorModel model = model_from_json(c.raw("model", "example_26"));
  const Json wanted = c.raw("assumptions", Json::array({"all"}));
  SampleOptions opt;
  opt.samples = static_cast<std::size_t>(c.get<std::int64_t>("samples", 100000));
  opt.seed = ctx.seed;
  opt.exec = ctx.exec();
  opt.tolerance = tolerance_or(ctx, c, 1e-10);
  if (c.has("box")) opt.box = box_from_json(c.raw("box", Json::object()), model.box);
  std::vector<std::string> labels;
  try {
    labels = wanted.get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception&) {
    c.fail("assumptions must be an array of strings");
  }
  const bool all = std::find(labels.begin(), labels.end(), "all") != labels.end();
  if (all) {
    labels.clear();
    for (const auto& cert : model.certificates) labels.push_back(certificate_label(cert));
  }
  CommandOutput out;
  out.report = start_report("check-generator");
  out.report["config"] = c.finish();
  out.report["seed"] = ctx.seed;
  out.report["model"] = to_json(model);
  Json results = Json::array();
  out.pass = !labels.empty();
  for (const auto& label : labels) {
    const auto* cert = model.find(label);
    if (cert == nullptr) {
      throw Error(ErrorKind::certificate_missing, "model " + model.name + " has no " + label + " certificate");
    }
    const auto r = check(model, *cert, opt);
    results.push_back(to_json(r));
    out.pass = out.pass && r.pass;
  }
  out.report["results"] = results;
  out.report["pass"] = out.pass;
  return out;
}

// ---------------------------------------------------------------------------
// Solver, comparison and a priori bound.

inline std::string lattice_csv(const SolutionLattice& s) {
  std::ostringstream os;
  write_lattice_csv(os, s.lattice, s.Y, s.Z);
  return os.str();
}

inline Json problem_json(const BsdeProblem& p) {
  return Json{{"model", to_json(p.model)}, {"terminal", to_json(p.terminal)}, {"horizon", p.horizon}, {"dim", p.dim}};
}

inline CommandOutput cmd_solve(const Json& in, const RunContext& ctx) {
  Cfg c(in);
  const auto problem = problem_from_json(c.raw("problem", Json::object()));
  const auto scfg = solver_config_from(c, ctx);
  std::vector<double> ps;
  try {
    ps = c.raw("norm_p", Json::array({0.5, 1.0})).get<std::vector<double>>();
  } catch (const nlohmann::json::exception&) {
    c.fail("norm_p must be an array of numbers");
  }
  const Json thr = c.raw("class_d_thresholds", "auto");
  const auto sol = solve(problem, scfg);

  double ymin = sol.Y[0][0], ymax = ymin;
  for (const auto& row : sol.Y) {
    for (double v : row) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  std::vector<double> thresholds;
  if (thr.is_string() && thr.get<std::string>() == "auto") {
    const double top = std::max(std::abs(ymin), std::abs(ymax));
    for (int i = 0; i <= 8; ++i) thresholds.push_back(top * 1.25 * i / 8.0);
  } else {
    try {
      thresholds = thr.get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
      c.fail("class_d_thresholds must be \"auto\" or an array");
    }
  }
  Json norms = Json::array();
  for (double p : ps) {
    const auto mp = mp_norm(sol.lattice, sol.Z, p, ctx.exec(), ctx.seed);
    norms.push_back(Json{{"p", p},
                         {"S_p", sp_norm(sol.lattice, sol.Y, p, ctx.exec())},
                         {"M_p", mp.value},
                         {"M_p_method", mp.method},
                         {"M_p_samples", mp.samples}});
  }
  const auto cd = class_d_proxy(sol.lattice, sol.Y, thresholds);
  CommandOutput out;
  out.report = start_report("solve");
  out.report["config"] = c.finish();
  out.report["problem"] = problem_json(problem);
  out.report["root_y"] = sol.root();
  out.report["root_z"] = sol.Z.empty() ? 0.0 : sol.Z[0][0];
  out.report["y_min"] = ymin;
  out.report["y_max"] = ymax;
  out.report["norms"] = norms;
  out.report["class_d_proxy"] = to_json(cd);
  out.report["diagnostics"] = diagnostics_summary(sol);
  out.pass = !sol.diverged;
  out.report["pass"] = out.pass;
  out.files.push_back({"lattice.csv", lattice_csv(sol)});
  return out;
}

inline CommandOutput cmd_compare(const Json& in, const RunContext& ctx) {
  Cfg c(in);
  const Json lower_j = c.raw("problem", Json::object());
  const auto lower = problem_from_json(lower_j);
  BsdeProblem upper;
  if (c.has("upper")) {
    upper = problem_from_json(c.raw("upper", Json::object()));
  } else {
    upper = lower;
    const double xs = c.get<double>("xi_shift", 0.0), gs = c.get<double>("g_shift", 0.0);
    upper.terminal.shift += xs;
    if (gs != 0.0) upper.model = shifted(upper.model, gs);
  }
  const auto scfg = solver_config_from(c, ctx);
  SampleOptions opt;
  opt.samples = static_cast<std::size_t>(c.get<std::int64_t>("generator_samples", 20000));
  opt.seed = ctx.seed;
  opt.exec = ctx.exec();
  opt.tolerance = 1e-12;
  const auto r = comparison_check(lower, upper, scfg, opt);
  CommandOutput out;
  out.report = start_report("compare");
  out.report["config"] = c.finish();
  out.report["lower"] = problem_json(lower);
  out.report["upper"] = problem_json(upper);
  out.report["comparison"] = to_json(r);
  out.pass = r.pass;
  out.report["pass"] = out.pass;
  const auto lat = BrownianLattice::make(scfg.steps, lower.horizon);
  std::string csv = "step,index,t,b,gap\n";
  for (int i = 0; i <= lat.steps; ++i) {
    for (int j = 0; j <= i; ++j) {
      csv += std::to_string(i) + "," + std::to_string(j) + "," + csv_number(lat.t(i)) + "," +
             csv_number(lat.b(i, j)) + "," +
             csv_number(r.gaps[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) + "\n";
    }
  }
  out.files.push_back({"gaps.csv", std::move(csv)});
  return out;
}

inline CommandOutput cmd_apriori(const Json& in, const RunContext& ctx) {
  Cfg c(in);
  const auto problem = problem_from_json(c.raw("problem", Json{{"model", "example_26"}, {"terminal", "sine"}}));
  const auto scfg = solver_config_from(c, ctx);
  const double tamper = c.get<double>("tamper_factor", 10.0);
  const double tol = tolerance_or(ctx, c, 1e-8);
  const auto* cert = problem.model.find("H2");
  if (cert == nullptr) {
    throw Error(ErrorKind::certificate_missing, "model " + problem.model.name + " has no H2 certificate");
  }
  const auto& h2 = std::get<CertH2>(*cert);
  const auto consts = apriori_constants(h2.beta, h2.gamma, h2.n, h2.lambda, problem.horizon, ctx.exec());
  const auto sol = solve(problem, scfg);
  const auto rep = apriori_check(sol, problem, consts, 1.0, tol);
  CommandOutput out;
  out.report = start_report("apriori");
  out.report["config"] = c.finish();
  out.report["problem"] = problem_json(problem);
  out.report["root_y"] = sol.root();
  out.report["apriori"] = to_json(rep);
  out.pass = rep.pass;
  if (tamper != 0.0) {
    // Y scaled by tamper_factor * C must violate the bound.
    const double scale = tamper * std::exp(consts.log_C);
    Json neg;
    if (std::isfinite(scale)) {
      const auto bad = apriori_check(sol, problem, consts, scale, tol);
      neg = to_json(bad);
      neg["detected"] = !bad.pass;
      out.pass = out.pass && !bad.pass;
    } else {
      neg = Json{{"skipped", "tamper scale exceeds binary64"}};
    }
    out.report["tampered_control"] = neg;
  }
  out.report["pass"] = out.pass;
  std::string csv = "t,max_abs_y,max_ybar,max_expected_remaining,min_margin\n";
  for (const auto& row : apriori_profile(sol, problem, rep)) {
    csv += csv_number(row.t) + "," + csv_number(row.max_abs_y) + "," + csv_number(row.max_ybar) + "," +
           csv_number(row.max_a) + "," + csv_number(row.min_margin) + "\n";
  }
  out.files.push_back({"apriori_profile.csv", std::move(csv)});
  out.files.push_back({"lattice.csv", lattice_csv(sol)});
  return out;
}

// ---------------------------------------------------------------------------

using CommandFn = CommandOutput (*)(const Json&, const RunContext&);

inline const std::map<std::string, CommandFn>& command_table() {
  static const std::map<std::string, CommandFn> table{
      {"verify-psi", &cmd_verify_psi},       {"check-ineq", &cmd_check_ineq},
      {"find-k", &cmd_find_k},               {"counterexample", &cmd_counterexample},
      {"verify-testfn", &cmd_verify_testfn}, {"check-generator", &cmd_check_generator},
      {"solve", &cmd_solve},                 {"compare", &cmd_compare},
      {"apriori", &cmd_apriori},
  };
  return table;
}

inline CommandOutput run_command(const std::string& name, const Json& cfg, const RunContext& ctx) {
  const auto& t = command_table();
  const auto it = t.find(name);
  if (it == t.end()) throw Error(ErrorKind::config, "unknown command '" + name + "'");
  return it->second(cfg, ctx);
}

}  // namespace ilbsde
