#pragma once

// JSON views of the result types. Field order is fixed by construction;
// non-finite numbers serialize as null.

#include <string>
#include <vector>

#include "ilbsde/config.hpp"
#include "ilbsde/genmodel.hpp"
#include "ilbsde/ineq.hpp"
#include "ilbsde/iterlog.hpp"
#include "ilbsde/lattice.hpp"
#include "ilbsde/solver.hpp"
#include "ilbsde/testfn.hpp"
#include "ilbsde/validate.hpp"

namespace ilbsde {

inline Json to_json(const IterLogSpec& s) { return Json{{"n", s.n}, {"lambda", s.lambda}, {"k", s.k}}; }

inline Json to_json(const GridPoint& p) { return Json{{"x", p.x}, {"y", p.y}}; }

inline Json to_json(const PsiConditionReport& r) {
  return Json{{"spec", to_json(r.spec)},
              {"p", r.p},
              {"grid_size", r.grid_size},
              {"margin_log_derivative", r.cond_growth_margin},
              {"margin_second_log_derivative", r.cond_logderiv_margin},
              {"margin_self_map", r.cond_selfmap_margin},
              {"worst_x_log_derivative", r.growth_worst_x},
              {"worst_x_second_log_derivative", r.logderiv_worst_x},
              {"worst_x_self_map", r.selfmap_worst_x},
              {"self_map_skipped_overflow", r.selfmap_skipped_overflow},
              {"tolerance", r.tolerance},
              {"pass", r.pass}};
}

inline Json to_json(const KeyInequalityReport& r) {
  return Json{{"spec", to_json(r.spec)},
              {"p", r.p},
              {"pairs", r.pairs},
              {"worst_margin", r.worst_margin},
              {"worst_relative_margin", r.worst_relative_margin},
              {"worst_point", to_json(r.worst_point)},
              {"violations", r.violations},
              {"tolerance", r.tolerance},
              {"pass", r.pass}};
}

inline Json to_json(const FindKResult& r) {
  return Json{{"n", r.n},
              {"lambda", r.lambda},
              {"p", r.p},
              {"k", r.k},
              {"candidate_index", r.candidate_index},
              {"candidates", r.candidates},
              {"next_candidate_checked", r.next_candidate_checked},
              {"next_candidate_passed", r.next_candidate_passed},
              {"psi_conditions", to_json(r.psi)},
              {"key_inequality", to_json(r.key)}};
}

inline Json to_json(const AnalyticKFloor& f) {
  Json j{{"n", f.n}, {"lambda", f.lambda}, {"p", f.p}, {"k_log_derivative", f.k_logderiv}, {"delta", f.delta},
         {"self_map_status", f.selfmap_status}};
  j["k_self_map"] = f.k_selfmap ? Json(*f.k_selfmap) : Json(nullptr);
  j["k_sufficient"] = f.k_sufficient ? Json(*f.k_sufficient) : Json(nullptr);
  return j;
}

inline Json to_json(const Counterexample& c) {
  return Json{{"spec", to_json(c.spec)}, {"p", c.p}, {"x", c.x}, {"y", c.y}, {"psi_x", c.psi_x}, {"psi_y", c.psi_y},
              {"margin", c.margin}};
}

inline Json to_json(const TestFunctionSpec& s) {
  return Json{{"beta", s.beta},   {"gamma", s.gamma}, {"n", s.n},
              {"lambda", s.lambda}, {"k", s.k},        {"horizon", s.horizon},
              {"mu_rate", s.mu_rate()}};
}

inline Json to_json(const BoundsReport& r) {
  return Json{{"points", r.points},
              {"phi_x_lower", r.phi_x_lower},
              {"phi_x_upper", r.phi_x_upper},
              {"phi_xx_lower", r.phi_xx_lower},
              {"phi_xx_upper", r.phi_xx_upper},
              {"phi_s_lower", r.phi_s_lower},
              {"ratio_lower", r.ratio_lower},
              {"ratio_floor", r.ratio_floor},
              {"positive", r.positive},
              {"min_margin", r.min_margin()},
              {"tolerance", r.tolerance},
              {"pass", r.pass}};
}

inline Json to_json(const SupersolutionReport& r) {
  auto point = [](const SupersolutionPoint& p) { return Json{{"s", p.s}, {"x", p.x}, {"z", p.z}}; };
  return Json{{"points", r.points},
              {"worst_relative_margin", r.worst_relative_margin},
              {"worst_margin", r.worst_margin},
              {"worst_point", point(r.worst_point)},
              {"reduced_worst_relative_margin", r.reduced_worst_relative_margin},
              {"reduced_worst_point", point(r.reduced_worst_point)},
              {"violations", r.violations},
              {"tolerance", r.tolerance},
              {"pass", r.pass}};
}

inline Json to_json(const SampleBox& b) {
  return Json{{"t_max", b.t_max}, {"b_max", b.b_max}, {"y_max", b.y_max}, {"z_max", b.z_max}};
}

inline Json to_json(const MarginReport& r) {
  Json j{{"assumption", r.assumption},
         {"model", r.model},
         {"box", to_json(r.box)},
         {"samples", r.samples},
         {"seed", r.seed},
         {"min_margin", r.min_margin},
         {"min_raw_margin", r.min_raw_margin},
         {"worst", Json{{"t", r.worst.t}, {"b", r.worst.b}, {"y", r.worst.y}, {"y2", r.worst.y2},
                        {"z", r.worst.z}, {"z2", r.worst.z2}}},
         {"violations", r.violations},
         {"tolerance", r.tolerance},
         {"modulus_in_S", r.modulus_in_S}};
  if (r.divergence_integral) {
    j["divergence_integral"] = *r.divergence_integral;
    j["divergence_above_threshold"] = *r.divergence_flag;
  }
  if (!r.note.empty()) j["note"] = r.note;
  j["pass"] = r.pass;
  return j;
}

inline Json to_json(const Modulus& m) { return Json{{"name", m.name}, {"growth", m.growth}}; }

inline Json to_json(const AssumptionCertificate& c) {
  struct V {
    Json operator()(const CertH1&) const { return Json{{"kind", "H1"}}; }
    Json operator()(const CertH2& c) const {
      return Json{{"kind", "H2"}, {"n", c.n}, {"lambda", c.lambda}, {"beta", c.beta}, {"gamma", c.gamma}};
    }
    Json operator()(const CertH3& c) const { return Json{{"kind", "H3"}, {"c", c.c}, {"h", to_json(c.h)}}; }
    Json operator()(const CertH4& c) const {
      return Json{{"kind", "H4"},
                  {"rho", to_json(c.rho)},
                  {"divergence_window", Json::array({c.divergence_lo, c.divergence_hi})},
                  {"divergence_threshold", c.divergence_threshold}};
    }
    Json operator()(const CertH5& c) const {
      return Json{{"kind", "H5"}, {"n", c.n}, {"lambda", c.lambda}, {"kappa", to_json(c.kappa)}};
    }
    Json operator()(const CertH2S& c) const {
      return Json{{"kind", "H2S"}, {"alpha", c.alpha}, {"beta", c.beta}, {"gamma", c.gamma}};
    }
    Json operator()(const CertH5S& c) const {
      return Json{{"kind", "H5S"}, {"alpha", c.alpha}, {"kappa_bar", to_json(c.kappa_bar)}};
    }
    Json operator()(const CertH5Prime& c) const {
      return Json{{"kind", "H5prime"}, {"A", c.A}, {"kappa_tilde", to_json(c.kappa_tilde)},
                  {"n", c.n}, {"lambda", c.lambda}};
    }
    Json operator()(const CertH5SPrime& c) const {
      return Json{{"kind", "H5Sprime"}, {"alpha", c.alpha}, {"A", c.A}, {"kappa_tilde", to_json(c.kappa_tilde)}};
    }
  };
  return std::visit(V{}, c);
}

inline Json to_json(const Atom& a) {
  Json j{{"kind", std::string(to_string(a.kind))}, {"coef", a.coef}};
  switch (a.kind) {
    case AtomKind::power_z:
    case AtomKind::tanh_y_power_z: j["alpha"] = a.alpha; break;
    case AtomKind::iterlog_z:
    case AtomKind::cos_iterlog_z: j["modulus"] = to_json(a.modulus); break;
    case AtomKind::l_abs_y:
      j["eps"] = a.l.eps;
      j["extension"] = a.l.extension == LExtension::continuous ? "continuous" : "verbatim";
      break;
    default: break;
  }
  return j;
}

inline Json to_json(const GeneratorModel& m) {
  Json atoms = Json::array();
  for (const auto& a : m.atoms) atoms.push_back(to_json(a));
  Json certs = Json::array();
  for (const auto& c : m.certificates) certs.push_back(to_json(c));
  return Json{{"name", m.name},
              {"dim", m.dim},
              {"atoms", atoms},
              {"driver", Json{{"kind", std::string(to_string(m.driver.kind))}, {"value", m.driver.value}}},
              {"box", to_json(m.box)},
              {"certificates", certs}};
}

inline Json to_json(const Terminal& t) {
  return Json{{"kind", std::string(to_string(t.kind))}, {"scale", t.scale}, {"shift", t.shift}, {"param", t.param}};
}

inline Json to_json(const StepDiagnostics& d) {
  return Json{{"step", d.step}, {"iterations", d.iterations}, {"residual", d.residual}, {"history", d.history}};
}

/// Compact solver diagnostics: worst step plus totals.
inline Json diagnostics_summary(const SolutionLattice& s) {
  int max_it = 0, total = 0;
  double max_res = 0;
  for (const auto& d : s.diagnostics) {
    max_it = std::max(max_it, d.iterations);
    total += d.iterations;
    max_res = std::max(max_res, d.residual);
  }
  return Json{{"scheme", std::string(to_string(s.scheme))},
              {"max_iterations", max_it},
              {"total_sweeps", total},
              {"max_final_residual", max_res},
              {"terminal_max_abs_b", s.terminal_max_abs_b},
              {"terminal_max_abs_xi", s.terminal_max_abs_xi},
              {"diverged", s.diverged}};
}

inline Json to_json(const ClassDReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back(Json{{"threshold", row.threshold}, {"sup_tail", row.sup_tail}, {"argmax", row.argmax}});
  }
  return Json{{"rows", rows}, {"decreasing", r.decreasing}, {"tolerance", r.tolerance}, {"note", r.note},
              {"pass", r.pass}};
}

inline Json to_json(const AprioriConstants& c) {
  return Json{{"beta", c.beta},         {"gamma", c.gamma}, {"n", c.n},       {"lambda", c.lambda},
              {"horizon", c.horizon},   {"k_level", c.k_level}, {"log_k", c.log_k}, {"k", c.k},
              {"k_source", c.k_source}, {"k1", c.k1},       {"log_C", c.log_C}, {"C", c.C}};
}

inline Json to_json(const NodeRef& n) { return Json{{"step", n.step}, {"index", n.index}}; }

inline Json to_json(const AprioriReport& r) {
  return Json{{"constants", to_json(r.constants)},
              {"steps", r.steps},
              {"min_margin", r.min_margin},
              {"min_scaled_margin", r.min_scaled_margin},
              {"worst_node", to_json(r.worst)},
              {"tolerance", r.tolerance},
              {"tampered", r.tampered},
              {"note", r.note},
              {"pass", r.pass}};
}

inline Json to_json(const ComparisonReport& r) {
  return Json{{"steps", r.steps},
              {"min_gap", r.min_gap},
              {"max_gap", r.max_gap},
              {"root_gap", r.gaps.empty() ? 0.0 : r.gaps[0][0]},
              {"worst_node", to_json(r.worst)},
              {"z_free", r.z_free},
              {"scale", r.scale},
              {"tolerance", r.tolerance},
              {"generator_samples", r.generator_samples},
              {"note", r.note},
              {"pass", r.pass}};
}

}  // namespace ilbsde
