#pragma once

// Suite runner: executes a list of command cases, writes one directory per
// case and a manifest. Sub-errors are recorded per case and never abort the
// remaining cases.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "ilbsde/commands.hpp"
#include "ilbsde/config.hpp"
#include "ilbsde/error.hpp"
#include "ilbsde/parallel.hpp"

namespace ilbsde {

/// Writes bytes as-is, so LF line endings survive on every platform.
inline void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error(ErrorKind::io, "write failed for '" + path.string() + "'");
}

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Wall-clock data lives next to a report, never inside it.
inline Json sidecar(double elapsed_seconds, const RunContext& ctx) {
  return Json{{"timestamp", utc_timestamp()}, {"elapsed_seconds", elapsed_seconds}, {"threads", ctx.threads}};
}

/// Writes <dir>/<stem>.json, <dir>/<stem>.meta.json and the extra files.
inline void write_output(const std::filesystem::path& dir, const std::string& stem, const CommandOutput& out,
                         double elapsed, const RunContext& ctx) {
  write_text(dir / (stem + ".json"), dump_json(out.report));
  write_text(dir / (stem + ".meta.json"), dump_json(sidecar(elapsed, ctx)));
  for (const auto& f : out.files) write_text(dir / f.name, f.content);
}

struct CaseResult {
  std::string name;
  std::string command;
  std::string expect;
  std::string status;  ///< pass, fail or error
  std::string error_kind;
  std::string message;
  bool ok = false;
  double elapsed = 0;
};

/// Cases covering every verification layer, including negative controls.
inline Json default_suite() {
  Json cases = Json::array();
  auto add = [&](std::string name, std::string command, std::string expect, Json cfg) {
    cfg["name"] = std::move(name);
    cfg["command"] = std::move(command);
    cfg["expect"] = std::move(expect);
    cases.push_back(std::move(cfg));
  };
  const std::vector<std::pair<int, double>> depths{{1, 1.0}, {2, 0.75}, {2, 2.0 / 3.0}, {3, 0.6}};
  const char* tags[] = {"n1_l1", "n2_l075", "n2_l067", "n3_l06"};
  for (std::size_t i = 0; i < depths.size(); ++i) {
    add(std::string("find_k_") + tags[i], "find-k", "pass",
        Json{{"n", depths[i].first}, {"lambda", depths[i].second}, {"p", 2.0}});
    add(std::string("verify_psi_") + tags[i], "verify-psi", "pass",
        Json{{"n", depths[i].first}, {"lambda", depths[i].second}, {"p", 2.0}, {"k", "auto"}});
  }
  add("counterexample_p1", "counterexample", "pass", Json{{"n", 1}, {"lambda", 1.0}, {"p", 1.0}});
  add("testfn_default", "verify-testfn", "pass", Json::object());
  add("testfn_tiny_k_lambda_051", "verify-testfn", "fail",
      Json{{"lambda", 0.51}, {"k", 1618.1779919126539}, {"grid_s", 10}, {"grid_x", 50}, {"grid_z", 50}});
  add("generator_example_26", "check-generator", "pass",
      Json{{"model", "example_26"}, {"assumptions", Json::array({"H1", "H2", "H3"})}});
  add("generator_example_27", "check-generator", "pass",
      Json{{"model", "example_27"}, {"assumptions", Json::array({"H1", "H2", "H3", "H4", "H5"})}});
  add("generator_closure", "check-generator", "pass", Json{{"model", "closure"}, {"assumptions", Json::array({"H5"})}});
  add("generator_quadratic_z_h5", "check-generator", "fail",
      Json{{"model", "quadratic_z"}, {"assumptions", Json::array({"H5"})}});
  add("generator_example_26_unit_c", "check-generator", "fail",
      Json{{"model", Json{{"builtin", "example_26"},
                          {"certificates", Json::array({Json{{"kind", "H3"}, {"c", 1.0}, {"h", "exp"}}})}}},
           {"assumptions", Json::array({"H3"})}});
  add("generator_example_26_wide_box", "check-generator", "fail",
      Json{{"model", "example_26"},
           {"assumptions", Json::array({"H2"})},
           {"box", Json{{"y_max", 6.0}}}});
  add("generator_example_26_verbatim_driver", "check-generator", "fail",
      Json{{"model", "example_26_verbatim"}, {"assumptions", Json::array({"H2"})}});
  add("generator_example_27_verbatim_l", "check-generator", "fail",
      Json{{"model", "example_27_verbatim"}, {"assumptions", Json::array({"H4"})}});
  add("solve_zero_square", "solve", "pass",
      Json{{"problem", Json{{"model", "zero"}, {"terminal", "square"}}}, {"steps", 50}});
  add("solve_linear_y", "solve", "pass",
      Json{{"problem", Json{{"model", Json{{"builtin", "linear_y"}, {"beta", 0.5}}}, {"terminal", "constant"}}},
           {"steps", 200}});
  add("solve_heavy_tail", "solve", "pass",
      Json{{"problem", Json{{"model", "zero"}, {"terminal", Json{{"kind", "heavy"}, {"param", 0.5}}}}},
           {"steps", 60}});
  add("apriori_example_26", "apriori", "pass",
      Json{{"problem", Json{{"model", "example_26"}, {"terminal", "sine"}}}, {"steps", 100}});
  add("apriori_example_27", "apriori", "pass",
      Json{{"problem", Json{{"model", "example_27"}, {"terminal", "sine"}}}, {"steps", 100}});
  add("apriori_zero", "apriori", "pass",
      Json{{"problem", Json{{"model", "zero"}, {"terminal", "linear"}}}, {"steps", 50}});
  add("compare_terminal_shift", "compare", "pass",
      Json{{"problem", Json{{"model", "zero"}, {"terminal", "linear"}}}, {"xi_shift", 1.0}, {"steps", 100}});
  add("compare_example_27_shift", "compare", "pass",
      Json{{"problem", Json{{"model", "example_27"}, {"terminal", "sine"}}}, {"g_shift", 0.1}, {"steps", 100}});
  add("compare_reflexive_example_26", "compare", "pass",
      Json{{"problem", Json{{"model", "example_26"}, {"terminal", "sine"}}}, {"steps", 100}});
  add("compare_unordered_terminal", "compare", "error",
      Json{{"problem", Json{{"model", "zero"}, {"terminal", "linear"}}},
           {"upper", Json{{"model", "zero"}, {"terminal", Json{{"kind", "linear"}, {"scale", 0.5}}}}},
           {"steps", 20}});
  return Json{{"cases", cases}};
}

struct SuiteResult {
  Json manifest;
  bool pass = false;
};

/// Runs every case; case workers come from ctx.threads and each case runs
/// single-threaded, so results do not depend on the worker count.
inline SuiteResult run_suite(const Json& suite_cfg, const RunContext& ctx, const std::filesystem::path& out_dir) {
  Cfg c(suite_cfg, "suite");
  const Json cases = c.raw("cases", Json::array());
  if (!cases.is_array()) c.fail("cases must be an array");
  const Json effective = c.finish();

  std::vector<CaseResult> results(cases.size());
  std::vector<std::string> names;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (!cases[i].is_object()) c.fail("case " + std::to_string(i) + " is not a table");
    const auto name = cases[i].value("name", "case_" + std::to_string(i));
    if (name.empty() || name.find_first_of("/\\.") != std::string::npos) c.fail("invalid case name '" + name + "'");
    if (std::find(names.begin(), names.end(), name) != names.end()) c.fail("duplicate case name '" + name + "'");
    names.push_back(name);
  }

  RunContext inner = ctx;
  inner.threads = 1;
  Exec outer{ctx.threads, 1};
  for_chunks(outer, cases.size(), [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      Json cfg = cases[i];
      CaseResult r;
      r.name = names[i];
      r.command = cfg.value("command", "");
      r.expect = cfg.value("expect", "pass");
      cfg.erase("name");
      cfg.erase("command");
      cfg.erase("expect");
      const auto dir = out_dir / r.name;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        auto out = run_command(r.command, cfg, inner);
        r.status = out.pass ? "pass" : "fail";
        r.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_output(dir, "report", out, r.elapsed, inner);
      } catch (const Error& err) {
        r.status = "error";
        r.error_kind = std::string(to_string(err.kind()));
        r.message = err.what();
      } catch (const std::exception& err) {
        r.status = "error";
        r.error_kind = "internal";
        r.message = err.what();
      }
      if (r.status == "error") {
        r.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        Json rep = start_report(r.command);
        rep["config"] = cfg;
        rep["error"] = Json{{"kind", r.error_kind}, {"message", r.message}};
        rep["pass"] = false;
        write_text(dir / "report.json", dump_json(rep));
        write_text(dir / "report.meta.json", dump_json(sidecar(r.elapsed, inner)));
      }
      r.ok = r.status == r.expect;
      results[i] = std::move(r);
    }
  });

  SuiteResult s;
  Json entries = Json::array();
  Json timing = Json::array();
  s.pass = true;
  for (const auto& r : results) {
    Json e{{"name", r.name}, {"command", r.command}, {"expect", r.expect}, {"status", r.status}};
    if (!r.error_kind.empty()) e["error"] = Json{{"kind", r.error_kind}, {"message", r.message}};
    e["report"] = r.name + "/report.json";
    e["ok"] = r.ok;
    entries.push_back(std::move(e));
    timing.push_back(Json{{"name", r.name}, {"elapsed_seconds", r.elapsed}});
    s.pass = s.pass && r.ok;
  }
  s.manifest = start_report("suite");
  s.manifest["config"] = effective;
  s.manifest["seed"] = ctx.seed;
  s.manifest["cases"] = entries;
  s.manifest["pass"] = s.pass;
  write_text(out_dir / "manifest.json", dump_json(s.manifest));
  Json meta = sidecar(0, ctx);
  meta["cases"] = timing;
  write_text(out_dir / "manifest.meta.json", dump_json(meta));
  return s;
}

}  // namespace ilbsde
