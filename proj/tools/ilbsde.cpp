// Command-line front end. Exit codes: 0 all checks pass, 1 a check failed,
// 2 usage or configuration error, 3 internal error.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ilbsde/commands.hpp"
#include "ilbsde/config.hpp"
#include "ilbsde/error.hpp"
#include "ilbsde/experiment.hpp"

namespace {

using ilbsde::Error;
using ilbsde::ErrorKind;
using ilbsde::Json;

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::config:
    case ErrorKind::io:
    case ErrorKind::parameter:
    case ErrorKind::depth_out_of_range:
    case ErrorKind::precondition:
    case ErrorKind::domain:
    case ErrorKind::empty_grid:
    case ErrorKind::shape_mismatch:
    case ErrorKind::unsupported_dimension:
    case ErrorKind::overflow:
    case ErrorKind::certificate_missing: return kExitUsage;
    case ErrorKind::hypothesis_violation:
    case ErrorKind::not_found: return kExitFail;
    default: return kExitInternal;
  }
}

/// Options shared by every subcommand, written into the config when given.
struct Overrides {
  Json values = Json::object();

  template <class T>
  void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<T>(flag, [this, key](const T& v) { values[key] = v; }, help);
  }

  /// Accepts a number or a keyword.
  void bind_number_or_word(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        flag,
        [this, key](const std::string& v) {
          try {
            std::size_t used = 0;
            const double d = std::stod(v, &used);
            if (used == v.size()) {
              values[key] = d;
              return;
            }
          } catch (const std::exception&) {
          }
          values[key] = v;
        },
        help);
  }
};

Json load_problem_file(const std::string& path) {
  Json j = ilbsde::load_toml_file(path);
  if (j.contains("problem")) return j.at("problem");
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verification toolkit for scalar BSDEs with iterated-logarithmic generators"};
  app.require_subcommand(1);
  app.fallthrough();

  ilbsde::RunContext ctx;
  std::string out_dir = "out";
  std::optional<double> tolerance;
  app.add_option("--seed", ctx.seed, "Seed for every sampled check")->capture_default_str();
  app.add_option("--out-dir", out_dir, "Directory for reports and data files")->capture_default_str();
  app.add_option("--tolerance", tolerance, "Override the tolerance of the selected check");
  app.add_option("--threads", ctx.threads, "Worker threads")->check(CLI::Range(1u, 1024u))->capture_default_str();

  struct Sub {
    std::string name;
    CLI::App* app = nullptr;
    std::string config_file;
    Overrides ov;
    std::string problem_file, upper_file;
  };
  std::vector<std::unique_ptr<Sub>> subs;
  auto add_sub = [&](const std::string& name, const std::string& help) {
    auto s = std::make_unique<Sub>();
    s->name = name;
    s->app = app.add_subcommand(name, help);
    s->app->add_option("--config", s->config_file, "TOML file with the command configuration");
    subs.push_back(std::move(s));
    return subs.back().get();
  };
  auto ineq_flags = [](Sub* s) {
    s->ov.bind<int>(s->app, "--n", "n", "Depth of the iterated logarithm (1..3)");
    s->ov.bind<double>(s->app, "--lambda", "lambda", "Exponent lambda");
    s->ov.bind<double>(s->app, "--p", "p", "Exponent p");
    s->ov.bind<int>(s->app, "--grid-points", "grid_points", "Points of the log grid");
    s->ov.bind<double>(s->app, "--grid-max", "grid_max", "Right end of the log grid");
  };

  auto* psi = add_sub("verify-psi", "Check the three psi conditions at a given or searched k");
  ineq_flags(psi);
  psi->ov.bind_number_or_word(psi->app, "--k", "k", "k value, or auto / floor / standard");

  auto* ineq = add_sub("check-ineq", "Check 2xy/psi(y) <= p x^2/psi(x)^2 + y^2 on a log grid");
  ineq_flags(ineq);
  ineq->ov.bind_number_or_word(ineq->app, "--k", "k", "k value, or auto / floor / standard");

  auto* findk = add_sub("find-k", "Smallest ladder k passing the psi conditions and the key inequality");
  ineq_flags(findk);

  auto* cex = add_sub("counterexample", "Pair violating the key inequality for p <= 1");
  cex->ov.bind<int>(cex->app, "--n", "n", "Depth");
  cex->ov.bind<double>(cex->app, "--lambda", "lambda", "Exponent lambda");
  cex->ov.bind<double>(cex->app, "--p", "p", "Exponent p (<= 1)");
  cex->ov.bind<double>(cex->app, "--log-k", "log_k", "ln k");
  cex->ov.bind<double>(cex->app, "--y", "y", "Base point y > 0");

  auto* tf = add_sub("verify-testfn", "Sandwich bounds and supersolution inequality of the test function");
  tf->ov.bind<double>(tf->app, "--beta", "beta", "beta >= 0");
  tf->ov.bind<double>(tf->app, "--gamma", "gamma", "gamma > 0");
  tf->ov.bind<int>(tf->app, "--n", "n", "Depth");
  tf->ov.bind<double>(tf->app, "--lambda", "lambda", "lambda > 1/2");
  tf->ov.bind<double>(tf->app, "--horizon", "horizon", "Horizon T");
  tf->ov.bind_number_or_word(tf->app, "--k", "k", "k value or auto");

  auto* gen = add_sub("check-generator", "Sampling checks of a model's assumption certificates");
  gen->ov.bind_number_or_word(gen->app, "--model", "model", "Built-in model name");
  gen->app->add_option_function<std::vector<std::string>>(
      "--assumptions", [g = gen](const std::vector<std::string>& v) { g->ov.values["assumptions"] = v; },
      "Certificates to check (H1,H2,...) or all")
      ->delimiter(',');
  gen->ov.bind<std::int64_t>(gen->app, "--samples", "samples", "Number of samples");

  auto* solve = add_sub("solve", "Solve a BSDE on the binomial lattice");
  solve->app->add_option("--problem", solve->problem_file, "TOML problem file");
  solve->ov.bind<int>(solve->app, "--steps", "steps", "Lattice steps N");
  solve->ov.bind<std::string>(solve->app, "--scheme", "scheme", "picard-implicit or explicit");

  auto* cmp = add_sub("compare", "Nodewise comparison of two ordered problems");
  cmp->app->add_option("--problem", cmp->problem_file, "TOML problem file (lower)");
  cmp->app->add_option("--upper", cmp->upper_file, "TOML problem file (upper)");
  cmp->ov.bind<double>(cmp->app, "--xi-shift", "xi_shift", "Upper terminal = lower + shift");
  cmp->ov.bind<double>(cmp->app, "--g-shift", "g_shift", "Upper generator = lower + shift");
  cmp->ov.bind<int>(cmp->app, "--steps", "steps", "Lattice steps N");

  auto* apr = add_sub("apriori", "Nodewise a priori bound with a tampered negative control");
  apr->app->add_option("--problem", apr->problem_file, "TOML problem file");
  apr->ov.bind<int>(apr->app, "--steps", "steps", "Lattice steps N");
  apr->ov.bind<double>(apr->app, "--tamper-factor", "tamper_factor", "Scale of the tampered control (0 disables)");

  auto* suite = add_sub("suite", "Run a suite of cases (the built-in suite without --config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitPass : kExitUsage;
  }
  ctx.tolerance = tolerance;

  Sub* chosen = nullptr;
  for (auto& s : subs) {
    if (s->app->parsed()) chosen = s.get();
  }
  if (chosen == nullptr) return kExitUsage;

  const std::filesystem::path out(out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<Json> effective;
  // Failed commands still leave a report naming the error.
  auto write_error_report = [&](const std::string& kind, const std::string& message) {
    if (!effective || chosen == suite) return;
    try {
      Json rep = ilbsde::start_report(chosen->name);
      rep["config"] = *effective;
      rep["error"] = Json{{"kind", kind}, {"message", message}};
      rep["pass"] = false;
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      ilbsde::write_text(out / (chosen->name + ".json"), ilbsde::dump_json(rep));
      ilbsde::write_text(out / (chosen->name + ".meta.json"), ilbsde::dump_json(ilbsde::sidecar(elapsed, ctx)));
    } catch (const std::exception&) {
    }
  };
  try {
    if (chosen == suite) {
      const Json cfg = chosen->config_file.empty() ? ilbsde::default_suite() : ilbsde::load_toml_file(chosen->config_file);
      const auto r = ilbsde::run_suite(cfg, ctx, out);
      for (const auto& c : r.manifest["cases"]) {
        std::cout << (c["ok"].get<bool>() ? "ok   " : "FAIL ") << c["name"].get<std::string>() << " ("
                  << c["status"].get<std::string>() << ", expected " << c["expect"].get<std::string>() << ")\n";
      }
      std::cout << "suite: " << (r.pass ? "PASS" : "FAIL") << " -> " << (out / "manifest.json").string() << "\n";
      return r.pass ? kExitPass : kExitFail;
    }

    Json cfg = chosen->config_file.empty() ? Json::object() : ilbsde::load_toml_file(chosen->config_file);
    if (!chosen->problem_file.empty()) cfg["problem"] = load_problem_file(chosen->problem_file);
    if (!chosen->upper_file.empty()) cfg["upper"] = load_problem_file(chosen->upper_file);
    for (const auto& [k, v] : chosen->ov.values.items()) cfg[k] = v;
    effective = cfg;

    const auto result = ilbsde::run_command(chosen->name, cfg, ctx);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ilbsde::write_output(out, chosen->name, result, elapsed, ctx);
    std::cout << chosen->name << ": " << (result.pass ? "PASS" : "FAIL") << " -> "
              << (out / (chosen->name + ".json")).string() << "\n";
    return result.pass ? kExitPass : kExitFail;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    write_error_report(std::string(ilbsde::to_string(e.kind())), e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    write_error_report("internal", e.what());
    return kExitInternal;
  }
}
