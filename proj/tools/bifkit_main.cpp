#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bifkit/config.hpp"
#include "bifkit/registry.hpp"
#include "bifkit/report_io.hpp"
#include "bifkit/verify.hpp"

namespace {

unsigned worker_threads() {
  if (const char* env = std::getenv("BIFKIT_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return unsigned(v);
  }
  return 1;
}

int cmd_list_models(bool as_json) {
  namespace bk = bifkit;
  const auto entries = bk::registry_list();
  if (as_json) {
    bk::json out = bk::json::array();
    for (const auto& e : entries) {
      const bk::ModelBundle b = bk::registry_get(e.name);
      bk::json params = bk::json::object();
      for (const auto& [key, val] : e.defaults) params[key] = val;
      out.push_back({{"name", e.name},
                     {"summary", e.summary},
                     {"n", b.problem.n},
                     {"k", b.chart.k},
                     {"period", b.problem.period},
                     {"params", params}});
    }
    std::cout << out.dump(2) << "\n";
    return 0;
  }
  for (const auto& e : entries) {
    const bk::ModelBundle b = bk::registry_get(e.name);
    std::cout << e.name << "  (n = " << b.problem.n << ", k = " << b.chart.k
              << ", T = " << b.problem.period << ")\n    " << e.summary
              << "\n    parameters:";
    for (const auto& [key, val] : e.defaults)
      std::cout << " " << key << " = " << val;
    std::cout << "\n";
  }
  return 0;
}

void apply_overrides(bifkit::RunConfig& cfg, const std::string& out_dir,
                     const std::string& mode) {
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (!mode.empty()) {
    if (mode == "consistent")
      cfg.mode = bifkit::MFirstTerm::Consistent;
    else if (mode == "literal")
      cfg.mode = bifkit::MFirstTerm::Literal;
    else
      throw bifkit::ConfigError("--mode must be consistent or literal");
  }
}

void print_report_text(const bifkit::BifurcationReport& rep) {
  namespace bk = bifkit;
  std::cout << "model " << rep.model_name << " (n = " << rep.n
            << ", k = " << rep.k << ", T = " << rep.period << ")\n";
  std::cout << "assumption checks:\n";
  for (const auto& c : rep.assumption_checks) {
    std::cout << "  [" << (c.pass ? "pass" : "FAIL") << "] " << c.name
              << "  residual " << c.residual;
    if (!c.note.empty()) std::cout << "  (" << c.note << ")";
    std::cout << "\n";
  }
  std::cout << "zeros: " << rep.zeros.size() << "\n";
  for (const auto& z : rep.zeros) {
    std::cout << "  h = [";
    for (bk::Index i = 0; i < z.h.size(); ++i)
      std::cout << (i ? ", " : "") << z.h[i];
    std::cout << "]  |M| = " << z.m_norm;
    if (z.index)
      std::cout << "  index " << z.index->value << " ("
                << bk::degree_method_name(z.index->method) << ")";
    else
      std::cout << "  index unavailable";
    std::cout << "  -> " << bk::verdict_name(z.verdict) << "\n";
  }
  if (!rep.grid_note.empty()) std::cout << "note: " << rep.grid_note << "\n";
  for (std::size_t i = 0; i < rep.continuations.size(); ++i) {
    const auto& rec = rep.continuations[i];
    std::cout << "continuation " << i << " at h* = [";
    for (bk::Index c = 0; c < rec.h_star.size(); ++c)
      std::cout << (c ? ", " : "") << rec.h_star[c];
    std::cout << "]\n";
    for (const auto& e : rec.entries) {
      std::cout << "  eps " << e.eps << "  "
                << (e.converged ? "converged" : "failed") << "  distance "
                << e.distance << "  residual " << e.displacement_norm << "\n";
    }
    if (i < rep.necessity.size()) {
      const auto& nec = rep.necessity[i];
      std::cout << "  necessity at limit point: |M| = " << nec.m_norm << " ["
                << (nec.pass ? "pass" : "FAIL") << "]\n";
    }
  }
  std::cout << "summary: " << rep.summary << "\n";
}

int run_analysis(const bifkit::RunConfig& cfg,
                 const std::filesystem::path& out_dir, bool as_json,
                 bifkit::BifurcationReport* out_rep = nullptr) {
  namespace bk = bifkit;
  const bk::ModelBundle bundle = bk::configured_bundle(cfg);
  const bk::AnalyzeConfig acfg = bk::to_analyze_config(cfg, worker_threads());
  const bk::BifurcationReport rep =
      bk::analyze(bundle.problem, bundle.chart, acfg);
  bk::write_report_files(rep, cfg, out_dir);
  if (as_json)
    std::cout << bk::report_to_json(rep, cfg, bk::detail::utc_timestamp())
                     .dump(2)
              << "\n";
  else
    print_report_text(rep);
  if (out_rep) *out_rep = rep;
  return rep.summary == bk::verdict_name(bk::Verdict::AssumptionFailure) ? 2
                                                                         : 0;
}

int cmd_analyze(const std::string& config_path, const std::string& out_dir,
                const std::string& mode, bool as_json) {
  bifkit::RunConfig cfg = bifkit::load_config(config_path);
  apply_overrides(cfg, out_dir, mode);
  return run_analysis(cfg, cfg.output_dir, as_json);
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              const std::string& mode, const std::string& param,
              const std::vector<double>& values, bool as_json) {
  namespace bk = bifkit;
  if (param.empty() || values.empty())
    throw bk::ConfigError("sweep needs --param and a nonempty --values list");
  bk::RunConfig base = bk::load_config(config_path);
  apply_overrides(base, out_dir, mode);

  std::string summary = "param,value,zero,h,m_norm,index,verdict\n";
  int worst = 0;
  for (const double v : values) {
    bk::RunConfig cfg = base;
    cfg.params[param] = v;
    cfg.raw["model"]["params"][param] = v; // keep the hash honest
    const std::filesystem::path sub =
        std::filesystem::path(base.output_dir) / (param + "=" + std::to_string(v));
    bk::BifurcationReport rep;
    const int code = run_analysis(cfg, sub, as_json, &rep);
    worst = std::max(worst, code);
    for (std::size_t z = 0; z < rep.zeros.size(); ++z) {
      const auto& zr = rep.zeros[z];
      std::string htxt = "[";
      for (bk::Index i = 0; i < zr.h.size(); ++i)
        htxt += (i ? " " : "") + bk::detail::g17(zr.h[i]);
      htxt += "]";
      summary += param + "," + bk::detail::g17(v) + "," + std::to_string(z) +
                 ",\"" + htxt + "\"," + bk::detail::g17(zr.m_norm) + "," +
                 (zr.index ? std::to_string(zr.index->value) : "") + "," +
                 bk::verdict_name(zr.verdict) + "\n";
    }
  }
  std::filesystem::create_directories(base.output_dir);
  bk::detail::atomic_write(
      std::filesystem::path(base.output_dir) / "summary.csv", summary);
  return worst;
}

int cmd_verify(const std::string& config_path, const std::string& mode,
               bool as_json) {
  namespace bk = bifkit;
  bk::RunConfig cfg = bk::load_config(config_path);
  apply_overrides(cfg, "", mode);
  const bk::ModelBundle bundle = bk::configured_bundle(cfg);

  bk::VerifyRunOptions opts;
  opts.integrator.abs_tol = cfg.abs_tol;
  opts.integrator.rel_tol = cfg.rel_tol;
  opts.seed = cfg.seed;
  opts.threads = worker_threads();
  opts.grid_resolution = cfg.grid_resolution;
  opts.mode = cfg.mode;
  opts.epsilon_ladder = cfg.epsilon_ladder;

  const auto checks = bk::run_verification(bundle.problem, bundle.chart, opts);
  bool all_pass = true;
  if (as_json) {
    bk::json out = bk::json::array();
    for (const auto& c : checks) {
      out.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
      all_pass &= c.pass;
    }
    std::cout << out.dump(2) << "\n";
  } else {
    for (const auto& c : checks) {
      std::cout << "[" << (c.pass ? "pass" : "FAIL") << "] " << c.name << ": "
                << c.detail << "\n";
      all_pass &= c.pass;
    }
    std::cout << (all_pass ? "all checks passed" : "verification FAILED")
              << "\n";
  }
  return all_pass ? 0 : 3;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"bifurcation analysis of periodically perturbed semilinear "
               "systems"};
  app.require_subcommand(1);

  bool json_list = false;
  CLI::App* list = app.add_subcommand("list-models", "list built-in models");
  list->add_flag("--json", json_list, "machine-readable output");

  std::string an_config, an_out, an_mode;
  bool an_json = false;
  CLI::App* an = app.add_subcommand("analyze", "run the bifurcation analysis");
  an->add_option("--config", an_config, "config file (JSON)")->required();
  an->add_option("--out", an_out, "output directory override");
  an->add_option("--mode", an_mode, "bifurcation function mode")
      ->check(CLI::IsMember({"consistent", "literal"}));
  an->add_flag("--json", an_json, "print the report to stdout as JSON");

  std::string sw_config, sw_out, sw_mode, sw_param;
  std::vector<double> sw_values;
  bool sw_json = false;
  CLI::App* sw = app.add_subcommand("sweep", "analyze across parameter values");
  sw->add_option("--config", sw_config, "config file (JSON)")->required();
  sw->add_option("--param", sw_param, "model parameter to sweep")->required();
  sw->add_option("--values", sw_values, "comma-separated values")
      ->required()
      ->delimiter(',');
  sw->add_option("--out", sw_out, "output directory override");
  sw->add_option("--mode", sw_mode, "bifurcation function mode")
      ->check(CLI::IsMember({"consistent", "literal"}));
  sw->add_flag("--json", sw_json, "print reports to stdout as JSON");

  std::string vf_config, vf_mode;
  bool vf_json = false;
  CLI::App* vf = app.add_subcommand("verify", "run the invariant suite");
  vf->add_option("--config", vf_config, "config file (JSON)")->required();
  vf->add_option("--mode", vf_mode, "bifurcation function mode")
      ->check(CLI::IsMember({"consistent", "literal"}));
  vf->add_flag("--json", vf_json, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (list->parsed()) return cmd_list_models(json_list);
    if (an->parsed()) return cmd_analyze(an_config, an_out, an_mode, an_json);
    if (sw->parsed())
      return cmd_sweep(sw_config, sw_out, sw_mode, sw_param, sw_values, sw_json);
    if (vf->parsed()) return cmd_verify(vf_config, vf_mode, vf_json);
  } catch (const bifkit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const bifkit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
