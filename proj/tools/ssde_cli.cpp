// ssde: simulation, estimation and experiment runner for state space SDEs.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure.

#include "ssde/bayes.hpp"
#include "ssde/errors.hpp"
#include "ssde/harness.hpp"
#include "ssde/likelihood.hpp"
#include "ssde/mle.hpp"
#include "ssde/panel.hpp"
#include "ssde/presets.hpp"
#include "ssde/rng.hpp"
#include "ssde/simulate.hpp"
#include "ssde/stability.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_config = 2;
constexpr int exit_numeric = 3;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string mode = "approx";
  int threads = 0;
};

ssde::ExperimentConfig resolve_config(const GlobalOptions& g) {
  if (g.config.empty()) ssde::fail(ssde::ErrorKind::config_error, "--config <file> is required");
  ssde::ExperimentConfig c = ssde::load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (!g.out.empty()) c.output_dir = g.out;
  if (c.output_dir.empty()) c.output_dir = ".";
  return c;
}

ssde::Estimator resolve_mode(const GlobalOptions& g, const ssde::ExperimentConfig& c,
                             bool mode_given) {
  return mode_given ? ssde::parse_estimator(g.mode) : c.estimator;
}

fs::path prepare_out(const ssde::ExperimentConfig& c) {
  const fs::path dir(c.output_dir);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& file, const json& j) {
  std::ofstream os(file);
  if (!os) ssde::fail(ssde::ErrorKind::config_error, "cannot write " + file.string());
  os << j.dump(2) << '\n';
}

ssde::TimeGrid first_grid(const ssde::ExperimentConfig& c) {
  return ssde::TimeGrid::over(ssde::make_window(c.T_list.front()), c.m);
}

ssde::PathPair simulate_from(const ssde::ExperimentConfig& c, const ssde::Preset& preset) {
  return ssde::simulate_pair(preset.make_model(), c.theta0, first_grid(c), c.seed);
}

ssde::FitResult fit_single(const ssde::ExperimentConfig& c, const ssde::Preset& preset,
                           const ssde::StateSpaceModel& model, const ssde::PathPair& path,
                           ssde::Estimator mode, int threads) {
  ssde::FitOptions opts;
  opts.box = preset.box_for(c.theta0);
  ssde::FitResult fit;
  if (mode == ssde::Estimator::mc) {
    const ssde::MarginalLikelihood ml(path, model, c.n_latent, ssde::derive_seed(c.seed, 0x4d43),
                                      threads);
    fit = ssde::fit_mle_exact(ml, c.theta0, opts);
  } else {
    fit = ssde::fit_mle(ssde::suff_stats_discrete(path, model), model, c.theta0, opts);
  }
  if (fit.converged) fit.clt_stat = ssde::clt_standardize(fit, c.theta0, path.grid.window);
  return fit;
}

int cmd_presets_list() {
  for (const auto& p : ssde::preset_registry()) {
    std::cout << p.name << (p.demo_only ? "  [demo-only]" : "") << "\n  " << p.description << '\n';
  }
  return 0;
}

int cmd_simulate(const GlobalOptions& g) {
  const auto c = resolve_config(g);
  const auto& preset = ssde::find_preset(c.preset);
  const fs::path dir = prepare_out(c);
  if (preset.make_panel) {
    const ssde::PanelModel panel = preset.make_panel(c.n_list.front());
    const auto paths = ssde::simulate_panel(panel, c.theta0, first_grid(c), c.seed, g.threads);
    for (std::size_t i = 0; i < paths.size(); ++i) {
      std::ofstream os(dir / ("path_" + std::to_string(i) + ".csv"));
      ssde::write_path_csv(os, paths[i]);
    }
    std::cout << "wrote " << paths.size() << " paths to " << dir.string() << '\n';
    return 0;
  }
  const auto path = simulate_from(c, preset);
  std::ofstream os(dir / "path.csv");
  ssde::write_path_csv(os, path);
  std::cout << "wrote " << (dir / "path.csv").string() << " (" << path.y.size() << " knots)\n";
  return 0;
}

int cmd_stats(const GlobalOptions& g) {
  const auto c = resolve_config(g);
  const auto& preset = ssde::find_preset(c.preset);
  const auto model = preset.make_model();
  const auto path = simulate_from(c, preset);
  const auto stats = ssde::suff_stats_discrete(path, model);
  write_json(prepare_out(c) / "stats.json", ssde::to_json(stats));
  std::cout << "u_yx=" << stats.u_y_given_x << " v_yx=" << stats.v_y_given_x
            << " u_x=" << stats.u_x << " v_x=" << stats.v_x << '\n';
  return 0;
}

int cmd_fit_mle(const GlobalOptions& g, bool mode_given) {
  const auto c = resolve_config(g);
  const auto& preset = ssde::find_preset(c.preset);
  const auto model = preset.make_model();
  const auto path = simulate_from(c, preset);
  const auto fit = fit_single(c, preset, model, path, resolve_mode(g, c, mode_given), g.threads);
  write_json(prepare_out(c) / "fit.json", ssde::to_json(fit));
  std::cout << "theta_hat =";
  for (Eigen::Index j = 0; j < fit.theta_hat.size(); ++j) std::cout << ' ' << fit.theta_hat[j];
  std::cout << (fit.converged ? "  (converged in " : "  (not converged after ") << fit.iterations
            << " iterations)\n";
  return fit.converged ? 0 : exit_numeric;
}

int cmd_fit_bayes(const GlobalOptions& g, bool mode_given, int n_draws) {
  const auto c = resolve_config(g);
  const auto& preset = ssde::find_preset(c.preset);
  const auto model = preset.make_model();
  const auto path = simulate_from(c, preset);
  const auto mode = resolve_mode(g, c, mode_given);
  const ssde::Box box = [&] {
    ssde::Box b = ssde::Box::around(c.theta0, c.prior_half_width);
    const ssde::Box p = preset.box_for(c.theta0);
    return ssde::Box{b.lo.cwiseMax(p.lo), b.hi.cwiseMin(p.hi)};
  }();
  ssde::FitOptions opts;
  opts.box = box;
  std::optional<ssde::MarginalLikelihood> ml;
  ssde::LogDensity loglik;
  ssde::FitResult fit;
  if (mode == ssde::Estimator::mc) {
    ml.emplace(path, model, c.n_latent, ssde::derive_seed(c.seed, 0x4d43), g.threads);
    loglik = ssde::mc_loglik_fn(*ml);
    fit = ssde::fit_mle_exact(*ml, c.theta0, opts);
  } else {
    const auto stats = ssde::suff_stats_discrete(path, model);
    const double w = ssde::residual_stats(stats, c.theta0, model.maps).i_yx /
                     std::sqrt(model.require_ratio_bounds("fit-bayes").k_y);
    loglik = ssde::approx_loglik_fn(model, c.theta0, path.grid.window, w);
    fit = ssde::fit_mle(stats, model, c.theta0, opts, c.theta0);
  }
  const auto target = ssde::posterior_target(ssde::Prior::flat(box), loglik);
  const auto chain = ssde::mh_sample(target, fit.theta_hat, n_draws,
                                     ssde::default_proposal_scale(fit.sigma_inv),
                                     ssde::derive_seed(c.seed, 0x4d48));
  const fs::path dir = prepare_out(c);
  {
    std::ofstream os(dir / "chain.csv");
    ssde::write_chain_csv(os, chain);
  }
  json out{{"fit", ssde::to_json(fit)},
           {"acceptance_rate", chain.acceptance_rate},
           {"n_draws", n_draws},
           {"diagnostics", ssde::to_json(ssde::posterior_normality_diag(chain, fit))}};
  write_json(dir / "posterior.json", out);
  std::cout << "chain of " << n_draws << " draws, acceptance " << chain.acceptance_rate << '\n';
  return 0;
}

int cmd_panel_fit(const GlobalOptions& g) {
  const auto c = resolve_config(g);
  const auto& preset = ssde::find_preset(c.preset);
  if (!preset.make_panel) {
    ssde::fail(ssde::ErrorKind::config_error, "preset '" + c.preset + "' is not a panel preset");
  }
  const int n = c.n_list.front();
  const ssde::PanelModel panel = preset.make_panel(n);
  const auto grid = first_grid(c);
  const auto paths = ssde::simulate_panel(panel, c.theta0, grid, c.seed, g.threads);
  const auto stats = ssde::panel_suff_stats(paths, panel.base, g.threads);
  ssde::FitOptions opts;
  opts.box = preset.box_for(c.theta0);
  auto fit = ssde::pooled_fit_mle(stats, panel, c.theta0, opts);
  if (fit.converged) fit.clt_stat = ssde::clt_standardize(fit, c.theta0, grid.window, n);
  json individuals = json::array();
  for (const auto& s : stats) individuals.push_back(ssde::to_json(s));
  write_json(prepare_out(c) / "panel.json", {{"n", n}, {"individuals", individuals},
                                             {"pooled_fit", ssde::to_json(fit)}});
  std::cout << "pooled theta_hat =";
  for (Eigen::Index j = 0; j < fit.theta_hat.size(); ++j) std::cout << ' ' << fit.theta_hat[j];
  std::cout << " (n=" << n << ")\n";
  return fit.converged ? 0 : exit_numeric;
}

int cmd_stability(const GlobalOptions& g) {
  const auto c = resolve_config(g);
  const auto& preset = ssde::find_preset(c.preset);
  const auto model = preset.make_model();
  json out{{"preset", preset.name}, {"demo_only", preset.demo_only}};
  const auto growth = ssde::check_growth_bounds(model, preset.growth_box, 4096, c.seed);
  out["growth_ok"] = growth.ok();
  out["growth_violations"] = growth.violations.size();
  bool ok = growth.ok();
  if (preset.lyapunov) {
    const auto h8 = ssde::check_h8(*preset.lyapunov, model, c.theta0);
    const auto eta = ssde::check_eta_integrable(*preset.lyapunov);
    out["h8"] = ssde::to_json(h8);
    out["eta_integrable"] = {{"total", eta.total}, {"tail", eta.tail}, {"converged", eta.converged}};
    ok = ok && h8.ok() && eta.converged;
  } else {
    out["h8"] = nullptr;
  }
  out["ok"] = ok;
  write_json(prepare_out(c) / "stability.json", out);
  std::cout << preset.name << ": growth " << (growth.ok() ? "ok" : "violated");
  if (preset.lyapunov) std::cout << ", H8 " << (out["h8"]["ok"].get<bool>() ? "ok" : "violated");
  std::cout << '\n';
  return 0;
}

int cmd_verify(const GlobalOptions& g, const std::string& what, bool mode_given) {
  auto c = resolve_config(g);
  if (mode_given) c.estimator = ssde::parse_estimator(g.mode);
  ssde::RunOptions opts;
  opts.threads = g.threads;
  json report;
  if (what == "consistency") {
    report = ssde::run_consistency(c, opts);
  } else if (what == "normality") {
    report = ssde::run_normality(c, opts);
  } else {
    report = ssde::run_posterior(c, opts);
  }
  std::cout << what << ": " << report["cells"].size() << " cells, report at "
            << (fs::path(c.output_dir) / "report.json").string() << '\n';
  for (const auto& cell : report["cells"]) {
    std::cout << "  T=" << cell["T"] << " n=" << cell["n"] << " failures=" << cell["failures"];
    if (cell.contains("rmse")) std::cout << " rmse=" << cell["rmse"].dump();
    if (cell.contains("ks_pvalue")) std::cout << " ks_pvalue=" << cell["ks_pvalue"].dump();
    if (cell.contains("coverage_95")) std::cout << " coverage_95=" << cell["coverage_95"].dump();
    if (cell.contains("sup_density_gap_max"))
      std::cout << " sup_density_gap_max=" << cell["sup_density_gap_max"];
    std::cout << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"State space SDE simulation and inference lab"};
  app.require_subcommand(1);
  GlobalOptions g;
  bool show_version = false;
  app.add_flag("--version", show_version, "Print version and RNG algorithm");
  CLI::Option* mode_opt = nullptr;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", g.config, "Experiment config (JSON)");
    sub->add_option("--seed", g.seed, "Master seed, overrides the config");
    sub->add_option("--out", g.out, "Output directory, overrides the config");
    sub->add_option("--threads", g.threads, "Worker threads (0 = hardware)")->check(CLI::NonNegativeNumber);
  };
  std::vector<CLI::Option*> mode_opts;
  auto add_mode = [&](CLI::App* sub) {
    mode_opts.push_back(sub->add_option("--mode", g.mode, "Likelihood mode")
                            ->check(CLI::IsMember({"approx", "mc", "null"})));
  };

  auto* simulate = app.add_subcommand("simulate", "Simulate a path and write CSV");
  auto* stats = app.add_subcommand("stats", "Simulate and write sufficient statistics JSON");
  auto* fit_mle = app.add_subcommand("fit-mle", "Maximum-likelihood fit");
  auto* fit_bayes = app.add_subcommand("fit-bayes", "Posterior sampling with a flat prior");
  auto* panel_fit = app.add_subcommand("panel-fit", "Pooled fit of a panel preset");
  auto* stability = app.add_subcommand("stability-check", "Growth and Lyapunov checks");
  auto* verify = app.add_subcommand("verify", "Run a Monte-Carlo experiment");
  auto* presets = app.add_subcommand("presets", "Preset registry");
  for (auto* sub : {simulate, stats, fit_mle, fit_bayes, panel_fit, stability, verify}) add_common(sub);
  for (auto* sub : {fit_mle, fit_bayes, verify}) add_mode(sub);
  int n_draws = 20000;
  fit_bayes->add_option("--draws", n_draws, "Chain length")->check(CLI::PositiveNumber);
  std::string verify_what;
  verify->add_option("experiment", verify_what, "consistency | normality | posterior")
      ->required()
      ->check(CLI::IsMember({"consistency", "normality", "posterior"}));
  std::string presets_what;
  presets->add_option("action", presets_what, "list")->required()->check(CLI::IsMember({"list"}));

  // --version works without a subcommand.
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--version") {
      std::cout << "ssde " << SSDE_VERSION << " (rng " << ssde::rng_algorithm << ")\n";
      return 0;
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_config;
  }
  for (auto* o : mode_opts) {
    if (o->count() > 0) mode_opt = o;
  }
  const bool mode_given = mode_opt != nullptr;

  try {
    if (*presets) return cmd_presets_list();
    if (*simulate) return cmd_simulate(g);
    if (*stats) return cmd_stats(g);
    if (*fit_mle) return cmd_fit_mle(g, mode_given);
    if (*fit_bayes) return cmd_fit_bayes(g, mode_given, n_draws);
    if (*panel_fit) return cmd_panel_fit(g);
    if (*stability) return cmd_stability(g);
    if (*verify) return cmd_verify(g, verify_what, mode_given);
  } catch (const ssde::Error& e) {
    std::cerr << "error (" << ssde::to_string(e.kind()) << "): " << e.what() << '\n';
    const bool config = e.kind() == ssde::ErrorKind::config_error ||
                        e.kind() == ssde::ErrorKind::invalid_argument;
    return config ? exit_config : exit_numeric;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_config;
  }
  return 0;
}
