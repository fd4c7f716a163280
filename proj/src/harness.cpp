#include "ssde/harness.hpp"

#include "ssde/bayes.hpp"
#include "ssde/errors.hpp"
#include "ssde/likelihood.hpp"
#include "ssde/mle.hpp"
#include "ssde/panel.hpp"
#include "ssde/parallel.hpp"
#include "ssde/presets.hpp"
#include "ssde/rng.hpp"
#include "ssde/simulate.hpp"

#include <Eigen/Cholesky>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

namespace ssde {

namespace {

using nlohmann::json;

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t stream_null_draw = 31;
constexpr double wald_z = 1.959963984540054;

[[noreturn]] void config_fail(const std::string& msg) { fail(ErrorKind::config_error, msg); }

template <class T>
T get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    config_fail(std::string("config key '") + key + "': " + e.what());
  }
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string cell_name(double T, int n) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "T%g_n%d", T, n);
  return buf;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.begin(), v.end()}; }

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json nullable(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(nullable(x));
  return out;
}

struct Setup {
  const Preset* preset = nullptr;
  StateSpaceModel model;
};

Setup make_setup(const ExperimentConfig& cfg) {
  Setup s;
  s.preset = &find_preset(cfg.preset);
  s.model = s.preset->make_model();
  cfg.theta0.require_dim(s.preset->dim, "config theta0");
  if (cfg.estimator == Estimator::mc && s.preset->make_panel) {
    config_fail("estimator 'mc' is not available for panel presets");
  }
  if (!s.preset->make_panel) {
    for (int n : cfg.n_list) {
      if (n != 1) config_fail("preset '" + cfg.preset + "' is a single series; n_list must be [1]");
    }
  }
  return s;
}

struct RepOutcome {
  bool ok = false;
  bool converged = false;
  Eigen::VectorXd theta_hat;
  Eigen::VectorXd clt;
  Eigen::MatrixXd sigma_inv;
  std::string error;
};

// Information at theta0 and its limit constants for the cell.
FisherInfo cell_information(const Setup& s, const ParamVector& theta0, int n) {
  if (s.preset->make_panel) {
    const PanelModel p = s.preset->make_panel(n);
    return fisher_info(theta0, p.limit_maps, p.k_bar_y);
  }
  return fisher_info(theta0, s.model.maps, s.model.ratio_bounds->k_y);
}

RepOutcome run_replication(const ExperimentConfig& cfg, const Setup& s, double T, int n,
                           std::uint64_t seed) {
  RepOutcome out;
  const ObservationWindow window = make_window(T);
  FitOptions opts;
  opts.box = s.preset->box_for(cfg.theta0);
  FitResult fit;
  if (cfg.estimator == Estimator::null) {
    const FisherInfo info = cell_information(s, cfg.theta0, n);
    require(info.positive_definite, ErrorKind::assumption_violation,
            "null estimator needs a positive definite information matrix");
    const Eigen::MatrixXd cov = inverse_or_identity(info.matrix);
    const Eigen::MatrixXd chol = cov.llt().matrixL();
    const CounterRng rng(seed, stream_null_draw);
    Eigen::VectorXd z(cov.rows());
    for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = rng.normal(static_cast<std::uint64_t>(j));
    const Eigen::VectorXd clt = chol * z;
    const double scale = n * window.length();
    fit.theta_hat = ParamVector(Eigen::VectorXd(cfg.theta0.values() + clt / std::sqrt(scale)));
    fit.sigma_inv = info.matrix * scale;
    fit.converged = true;
  } else {
    const TimeGrid grid = TimeGrid::over(window, cfg.m);
    if (s.preset->make_panel) {
      const PanelModel panel = s.preset->make_panel(n);
      const auto paths = simulate_panel(panel, cfg.theta0, grid, seed);
      const auto stats = panel_suff_stats(paths, panel.base);
      fit = pooled_fit_mle(stats, panel, cfg.theta0, opts, cfg.theta0);
    } else {
      SimOptions sim;
      sim.store_increments = false;
      const PathPair path = simulate_pair(s.model, cfg.theta0, grid, seed, sim);
      if (cfg.estimator == Estimator::approx) {
        fit = fit_mle(suff_stats_discrete(path, s.model), s.model, cfg.theta0, opts, cfg.theta0);
      } else {
        const MarginalLikelihood ml(path, s.model, cfg.n_latent, derive_seed(seed, 0x4d43));
        fit = fit_mle_exact(ml, cfg.theta0, opts);
      }
    }
  }
  out.ok = true;
  out.converged = fit.converged;
  out.theta_hat = fit.theta_hat.values();
  out.sigma_inv = fit.sigma_inv;
  if (fit.converged) out.clt = clt_standardize(fit, cfg.theta0, window, n);
  return out;
}

template <class Fn>
std::vector<RepOutcome> replicate(int reps, int threads, Fn&& fn) {
  std::vector<RepOutcome> out(static_cast<std::size_t>(reps));
  parallel_for(out.size(), threads, [&](std::size_t r) {
    try {
      out[r] = fn(r);
    } catch (const Error& e) {
      out[r].ok = false;
      out[r].error = std::string(to_string(e.kind())) + ": " + e.what();
    }
  });
  return out;
}

void write_cell_csv(const std::filesystem::path& file, const std::vector<RepOutcome>& reps,
                    int d) {
  std::ofstream os(file);
  require(static_cast<bool>(os), ErrorKind::config_error, "cannot write " + file.string());
  os << "rep";
  for (int j = 1; j <= d; ++j) os << ",theta_hat_" << j;
  os << ",converged";
  for (int j = 1; j <= d; ++j) os << ",clt_" << j;
  os << '\n';
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const RepOutcome& o = reps[r];
    os << r;
    for (int j = 0; j < d; ++j) os << ',' << (o.ok ? format_number(o.theta_hat[j]) : "nan");
    os << ',' << (o.ok && o.converged ? 1 : 0);
    for (int j = 0; j < d; ++j) os << ',' << (o.ok && o.converged ? format_number(o.clt[j]) : "nan");
    os << '\n';
  }
}

json summarize_cell(const ExperimentConfig& cfg, const Setup& s, double T, int n,
                    const std::vector<RepOutcome>& reps) {
  const int d = s.preset->dim;
  std::vector<const RepOutcome*> good;
  json errors = json::array();
  for (const auto& r : reps) {
    if (r.ok && r.converged) {
      good.push_back(&r);
    } else if (!r.error.empty() && errors.size() < 5) {
      errors.push_back(r.error);
    }
  }
  const int failures = static_cast<int>(reps.size() - good.size());
  std::vector<double> bias(d, nan_value), rmse(d, nan_value), ks_stat(d, nan_value),
      ks_p(d, nan_value), coverage(d, nan_value);
  const FisherInfo info = cell_information(s, cfg.theta0, n);
  const Eigen::MatrixXd inv_info = inverse_or_identity(info.matrix);
  for (int j = 0; j < d; ++j) {
    if (good.empty()) break;
    double sum = 0.0, sum_sq = 0.0, covered = 0.0;
    std::vector<double> clt;
    for (const RepOutcome* r : good) {
      const double err = r->theta_hat[j] - cfg.theta0[j];
      sum += err;
      sum_sq += err * err;
      const Eigen::MatrixXd cov = inverse_or_identity(r->sigma_inv);
      if (std::abs(err) <= wald_z * std::sqrt(std::max(0.0, cov(j, j)))) covered += 1.0;
      clt.push_back(r->clt[j]);
    }
    const auto g = static_cast<double>(good.size());
    bias[j] = sum / g;
    rmse[j] = std::sqrt(sum_sq / g);
    coverage[j] = covered / g;
    if (info.positive_definite && clt.size() >= 8) {
      const double sd = std::sqrt(inv_info(j, j));
      const KsResult ks = ks_test(clt, [sd](double x) { return normal_cdf(x / sd); });
      ks_stat[j] = ks.statistic;
      ks_p[j] = ks.p_value;
    }
  }
  json cell{{"T", T},
            {"n", n},
            {"replications", reps.size()},
            {"failures", failures},
            {"degraded", failures > 0.05 * static_cast<double>(reps.size())},
            {"bias", nullable(bias)},
            {"rmse", nullable(rmse)},
            {"ks_stat", nullable(ks_stat)},
            {"ks_pvalue", nullable(ks_p)},
            {"coverage_95", nullable(coverage)},
            {"information_positive_definite", info.positive_definite}};
  if (!errors.empty()) cell["first_errors"] = errors;
  return cell;
}

json report_header(const char* kind, const ExperimentConfig& cfg) {
  return {{"kind", kind},
          {"version", SSDE_VERSION},
          {"rng_algorithm", std::string(rng_algorithm)},
          {"config", to_json(cfg)}};
}

void write_report(const ExperimentConfig& cfg, const json& report) {
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / "report.json");
  require(static_cast<bool>(os), ErrorKind::config_error, "cannot write report.json");
  os << report.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

json run_frequentist(const char* kind, const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const Setup s = make_setup(cfg);
  const bool files = opts.write_files && !cfg.output_dir.empty();
  if (files) std::filesystem::create_directories(std::filesystem::path(cfg.output_dir) / "cells");
  json report = report_header(kind, cfg);
  json cells = json::array();
  std::size_t cell_index = 0;
  for (int n : cfg.n_list) {
    for (double T : cfg.T_list) {
      const auto reps = replicate(cfg.n_replications, opts.threads, [&](std::size_t r) {
        return run_replication(cfg, s, T, n, replication_seed(cfg.seed, cell_index, r));
      });
      if (files) {
        write_cell_csv(std::filesystem::path(cfg.output_dir) / "cells" / (cell_name(T, n) + ".csv"),
                       reps, s.preset->dim);
      }
      cells.push_back(summarize_cell(cfg, s, T, n, reps));
      ++cell_index;
    }
  }
  report["cells"] = cells;

  // RMSE non-increasing in T for each n, with slack for Monte-Carlo noise.
  bool monotone = true;
  const double slack = 1.0 + 2.0 / std::sqrt(2.0 * cfg.n_replications);
  if (cfg.n_replications > 1) {
    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (cells[c]["n"] != cells[c - 1]["n"]) continue;
      for (std::size_t j = 0; j < cells[c]["rmse"].size(); ++j) {
        const json& now = cells[c]["rmse"][j];
        const json& prev = cells[c - 1]["rmse"][j];
        if (now.is_null() || prev.is_null()) continue;
        if (now.get<double>() > prev.get<double>() * slack) monotone = false;
      }
    }
    report["rmse_monotone"] = monotone;
  } else {
    report["rmse_monotone"] = nullptr;
  }
  report["runtime_seconds"] = seconds_since(start);
  if (files) write_report(cfg, report);
  return report;
}

}  // namespace

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::approx: return "approx";
    case Estimator::mc: return "mc";
    case Estimator::null: return "null";
  }
  return "approx";
}

Estimator parse_estimator(const std::string& name) {
  if (name == "approx") return Estimator::approx;
  if (name == "mc") return Estimator::mc;
  if (name == "null") return Estimator::null;
  config_fail("unknown estimator '" + name + "'; expected approx, mc or null");
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) config_fail("config must be a JSON object");
  static const std::set<std::string> known{
      "preset", "theta0",    "T_list", "n_list",      "m",          "n_replications",
      "n_latent", "estimator", "seed",   "output_dir", "prior_half_width", "decay_radii"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) config_fail("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  c.preset = get_as<std::string>(j, "preset");
  const Preset& preset = find_preset(c.preset);
  if (j.contains("theta0")) {
    const auto v = get_as<std::vector<double>>(j, "theta0");
    if (v.empty()) config_fail("theta0 must not be empty");
    c.theta0 = ParamVector(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  } else {
    c.theta0 = preset.theta0;
  }
  if (c.theta0.size() != preset.dim) {
    config_fail("theta0 has " + std::to_string(c.theta0.size()) + " entries; preset '" + c.preset +
                "' has dimension " + std::to_string(preset.dim));
  }
  c.T_list = get_as<std::vector<double>>(j, "T_list");
  if (c.T_list.empty()) config_fail("T_list must not be empty");
  for (double T : c.T_list) {
    if (!(T > 0.0) || !std::isfinite(T)) config_fail("T_list entries must be positive");
  }
  if (j.contains("n_list")) c.n_list = get_as<std::vector<int>>(j, "n_list");
  if (c.n_list.empty()) config_fail("n_list must not be empty");
  for (int n : c.n_list) {
    if (n < 1) config_fail("n_list entries must be >= 1");
  }
  if (j.contains("m")) c.m = get_as<int>(j, "m");
  if (c.m < 2) config_fail("m must be >= 2");
  if (j.contains("n_replications")) c.n_replications = get_as<int>(j, "n_replications");
  if (c.n_replications < 1) config_fail("n_replications must be >= 1");
  if (j.contains("n_latent")) c.n_latent = get_as<int>(j, "n_latent");
  if (c.n_latent < 2) config_fail("n_latent must be >= 2");
  if (j.contains("estimator")) c.estimator = parse_estimator(get_as<std::string>(j, "estimator"));
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "seed");
  if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j, "output_dir");
  if (j.contains("prior_half_width")) c.prior_half_width = get_as<double>(j, "prior_half_width");
  if (!(c.prior_half_width > 0.0)) config_fail("prior_half_width must be positive");
  if (j.contains("decay_radii")) c.decay_radii = get_as<std::vector<double>>(j, "decay_radii");
  for (double r : c.decay_radii) {
    if (!(r > 0.0)) config_fail("decay_radii entries must be positive");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) config_fail("cannot open config file " + file.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    config_fail("config file " + file.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  return {{"preset", c.preset},
          {"theta0", to_vec(c.theta0.values())},
          {"T_list", c.T_list},
          {"n_list", c.n_list},
          {"m", c.m},
          {"n_replications", c.n_replications},
          {"n_latent", c.n_latent},
          {"estimator", to_string(c.estimator)},
          {"seed", c.seed},
          {"output_dir", c.output_dir},
          {"prior_half_width", c.prior_half_width},
          {"decay_radii", c.decay_radii}};
}

std::uint64_t replication_seed(std::uint64_t master, std::size_t cell, std::size_t rep) {
  return derive_seed(derive_seed(master, 0x5000 + cell), rep);
}

json run_consistency(const ExperimentConfig& config, const RunOptions& opts) {
  return run_frequentist("consistency", config, opts);
}

json run_normality(const ExperimentConfig& config, const RunOptions& opts) {
  return run_frequentist("normality", config, opts);
}

namespace {

struct PosteriorRep {
  bool ok = false;
  std::string error;
  NormalityDiag diag;
  std::vector<DecayRate> decay;
  DecayRate full_set;
};

Box intersect(const Box& a, const Box& b) {
  return {a.lo.cwiseMax(b.lo), a.hi.cwiseMin(b.hi)};
}

PosteriorRep posterior_replication(const ExperimentConfig& cfg, const Setup& s, double T,
                                   std::uint64_t seed) {
  PosteriorRep out;
  const ObservationWindow window = make_window(T);
  const TimeGrid grid = TimeGrid::over(window, cfg.m);
  const StateSpaceModel& model = s.model;
  const RatioBounds& rb = model.require_ratio_bounds("run_posterior");
  const PathPair path = simulate_pair(model, cfg.theta0, grid, seed);
  const SuffStats stats = suff_stats_discrete(path, model);
  const Box prior_box =
      intersect(Box::around(cfg.theta0, cfg.prior_half_width), s.preset->box_for(cfg.theta0));
  FitOptions opts;
  opts.box = prior_box;

  std::optional<MarginalLikelihood> ml;
  LogDensity loglik;
  FitResult fit;
  if (cfg.estimator == Estimator::mc) {
    ml.emplace(path, model, cfg.n_latent, derive_seed(seed, 0x4d43));
    loglik = mc_loglik_fn(*ml);
    fit = fit_mle_exact(*ml, cfg.theta0, opts);
  } else {
    const double w = residual_stats(stats, cfg.theta0, model.maps).i_yx / std::sqrt(rb.k_y);
    loglik = approx_loglik_fn(model, cfg.theta0, window, w);
    fit = fit_mle(stats, model, cfg.theta0, opts, cfg.theta0);
  }
  const LogDensity log_post = posterior_target(Prior::flat(prior_box), loglik);

  if (s.preset->dim == 1) {
    out.diag = posterior_normality_grid(log_post, fit);
  } else {
    const Chain chain = mh_sample(log_post, fit.theta_hat, 5000,
                                  default_proposal_scale(fit.sigma_inv), derive_seed(seed, 0x4d48));
    out.diag = posterior_normality_diag(chain, fit);
  }

  const GridPosterior gp = grid_posterior(log_post, prior_box);
  const auto far = [&](double r) {
    return [&cfg, r](const Eigen::VectorXd& th) { return (th - cfg.theta0.values()).norm() >= r; };
  };
  for (double r : cfg.decay_radii) {
    std::vector<ParamVector> subset;
    for (const auto& p : gp.points) {
      if (far(r)(p.values())) subset.push_back(p);
    }
    if (subset.empty()) {
      DecayRate empty;
      empty.zero_mass = true;
      empty.empirical_rate = -std::numeric_limits<double>::infinity();
      empty.target = nan_value;
      out.decay.push_back(empty);
      continue;
    }
    const double j = j_of_set(subset, cfg.theta0, gp.points, model.maps, rb.k_y, rb.k_x);
    out.decay.push_back(set_decay_rate(far(r), gp, window, j));
  }
  out.full_set = set_decay_rate([](const Eigen::VectorXd&) { return true; }, gp, window, 0.0);
  out.ok = true;
  return out;
}

}  // namespace

json run_posterior(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const Setup s = make_setup(cfg);
  if (s.preset->make_panel) config_fail("run_posterior: panel presets are not supported");
  if (s.preset->dim > 2) config_fail("run_posterior: grid posterior needs d <= 2");
  json report = report_header("posterior", cfg);
  json cells = json::array();
  for (std::size_t c = 0; c < cfg.T_list.size(); ++c) {
    const double T = cfg.T_list[c];
    std::vector<PosteriorRep> reps(static_cast<std::size_t>(cfg.n_replications));
    parallel_for(reps.size(), opts.threads, [&](std::size_t r) {
      try {
        reps[r] = posterior_replication(cfg, s, T, replication_seed(cfg.seed, c, r));
      } catch (const Error& e) {
        reps[r].error = std::string(to_string(e.kind())) + ": " + e.what();
      }
    });
    int failures = 0;
    double gap_sum = 0.0, gap_max = 0.0, ks_sum = 0.0, ks_max = 0.0;
    double full_max = 0.0;
    std::vector<std::vector<double>> rates(cfg.decay_radii.size());
    std::vector<double> targets(cfg.decay_radii.size(), nan_value);
    int ok = 0;
    for (const auto& r : reps) {
      if (!r.ok) {
        ++failures;
        continue;
      }
      ++ok;
      gap_sum += r.diag.sup_density_gap;
      gap_max = std::max(gap_max, r.diag.sup_density_gap);
      ks_sum += r.diag.ks_distance;
      ks_max = std::max(ks_max, r.diag.ks_distance);
      full_max = std::max(full_max, std::abs(r.full_set.empirical_rate));
      for (std::size_t k = 0; k < r.decay.size(); ++k) {
        rates[k].push_back(r.decay[k].empirical_rate);
        targets[k] = r.decay[k].target;
      }
    }
    json decay = json::array();
    for (std::size_t k = 0; k < cfg.decay_radii.size(); ++k) {
      json entry{{"radius", cfg.decay_radii[k]}, {"target", nullable(targets[k])}};
      if (!rates[k].empty()) {
        entry["empirical_rate_mean"] = nullable(mean(rates[k]));
        entry["empirical_rate_min"] = nullable(*std::min_element(rates[k].begin(), rates[k].end()));
        entry["empirical_rate_max"] = nullable(*std::max_element(rates[k].begin(), rates[k].end()));
      }
      decay.push_back(entry);
    }
    json cell{{"T", T},
              {"n", 1},
              {"replications", reps.size()},
              {"failures", failures},
              {"degraded", failures > 0.05 * static_cast<double>(reps.size())},
              {"decay", decay}};
    if (ok > 0) {
      cell["sup_density_gap_mean"] = gap_sum / ok;
      cell["sup_density_gap_max"] = gap_max;
      cell["ks_distance_mean"] = ks_sum / ok;
      cell["ks_distance_max"] = ks_max;
      cell["full_set_rate_max_abs"] = full_max;
    }
    cells.push_back(cell);
  }
  report["cells"] = cells;
  report["runtime_seconds"] = seconds_since(start);
  if (opts.write_files && !cfg.output_dir.empty()) write_report(cfg, report);
  return report;
}

}  // namespace ssde
