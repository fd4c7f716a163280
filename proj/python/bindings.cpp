#include "ssde/bayes.hpp"
#include "ssde/errors.hpp"
#include "ssde/harness.hpp"
#include "ssde/likelihood.hpp"
#include "ssde/mle.hpp"
#include "ssde/presets.hpp"
#include "ssde/rng.hpp"
#include "ssde/simulate.hpp"
#include "ssde/stats.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <string>
#include <vector>

namespace py = pybind11;

namespace {

ssde::ParamVector to_param(const std::vector<double>& v) {
  if (v.empty()) ssde::fail(ssde::ErrorKind::invalid_argument, "theta must not be empty");
  return ssde::ParamVector(
      Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

std::vector<double> to_list(const Eigen::VectorXd& v) { return {v.begin(), v.end()}; }

ssde::PathPair simulate_preset(const std::string& preset, const std::vector<double>& theta,
                               double T, int m, std::uint64_t seed) {
  const auto& p = ssde::find_preset(preset);
  return ssde::simulate_pair(p.make_model(), to_param(theta),
                             ssde::TimeGrid::over(ssde::make_window(T), m), seed);
}

std::string run_experiment(const std::string& kind, const std::string& config_json, int threads) {
  const auto cfg = ssde::parse_config(nlohmann::json::parse(config_json));
  ssde::RunOptions opts;
  opts.threads = threads;
  if (kind == "consistency") return ssde::run_consistency(cfg, opts).dump();
  if (kind == "normality") return ssde::run_normality(cfg, opts).dump();
  if (kind == "posterior") return ssde::run_posterior(cfg, opts).dump();
  ssde::fail(ssde::ErrorKind::config_error, "unknown experiment '" + kind + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "State space SDE simulation and inference";
  m.attr("__version__") = SSDE_VERSION;
  m.attr("rng_algorithm") = std::string(ssde::rng_algorithm);

  static py::exception<ssde::Error> error_type(m, "SsdeError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ssde::Error& e) {
      py::set_error(error_type, (std::string(ssde::to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  m.def("presets", [] {
    std::vector<std::string> names;
    for (const auto& p : ssde::preset_registry()) names.push_back(p.name);
    return names;
  });

  m.def(
      "simulate",
      [](const std::string& preset, const std::vector<double>& theta, double T, int m,
         std::uint64_t seed) {
        const auto path = simulate_preset(preset, theta, T, m, seed);
        py::dict out;
        out["t"] = path.grid.t;
        out["y"] = path.y;
        out["x"] = path.x;
        return out;
      },
      py::arg("preset"), py::arg("theta"), py::arg("T"), py::arg("m"), py::arg("seed"));

  m.def(
      "suff_stats",
      [](const std::string& preset, const std::vector<double>& theta, double T, int m,
         std::uint64_t seed) {
        const auto path = simulate_preset(preset, theta, T, m, seed);
        return ssde::to_json(ssde::suff_stats_discrete(path, ssde::find_preset(preset).make_model()))
            .dump();
      },
      py::arg("preset"), py::arg("theta"), py::arg("T"), py::arg("m"), py::arg("seed"));

  m.def(
      "fit_mle",
      [](const std::string& preset, const std::vector<double>& theta0, double T, int m,
         std::uint64_t seed) {
        const auto& p = ssde::find_preset(preset);
        const auto model = p.make_model();
        const auto path = simulate_preset(preset, theta0, T, m, seed);
        ssde::FitOptions opts;
        opts.box = p.box_for(to_param(theta0));
        auto fit = ssde::fit_mle(ssde::suff_stats_discrete(path, model), model, to_param(theta0), opts);
        if (fit.converged) fit.clt_stat = ssde::clt_standardize(fit, to_param(theta0), path.grid.window);
        return ssde::to_json(fit).dump();
      },
      py::arg("preset"), py::arg("theta0"), py::arg("T"), py::arg("m"), py::arg("seed"));

  m.def(
      "kl_rate_h",
      [](const std::string& preset, const std::vector<double>& theta,
         const std::vector<double>& theta0) {
        const auto model = ssde::find_preset(preset).make_model();
        const auto& rb = model.require_ratio_bounds("kl_rate_h");
        return ssde::kl_rate_h(to_param(theta), to_param(theta0), model.maps, rb.k_y, rb.k_x);
      },
      py::arg("preset"), py::arg("theta"), py::arg("theta0"));

  m.def(
      "ks_test_normal",
      [](const std::vector<double>& samples) {
        const auto r = ssde::ks_test(samples, [](double x) { return ssde::normal_cdf(x); });
        return py::make_tuple(r.statistic, r.p_value);
      },
      py::arg("samples"));

  m.def("run_experiment", &run_experiment, py::arg("kind"), py::arg("config_json"),
        py::arg("threads") = 1);
}
