#pragma once

#include "ssde/model.hpp"
#include "ssde/simulate.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace ssde {

using SpaceTimeFn = std::function<double(double x, double t)>;

// Lyapunov data: V with its partials, exponent p, growth gamma(t) and the
// integrable generator bound eta(t).
struct LyapunovSpec {
  SpaceTimeFn v;
  SpaceTimeFn v_t;
  SpaceTimeFn v_x;
  SpaceTimeFn v_xx;
  double p = 2.0;
  std::function<double(double)> gamma;
  std::function<double(double)> eta;

  // lambda(t) = gamma(t)^(-1/p)
  double lambda(double t) const;

  // V(x,t) = exp(rate t) x^2, gamma(t) = exp(rate t), p = 2, eta = 0.
  static LyapunovSpec exponential_quadratic(double rate);
};

// V_t + V_x (phi_X b_X) + sigma_X^2 V_xx / 2 at the parameterized latent drift.
double lv_operator(const LyapunovSpec& spec, const StateSpaceModel& model,
                   const ParamVector& theta, double x, double t);

struct H8Grid {
  double x_lo = -10.0;
  double x_hi = 10.0;
  double notch = 1e-6;  // nodes with |x| < notch are skipped
  double t_lo = 0.0;
  double t_hi = 100.0;
  int nx = 201;
  int nt = 201;
};

struct H8Violation {
  double x = 0.0;
  double t = 0.0;
  std::string kind;  // "lower_bound", "generator" or "gamma_decreasing"
};

struct H8Report {
  bool lower_bound_ok = true;
  bool generator_ok = true;
  bool gamma_monotone = true;
  std::vector<H8Violation> violations;

  bool ok() const { return lower_bound_ok && generator_ok && gamma_monotone; }
};

// Grid check of gamma(t)|x|^p <= V(x,t) and LV(x,t) <= eta(t). A finite grid
// can falsify the condition, never certify it.
H8Report check_h8(const LyapunovSpec& spec, const StateSpaceModel& model,
                  const ParamVector& theta, const H8Grid& grid = {});

struct EtaIntegralCheck {
  double total = 0.0;  // integral over [0, t_max]
  double tail = 0.0;   // integral over [t_max / 2, t_max]
  bool converged = false;
};

// Adaptive Simpson; converged when tail < 1% of total (or both vanish).
EtaIntegralCheck check_eta_integrable(const LyapunovSpec& spec, double t_max = 1e4,
                                      double tolerance = 1e-10);

double adaptive_simpson(const std::function<double(double)>& f, double lo, double hi,
                        double tolerance, int max_depth = 50);

struct EnvelopeReport {
  double xi_hat = 0.0;
  std::vector<double> per_path_xi;
  std::function<double(double)> lambda;
};

// Per path: xi = max_k |x(t_k)| / lambda(t_k).
EnvelopeReport empirical_envelope(const TimeGrid& grid,
                                  const std::vector<std::vector<double>>& latent_paths,
                                  const LyapunovSpec& spec);

nlohmann::json to_json(const H8Report& report);

}  // namespace ssde
