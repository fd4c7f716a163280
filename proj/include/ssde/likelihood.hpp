#pragma once

#include "ssde/model.hpp"
#include "ssde/simulate.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace ssde {

// Girsanov statistics over the observation window:
//   u_{Y|X} = int b_Y/sigma_Y^2 dY,  v_{Y|X} = int b_Y^2/sigma_Y^2 dt,
//   u_X     = int b_X/sigma_X^2 dX,  v_X     = int b_X^2/sigma_X^2 dt.
struct SuffStats {
  double u_y_given_x = 0.0;
  double v_y_given_x = 0.0;
  double u_x = 0.0;
  double v_x = 0.0;
  ObservationWindow window;
  int m = 0;
};

struct ResidualStats {
  double i_yx = 0.0;
  double i_x = 0.0;
};

struct LikBounds {
  double lower = 0.0;
  double upper = 0.0;
  // Set when a lower ratio constant went negative and was clamped at zero.
  bool envelope_too_loose = false;
};

// Left-endpoint (Ito) sums on the grid. Throws division-guard naming the knot
// when a diffusion coefficient vanishes.
SuffStats suff_stats_discrete(const TimeGrid& grid, std::span<const double> y,
                              std::span<const double> x, const StateSpaceModel& model);
SuffStats suff_stats_discrete(const PathPair& path, const StateSpaceModel& model);

ResidualStats residual_stats(const SuffStats& stats, const ParamVector& theta0,
                             const ParamMaps& maps);

// phi u - phi^2 v / 2 written so the vector form reduces to it bit for bit.
inline double girsanov_exponent(double phi, double u, double v) {
  return phi * u - 0.5 * (phi * (v * phi));
}

double cond_loglik(double phi_y, double phi_x, const SuffStats& stats);
double cond_loglik(const ParamVector& theta, const SuffStats& stats, const ParamMaps& maps);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

struct LoglikDerivatives {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

// Monte-Carlo marginal likelihood over the null-drift latent law. The latent
// draws, and therefore the per-draw statistics, are fixed at construction, so
// repeated evaluations at different theta use common random numbers.
class MarginalLikelihood {
 public:
  MarginalLikelihood(const PathPair& observed, const StateSpaceModel& model, int n_latent,
                     std::uint64_t seed, int threads = 1);

  McEstimate evaluate(const ParamVector& theta) const;
  McEstimate evaluate_phi(double phi_y, double phi_x) const;

  // Value, gradient and Hessian of the log-mean-exp in theta.
  LoglikDerivatives derivatives(const ParamVector& theta) const;

  const std::vector<SuffStats>& draw_stats() const { return draws_; }
  const ObservationWindow& window() const { return window_; }
  const ParamMaps& maps() const { return maps_; }

 private:
  std::vector<SuffStats> draws_;
  ObservationWindow window_;
  ParamMaps maps_;
};

McEstimate marginal_loglik_mc(const ParamVector& theta, const PathPair& observed,
                              const StateSpaceModel& model, int n_latent, std::uint64_t seed,
                              int threads = 1);

// log-mean-exp with the delta-method standard error of the log-mean.
McEstimate log_mean_exp(std::span<const double> log_weights);

// Closed-form asymptotic log-likelihood:
//   L K_Y phi_Y phi_Y0 + phi_Y sqrt(K_Y) w - L K_Y phi_Y^2 / 2 + L K_X phi_X phi_X0
// with L = b_T - a_T and w = W_Y(b_T) - W_Y(a_T).
double approx_loglik(const ParamVector& theta, const ParamVector& theta0,
                     const StateSpaceModel& model, const ObservationWindow& window,
                     double w_y_increment);

// The true-model approximation, equal to approx_loglik(theta0, theta0, ...).
double approx_true_loglik(const ParamVector& theta0, const StateSpaceModel& model,
                          const ObservationWindow& window, double w_y_increment);

// Log of the lower and upper Girsanov integrand bounds at envelope size xi.
// lambda_sq_integral is int_{a_T}^{b_T} lambda^2(s) ds.
LikBounds likelihood_log_bounds(const ParamVector& theta, const ParamVector& theta0,
                                const StateSpaceModel& model, const ObservationWindow& window,
                                double xi, double lambda_sq_integral,
                                const ResidualStats& residuals);

// Kullback-Leibler rate h(theta). Requires |psi_X(theta)| <= |psi_X(theta0)|.
double kl_rate_h(const ParamVector& theta, const ParamVector& theta0, const ParamMaps& maps,
                 double k_y, double k_x);

struct JRate {
  double j_theta = 0.0;
  double h_theta_inf = 0.0;
};

// h_Theta approximated by the minimum of h over theta_grid; J(theta) = h - h_Theta.
JRate j_rate(const ParamVector& theta, const ParamVector& theta0,
             const std::vector<ParamVector>& theta_grid, const ParamMaps& maps, double k_y,
             double k_x);

// J(A) for A given as a sub-grid of theta_grid.
double j_of_set(const std::vector<ParamVector>& subset, const ParamVector& theta0,
                const std::vector<ParamVector>& theta_grid, const ParamMaps& maps, double k_y,
                double k_x);

nlohmann::json to_json(const SuffStats& stats);

}  // namespace ssde
