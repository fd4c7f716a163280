#pragma once

#include "ssde/likelihood.hpp"
#include "ssde/mle.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace ssde {

using LogDensity = std::function<double(const Eigen::VectorXd&)>;

struct Prior {
  LogDensity log_density;
  Box support;

  // Uniform on the box; log density 0 inside.
  static Prior flat(const Box& box);
};

// log prior + log likelihood; -inf outside the support or where either term
// is -inf.
double log_posterior_unnorm(const ParamVector& theta, const Prior& prior,
                            const LogDensity& loglik);

// Approximated log-likelihood approx_loglik(., theta0, ...) as a callable.
LogDensity approx_loglik_fn(const StateSpaceModel& model, const ParamVector& theta0,
                            const ObservationWindow& window, double w_y_increment);

// Monte-Carlo marginal log-likelihood as a callable; `likelihood` must outlive it.
LogDensity mc_loglik_fn(const MarginalLikelihood& likelihood);

LogDensity posterior_target(const Prior& prior, LogDensity loglik);

struct Chain {
  std::vector<ParamVector> draws;
  std::vector<double> log_posts;
  std::vector<bool> accepted;
  double acceptance_rate = 0.0;
  std::uint64_t seed = 0;
};

// Random-walk Metropolis with independent Gaussian proposals per coordinate.
Chain mh_sample(const LogDensity& target, const ParamVector& theta_init, int n_draws,
                const Eigen::VectorXd& proposal_scale, std::uint64_t seed);

// 2.4 / sqrt(d) times the square roots of diag(sigma_inv^{-1}).
Eigen::VectorXd default_proposal_scale(const Eigen::MatrixXd& sigma_inv);

// Psi = sigma_inv^{1/2} (theta - theta_hat) and its inverse.
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& spd);
Eigen::VectorXd to_psi(const Eigen::VectorXd& theta, const FitResult& fit);
Eigen::VectorXd from_psi(const Eigen::VectorXd& psi, const FitResult& fit);

struct NormalityDiag {
  double ks_distance = 0.0;
  double sup_density_gap = 0.0;
  int n_used = 0;
};

inline constexpr double burn_in_fraction = 0.2;
inline constexpr int histogram_bins = 40;
inline constexpr double histogram_edge = 4.0;

// Drops the first 20% of draws, maps the rest to Psi and compares with N(0, 1)
// per coordinate. Both statistics are maxima over coordinates.
NormalityDiag posterior_normality_diag(const Chain& chain, const FitResult& fit);

// d = 1 only: the posterior density of Psi evaluated on a fine grid over
// [-8, 8], binned onto the same 40-bin histogram.
NormalityDiag posterior_normality_grid(const LogDensity& log_post, const FitResult& fit,
                                       int sub_points_per_bin = 16);

struct GridPosterior {
  std::vector<ParamVector> points;
  std::vector<double> log_post;
  // log of the normalising sum over grid points (cell volume omitted).
  double log_norm = 0.0;
};

// Tensor grid with n_per_axis points per coordinate over the box; d <= 2.
GridPosterior grid_posterior(const LogDensity& log_post, const Box& box, int n_per_axis = 201);

using SetPredicate = std::function<bool(const Eigen::VectorXd&)>;

struct DecayRate {
  double empirical_rate = 0.0;
  double target = 0.0;
  bool zero_mass = false;
};

DecayRate set_decay_rate(const SetPredicate& in_set, const GridPosterior& grid,
                         const ObservationWindow& window, double j_of_set);
DecayRate set_decay_rate(const SetPredicate& in_set, const Chain& chain,
                         const ObservationWindow& window, double j_of_set);

// Header `draw_index,theta_1..theta_d,log_post,accepted`.
void write_chain_csv(std::ostream& os, const Chain& chain);

nlohmann::json to_json(const NormalityDiag& diag);
nlohmann::json to_json(const DecayRate& rate);

}  // namespace ssde
