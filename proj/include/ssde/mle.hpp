#pragma once

#include "ssde/likelihood.hpp"
#include "ssde/model.hpp"

#include <json.hpp>

#include <functional>
#include <optional>

namespace ssde {

// Per-coordinate bounds of the compact parameter set.
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  static Box around(const ParamVector& center, double half_width);
  bool contains(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd project(const Eigen::VectorXd& theta) const;
};

// Approximated objective g_T = g_{Y,T} + g_{X,T} anchored at theta0_ref.
double g_objective(const ParamVector& theta, const ParamVector& theta0_ref, const ParamMaps& maps,
                   double k_y, double k_x, double w_bar);
Eigen::VectorXd g_gradient(const ParamVector& theta, const ParamVector& theta0_ref,
                           const ParamMaps& maps, double k_y, double k_x, double w_bar);
Eigen::MatrixXd g_hessian(const ParamVector& theta, const ParamVector& theta0_ref,
                          const ParamMaps& maps, double k_y, double k_x, double w_bar);

struct FisherInfo {
  Eigen::MatrixXd matrix;
  double min_eigenvalue = 0.0;
  bool positive_definite = false;
};

// I_jk = K_Y d_j psi_Y d_k psi_Y.
FisherInfo fisher_info(const ParamVector& theta, const ParamMaps& maps, double k_y);

// Wiener-increment proxy recovered from data:
//   w_bar = (u_{Y|X} - psi_Y(anchor) v_{Y|X}) / (sqrt(K_Y) (b_T - a_T)).
double w_bar_from_stats(const SuffStats& stats, const ParamVector& anchor, const ParamMaps& maps,
                        double k_y);

struct FitOptions {
  double tol = 1e-8;
  int max_iter = 200;
  bool line_search = true;
  double box_half_width = 50.0;
  std::optional<Box> box;
};

struct FitResult {
  ParamVector theta_hat;
  Eigen::MatrixXd sigma_inv;
  bool converged = false;
  int iterations = 0;
  double objective_at_opt = 0.0;
  Eigen::VectorXd clt_stat;
  // Iterates where the Hessian was not negative definite.
  int gradient_fallbacks = 0;
  double grad_norm = 0.0;
  bool sigma_inv_fallback = false;
};

// Smooth objective for maximisation.
struct Objective {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;
};

// Newton ascent with Armijo backtracking and box projection. sigma_inv is left
// to the caller.
FitResult maximize(const Objective& objective, const ParamVector& theta_init,
                   const FitOptions& opts = {});

// Mode A: maximise g_T with w_bar recovered from the statistics, anchored at
// `anchor` (theta_init when not given).
FitResult fit_mle(const SuffStats& stats, const StateSpaceModel& model,
                  const ParamVector& theta_init, const FitOptions& opts = {},
                  const std::optional<ParamVector>& anchor = std::nullopt);

// Mode B: maximise the Monte-Carlo marginal log-likelihood (common random
// numbers across evaluations).
FitResult fit_mle_exact(const MarginalLikelihood& likelihood, const ParamVector& theta_init,
                        const FitOptions& opts = {});

// sqrt(scale (b_T - a_T)) (theta_hat - theta0); scale = n for panels.
Eigen::VectorXd clt_standardize(const FitResult& fit, const ParamVector& theta0,
                                const ObservationWindow& window, double scale = 1.0);

// Symmetric inverse of `m`, or the identity when `m` is singular.
Eigen::MatrixXd inverse_or_identity(const Eigen::MatrixXd& m, bool* fell_back = nullptr);

nlohmann::json to_json(const FitResult& fit);

}  // namespace ssde
