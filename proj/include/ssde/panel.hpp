#pragma once

#include "ssde/likelihood.hpp"
#include "ssde/mle.hpp"
#include "ssde/simulate.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <vector>

namespace ssde {

// n series sharing theta through per-individual maps psi_{Y_i}, psi_{X_i},
// which approach the limit maps bar psi.
struct PanelModel {
  int n = 1;
  StateSpaceModel base;
  std::vector<ParamMaps> individual_maps;
  ParamMaps limit_maps;
  double k_bar_y = 1.0;
  double k_bar_x = 1.0;

  void validate() const;
  // The base model with individual i's maps.
  StateSpaceModel individual(int i) const;
};

// Individual i's sub-seed.
std::uint64_t panel_path_seed(std::uint64_t seed, int individual);

std::vector<PathPair> simulate_panel(const PanelModel& panel, const ParamVector& theta,
                                     const TimeGrid& grid, std::uint64_t seed, int threads = 1);

// Throws invalid-argument when the paths do not share one grid.
std::vector<SuffStats> panel_suff_stats(const std::vector<PathPair>& paths,
                                        const StateSpaceModel& base, int threads = 1);

// Sum of per-individual approx_loglik with w_i recovered as I_{Y,X,i} / sqrt(K_Y).
double pooled_loglik_approx(const ParamVector& theta, const ParamVector& theta0,
                            const std::vector<SuffStats>& stats, const PanelModel& panel);

// Sum of per-individual Monte-Carlo marginal log-likelihoods.
double pooled_loglik_mc(const ParamVector& theta, const std::vector<MarginalLikelihood>& parts);

// Maximises bar g with the averaged w_bar_i; information scaled by n (b_T - a_T).
FitResult pooled_fit_mle(const std::vector<SuffStats>& stats, const PanelModel& panel,
                         const ParamVector& theta_init, const FitOptions& opts = {},
                         const std::optional<ParamVector>& anchor = std::nullopt);

double bar_h(const ParamVector& theta, const ParamVector& theta0, const ParamMaps& limit_maps,
             double k_bar_y, double k_bar_x);

// Vector-drift extension: b_Y(y, x, t) in R^{r_Y}, b_X(x, t) in R^{r_X}.
using VectorObservationFn = std::function<Eigen::VectorXd(double y, double x, double t)>;
using VectorLatentFn = std::function<Eigen::VectorXd(double x, double t)>;

struct VectorDriftModel {
  VectorObservationFn b_y;
  ObservationFn sigma_y;
  VectorLatentFn b_x;
  LatentFn sigma_x;
};

struct VectorSuffStats {
  Eigen::VectorXd u_y;
  Eigen::MatrixXd v_y;
  Eigen::VectorXd u_x;
  Eigen::MatrixXd v_x;
  double min_eigenvalue_y = 0.0;
  double min_eigenvalue_x = 0.0;
  // Both v matrices have minimum eigenvalue above 1e-10.
  bool positive_definite = false;
};

inline constexpr double pd_threshold = 1e-10;

VectorSuffStats suff_stats_multidim(const PathPair& path, const VectorDriftModel& model);

double loglik_multidim(const Eigen::VectorXd& phi_y, const Eigen::VectorXd& phi_x,
                       const VectorSuffStats& stats);

// Vector-valued map theta -> R^r with its r x d Jacobian.
struct VectorMap {
  int dim = 1;
  int r = 1;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> value;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
};

// I_jk = (d_j bar psi_Y)^T K (d_k bar psi_Y); K must be symmetric positive definite.
Eigen::MatrixXd pooled_fisher_multidim(const ParamVector& theta, const VectorMap& limit_psi_y,
                                       const Eigen::MatrixXd& k_bar_y);

nlohmann::json to_json(const VectorSuffStats& stats);

}  // namespace ssde
