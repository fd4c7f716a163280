#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ssde {

// Parameter coordinates theta_1..theta_d. Entries are always finite.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(Eigen::VectorXd values);
  ParamVector(std::initializer_list<double> values);

  Eigen::Index size() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_[i]; }
  const Eigen::VectorXd& values() const { return values_; }

  // Throws invalid-argument naming `where` on a dimension mismatch.
  void require_dim(Eigen::Index d, std::string_view where) const;

 private:
  Eigen::VectorXd values_;
};

using ScalarMap = std::function<double(const Eigen::VectorXd&)>;
using GradientMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using HessianMap = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

enum class DerivativeMode { closed_form, finite_difference };

// The drift multipliers phi_Y = psi_y(theta), phi_X = psi_x(theta) and their
// derivatives. In finite-difference mode the derivative members are unused.
struct ParamMaps {
  int dim = 1;
  ScalarMap psi_y;
  ScalarMap psi_x;
  GradientMap grad_psi_y;
  GradientMap grad_psi_x;
  HessianMap hess_psi_y;
  HessianMap hess_psi_x;
  DerivativeMode mode = DerivativeMode::finite_difference;

  static ParamMaps closed_form(int dim, ScalarMap psi_y, GradientMap grad_psi_y,
                               HessianMap hess_psi_y, ScalarMap psi_x,
                               GradientMap grad_psi_x, HessianMap hess_psi_x);
  static ParamMaps finite_difference(int dim, ScalarMap psi_y, ScalarMap psi_x);

  // psi(theta) = offset + coeffs . theta for both maps.
  static ParamMaps affine(const Eigen::VectorXd& coeff_y, double offset_y,
                          const Eigen::VectorXd& coeff_x, double offset_x);
};

struct MapValues {
  double phi_y = 0.0;
  double phi_x = 0.0;
};

struct MapEvaluation {
  double phi_y = 0.0;
  double phi_x = 0.0;
  Eigen::VectorXd grad_y;
  Eigen::VectorXd grad_x;
  Eigen::MatrixXd hess_y;
  Eigen::MatrixXd hess_x;
};

// Central-difference step for coordinate value v.
inline double fd_step(double v) { return 1e-5 * std::max(1.0, std::abs(v)); }

Eigen::VectorXd fd_gradient(const ScalarMap& f, const Eigen::VectorXd& theta);
Eigen::MatrixXd fd_hessian(const ScalarMap& f, const Eigen::VectorXd& theta);

// Values only; cheaper than eval_maps when no derivatives are needed.
MapValues map_values(const ParamMaps& maps, const ParamVector& theta);
MapEvaluation eval_maps(const ParamMaps& maps, const ParamVector& theta);

using ObservationFn = std::function<double(double y, double x, double t)>;
using LatentFn = std::function<double(double x, double t)>;

// Limiting constants of the drift-to-diffusion ratio bounds.
struct RatioBounds {
  double k_y = 1.0;
  double k_x = 1.0;
  double alpha_y1 = 0.0;
  double alpha_y2 = 0.0;
  double alpha_x1 = 0.0;
  double alpha_x2 = 0.0;
};

// dY = phi_Y b_y(Y,X,t) dt + sigma_y(Y,X,t) dW_Y
// dX = phi_X b_x(X,t)   dt + sigma_x(X,t)   dW_X
struct StateSpaceModel {
  ObservationFn b_y;
  ObservationFn sigma_y;
  LatentFn b_x;
  LatentFn sigma_x;
  ParamMaps maps;
  std::optional<RatioBounds> ratio_bounds;
  double y0 = 0.0;
  double x0 = 0.0;

  // Checks b_x(0,t) = sigma_x(0,t) = 0 on a handful of times and K_Y, K_X > 0.
  void validate() const;
  const RatioBounds& require_ratio_bounds(std::string_view where) const;
};

struct ObservationWindow {
  double T = 1.0;
  double a = 0.0;
  double b = 1.0;

  double length() const { return b - a; }
};

// a_T = ln(1 + T), b_T = a_T + T.
ObservationWindow make_window(double T);

struct GrowthBox {
  double y_lo = -10.0, y_hi = 10.0;
  double x_lo = -10.0, x_hi = 10.0;
  double t_lo = 0.0, t_hi = 100.0;
};

struct BoundViolation {
  double y = 0.0, x = 0.0, t = 0.0;
  std::string kind;
  double value = 0.0;
  double bound = 0.0;
};

struct GrowthReport {
  double max_drift_growth = 0.0;      // max b_Y^2 / (1 + y^2)
  double max_diffusion_growth = 0.0;  // max sigma_Y^2 / (1 + y^2)
  bool observation_ratio_ok = true;
  bool latent_ratio_ok = true;
  std::vector<BoundViolation> violations;

  bool ok() const { return observation_ratio_ok && latent_ratio_ok; }
};

// Samples (y, x, t) uniformly in the box and checks the two-sided ratio
// bounds on b_Y^2/sigma_Y^2 and b_X^2/sigma_X^2 at every sample.
GrowthReport check_growth_bounds(const StateSpaceModel& model, const GrowthBox& box,
                                 int n_samples, std::uint64_t seed);

}  // namespace ssde
