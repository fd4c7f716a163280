#include "ssde/model.hpp"

#include "ssde/errors.hpp"
#include "ssde/rng.hpp"

#include <cmath>
#include <sstream>

namespace ssde {

ParamVector::ParamVector(Eigen::VectorXd values) : values_(std::move(values)) {
  require(values_.size() >= 1, ErrorKind::invalid_argument,
          "parameter vector must have dimension >= 1");
  require(values_.allFinite(), ErrorKind::invalid_argument,
          "parameter vector has a non-finite entry");
}

ParamVector::ParamVector(std::initializer_list<double> values)
    : ParamVector(Eigen::Map<const Eigen::VectorXd>(values.begin(),
                                                    static_cast<Eigen::Index>(values.size()))) {}

void ParamVector::require_dim(Eigen::Index d, std::string_view where) const {
  if (values_.size() != d) {
    std::ostringstream os;
    os << where << ": parameter dimension " << values_.size() << " != expected " << d;
    fail(ErrorKind::invalid_argument, os.str());
  }
}

ParamMaps ParamMaps::closed_form(int dim, ScalarMap psi_y, GradientMap grad_psi_y,
                                 HessianMap hess_psi_y, ScalarMap psi_x,
                                 GradientMap grad_psi_x, HessianMap hess_psi_x) {
  ParamMaps maps;
  maps.dim = dim;
  maps.psi_y = std::move(psi_y);
  maps.grad_psi_y = std::move(grad_psi_y);
  maps.hess_psi_y = std::move(hess_psi_y);
  maps.psi_x = std::move(psi_x);
  maps.grad_psi_x = std::move(grad_psi_x);
  maps.hess_psi_x = std::move(hess_psi_x);
  maps.mode = DerivativeMode::closed_form;
  return maps;
}

ParamMaps ParamMaps::finite_difference(int dim, ScalarMap psi_y, ScalarMap psi_x) {
  ParamMaps maps;
  maps.dim = dim;
  maps.psi_y = std::move(psi_y);
  maps.psi_x = std::move(psi_x);
  maps.mode = DerivativeMode::finite_difference;
  return maps;
}

ParamMaps ParamMaps::affine(const Eigen::VectorXd& coeff_y, double offset_y,
                            const Eigen::VectorXd& coeff_x, double offset_x) {
  require(coeff_y.size() == coeff_x.size() && coeff_y.size() >= 1,
          ErrorKind::invalid_argument, "affine maps need equal, non-zero dimensions");
  const auto d = static_cast<int>(coeff_y.size());
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(d, d);
  return closed_form(
      d, [=](const Eigen::VectorXd& th) { return offset_y + coeff_y.dot(th); },
      [=](const Eigen::VectorXd&) { return coeff_y; },
      [=](const Eigen::VectorXd&) { return zero; },
      [=](const Eigen::VectorXd& th) { return offset_x + coeff_x.dot(th); },
      [=](const Eigen::VectorXd&) { return coeff_x; },
      [=](const Eigen::VectorXd&) { return zero; });
}

Eigen::VectorXd fd_gradient(const ScalarMap& f, const Eigen::VectorXd& theta) {
  Eigen::VectorXd grad(theta.size());
  Eigen::VectorXd probe = theta;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double h = fd_step(theta[k]);
    probe[k] = theta[k] + h;
    const double up = f(probe);
    probe[k] = theta[k] - h;
    const double down = f(probe);
    probe[k] = theta[k];
    grad[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

Eigen::MatrixXd fd_hessian(const ScalarMap& f, const Eigen::VectorXd& theta) {
  const Eigen::Index d = theta.size();
  Eigen::MatrixXd hess(d, d);
  Eigen::VectorXd probe = theta;
  const double center = f(theta);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double hj = fd_step(theta[j]);
    probe[j] = theta[j] + hj;
    const double up = f(probe);
    probe[j] = theta[j] - hj;
    const double down = f(probe);
    probe[j] = theta[j];
    hess(j, j) = (up - 2.0 * center + down) / (hj * hj);
    for (Eigen::Index k = j + 1; k < d; ++k) {
      const double hk = fd_step(theta[k]);
      auto at = [&](double sj, double sk) {
        probe[j] = theta[j] + sj * hj;
        probe[k] = theta[k] + sk * hk;
        const double value = f(probe);
        probe[j] = theta[j];
        probe[k] = theta[k];
        return value;
      };
      const double value =
          (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * hj * hk);
      hess(j, k) = value;
      hess(k, j) = value;
    }
  }
  return hess;
}

namespace {

double checked(double value, const char* name) {
  if (!std::isfinite(value)) {
    fail(ErrorKind::numeric_domain, std::string("map ") + name + " returned a non-finite value");
  }
  return value;
}

void check_finite(const Eigen::MatrixXd& m, const char* name) {
  if (!m.allFinite()) {
    fail(ErrorKind::numeric_domain, std::string("map ") + name + " has non-finite derivatives");
  }
}

}  // namespace

MapValues map_values(const ParamMaps& maps, const ParamVector& theta) {
  theta.require_dim(maps.dim, "map evaluation");
  return {checked(maps.psi_y(theta.values()), "psi_y"),
          checked(maps.psi_x(theta.values()), "psi_x")};
}

MapEvaluation eval_maps(const ParamMaps& maps, const ParamVector& theta) {
  const MapValues values = map_values(maps, theta);
  MapEvaluation out;
  out.phi_y = values.phi_y;
  out.phi_x = values.phi_x;
  const Eigen::VectorXd& th = theta.values();
  if (maps.mode == DerivativeMode::closed_form) {
    out.grad_y = maps.grad_psi_y(th);
    out.grad_x = maps.grad_psi_x(th);
    out.hess_y = maps.hess_psi_y(th);
    out.hess_x = maps.hess_psi_x(th);
  } else {
    out.grad_y = fd_gradient(maps.psi_y, th);
    out.grad_x = fd_gradient(maps.psi_x, th);
    out.hess_y = fd_hessian(maps.psi_y, th);
    out.hess_x = fd_hessian(maps.psi_x, th);
  }
  check_finite(out.grad_y, "psi_y");
  check_finite(out.grad_x, "psi_x");
  check_finite(out.hess_y, "psi_y");
  check_finite(out.hess_x, "psi_x");
  out.hess_y = 0.5 * (out.hess_y + out.hess_y.transpose()).eval();
  out.hess_x = 0.5 * (out.hess_x + out.hess_x.transpose()).eval();
  return out;
}

void StateSpaceModel::validate() const {
  require(b_y && sigma_y && b_x && sigma_x && maps.psi_y && maps.psi_x,
          ErrorKind::invalid_argument, "model has an unset drift, diffusion or map");
  for (double t : {0.0, 0.5, 1.0, 10.0, 100.0}) {
    if (b_x(0.0, t) != 0.0 || sigma_x(0.0, t) != 0.0) {
      std::ostringstream os;
      os << "latent drift and diffusion must vanish at x = 0 (failed at t = " << t << ")";
      fail(ErrorKind::invalid_argument, os.str());
    }
  }
  if (ratio_bounds) {
    require(ratio_bounds->k_y > 0.0 && ratio_bounds->k_x > 0.0,
            ErrorKind::invalid_argument, "ratio bounds need K_Y > 0 and K_X > 0");
    const RatioBounds& r = *ratio_bounds;
    require(r.alpha_y1 >= 0.0 && r.alpha_y2 >= 0.0 && r.alpha_x1 >= 0.0 && r.alpha_x2 >= 0.0,
            ErrorKind::invalid_argument, "ratio-bound exponents must be non-negative");
  }
}

const RatioBounds& StateSpaceModel::require_ratio_bounds(std::string_view where) const {
  if (!ratio_bounds) {
    fail(ErrorKind::precondition_violation,
         std::string(where) + " needs ratio bounds (K_Y, K_X) on the model");
  }
  return *ratio_bounds;
}

ObservationWindow make_window(double T) {
  if (!(T > 0.0) || !std::isfinite(T)) {
    fail(ErrorKind::invalid_argument, "observation horizon T must be positive and finite");
  }
  const double a = std::log1p(T);
  return {T, a, a + T};
}

namespace {

// Inclusive comparison with a relative slack for rounding in ratios that are
// algebraically constant.
bool within_upper(double value, double bound) {
  return value <= bound + 1e-12 * std::max(1.0, std::abs(bound));
}

bool within_lower(double value, double bound) {
  return value >= bound - 1e-12 * std::max(1.0, std::abs(bound));
}

}  // namespace

GrowthReport check_growth_bounds(const StateSpaceModel& model, const GrowthBox& box,
                                 int n_samples, std::uint64_t seed) {
  const RatioBounds& rb = model.require_ratio_bounds("check_growth_bounds");
  require(n_samples >= 1, ErrorKind::precondition_violation, "n_samples must be >= 1");
  const CounterRng draw_y(seed, 11), draw_x(seed, 12), draw_t(seed, 13);

  GrowthReport report;
  for (int i = 0; i < n_samples; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    const double y = box.y_lo + (box.y_hi - box.y_lo) * draw_y.uniform(idx);
    const double x = box.x_lo + (box.x_hi - box.x_lo) * draw_x.uniform(idx);
    const double t = box.t_lo + (box.t_hi - box.t_lo) * draw_t.uniform(idx);

    const double by = model.b_y(y, x, t);
    const double sy = model.sigma_y(y, x, t);
    report.max_drift_growth = std::max(report.max_drift_growth, by * by / (1.0 + y * y));
    report.max_diffusion_growth = std::max(report.max_diffusion_growth, sy * sy / (1.0 + y * y));

    auto flag = [&](bool& ok_flag, const char* kind, double value, double bound) {
      ok_flag = false;
      report.violations.push_back({y, x, t, kind, value, bound});
    };

    if (!(sy > 0.0)) {
      flag(report.observation_ratio_ok, "sigma_y_nonpositive", sy, 0.0);
    } else {
      const double ratio = by * by / (sy * sy);
      const double lower = rb.k_y * (1.0 - rb.alpha_y1 * x * x);
      const double upper = rb.k_y * (1.0 + rb.alpha_y2 * x * x);
      if (!within_lower(ratio, lower)) flag(report.observation_ratio_ok, "observation_lower", ratio, lower);
      if (!within_upper(ratio, upper)) flag(report.observation_ratio_ok, "observation_upper", ratio, upper);
    }

    if (x == 0.0) continue;
    const double bx = model.b_x(x, t);
    const double sx = model.sigma_x(x, t);
    if (sx == 0.0) {
      flag(report.latent_ratio_ok, "latent_sigma_zero", sx, 0.0);
      continue;
    }
    const double ratio = bx * bx / (sx * sx);
    const double lower = rb.k_x * (1.0 - rb.alpha_x1 * x * x);
    const double upper = rb.k_x * (1.0 + rb.alpha_x2 * x * x);
    if (!within_lower(ratio, lower)) flag(report.latent_ratio_ok, "latent_lower", ratio, lower);
    if (!within_upper(ratio, upper)) flag(report.latent_ratio_ok, "latent_upper", ratio, upper);
  }
  return report;
}

}  // namespace ssde
