#include "ssde/mle.hpp"

#include "ssde/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ssde {

Box Box::around(const ParamVector& center, double half_width) {
  require(half_width > 0.0, ErrorKind::invalid_argument, "Box: half width must be positive");
  const Eigen::VectorXd c = center.values();
  return {c.array() - half_width, c.array() + half_width};
}

bool Box::contains(const Eigen::VectorXd& theta) const {
  if (theta.size() != lo.size()) return false;
  return (theta.array() >= lo.array()).all() && (theta.array() <= hi.array()).all();
}

Eigen::VectorXd Box::project(const Eigen::VectorXd& theta) const {
  return theta.cwiseMax(lo).cwiseMin(hi);
}

double g_objective(const ParamVector& theta, const ParamVector& theta0_ref, const ParamMaps& maps,
                   double k_y, double k_x, double w_bar) {
  const MapValues p = map_values(maps, theta);
  const MapValues p0 = map_values(maps, theta0_ref);
  const double dy = p.phi_y - p0.phi_y;
  const double dx = p.phi_x - p0.phi_x;
  const double g_y = -k_y / 2.0 * dy * dy + std::sqrt(k_y) * dy * w_bar;
  const double g_x = -k_x / 2.0 * dx * dx + k_x / 2.0 * (p.phi_x * p.phi_x - p0.phi_x * p0.phi_x);
  return g_y + g_x;
}

Eigen::VectorXd g_gradient(const ParamVector& theta, const ParamVector& theta0_ref,
                           const ParamMaps& maps, double k_y, double k_x, double w_bar) {
  const MapEvaluation e = eval_maps(maps, theta);
  const MapValues p0 = map_values(maps, theta0_ref);
  return -k_y * (e.phi_y - p0.phi_y) * e.grad_y - k_x * (e.phi_x - p0.phi_x) * e.grad_x +
         k_x * e.phi_x * e.grad_x + std::sqrt(k_y) * w_bar * e.grad_y;
}

Eigen::MatrixXd g_hessian(const ParamVector& theta, const ParamVector& theta0_ref,
                          const ParamMaps& maps, double k_y, double k_x, double w_bar) {
  const MapEvaluation e = eval_maps(maps, theta);
  const MapValues p0 = map_values(maps, theta0_ref);
  const Eigen::MatrixXd gy = e.grad_y * e.grad_y.transpose();
  const Eigen::MatrixXd gx = e.grad_x * e.grad_x.transpose();
  Eigen::MatrixXd h = -k_y * (gy + (e.phi_y - p0.phi_y) * e.hess_y) -
                      k_x * (gx + (e.phi_x - p0.phi_x) * e.hess_x) +
                      k_x * (gx + e.phi_x * e.hess_x) + std::sqrt(k_y) * w_bar * e.hess_y;
  return 0.5 * (h + h.transpose());
}

FisherInfo fisher_info(const ParamVector& theta, const ParamMaps& maps, double k_y) {
  const MapEvaluation e = eval_maps(maps, theta);
  const Eigen::Index d = e.grad_y.size();
  FisherInfo out;
  out.matrix.resize(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = 0; k < d; ++k) out.matrix(j, k) = e.grad_y[j] * (k_y * e.grad_y[k]);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.matrix, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  out.positive_definite = out.min_eigenvalue > 0.0;
  return out;
}

double w_bar_from_stats(const SuffStats& stats, const ParamVector& anchor, const ParamMaps& maps,
                        double k_y) {
  const double phi0 = map_values(maps, anchor).phi_y;
  return (stats.u_y_given_x - phi0 * stats.v_y_given_x) /
         (std::sqrt(k_y) * stats.window.length());
}

Eigen::MatrixXd inverse_or_identity(const Eigen::MatrixXd& m, bool* fell_back) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  const bool ok = m.allFinite() && lu.isInvertible();
  if (fell_back) *fell_back = !ok;
  if (!ok) return Eigen::MatrixXd::Identity(m.rows(), m.cols());
  const Eigen::MatrixXd inv = lu.inverse();
  return 0.5 * (inv + inv.transpose());
}

namespace {

// Max-norm of the gradient after removing components that push against an
// active bound.
double projected_grad_norm(const Eigen::VectorXd& theta, const Eigen::VectorXd& grad,
                           const Box& box) {
  double norm = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    double g = grad[i];
    if (theta[i] <= box.lo[i] && g < 0.0) g = 0.0;
    if (theta[i] >= box.hi[i] && g > 0.0) g = 0.0;
    norm = std::max(norm, std::abs(g));
  }
  return norm;
}

bool negative_definite(const Eigen::MatrixXd& h) {
  if (!h.allFinite()) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(-h);
  return llt.info() == Eigen::Success;
}

}  // namespace

FitResult maximize(const Objective& objective, const ParamVector& theta_init,
                   const FitOptions& opts) {
  const Box box = opts.box ? *opts.box : Box::around(theta_init, opts.box_half_width);
  require(box.contains(theta_init.values()), ErrorKind::invalid_argument,
          "fit: theta_init lies outside the parameter box");
  require(opts.tol > 0.0 && opts.max_iter >= 0, ErrorKind::invalid_argument,
          "fit: tol must be positive and max_iter non-negative");

  FitResult out;
  Eigen::VectorXd theta = theta_init.values();
  double f = objective.value(theta);
  require(std::isfinite(f), ErrorKind::numeric_domain, "fit: objective not finite at theta_init");
  Eigen::VectorXd grad = objective.gradient(theta);
  out.grad_norm = projected_grad_norm(theta, grad, box);

  while (out.grad_norm > opts.tol && out.iterations < opts.max_iter) {
    ++out.iterations;
    const Eigen::MatrixXd hess = objective.hessian(theta);
    Eigen::VectorXd dir;
    if (negative_definite(hess)) {
      dir = (-hess).llt().solve(grad);
    } else {
      ++out.gradient_fallbacks;
      dir = grad;
    }

    double step = 1.0;
    Eigen::VectorXd next = box.project(theta + dir);
    double f_next = objective.value(next);
    if (opts.line_search) {
      for (int k = 0; k < 60; ++k) {
        const double gain = grad.dot(next - theta);
        if (std::isfinite(f_next) && f_next >= f + 1e-4 * gain) break;
        step *= 0.5;
        next = box.project(theta + step * dir);
        f_next = objective.value(next);
      }
    }
    if (!std::isfinite(f_next) || (opts.line_search && f_next < f)) break;
    const bool stalled = (next - theta).cwiseAbs().maxCoeff() == 0.0;
    theta = next;
    f = f_next;
    grad = objective.gradient(theta);
    out.grad_norm = projected_grad_norm(theta, grad, box);
    if (stalled) break;
  }
  out.converged = out.grad_norm <= opts.tol;
  out.theta_hat = ParamVector(theta);
  out.objective_at_opt = f;
  return out;
}

FitResult fit_mle(const SuffStats& stats, const StateSpaceModel& model,
                  const ParamVector& theta_init, const FitOptions& opts,
                  const std::optional<ParamVector>& anchor) {
  const RatioBounds& rb = model.require_ratio_bounds("fit_mle");
  theta_init.require_dim(model.maps.dim, "fit_mle");
  const ParamVector ref = anchor ? *anchor : theta_init;
  const double w_bar = w_bar_from_stats(stats, ref, model.maps, rb.k_y);
  const ParamMaps& maps = model.maps;
  Objective obj{
      [&](const Eigen::VectorXd& th) {
        return g_objective(ParamVector(th), ref, maps, rb.k_y, rb.k_x, w_bar);
      },
      [&](const Eigen::VectorXd& th) {
        return g_gradient(ParamVector(th), ref, maps, rb.k_y, rb.k_x, w_bar);
      },
      [&](const Eigen::VectorXd& th) {
        return g_hessian(ParamVector(th), ref, maps, rb.k_y, rb.k_x, w_bar);
      }};
  FitResult fit = maximize(obj, theta_init, opts);
  const Eigen::MatrixXd info =
      -g_hessian(fit.theta_hat, ref, maps, rb.k_y, rb.k_x, w_bar) * stats.window.length();
  bool fell_back = false;
  inverse_or_identity(info, &fell_back);
  fit.sigma_inv = fell_back ? Eigen::MatrixXd::Identity(info.rows(), info.cols()) : info;
  fit.sigma_inv_fallback = fell_back;
  return fit;
}

FitResult fit_mle_exact(const MarginalLikelihood& likelihood, const ParamVector& theta_init,
                        const FitOptions& opts) {
  theta_init.require_dim(likelihood.maps().dim, "fit_mle_exact");
  const double len = likelihood.window().length();
  Objective obj{
      [&](const Eigen::VectorXd& th) { return likelihood.evaluate(ParamVector(th)).estimate / len; },
      [&](const Eigen::VectorXd& th) {
        return Eigen::VectorXd(likelihood.derivatives(ParamVector(th)).gradient / len);
      },
      [&](const Eigen::VectorXd& th) {
        return Eigen::MatrixXd(likelihood.derivatives(ParamVector(th)).hessian / len);
      }};
  FitResult fit = maximize(obj, theta_init, opts);
  const Eigen::MatrixXd info = -likelihood.derivatives(fit.theta_hat).hessian;
  bool fell_back = false;
  inverse_or_identity(info, &fell_back);
  fit.sigma_inv = fell_back ? Eigen::MatrixXd::Identity(info.rows(), info.cols()) : info;
  fit.sigma_inv_fallback = fell_back;
  return fit;
}

Eigen::VectorXd clt_standardize(const FitResult& fit, const ParamVector& theta0,
                                const ObservationWindow& window, double scale) {
  require(fit.converged, ErrorKind::precondition_violation,
          "clt_standardize: fit did not converge");
  theta0.require_dim(fit.theta_hat.size(), "clt_standardize");
  return std::sqrt(scale * window.length()) * (fit.theta_hat.values() - theta0.values());
}

nlohmann::json to_json(const FitResult& fit) {
  nlohmann::json j;
  j["theta_hat"] = std::vector<double>(fit.theta_hat.values().begin(), fit.theta_hat.values().end());
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < fit.sigma_inv.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(fit.sigma_inv.cols()));
    for (Eigen::Index c = 0; c < fit.sigma_inv.cols(); ++c) row[c] = fit.sigma_inv(r, c);
    rows.push_back(row);
  }
  j["sigma_inv"] = rows;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["objective"] = fit.objective_at_opt;
  j["clt_stat"] = std::vector<double>(fit.clt_stat.begin(), fit.clt_stat.end());
  j["gradient_fallbacks"] = fit.gradient_fallbacks;
  return j;
}

}  // namespace ssde
