#include "ssde/likelihood.hpp"

#include "ssde/errors.hpp"
#include "ssde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ssde {

SuffStats suff_stats_discrete(const TimeGrid& grid, std::span<const double> y,
                              std::span<const double> x, const StateSpaceModel& model) {
  const auto nodes = static_cast<std::size_t>(grid.m) + 1;
  require(y.size() == nodes && x.size() == nodes, ErrorKind::invalid_argument,
          "suff_stats_discrete: path length does not match the grid");
  SuffStats s;
  s.window = grid.window;
  s.m = grid.m;
  for (int k = 0; k < grid.m; ++k) {
    const double t = grid.t[k];
    const double dt = grid.t[k + 1] - t;
    const double sy = model.sigma_y(y[k], x[k], t);
    const double sx = model.sigma_x(x[k], t);
    if (sy == 0.0) fail(ErrorKind::division_guard, "sigma_Y vanishes at node " + std::to_string(k), k);
    if (sx == 0.0) fail(ErrorKind::division_guard, "sigma_X vanishes at node " + std::to_string(k), k);
    const double by = model.b_y(y[k], x[k], t);
    const double bx = model.b_x(x[k], t);
    const double ry = by / (sy * sy);
    const double rx = bx / (sx * sx);
    s.u_y_given_x += ry * (y[k + 1] - y[k]);
    s.v_y_given_x += (by * ry) * dt;
    s.u_x += rx * (x[k + 1] - x[k]);
    s.v_x += (bx * rx) * dt;
  }
  return s;
}

SuffStats suff_stats_discrete(const PathPair& path, const StateSpaceModel& model) {
  return suff_stats_discrete(path.grid, path.y, path.x, model);
}

ResidualStats residual_stats(const SuffStats& stats, const ParamVector& theta0,
                             const ParamMaps& maps) {
  const MapValues phi0 = map_values(maps, theta0);
  return {stats.u_y_given_x - phi0.phi_y * stats.v_y_given_x,
          stats.u_x - phi0.phi_x * stats.v_x};
}

double cond_loglik(double phi_y, double phi_x, const SuffStats& stats) {
  return girsanov_exponent(phi_y, stats.u_y_given_x, stats.v_y_given_x) +
         girsanov_exponent(phi_x, stats.u_x, stats.v_x);
}

double cond_loglik(const ParamVector& theta, const SuffStats& stats, const ParamMaps& maps) {
  const MapValues phi = map_values(maps, theta);
  return cond_loglik(phi.phi_y, phi.phi_x, stats);
}

McEstimate log_mean_exp(std::span<const double> log_weights) {
  require(!log_weights.empty(), ErrorKind::invalid_argument, "log_mean_exp: no weights");
  double top = -std::numeric_limits<double>::infinity();
  for (double w : log_weights) {
    if (std::isnan(w)) fail(ErrorKind::degenerate_weights, "log_mean_exp: NaN weight");
    top = std::max(top, w);
  }
  if (!std::isfinite(top)) {
    fail(ErrorKind::degenerate_weights,
         top > 0 ? "log_mean_exp: infinite weight" : "log_mean_exp: all weights underflow");
  }
  const auto n = static_cast<double>(log_weights.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double w : log_weights) {
    const double e = std::exp(w - top);
    sum += e;
    sum_sq += e * e;
  }
  const double mean = sum / n;
  McEstimate out;
  out.estimate = top + std::log(mean);
  if (log_weights.size() > 1) {
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    out.std_error = std::sqrt(var / n) / mean;
  }
  return out;
}

MarginalLikelihood::MarginalLikelihood(const PathPair& observed, const StateSpaceModel& model,
                                       int n_latent, std::uint64_t seed, int threads)
    : window_(observed.grid.window), maps_(model.maps) {
  require(n_latent >= 2, ErrorKind::invalid_argument, "marginal likelihood: n_latent must be >= 2");
  const TimeGrid& grid = observed.grid;
  draws_.resize(static_cast<std::size_t>(n_latent));
  parallel_for(draws_.size(), threads, [&](std::size_t i) {
    const auto x = simulate_latent(model, 0.0, grid, latent_path_seed(seed, i), LatentDrift::null);
    draws_[i] = suff_stats_discrete(grid, observed.y, x, model);
  });
}

McEstimate MarginalLikelihood::evaluate_phi(double phi_y, double phi_x) const {
  std::vector<double> lw(draws_.size());
  for (std::size_t i = 0; i < draws_.size(); ++i) lw[i] = cond_loglik(phi_y, phi_x, draws_[i]);
  return log_mean_exp(lw);
}

McEstimate MarginalLikelihood::evaluate(const ParamVector& theta) const {
  const MapValues phi = map_values(maps_, theta);
  return evaluate_phi(phi.phi_y, phi.phi_x);
}

LoglikDerivatives MarginalLikelihood::derivatives(const ParamVector& theta) const {
  const MapEvaluation ev = eval_maps(maps_, theta);
  const std::size_t n = draws_.size();
  std::vector<double> lw(n);
  for (std::size_t i = 0; i < n; ++i) lw[i] = cond_loglik(ev.phi_y, ev.phi_x, draws_[i]);
  const McEstimate lme = log_mean_exp(lw);
  const double top = *std::max_element(lw.begin(), lw.end());

  // Self-normalised moments of the per-draw scores in (phi_Y, phi_X).
  double wsum = 0.0;
  Eigen::Vector2d mean_score = Eigen::Vector2d::Zero();
  Eigen::Matrix2d mean_outer = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d mean_curv = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::exp(lw[i] - top);
    const SuffStats& s = draws_[i];
    const Eigen::Vector2d score(s.u_y_given_x - ev.phi_y * s.v_y_given_x,
                                s.u_x - ev.phi_x * s.v_x);
    wsum += w;
    mean_score += w * score;
    mean_outer += w * score * score.transpose();
    mean_curv(0, 0) -= w * s.v_y_given_x;
    mean_curv(1, 1) -= w * s.v_x;
  }
  mean_score /= wsum;
  mean_outer /= wsum;
  mean_curv /= wsum;
  const Eigen::Matrix2d phi_hess = mean_curv + mean_outer - mean_score * mean_score.transpose();

  const Eigen::Index d = ev.grad_y.size();
  Eigen::MatrixXd jac(2, d);
  jac.row(0) = ev.grad_y.transpose();
  jac.row(1) = ev.grad_x.transpose();
  LoglikDerivatives out;
  out.value = lme.estimate;
  out.gradient = jac.transpose() * mean_score;
  out.hessian = jac.transpose() * phi_hess * jac + mean_score[0] * ev.hess_y +
                mean_score[1] * ev.hess_x;
  out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
  return out;
}

McEstimate marginal_loglik_mc(const ParamVector& theta, const PathPair& observed,
                              const StateSpaceModel& model, int n_latent, std::uint64_t seed,
                              int threads) {
  return MarginalLikelihood(observed, model, n_latent, seed, threads).evaluate(theta);
}

double approx_loglik(const ParamVector& theta, const ParamVector& theta0,
                     const StateSpaceModel& model, const ObservationWindow& window,
                     double w_y_increment) {
  const RatioBounds& rb = model.require_ratio_bounds("approx_loglik");
  const MapValues phi = map_values(model.maps, theta);
  const MapValues phi0 = map_values(model.maps, theta0);
  const double len = window.length();
  return len * rb.k_y * phi.phi_y * phi0.phi_y + phi.phi_y * std::sqrt(rb.k_y) * w_y_increment -
         len * rb.k_y * phi.phi_y * phi.phi_y / 2.0 + len * rb.k_x * phi.phi_x * phi0.phi_x;
}

double approx_true_loglik(const ParamVector& theta0, const StateSpaceModel& model,
                          const ObservationWindow& window, double w_y_increment) {
  return approx_loglik(theta0, theta0, model, window, w_y_increment);
}

namespace {

struct Band {
  double lo = 0.0;
  double hi = 0.0;
  bool clamped = false;
};

Band k_band(double k, double a1, double a2, double len, double xi, double lambda_sq) {
  const double spread = xi * xi * lambda_sq;
  Band b{k * (len - a1 * spread), k * (len + a2 * spread), false};
  if (b.lo < 0.0) {
    b.lo = 0.0;
    b.clamped = true;
  }
  return b;
}

void add_term(LikBounds& out, double phi, double phi0, double resid, const Band& k) {
  const double cross_lo = std::min(phi * phi0 * k.lo, phi * phi0 * k.hi);
  const double cross_hi = std::max(phi * phi0 * k.lo, phi * phi0 * k.hi);
  out.lower += cross_lo + phi * resid - phi * phi / 2.0 * k.hi;
  out.upper += cross_hi + phi * resid - phi * phi / 2.0 * k.lo;
}

}  // namespace

LikBounds likelihood_log_bounds(const ParamVector& theta, const ParamVector& theta0,
                                const StateSpaceModel& model, const ObservationWindow& window,
                                double xi, double lambda_sq_integral,
                                const ResidualStats& residuals) {
  const RatioBounds& rb = model.require_ratio_bounds("likelihood_log_bounds");
  require(xi >= 0.0 && std::isfinite(xi), ErrorKind::invalid_argument,
          "likelihood_log_bounds: xi must be finite and non-negative");
  require(lambda_sq_integral >= 0.0 && std::isfinite(lambda_sq_integral),
          ErrorKind::invalid_argument,
          "likelihood_log_bounds: lambda integral must be finite and non-negative");
  const MapValues phi = map_values(model.maps, theta);
  const MapValues phi0 = map_values(model.maps, theta0);
  const double len = window.length();
  const Band ky = k_band(rb.k_y, rb.alpha_y1, rb.alpha_y2, len, xi, lambda_sq_integral);
  const Band kx = k_band(rb.k_x, rb.alpha_x1, rb.alpha_x2, len, xi, lambda_sq_integral);
  LikBounds out;
  add_term(out, phi.phi_y, phi0.phi_y, residuals.i_yx, ky);
  add_term(out, phi.phi_x, phi0.phi_x, residuals.i_x, kx);
  out.envelope_too_loose = ky.clamped || kx.clamped;
  return out;
}

double kl_rate_h(const ParamVector& theta, const ParamVector& theta0, const ParamMaps& maps,
                 double k_y, double k_x) {
  require(k_y > 0.0 && k_x > 0.0, ErrorKind::invalid_argument,
          "kl_rate_h: K_Y and K_X must be positive");
  const MapValues p = map_values(maps, theta);
  const MapValues p0 = map_values(maps, theta0);
  if (std::abs(p.phi_x) > std::abs(p0.phi_x)) {
    fail(ErrorKind::assumption_violation,
         "kl_rate_h: requires |psi_X(theta)| <= |psi_X(theta0)|");
  }
  const double dy = p.phi_y - p0.phi_y;
  const double dx = p.phi_x - p0.phi_x;
  return 0.5 * (k_y * dy * dy + k_x * dx * dx + k_x * (p0.phi_x * p0.phi_x - p.phi_x * p.phi_x));
}

namespace {

double min_h(const std::vector<ParamVector>& grid, const ParamVector& theta0,
             const ParamMaps& maps, double k_y, double k_x) {
  require(!grid.empty(), ErrorKind::invalid_argument, "j_rate: empty theta grid");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& th : grid) best = std::min(best, kl_rate_h(th, theta0, maps, k_y, k_x));
  return best;
}

}  // namespace

JRate j_rate(const ParamVector& theta, const ParamVector& theta0,
             const std::vector<ParamVector>& theta_grid, const ParamMaps& maps, double k_y,
             double k_x) {
  JRate out;
  out.h_theta_inf = min_h(theta_grid, theta0, maps, k_y, k_x);
  out.j_theta = kl_rate_h(theta, theta0, maps, k_y, k_x) - out.h_theta_inf;
  return out;
}

double j_of_set(const std::vector<ParamVector>& subset, const ParamVector& theta0,
                const std::vector<ParamVector>& theta_grid, const ParamMaps& maps, double k_y,
                double k_x) {
  return min_h(subset, theta0, maps, k_y, k_x) - min_h(theta_grid, theta0, maps, k_y, k_x);
}

nlohmann::json to_json(const SuffStats& stats) {
  return {{"u_yx", stats.u_y_given_x}, {"v_yx", stats.v_y_given_x}, {"u_x", stats.u_x},
          {"v_x", stats.v_x},          {"m", stats.m},              {"aT", stats.window.a},
          {"bT", stats.window.b}};
}

}  // namespace ssde
