#include "ssde/panel.hpp"

#include "ssde/errors.hpp"
#include "ssde/parallel.hpp"
#include "ssde/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace ssde {

void PanelModel::validate() const {
  require(n >= 1, ErrorKind::invalid_argument, "panel: n must be >= 1");
  require(static_cast<int>(individual_maps.size()) == n, ErrorKind::invalid_argument,
          "panel: need one map pair per individual");
  require(k_bar_y > 0.0 && k_bar_x > 0.0, ErrorKind::invalid_argument,
          "panel: limit constants must be positive");
  for (const auto& m : individual_maps) {
    require(m.dim == limit_maps.dim, ErrorKind::invalid_argument,
            "panel: individual and limit maps differ in dimension");
  }
  base.validate();
}

StateSpaceModel PanelModel::individual(int i) const {
  require(i >= 0 && i < n, ErrorKind::invalid_argument, "panel: individual index out of range");
  StateSpaceModel m = base;
  m.maps = individual_maps[static_cast<std::size_t>(i)];
  return m;
}

std::uint64_t panel_path_seed(std::uint64_t seed, int individual) {
  return derive_seed(seed, 0x2000 + static_cast<std::uint64_t>(individual));
}

std::vector<PathPair> simulate_panel(const PanelModel& panel, const ParamVector& theta,
                                     const TimeGrid& grid, std::uint64_t seed, int threads) {
  panel.validate();
  std::vector<PathPair> out(static_cast<std::size_t>(panel.n));
  parallel_for(out.size(), threads, [&](std::size_t i) {
    const int idx = static_cast<int>(i);
    out[i] = simulate_pair(panel.individual(idx), theta, grid, panel_path_seed(seed, idx));
  });
  return out;
}

std::vector<SuffStats> panel_suff_stats(const std::vector<PathPair>& paths,
                                        const StateSpaceModel& base, int threads) {
  require(!paths.empty(), ErrorKind::invalid_argument, "panel_suff_stats: no paths");
  for (std::size_t i = 1; i < paths.size(); ++i) {
    if (!same_grid(paths[i].grid, paths.front().grid)) {
      fail(ErrorKind::invalid_argument,
           "panel_suff_stats: path " + std::to_string(i) + " uses a different grid");
    }
  }
  std::vector<SuffStats> out(paths.size());
  parallel_for(paths.size(), threads,
               [&](std::size_t i) { out[i] = suff_stats_discrete(paths[i], base); });
  return out;
}

double pooled_loglik_approx(const ParamVector& theta, const ParamVector& theta0,
                            const std::vector<SuffStats>& stats, const PanelModel& panel) {
  require(static_cast<int>(stats.size()) == panel.n, ErrorKind::invalid_argument,
          "pooled_loglik: need one stats record per individual");
  double total = 0.0;
  for (int i = 0; i < panel.n; ++i) {
    const StateSpaceModel m = panel.individual(i);
    const RatioBounds& rb = m.require_ratio_bounds("pooled_loglik");
    const ResidualStats r = residual_stats(stats[static_cast<std::size_t>(i)], theta0, m.maps);
    total += approx_loglik(theta, theta0, m, stats[static_cast<std::size_t>(i)].window,
                           r.i_yx / std::sqrt(rb.k_y));
  }
  return total;
}

double pooled_loglik_mc(const ParamVector& theta, const std::vector<MarginalLikelihood>& parts) {
  double total = 0.0;
  for (const auto& p : parts) total += p.evaluate(theta).estimate;
  return total;
}

FitResult pooled_fit_mle(const std::vector<SuffStats>& stats, const PanelModel& panel,
                         const ParamVector& theta_init, const FitOptions& opts,
                         const std::optional<ParamVector>& anchor) {
  require(static_cast<int>(stats.size()) == panel.n, ErrorKind::invalid_argument,
          "pooled_fit_mle: need one stats record per individual");
  theta_init.require_dim(panel.limit_maps.dim, "pooled_fit_mle");
  const ParamVector ref = anchor ? *anchor : theta_init;
  double w_sum = 0.0;
  for (int i = 0; i < panel.n; ++i) {
    w_sum += w_bar_from_stats(stats[static_cast<std::size_t>(i)], ref,
                              panel.individual_maps[static_cast<std::size_t>(i)], panel.k_bar_y);
  }
  const double w_bar = w_sum / panel.n;
  const ParamMaps& maps = panel.limit_maps;
  const double ky = panel.k_bar_y;
  const double kx = panel.k_bar_x;
  Objective obj{
      [&](const Eigen::VectorXd& th) { return g_objective(ParamVector(th), ref, maps, ky, kx, w_bar); },
      [&](const Eigen::VectorXd& th) { return g_gradient(ParamVector(th), ref, maps, ky, kx, w_bar); },
      [&](const Eigen::VectorXd& th) { return g_hessian(ParamVector(th), ref, maps, ky, kx, w_bar); }};
  FitResult fit = maximize(obj, theta_init, opts);
  const double scale = panel.n * stats.front().window.length();
  const Eigen::MatrixXd info = -g_hessian(fit.theta_hat, ref, maps, ky, kx, w_bar) * scale;
  bool fell_back = false;
  inverse_or_identity(info, &fell_back);
  fit.sigma_inv = fell_back ? Eigen::MatrixXd::Identity(info.rows(), info.cols()) : info;
  fit.sigma_inv_fallback = fell_back;
  return fit;
}

double bar_h(const ParamVector& theta, const ParamVector& theta0, const ParamMaps& limit_maps,
             double k_bar_y, double k_bar_x) {
  return kl_rate_h(theta, theta0, limit_maps, k_bar_y, k_bar_x);
}

namespace {

double min_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// u_j += r_j dz and v_jk += (b_j r_k) dt for j <= k, mirrored. Written as
// plain loops so that r = 1 reproduces the scalar sums bit for bit.
void accumulate(Eigen::VectorXd& u, Eigen::MatrixXd& v, const Eigen::VectorXd& b, double sigma,
                double dz, double dt) {
  const Eigen::Index r = b.size();
  const double s2 = sigma * sigma;
  Eigen::VectorXd ratio(r);
  for (Eigen::Index j = 0; j < r; ++j) ratio[j] = b[j] / s2;
  for (Eigen::Index j = 0; j < r; ++j) {
    u[j] += ratio[j] * dz;
    for (Eigen::Index k = j; k < r; ++k) {
      v(j, k) += (b[j] * ratio[k]) * dt;
      v(k, j) = v(j, k);
    }
  }
}

}  // namespace

VectorSuffStats suff_stats_multidim(const PathPair& path, const VectorDriftModel& model) {
  const TimeGrid& grid = path.grid;
  require(grid.m >= 1 && path.y.size() == static_cast<std::size_t>(grid.m) + 1 &&
              path.x.size() == path.y.size(),
          ErrorKind::invalid_argument, "suff_stats_multidim: path length does not match the grid");
  const Eigen::VectorXd by0 = model.b_y(path.y[0], path.x[0], grid.t[0]);
  const Eigen::VectorXd bx0 = model.b_x(path.x[0], grid.t[0]);
  VectorSuffStats s;
  s.u_y = Eigen::VectorXd::Zero(by0.size());
  s.v_y = Eigen::MatrixXd::Zero(by0.size(), by0.size());
  s.u_x = Eigen::VectorXd::Zero(bx0.size());
  s.v_x = Eigen::MatrixXd::Zero(bx0.size(), bx0.size());
  for (int k = 0; k < grid.m; ++k) {
    const double t = grid.t[k];
    const double dt = grid.t[k + 1] - t;
    const double sy = model.sigma_y(path.y[k], path.x[k], t);
    const double sx = model.sigma_x(path.x[k], t);
    if (sy == 0.0) fail(ErrorKind::division_guard, "sigma_Y vanishes at node " + std::to_string(k), k);
    if (sx == 0.0) fail(ErrorKind::division_guard, "sigma_X vanishes at node " + std::to_string(k), k);
    const Eigen::VectorXd by = model.b_y(path.y[k], path.x[k], t);
    const Eigen::VectorXd bx = model.b_x(path.x[k], t);
    require(by.size() == s.u_y.size() && bx.size() == s.u_x.size(), ErrorKind::invalid_argument,
            "suff_stats_multidim: drift dimension changed along the path");
    accumulate(s.u_y, s.v_y, by, sy, path.y[k + 1] - path.y[k], dt);
    accumulate(s.u_x, s.v_x, bx, sx, path.x[k + 1] - path.x[k], dt);
  }
  s.min_eigenvalue_y = min_eigenvalue(s.v_y);
  s.min_eigenvalue_x = min_eigenvalue(s.v_x);
  s.positive_definite = s.min_eigenvalue_y > pd_threshold && s.min_eigenvalue_x > pd_threshold;
  return s;
}

namespace {

double quadratic_exponent(const Eigen::VectorXd& phi, const Eigen::VectorXd& u,
                          const Eigen::MatrixXd& v) {
  double lin = 0.0;
  double quad = 0.0;
  for (Eigen::Index j = 0; j < phi.size(); ++j) {
    lin += phi[j] * u[j];
    double vphi = 0.0;
    for (Eigen::Index k = 0; k < phi.size(); ++k) vphi += v(j, k) * phi[k];
    quad += phi[j] * vphi;
  }
  return lin - 0.5 * quad;
}

}  // namespace

double loglik_multidim(const Eigen::VectorXd& phi_y, const Eigen::VectorXd& phi_x,
                       const VectorSuffStats& stats) {
  require(phi_y.size() == stats.u_y.size() && phi_x.size() == stats.u_x.size(),
          ErrorKind::invalid_argument, "loglik_multidim: dimension mismatch");
  return quadratic_exponent(phi_y, stats.u_y, stats.v_y) +
         quadratic_exponent(phi_x, stats.u_x, stats.v_x);
}

Eigen::MatrixXd pooled_fisher_multidim(const ParamVector& theta, const VectorMap& limit_psi_y,
                                       const Eigen::MatrixXd& k_bar_y) {
  theta.require_dim(limit_psi_y.dim, "pooled_fisher_multidim");
  const Eigen::Index r = limit_psi_y.r;
  require(k_bar_y.rows() == r && k_bar_y.cols() == r, ErrorKind::invalid_argument,
          "pooled_fisher_multidim: K has the wrong shape");
  if (!k_bar_y.isApprox(k_bar_y.transpose(), 1e-12) || Eigen::LLT<Eigen::MatrixXd>(k_bar_y).info() != Eigen::Success) {
    fail(ErrorKind::assumption_violation,
         "pooled_fisher_multidim: K must be symmetric positive definite");
  }
  const Eigen::MatrixXd jac = limit_psi_y.jacobian
                                  ? limit_psi_y.jacobian(theta.values())
                                  : Eigen::MatrixXd();
  Eigen::MatrixXd j = jac;
  if (!limit_psi_y.jacobian) {
    j.resize(r, limit_psi_y.dim);
    for (Eigen::Index a = 0; a < r; ++a) {
      const ScalarMap comp = [&, a](const Eigen::VectorXd& th) { return limit_psi_y.value(th)[a]; };
      j.row(a) = fd_gradient(comp, theta.values()).transpose();
    }
  }
  require(j.rows() == r && j.cols() == limit_psi_y.dim, ErrorKind::invalid_argument,
          "pooled_fisher_multidim: Jacobian has the wrong shape");
  const Eigen::Index d = j.cols();
  Eigen::MatrixXd info(d, d);
  for (Eigen::Index p = 0; p < d; ++p) {
    for (Eigen::Index q = 0; q < d; ++q) {
      double acc = 0.0;
      for (Eigen::Index a = 0; a < r; ++a) {
        double kj = 0.0;
        for (Eigen::Index b = 0; b < r; ++b) kj += k_bar_y(a, b) * j(b, q);
        acc += j(a, p) * kj;
      }
      info(p, q) = acc;
    }
  }
  return info;
}

nlohmann::json to_json(const VectorSuffStats& stats) {
  auto mat = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index k = 0; k < m.cols(); ++k) row[k] = m(i, k);
      rows.push_back(row);
    }
    return rows;
  };
  return {{"u_y", std::vector<double>(stats.u_y.begin(), stats.u_y.end())},
          {"v_y", mat(stats.v_y)},
          {"u_x", std::vector<double>(stats.u_x.begin(), stats.u_x.end())},
          {"v_x", mat(stats.v_x)},
          {"min_eigenvalue_y", stats.min_eigenvalue_y},
          {"min_eigenvalue_x", stats.min_eigenvalue_x},
          {"positive_definite", stats.positive_definite}};
}

}  // namespace ssde
