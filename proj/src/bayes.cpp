#include "ssde/bayes.hpp"

#include "ssde/errors.hpp"
#include "ssde/rng.hpp"
#include "ssde/stats.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

namespace ssde {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t stream_proposal = 21;
constexpr std::uint64_t stream_accept = 22;

double log_sum_exp(const std::vector<double>& v) {
  double top = neg_inf;
  for (double x : v) top = std::max(top, x);
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double x : v) s += std::exp(x - top);
  return top + std::log(s);
}

// Histogram of Psi values against bin-averaged N(0,1) densities; mass outside
// [-4, 4] is dropped from the histogram but still counted in the normaliser.
double histogram_gap(const std::vector<double>& bin_mass, double total) {
  const double width = 2.0 * histogram_edge / histogram_bins;
  double gap = 0.0;
  for (int b = 0; b < histogram_bins; ++b) {
    const double lo = -histogram_edge + b * width;
    const double ref = (normal_cdf(lo + width) - normal_cdf(lo)) / width;
    gap = std::max(gap, std::abs(bin_mass[b] / (total * width) - ref));
  }
  return gap;
}

int bin_of(double psi) {
  const double width = 2.0 * histogram_edge / histogram_bins;
  if (psi < -histogram_edge || psi >= histogram_edge) return -1;
  return std::min(histogram_bins - 1, static_cast<int>((psi + histogram_edge) / width));
}

}  // namespace

Prior Prior::flat(const Box& box) {
  return {[](const Eigen::VectorXd&) { return 0.0; }, box};
}

double log_posterior_unnorm(const ParamVector& theta, const Prior& prior,
                            const LogDensity& loglik) {
  if (!prior.support.contains(theta.values())) return neg_inf;
  const double lp = prior.log_density(theta.values());
  if (!(lp > neg_inf)) return neg_inf;
  const double ll = loglik(theta.values());
  if (std::isnan(ll) || !(ll > neg_inf)) return neg_inf;
  return lp + ll;
}

LogDensity approx_loglik_fn(const StateSpaceModel& model, const ParamVector& theta0,
                            const ObservationWindow& window, double w_y_increment) {
  model.require_ratio_bounds("approx_loglik_fn");
  return [model, theta0, window, w_y_increment](const Eigen::VectorXd& th) {
    return approx_loglik(ParamVector(th), theta0, model, window, w_y_increment);
  };
}

LogDensity mc_loglik_fn(const MarginalLikelihood& likelihood) {
  return [&likelihood](const Eigen::VectorXd& th) {
    try {
      return likelihood.evaluate(ParamVector(th)).estimate;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::degenerate_weights) return neg_inf;
      throw;
    }
  };
}

LogDensity posterior_target(const Prior& prior, LogDensity loglik) {
  return [prior, loglik = std::move(loglik)](const Eigen::VectorXd& th) {
    if (!th.allFinite()) return neg_inf;
    return log_posterior_unnorm(ParamVector(th), prior, loglik);
  };
}

Chain mh_sample(const LogDensity& target, const ParamVector& theta_init, int n_draws,
                const Eigen::VectorXd& proposal_scale, std::uint64_t seed) {
  require(n_draws >= 1, ErrorKind::invalid_argument, "mh_sample: n_draws must be >= 1");
  const Eigen::Index d = theta_init.size();
  require(proposal_scale.size() == d && (proposal_scale.array() >= 0.0).all(),
          ErrorKind::invalid_argument, "mh_sample: proposal scale must be non-negative, one per coordinate");
  double current_lp = target(theta_init.values());
  if (!(current_lp > neg_inf) || std::isnan(current_lp)) {
    fail(ErrorKind::invalid_start, "mh_sample: target is -inf at theta_init");
  }
  const CounterRng prop(seed, stream_proposal);
  const CounterRng acc(seed, stream_accept);
  Chain chain;
  chain.seed = seed;
  chain.draws.reserve(static_cast<std::size_t>(n_draws));
  chain.log_posts.reserve(static_cast<std::size_t>(n_draws));
  chain.accepted.reserve(static_cast<std::size_t>(n_draws));
  Eigen::VectorXd current = theta_init.values();
  int n_acc = 0;
  for (int i = 0; i < n_draws; ++i) {
    Eigen::VectorXd cand = current;
    for (Eigen::Index j = 0; j < d; ++j) {
      cand[j] += proposal_scale[j] * prop.normal(static_cast<std::uint64_t>(i) * d + j);
    }
    const double cand_lp = target(cand);
    bool accept = false;
    if (cand_lp > neg_inf && !std::isnan(cand_lp)) {
      accept = std::log(acc.uniform(static_cast<std::uint64_t>(i))) < cand_lp - current_lp;
    }
    if (accept) {
      current = cand;
      current_lp = cand_lp;
      ++n_acc;
    }
    chain.draws.emplace_back(current);
    chain.log_posts.push_back(current_lp);
    chain.accepted.push_back(accept);
  }
  chain.acceptance_rate = static_cast<double>(n_acc) / n_draws;
  return chain;
}

Eigen::VectorXd default_proposal_scale(const Eigen::MatrixXd& sigma_inv) {
  const Eigen::MatrixXd cov = inverse_or_identity(sigma_inv);
  const double c = 2.4 / std::sqrt(static_cast<double>(cov.rows()));
  return c * cov.diagonal().cwiseMax(0.0).cwiseSqrt();
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& spd) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spd);
  require(es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0,
          ErrorKind::numeric_domain, "symmetric_sqrt: matrix is not positive definite");
  return es.operatorSqrt();
}

Eigen::VectorXd to_psi(const Eigen::VectorXd& theta, const FitResult& fit) {
  return symmetric_sqrt(fit.sigma_inv) * (theta - fit.theta_hat.values());
}

Eigen::VectorXd from_psi(const Eigen::VectorXd& psi, const FitResult& fit) {
  return symmetric_sqrt(fit.sigma_inv).llt().solve(psi) + fit.theta_hat.values();
}

NormalityDiag posterior_normality_diag(const Chain& chain, const FitResult& fit) {
  require(fit.converged, ErrorKind::precondition_violation,
          "posterior_normality_diag: fit did not converge");
  const auto n = chain.draws.size();
  const auto skip = static_cast<std::size_t>(std::floor(burn_in_fraction * static_cast<double>(n)));
  const std::size_t used = n - skip;
  if (used < 100) {
    fail(ErrorKind::insufficient_sample,
         "posterior_normality_diag: " + std::to_string(used) + " draws after burn-in, need 100");
  }
  const Eigen::MatrixXd root = symmetric_sqrt(fit.sigma_inv);
  const Eigen::Index d = fit.theta_hat.size();
  std::vector<std::vector<double>> psi(static_cast<std::size_t>(d));
  for (std::size_t i = skip; i < n; ++i) {
    const Eigen::VectorXd p = root * (chain.draws[i].values() - fit.theta_hat.values());
    for (Eigen::Index j = 0; j < d; ++j) psi[j].push_back(p[j]);
  }
  NormalityDiag out;
  out.n_used = static_cast<int>(used);
  for (const auto& col : psi) {
    out.ks_distance = std::max(out.ks_distance, ks_distance(col, normal_cdf));
    std::vector<double> mass(histogram_bins, 0.0);
    for (double v : col) {
      const int b = bin_of(v);
      if (b >= 0) mass[b] += 1.0;
    }
    out.sup_density_gap = std::max(out.sup_density_gap, histogram_gap(mass, static_cast<double>(used)));
  }
  return out;
}

NormalityDiag posterior_normality_grid(const LogDensity& log_post, const FitResult& fit,
                                       int sub_points_per_bin) {
  require(fit.theta_hat.size() == 1, ErrorKind::invalid_argument,
          "posterior_normality_grid: only d = 1 is supported");
  require(fit.converged, ErrorKind::precondition_violation,
          "posterior_normality_grid: fit did not converge");
  require(sub_points_per_bin >= 1, ErrorKind::invalid_argument,
          "posterior_normality_grid: need at least one point per bin");
  const double root = std::sqrt(fit.sigma_inv(0, 0));
  const double width = 2.0 * histogram_edge / histogram_bins;
  const double step = width / sub_points_per_bin;
  const int n_points = static_cast<int>(std::lround(16.0 / step));
  std::vector<double> psi(static_cast<std::size_t>(n_points));
  std::vector<double> lp(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    psi[i] = -8.0 + (i + 0.5) * step;
    Eigen::VectorXd th(1);
    th[0] = fit.theta_hat[0] + psi[i] / root;
    lp[i] = log_post(th);
  }
  const double norm = log_sum_exp(lp);
  require(std::isfinite(norm), ErrorKind::degenerate_weights,
          "posterior_normality_grid: posterior has no mass on the grid");
  std::vector<double> mass(histogram_bins, 0.0);
  std::vector<double> cdf_nodes(static_cast<std::size_t>(n_points));
  double cum = 0.0;
  for (int i = 0; i < n_points; ++i) {
    const double w = std::exp(lp[i] - norm);
    cum += w;
    cdf_nodes[i] = cum;
    const int b = bin_of(psi[i]);
    if (b >= 0) mass[b] += w;
  }
  NormalityDiag out;
  out.n_used = n_points;
  out.sup_density_gap = histogram_gap(mass, 1.0);
  // Distance between the discretised posterior cdf and Phi at cell edges.
  for (int i = 0; i < n_points; ++i) {
    const double edge = psi[i] + 0.5 * step;
    out.ks_distance = std::max(out.ks_distance, std::abs(cdf_nodes[i] - normal_cdf(edge)));
  }
  return out;
}

GridPosterior grid_posterior(const LogDensity& log_post, const Box& box, int n_per_axis) {
  const Eigen::Index d = box.lo.size();
  require(d >= 1 && d <= 2, ErrorKind::invalid_argument, "grid_posterior: d must be 1 or 2");
  require(n_per_axis >= 2, ErrorKind::invalid_argument, "grid_posterior: need two points per axis");
  auto axis = [&](Eigen::Index j, int i) {
    return box.lo[j] + (box.hi[j] - box.lo[j]) * i / (n_per_axis - 1);
  };
  GridPosterior g;
  const int n_second = d == 2 ? n_per_axis : 1;
  for (int i = 0; i < n_per_axis; ++i) {
    for (int k = 0; k < n_second; ++k) {
      Eigen::VectorXd th(d);
      th[0] = axis(0, i);
      if (d == 2) th[1] = axis(1, k);
      g.points.emplace_back(th);
      g.log_post.push_back(log_post(th));
    }
  }
  g.log_norm = log_sum_exp(g.log_post);
  require(std::isfinite(g.log_norm), ErrorKind::degenerate_weights,
          "grid_posterior: posterior has no mass on the grid");
  return g;
}

DecayRate set_decay_rate(const SetPredicate& in_set, const GridPosterior& grid,
                         const ObservationWindow& window, double j_of_set) {
  std::vector<double> inside;
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    if (in_set(grid.points[i].values())) inside.push_back(grid.log_post[i]);
  }
  DecayRate r;
  r.target = -j_of_set;
  const double log_mass = inside.empty() ? neg_inf : log_sum_exp(inside) - grid.log_norm;
  r.zero_mass = !(log_mass > neg_inf);
  r.empirical_rate = r.zero_mass ? neg_inf : log_mass / window.length();
  return r;
}

DecayRate set_decay_rate(const SetPredicate& in_set, const Chain& chain,
                         const ObservationWindow& window, double j_of_set) {
  const auto n = chain.draws.size();
  const auto skip = static_cast<std::size_t>(std::floor(burn_in_fraction * static_cast<double>(n)));
  require(n > skip, ErrorKind::insufficient_sample, "set_decay_rate: chain is empty after burn-in");
  std::size_t hits = 0;
  for (std::size_t i = skip; i < n; ++i) hits += in_set(chain.draws[i].values()) ? 1 : 0;
  DecayRate r;
  r.target = -j_of_set;
  r.zero_mass = hits == 0;
  r.empirical_rate = r.zero_mass ? neg_inf
                                 : std::log(static_cast<double>(hits) / static_cast<double>(n - skip)) /
                                       window.length();
  return r;
}

void write_chain_csv(std::ostream& os, const Chain& chain) {
  const Eigen::Index d = chain.draws.empty() ? 0 : chain.draws.front().size();
  os << "draw_index";
  for (Eigen::Index j = 0; j < d; ++j) os << ",theta_" << j + 1;
  os << ",log_post,accepted\n";
  char buf[32];
  for (std::size_t i = 0; i < chain.draws.size(); ++i) {
    os << i;
    for (Eigen::Index j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", chain.draws[i][j]);
      os << ',' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", chain.log_posts[i]);
    os << ',' << buf << ',' << (chain.accepted[i] ? 1 : 0) << '\n';
  }
}

nlohmann::json to_json(const NormalityDiag& diag) {
  return {{"ks_distance", diag.ks_distance},
          {"sup_density_gap", diag.sup_density_gap},
          {"n_used", diag.n_used}};
}

nlohmann::json to_json(const DecayRate& rate) {
  nlohmann::json j{{"target", rate.target}, {"zero_mass", rate.zero_mass}};
  j["empirical_rate"] = rate.zero_mass ? nlohmann::json(nullptr) : nlohmann::json(rate.empirical_rate);
  return j;
}

}  // namespace ssde
