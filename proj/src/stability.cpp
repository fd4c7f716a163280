#include "ssde/stability.hpp"

#include "ssde/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ssde {

double LyapunovSpec::lambda(double t) const { return std::pow(gamma(t), -1.0 / p); }

LyapunovSpec LyapunovSpec::exponential_quadratic(double rate) {
  LyapunovSpec spec;
  spec.v = [rate](double x, double t) { return std::exp(rate * t) * x * x; };
  spec.v_t = [rate](double x, double t) { return rate * std::exp(rate * t) * x * x; };
  spec.v_x = [rate](double x, double t) { return 2.0 * std::exp(rate * t) * x; };
  spec.v_xx = [rate](double, double t) { return 2.0 * std::exp(rate * t); };
  spec.p = 2.0;
  spec.gamma = [rate](double t) { return std::exp(rate * t); };
  spec.eta = [](double) { return 0.0; };
  return spec;
}

double lv_operator(const LyapunovSpec& spec, const StateSpaceModel& model,
                   const ParamVector& theta, double x, double t) {
  require(std::isfinite(x) && std::isfinite(t), ErrorKind::invalid_argument,
          "lv_operator needs finite (x, t)");
  const double phi_x = map_values(model.maps, theta).phi_x;
  const double vt = spec.v_t(x, t);
  const double vx = spec.v_x(x, t);
  const double vxx = spec.v_xx(x, t);
  if (!std::isfinite(vt) || !std::isfinite(vx) || !std::isfinite(vxx)) {
    std::ostringstream os;
    os << "Lyapunov partials are not finite at x = " << x << ", t = " << t;
    fail(ErrorKind::numeric_domain, os.str());
  }
  const double sx = model.sigma_x(x, t);
  return vt + vx * (phi_x * model.b_x(x, t)) + 0.5 * sx * sx * vxx;
}

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return out;
}

}  // namespace

H8Report check_h8(const LyapunovSpec& spec, const StateSpaceModel& model,
                  const ParamVector& theta, const H8Grid& grid) {
  require(grid.nx >= 1 && grid.nt >= 1, ErrorKind::precondition_violation,
          "check_h8 needs a non-empty grid");
  require(spec.p > 0.0, ErrorKind::invalid_argument, "Lyapunov exponent p must be positive");
  std::vector<double> xs;
  for (double x : linspace(grid.x_lo, grid.x_hi, grid.nx)) {
    if (std::abs(x) >= grid.notch) xs.push_back(x);
  }
  require(!xs.empty(), ErrorKind::precondition_violation,
          "check_h8 x-range contains no node outside the notch at 0");
  const auto ts = linspace(grid.t_lo, grid.t_hi, grid.nt);

  H8Report report;
  for (std::size_t j = 1; j < ts.size(); ++j) {
    if (spec.gamma(ts[j]) < spec.gamma(ts[j - 1])) {
      report.gamma_monotone = false;
      report.violations.push_back({0.0, ts[j], "gamma_decreasing"});
    }
  }
  for (double t : ts) {
    const double gamma = spec.gamma(t);
    const double eta = spec.eta(t);
    for (double x : xs) {
      const double floor = gamma * std::pow(std::abs(x), spec.p);
      const double v = spec.v(x, t);
      if (floor > v + 1e-12 * std::max(1.0, std::abs(v))) {
        report.lower_bound_ok = false;
        report.violations.push_back({x, t, "lower_bound"});
      }
      const double lv = lv_operator(spec, model, theta, x, t);
      if (lv > eta + 1e-12 * std::max({1.0, std::abs(eta), std::abs(v)})) {
        report.generator_ok = false;
        report.violations.push_back({x, t, "generator"});
      }
    }
  }
  return report;
}

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa,
                    double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double lo, double hi,
                        double tolerance, int max_depth) {
  const double fa = f(lo);
  const double fb = f(hi);
  const double fm = f(0.5 * (lo + hi));
  const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, lo, hi, fa, fm, fb, whole, tolerance, max_depth);
}

EtaIntegralCheck check_eta_integrable(const LyapunovSpec& spec, double t_max,
                                      double tolerance) {
  require(t_max > 0.0, ErrorKind::invalid_argument, "t_max must be positive");
  EtaIntegralCheck out;
  // Split at t_max/2 so the tail is integrated on its own panel.
  const double head = adaptive_simpson(spec.eta, 0.0, 0.5 * t_max, tolerance);
  out.tail = adaptive_simpson(spec.eta, 0.5 * t_max, t_max, tolerance);
  out.total = head + out.tail;
  out.converged = (out.total == 0.0 && out.tail == 0.0) ||
                  (std::isfinite(out.total) && out.tail < 0.01 * out.total);
  return out;
}

EnvelopeReport empirical_envelope(const TimeGrid& grid,
                                  const std::vector<std::vector<double>>& latent_paths,
                                  const LyapunovSpec& spec) {
  std::vector<double> lambda(grid.t.size());
  for (std::size_t k = 0; k < grid.t.size(); ++k) {
    lambda[k] = spec.lambda(grid.t[k]);
    if (!(lambda[k] > 0.0) || !std::isfinite(lambda[k])) {
      std::ostringstream os;
      os << "lambda(t) is not a positive finite number at t = " << grid.t[k];
      fail(ErrorKind::numeric_domain, os.str(), k);
    }
  }
  EnvelopeReport report;
  report.lambda = [spec](double t) { return spec.lambda(t); };
  report.per_path_xi.reserve(latent_paths.size());
  for (const auto& path : latent_paths) {
    require(path.size() == grid.t.size(), ErrorKind::invalid_argument,
            "latent path length does not match the grid");
    double xi = 0.0;
    for (std::size_t k = 0; k < path.size(); ++k) xi = std::max(xi, std::abs(path[k]) / lambda[k]);
    report.per_path_xi.push_back(xi);
    report.xi_hat = std::max(report.xi_hat, xi);
  }
  return report;
}

nlohmann::json to_json(const H8Report& report) {
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : report.violations) {
    violations.push_back({{"x", v.x}, {"t", v.t}, {"kind", v.kind}});
  }
  return {{"lower_bound_ok", report.lower_bound_ok},
          {"generator_ok", report.generator_ok},
          {"gamma_monotone", report.gamma_monotone},
          {"violations", violations}};
}

}  // namespace ssde
