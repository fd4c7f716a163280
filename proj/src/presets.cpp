#include "ssde/presets.hpp"

#include "ssde/errors.hpp"

#include <cmath>

namespace ssde {

namespace {

Eigen::VectorXd unit(int d, int k) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
  v[k] = 1.0;
  return v;
}

// Latent geometric Brownian motion dX = phi_X (-a X) dt + sigma X dW, x0 = 1.
void set_gbm_latent(StateSpaceModel& m, double a, double sigma) {
  m.b_x = [a](double x, double) { return -a * x; };
  m.sigma_x = [sigma](double x, double) { return sigma * x; };
  m.x0 = 1.0;
}

PanelModel make_linear_panel(int n) {
  require(n >= 1, ErrorKind::invalid_argument, "panel-linear: n must be >= 1");
  PanelModel p;
  p.n = n;
  p.base = make_unit_ratio_model([](double, double, double) { return 1.0; });
  const Eigen::VectorXd one = unit(1, 0);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  for (int i = 0; i < n; ++i) {
    const double shift = 1.0 / ((i + 1.0) * (i + 1.0));
    p.individual_maps.push_back(ParamMaps::affine(one, shift, zero, 0.0));
  }
  p.limit_maps = ParamMaps::affine(one, 0.0, zero, 0.0);
  p.k_bar_y = 1.0;
  p.k_bar_x = 4.0;
  return p;
}

std::vector<Preset> build_registry() {
  std::vector<Preset> reg;

  Preset unit_ratio;
  unit_ratio.name = "unit-ratio";
  unit_ratio.description =
      "d=1, b_Y=sigma_Y=1, psi_Y(theta)=theta, psi_X=0, GBM latent; K_Y=1, K_X=4, alphas 0";
  unit_ratio.dim = 1;
  unit_ratio.theta0 = ParamVector{1.0};
  unit_ratio.make_model = [] {
    return make_unit_ratio_model([](double, double, double) { return 1.0; });
  };
  reg.push_back(unit_ratio);

  Preset modulated;
  modulated.name = "latent-modulated";
  modulated.description =
      "d=1, b_Y=1+x exp(-t), sigma_Y=1, psi_Y(theta)=theta, psi_X=0, GBM latent; K_Y=1";
  modulated.demo_only = true;
  modulated.demo_reason =
      "b_Y^2 - 1 is linear in x near x=0, so no alpha gives the quadratic ratio band";
  modulated.dim = 1;
  modulated.theta0 = ParamVector{1.0};
  modulated.make_model = [] {
    StateSpaceModel m =
        make_unit_ratio_model([](double, double x, double t) { return 1.0 + x * std::exp(-t); });
    m.ratio_bounds->alpha_y1 = 1.0;
    m.ratio_bounds->alpha_y2 = 1.0;
    return m;
  };
  reg.push_back(modulated);

  Preset gbm;
  gbm.name = "gbm-latent";
  gbm.description =
      "d=2, b_Y=sigma_Y=1, psi_Y=theta_1, psi_X=theta_2, b_X=-a x, sigma_X=sigma x with "
      "a=1, sigma=0.5; K_X=a^2/sigma^2";
  gbm.dim = 2;
  gbm.theta0 = ParamVector{1.0, 1.0};
  gbm.make_model = [] { return make_gbm_latent_model({}); };
  gbm.lyapunov = LyapunovSpec::exponential_quadratic(0.8);
  gbm.growth_box.x_lo = 0.0;
  gbm.parameter_box = [](const ParamVector& theta0) {
    // |psi_X(theta)| <= |psi_X(theta0)| on the whole box.
    Box b = Box::around(theta0, 50.0);
    b.lo[1] = -std::abs(theta0[1]);
    b.hi[1] = std::abs(theta0[1]);
    return b;
  };
  reg.push_back(gbm);

  Preset panel;
  panel.name = "panel-linear";
  panel.description =
      "unit-ratio individuals with psi_{Y_i}(theta)=theta+1/(i+1)^2, limit maps "
      "bar psi_Y=theta, bar psi_X=0, bar K_Y=1";
  panel.dim = 1;
  panel.theta0 = ParamVector{1.0};
  panel.make_model = [] {
    return make_unit_ratio_model([](double, double, double) { return 1.0; });
  };
  panel.make_panel = make_linear_panel;
  reg.push_back(panel);

  return reg;
}

}  // namespace

Box Preset::box_for(const ParamVector& theta0, double half_width) const {
  if (parameter_box) return parameter_box(theta0);
  return Box::around(theta0, half_width);
}

StateSpaceModel make_unit_ratio_model(ObservationFn b_y) {
  StateSpaceModel m;
  m.b_y = std::move(b_y);
  m.sigma_y = [](double, double, double) { return 1.0; };
  set_gbm_latent(m, 1.0, 0.5);
  const Eigen::VectorXd one = unit(1, 0);
  m.maps = ParamMaps::affine(one, 0.0, Eigen::VectorXd::Zero(1), 0.0);
  m.ratio_bounds = RatioBounds{1.0, 4.0, 0.0, 0.0, 0.0, 0.0};
  m.y0 = 0.0;
  return m;
}

StateSpaceModel make_gbm_latent_model(const GbmLatentParams& params) {
  require(params.a > 0.0 && params.sigma > 0.0, ErrorKind::invalid_argument,
          "gbm-latent: a and sigma must be positive");
  StateSpaceModel m;
  m.b_y = [](double, double, double) { return 1.0; };
  m.sigma_y = [](double, double, double) { return 1.0; };
  set_gbm_latent(m, params.a, params.sigma);
  m.maps = ParamMaps::affine(unit(2, 0), 0.0, unit(2, 1), 0.0);
  const double kx = params.a * params.a / (params.sigma * params.sigma);
  m.ratio_bounds = RatioBounds{1.0, kx, 0.0, 0.0, 0.0, 0.0};
  m.y0 = 0.0;
  return m;
}

const std::vector<Preset>& preset_registry() {
  static const std::vector<Preset> registry = build_registry();
  return registry;
}

const Preset& find_preset(const std::string& name) {
  std::string names;
  for (const auto& p : preset_registry()) {
    if (p.name == name) return p;
    names += (names.empty() ? "" : ", ") + p.name;
  }
  fail(ErrorKind::config_error, "unknown preset '" + name + "'; available: " + names);
}

}  // namespace ssde
