#include "ssde/errors.hpp"
#include "ssde/presets.hpp"
#include "ssde/stability.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

ssde::LyapunovSpec plain_quadratic(std::function<double(double)> gamma) {
  ssde::LyapunovSpec s;
  s.v = [](double x, double) { return x * x; };
  s.v_t = [](double, double) { return 0.0; };
  s.v_x = [](double x, double) { return 2.0 * x; };
  s.v_xx = [](double, double) { return 2.0; };
  s.p = 2.0;
  s.gamma = std::move(gamma);
  s.eta = [](double) { return 0.0; };
  return s;
}

ssde::StateSpaceModel linear_latent(double sigma) {
  auto m = ssde::make_gbm_latent_model({1.0, 1.0});
  m.sigma_x = [sigma](double x, double) { return sigma * x; };
  return m;
}

TEST(Generator, DeterministicDecay) {
  const auto spec = plain_quadratic([](double) { return 1.0; });
  const auto m = linear_latent(0.0);
  const ssde::ParamVector theta{1.0, 1.0};
  for (double x : {-3.0, 0.5, 2.0}) EXPECT_DOUBLE_EQ(ssde::lv_operator(spec, m, theta, x, 1.0), -2.0 * x * x);
}

TEST(Generator, OriginGivesTimeDerivative) {
  const auto spec = ssde::LyapunovSpec::exponential_quadratic(0.3);
  const auto m = linear_latent(0.5);
  EXPECT_EQ(ssde::lv_operator(spec, m, ssde::ParamVector{1.0, 1.0}, 0.0, 2.0), spec.v_t(0.0, 2.0));
}

TEST(Generator, GeometricSign) {
  const auto spec = plain_quadratic([](double) { return 1.0; });
  for (double sigma : {0.5, 1.0, 1.5, 2.0}) {
    const auto m = linear_latent(sigma);
    const double lv = ssde::lv_operator(spec, m, ssde::ParamVector{1.0, 1.0}, 1.5, 0.0);
    EXPECT_NEAR(lv, (sigma * sigma - 2.0) * 2.25, 1e-12);
  }
}

TEST(CheckH8, PlainQuadraticPasses) {
  const auto r = ssde::check_h8(plain_quadratic([](double) { return 1.0; }), linear_latent(0.0),
                                ssde::ParamVector{1.0, 1.0});
  EXPECT_TRUE(r.ok());
  EXPECT_TRUE(r.violations.empty());
}

TEST(CheckH8, GrowingGammaFailsLowerBound) {
  const auto r = ssde::check_h8(plain_quadratic([](double t) { return 1.0 + t; }),
                                linear_latent(0.0), ssde::ParamVector{1.0, 1.0});
  EXPECT_FALSE(r.lower_bound_ok);
  EXPECT_TRUE(r.generator_ok);
}

TEST(CheckH8, DecreasingGammaFlagged) {
  const auto r = ssde::check_h8(plain_quadratic([](double t) { return 1.0 / (1.0 + t); }),
                                linear_latent(0.0), ssde::ParamVector{1.0, 1.0});
  EXPECT_FALSE(r.gamma_monotone);
}

TEST(CheckH8, GbmPresetPassesAndLargeSigmaFails) {
  const auto& preset = ssde::find_preset("gbm-latent");
  ASSERT_TRUE(preset.lyapunov.has_value());
  EXPECT_TRUE(ssde::check_h8(*preset.lyapunov, preset.make_model(), preset.theta0).ok());
  const auto bad = ssde::check_h8(*preset.lyapunov, ssde::make_gbm_latent_model({1.0, 2.0}), preset.theta0);
  EXPECT_FALSE(bad.generator_ok);
  EXPECT_TRUE(bad.lower_bound_ok);
}

TEST(CheckH8, RateSweepBoundary) {
  // LV = e^{ct} x^2 (c - 2 + sigma^2): the boundary for sigma = 0.5 is c = 1.75.
  const auto m = ssde::make_gbm_latent_model({1.0, 0.5});
  EXPECT_TRUE(ssde::check_h8(ssde::LyapunovSpec::exponential_quadratic(1.7), m, ssde::ParamVector{1.0, 1.0}).ok());
  EXPECT_FALSE(ssde::check_h8(ssde::LyapunovSpec::exponential_quadratic(1.8), m, ssde::ParamVector{1.0, 1.0}).ok());
}

TEST(EtaIntegral, ZeroAndDecayingAndConstant) {
  auto spec = plain_quadratic([](double) { return 1.0; });
  auto zero = ssde::check_eta_integrable(spec);
  EXPECT_TRUE(zero.converged);
  spec.eta = [](double t) { return std::exp(-t); };
  const auto decay = ssde::check_eta_integrable(spec, 100.0);
  EXPECT_TRUE(decay.converged);
  EXPECT_NEAR(decay.total, 1.0, 1e-6);
  spec.eta = [](double) { return 1.0; };
  EXPECT_FALSE(ssde::check_eta_integrable(spec, 100.0).converged);
}

TEST(AdaptiveSimpson, Polynomial) {
  EXPECT_NEAR(ssde::adaptive_simpson([](double x) { return x * x * x; }, 0.0, 2.0, 1e-12), 4.0, 1e-12);
}

TEST(Envelope, ZeroAndIdentityPaths) {
  const auto spec = ssde::LyapunovSpec::exponential_quadratic(0.8);
  const auto g = ssde::TimeGrid::uniform(0.0, 10.0, 100);
  std::vector<double> zero(g.t.size(), 0.0), ident(g.t.size());
  for (std::size_t k = 0; k < g.t.size(); ++k) ident[k] = spec.lambda(g.t[k]);
  EXPECT_EQ(ssde::empirical_envelope(g, {zero}, spec).xi_hat, 0.0);
  EXPECT_NEAR(ssde::empirical_envelope(g, {ident}, spec).xi_hat, 1.0, 1e-12);
}

TEST(Envelope, NonPositiveLambdaRejected) {
  auto spec = ssde::LyapunovSpec::exponential_quadratic(0.8);
  spec.gamma = [](double) { return std::numeric_limits<double>::infinity(); };
  const auto g = ssde::TimeGrid::uniform(0.0, 1.0, 4);
  EXPECT_THROW(ssde::empirical_envelope(g, {std::vector<double>(5, 1.0)}, spec), ssde::Error);
}

}  // namespace
