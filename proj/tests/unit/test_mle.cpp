#include "ssde/errors.hpp"
#include "ssde/mle.hpp"
#include "ssde/presets.hpp"
#include "ssde/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

ssde::ParamMaps curved_maps() {
  return ssde::ParamMaps::finite_difference(
      2, [](const Eigen::VectorXd& t) { return std::sin(t[0]) + t[1] * t[1]; },
      [](const Eigen::VectorXd& t) { return 0.3 * t[0] * t[1]; });
}

// Direct transcription of the objective, independent of the library's map plumbing.
double g_oracle(const Eigen::VectorXd& t, const Eigen::VectorXd& t0, double ky, double kx, double w) {
  const auto py = [](const Eigen::VectorXd& v) { return std::sin(v[0]) + v[1] * v[1]; };
  const auto px = [](const Eigen::VectorXd& v) { return 0.3 * v[0] * v[1]; };
  const double dy = py(t) - py(t0), dx = px(t) - px(t0);
  return -ky / 2 * dy * dy + std::sqrt(ky) * dy * w - kx / 2 * dx * dx +
         kx / 2 * (px(t) * px(t) - px(t0) * px(t0));
}

TEST(Box, ContainsAndProject) {
  const auto b = ssde::Box::around(ssde::ParamVector{0.0, 1.0}, 2.0);
  EXPECT_TRUE(b.contains(Eigen::Vector2d(1.0, 2.9)));
  EXPECT_FALSE(b.contains(Eigen::Vector2d(1.0, 3.1)));
  EXPECT_FALSE(b.contains(Eigen::VectorXd::Zero(3)));
  const Eigen::VectorXd p = b.project(Eigen::Vector2d(-5.0, 2.0));
  EXPECT_EQ(p[0], -2.0);
  EXPECT_EQ(p[1], 2.0);
}

TEST(Objective, ZeroAtReferenceWithoutNoise) {
  const auto maps = curved_maps();
  const ssde::ParamVector t0{0.4, -0.2};
  EXPECT_EQ(ssde::g_objective(t0, t0, maps, 1.5, 3.0, 0.0), 0.0);
}

TEST(Objective, MatchesOracleAndDerivatives) {
  const auto maps = curved_maps();
  const Eigen::Vector2d t0(0.4, -0.2);
  const ssde::CounterRng rng(11, 0);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector2d t(rng.normal(3 * i), rng.normal(3 * i + 1));
    const double w = rng.normal(3 * i + 2);
    const ssde::ParamVector th(t), th0{t0[0], t0[1]};
    EXPECT_NEAR(ssde::g_objective(th, th0, maps, 1.5, 3.0, w), g_oracle(t, t0, 1.5, 3.0, w), 1e-12);
    const auto f = [&](const Eigen::VectorXd& v) { return g_oracle(v, t0, 1.5, 3.0, w); };
    const Eigen::VectorXd grad = ssde::g_gradient(th, th0, maps, 1.5, 3.0, w);
    const Eigen::MatrixXd hess = ssde::g_hessian(th, th0, maps, 1.5, 3.0, w);
    const double h = 1e-4;
    for (int j = 0; j < 2; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(2);
      e[j] = h;
      const double fd = (f(t + e) - f(t - e)) / (2 * h);
      EXPECT_NEAR(grad[j], fd, 1e-6 * std::max(1.0, std::abs(fd)));
      for (int k = 0; k < 2; ++k) {
        Eigen::VectorXd ek = Eigen::VectorXd::Zero(2);
        ek[k] = h;
        const double fdh = (f(t + e + ek) - f(t + e - ek) - f(t - e + ek) + f(t - e - ek)) / (4 * h * h);
        EXPECT_NEAR(hess(j, k), fdh, 1e-4 * std::max(1.0, std::abs(fdh)));
      }
    }
  }
}

TEST(Fisher, Examples) {
  const auto unit = ssde::find_preset("unit-ratio").make_model().maps;
  const auto f = ssde::fisher_info(ssde::ParamVector{0.3}, unit, 2.0);
  EXPECT_EQ(f.matrix(0, 0), 2.0);
  EXPECT_TRUE(f.positive_definite);
  const auto sum = ssde::ParamMaps::affine(Eigen::Vector2d(1.0, 1.0), 0.0, Eigen::Vector2d(0.0, 0.0), 0.0);
  const auto s = ssde::fisher_info(ssde::ParamVector{0.0, 0.0}, sum, 1.0);
  EXPECT_FALSE(s.positive_definite);
  EXPECT_NEAR(s.min_eigenvalue, 0.0, 1e-12);
}

TEST(Maximize, ConcaveQuadraticOneNewtonStep) {
  ssde::Objective q{[](const Eigen::VectorXd& t) { return -(t[0] - 2.0) * (t[0] - 2.0); },
                    [](const Eigen::VectorXd& t) { return Eigen::VectorXd::Constant(1, -2.0 * (t[0] - 2.0)); },
                    [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Constant(1, 1, -2.0); }};
  const auto r = ssde::maximize(q, ssde::ParamVector{-3.0});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_NEAR(r.theta_hat[0], 2.0, 1e-14);
  EXPECT_EQ(r.gradient_fallbacks, 0);
}

TEST(Maximize, LinearObjectiveStopsAtBoundary) {
  ssde::Objective lin{[](const Eigen::VectorXd& t) { return t[0]; },
                      [](const Eigen::VectorXd&) { return Eigen::VectorXd::Constant(1, 1.0); },
                      [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(1, 1); }};
  ssde::FitOptions o;
  o.box = ssde::Box{Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0)};
  const auto r = ssde::maximize(lin, ssde::ParamVector{0.0}, o);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.theta_hat[0], 1.0);
  EXPECT_GE(r.gradient_fallbacks, 1);
}

TEST(Maximize, StartOutsideBox) {
  ssde::Objective lin{[](const Eigen::VectorXd& t) { return t[0]; },
                      [](const Eigen::VectorXd&) { return Eigen::VectorXd::Constant(1, 1.0); },
                      [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(1, 1); }};
  ssde::FitOptions o;
  o.box = ssde::Box{Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0)};
  EXPECT_THROW(ssde::maximize(lin, ssde::ParamVector{3.0}, o), ssde::Error);
}

TEST(FitMle, UnitRatioClosedForm) {
  const auto m = ssde::find_preset("unit-ratio").make_model();
  const auto w = ssde::make_window(50.0);
  const auto p = ssde::simulate_pair(m, ssde::ParamVector{1.0}, ssde::TimeGrid::over(w, 500), 31);
  const auto s = ssde::suff_stats_discrete(p, m);
  const auto fit = ssde::fit_mle(s, m, ssde::ParamVector{1.0});
  ASSERT_TRUE(fit.converged);
  const double expect = 1.0 + (s.u_y_given_x - s.v_y_given_x) / w.length();
  EXPECT_NEAR(fit.theta_hat[0], expect, 1e-10);
  EXPECT_NEAR(fit.theta_hat[0], (p.y.back() - p.y.front()) / w.length(), 1e-10);
  EXPECT_NEAR(fit.sigma_inv(0, 0), w.length(), 1e-9);
  EXPECT_FALSE(fit.sigma_inv_fallback);
}

TEST(FitMle, ExactMatchesApproxWithoutLatent) {
  const auto m = ssde::find_preset("unit-ratio").make_model();
  const auto w = ssde::make_window(50.0);
  const auto p = ssde::simulate_pair(m, ssde::ParamVector{1.0}, ssde::TimeGrid::over(w, 500), 32);
  const ssde::MarginalLikelihood ml(p, m, 8, 1);
  const auto a = ssde::fit_mle(ssde::suff_stats_discrete(p, m), m, ssde::ParamVector{1.0});
  const auto b = ssde::fit_mle_exact(ml, ssde::ParamVector{1.0});
  ASSERT_TRUE(b.converged);
  EXPECT_NEAR(a.theta_hat[0], b.theta_hat[0], 1e-8);
  EXPECT_NEAR(b.sigma_inv(0, 0), w.length(), 1e-8);
}

TEST(FitMle, GbmLatentHitsPsiXBoundary) {
  const auto& preset = ssde::find_preset("gbm-latent");
  const auto m = preset.make_model();
  const auto w = ssde::make_window(20.0);
  const auto p = ssde::simulate_pair(m, preset.theta0, ssde::TimeGrid::over(w, 400), 5);
  ssde::FitOptions o;
  o.box = preset.box_for(preset.theta0);
  const auto fit = ssde::fit_mle(ssde::suff_stats_discrete(p, m), m, preset.theta0, o, preset.theta0);
  EXPECT_TRUE(fit.converged);
  EXPECT_EQ(fit.theta_hat[1], preset.theta0[1]);
}

TEST(Clt, StandardizeAndPrecondition) {
  ssde::FitResult f;
  f.theta_hat = ssde::ParamVector{1.5};
  f.converged = true;
  const auto z = ssde::clt_standardize(f, ssde::ParamVector{1.0}, ssde::make_window(16.0));
  EXPECT_DOUBLE_EQ(z[0], 2.0);
  f.converged = false;
  try {
    ssde::clt_standardize(f, ssde::ParamVector{1.0}, ssde::make_window(16.0));
    FAIL();
  } catch (const ssde::Error& e) {
    EXPECT_EQ(e.kind(), ssde::ErrorKind::precondition_violation);
  }
}

TEST(Inverse, SingularFallsBack) {
  bool fb = false;
  const Eigen::MatrixXd i = ssde::inverse_or_identity(Eigen::MatrixXd::Zero(2, 2), &fb);
  EXPECT_TRUE(fb);
  EXPECT_TRUE(i.isIdentity());
  const Eigen::MatrixXd d = ssde::inverse_or_identity(Eigen::MatrixXd::Identity(2, 2) * 4.0, &fb);
  EXPECT_FALSE(fb);
  EXPECT_DOUBLE_EQ(d(1, 1), 0.25);
}

TEST(FitMle, Json) {
  ssde::FitResult f;
  f.theta_hat = ssde::ParamVector{1.0, 2.0};
  f.sigma_inv = Eigen::MatrixXd::Identity(2, 2);
  const auto j = ssde::to_json(f);
  for (const char* k : {"theta_hat", "sigma_inv", "converged", "iterations", "objective", "clt_stat"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["theta_hat"][1], 2.0);
  EXPECT_EQ(j["sigma_inv"][0][0], 1.0);
}

}  // namespace
