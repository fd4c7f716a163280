#include "ssde/errors.hpp"
#include "ssde/likelihood.hpp"
#include "ssde/presets.hpp"
#include "ssde/rng.hpp"
#include "ssde/stats.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace {

ssde::StateSpaceModel unit_ratio() { return ssde::find_preset("unit-ratio").make_model(); }

ssde::TimeGrid manual_grid(std::vector<double> t) {
  ssde::TimeGrid g;
  g.m = static_cast<int>(t.size()) - 1;
  g.window = {t.back() - t.front(), t.front(), t.back()};
  g.t = std::move(t);
  return g;
}

TEST(SuffStats, UnitRatioTelescopes) {
  const auto m = unit_ratio();
  const auto w = ssde::make_window(20.0);
  const auto p = ssde::simulate_pair(m, ssde::ParamVector{0.8}, ssde::TimeGrid::over(w, 400), 4);
  const auto s = ssde::suff_stats_discrete(p, m);
  EXPECT_NEAR(s.v_y_given_x, w.length(), 1e-12 * w.length());
  EXPECT_NEAR(s.u_y_given_x, p.y.back() - p.y.front(), 1e-11);
  EXPECT_EQ(s.m, 400);
  EXPECT_EQ(s.window.a, w.a);
}

TEST(SuffStats, DirectSubstitution) {
  const auto m = unit_ratio();
  const auto g = manual_grid({0.0, 1.0, 2.0});
  const std::vector<double> y{0.0, 0.5, 1.0}, x{1.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(ssde::suff_stats_discrete(g, y, x, m).u_y_given_x, 1.0);
}

TEST(SuffStats, LatentOneStep) {
  auto m = unit_ratio();
  m.b_x = [](double x, double) { return x; };
  m.sigma_x = [](double, double) { return 1.0; };
  const auto g = manual_grid({0.0, 1.0});
  const std::vector<double> y{0.0, 0.0}, x{1.0, 2.0};
  const auto s = ssde::suff_stats_discrete(g, y, x, m);
  EXPECT_DOUBLE_EQ(s.v_x, 1.0);
  EXPECT_DOUBLE_EQ(s.u_x, 1.0);
}

TEST(SuffStats, DivisionGuardNamesNode) {
  auto m = unit_ratio();
  m.sigma_y = [](double, double, double t) { return t == 3.0 ? 0.0 : 1.0; };
  const auto g = manual_grid({0.0, 1.0, 2.0, 3.0, 4.0});
  const std::vector<double> v(5, 1.0);
  try {
    ssde::suff_stats_discrete(g, v, v, m);
    FAIL();
  } catch (const ssde::Error& e) {
    EXPECT_EQ(e.kind(), ssde::ErrorKind::division_guard);
    EXPECT_EQ(e.index(), std::optional<std::size_t>(3));
  }
}

TEST(SuffStats, Json) {
  ssde::SuffStats s;
  s.u_y_given_x = 1.5;
  s.window = ssde::make_window(2.0);
  s.m = 7;
  const auto j = ssde::to_json(s);
  for (const char* k : {"u_yx", "v_yx", "u_x", "v_x", "m", "aT", "bT"}) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["u_yx"], 1.5);
  EXPECT_EQ(j["m"], 7);
}

TEST(Residuals, Examples) {
  const auto maps = unit_ratio().maps;
  ssde::SuffStats s;
  s.u_y_given_x = 5.0;
  s.v_y_given_x = 2.0;
  EXPECT_EQ(ssde::residual_stats(s, ssde::ParamVector{0.0}, maps).i_yx, 5.0);
  EXPECT_EQ(ssde::residual_stats(s, ssde::ParamVector{2.0}, maps).i_yx, 1.0);
}

TEST(CondLoglik, Examples) {
  ssde::SuffStats s;
  s.u_y_given_x = 2.0;
  s.v_y_given_x = 1.0;
  s.u_x = 3.0;
  s.v_x = 4.0;
  EXPECT_EQ(ssde::cond_loglik(0.0, 0.0, s), 0.0);
  EXPECT_EQ(ssde::cond_loglik(1.0, 0.0, s), 1.5);
  // Vertex of the quadratic at u / v.
  const double best = ssde::cond_loglik(2.0, 0.0, s);
  EXPECT_GT(best, ssde::cond_loglik(1.999, 0.0, s));
  EXPECT_GT(best, ssde::cond_loglik(2.001, 0.0, s));
}

TEST(LogMeanExp, IdenticalWeights) {
  const std::vector<double> w{0.0, 0.0};
  const auto r = ssde::log_mean_exp(w);
  EXPECT_EQ(r.estimate, 0.0);
  EXPECT_EQ(r.std_error, 0.0);
}

TEST(LogMeanExp, BoundedByMaxPlusLogN) {
  const std::vector<double> w{-1.0, 3.0, 2.5, -700.0, 0.0};
  const auto r = ssde::log_mean_exp(w);
  EXPECT_LE(r.estimate, 3.0 + std::log(5.0));
  EXPECT_NEAR(r.estimate, std::log((std::exp(-1.0) + std::exp(3.0) + std::exp(2.5) + 1.0) / 5.0), 1e-12);
}

TEST(LogMeanExp, DegenerateWeights) {
  const double ninf = -std::numeric_limits<double>::infinity();
  const std::vector<double> w{ninf, ninf};
  try {
    ssde::log_mean_exp(w);
    FAIL();
  } catch (const ssde::Error& e) {
    EXPECT_EQ(e.kind(), ssde::ErrorKind::degenerate_weights);
  }
}

TEST(MarginalMc, LatentFreeIsExact) {
  const auto m = unit_ratio();
  const auto w = ssde::make_window(10.0);
  const auto p = ssde::simulate_pair(m, ssde::ParamVector{1.0}, ssde::TimeGrid::over(w, 200), 9);
  const auto stats = ssde::suff_stats_discrete(p, m);
  for (double th : {-1.0, 0.3, 1.0, 2.2}) {
    const auto r = ssde::marginal_loglik_mc(ssde::ParamVector{th}, p, m, 64, 3);
    EXPECT_EQ(r.std_error, 0.0);
    EXPECT_EQ(r.estimate, ssde::cond_loglik(ssde::ParamVector{th}, stats, m.maps));
  }
}

TEST(MarginalMc, NeedsTwoDraws) {
  const auto m = unit_ratio();
  const auto p = ssde::simulate_pair(m, ssde::ParamVector{1.0}, ssde::TimeGrid::over(ssde::make_window(1.0), 10), 9);
  EXPECT_THROW(ssde::marginal_loglik_mc(ssde::ParamVector{1.0}, p, m, 1, 3), ssde::Error);
}

TEST(MarginalMc, SelfConsistentAcrossSampleSizes) {
  const auto m = ssde::find_preset("latent-modulated").make_model();
  const auto p = ssde::simulate_pair(m, ssde::ParamVector{1.0}, ssde::TimeGrid::over(ssde::make_window(5.0), 50), 17);
  const ssde::MarginalLikelihood small(p, m, 4096, 101);
  const ssde::MarginalLikelihood big(p, m, 1 << 16, 202);
  for (double th : {0.5, 1.0, 1.5}) {
    const auto a = small.evaluate(ssde::ParamVector{th});
    const auto b = big.evaluate(ssde::ParamVector{th});
    EXPECT_GT(a.std_error, 0.0);
    EXPECT_LT(std::abs(a.estimate - b.estimate), 3.0 * std::hypot(a.std_error, b.std_error)) << th;
  }
}

TEST(MarginalMc, ThreadCountDoesNotChangeResult) {
  const auto m = ssde::find_preset("latent-modulated").make_model();
  const auto p = ssde::simulate_pair(m, ssde::ParamVector{1.0}, ssde::TimeGrid::over(ssde::make_window(5.0), 50), 17);
  const auto a = ssde::marginal_loglik_mc(ssde::ParamVector{0.7}, p, m, 300, 5, 1);
  const auto b = ssde::marginal_loglik_mc(ssde::ParamVector{0.7}, p, m, 300, 5, 3);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(MarginalMc, AnalyticDerivativesMatchFiniteDifferences) {
  const auto m = ssde::find_preset("latent-modulated").make_model();
  const auto p = ssde::simulate_pair(m, ssde::ParamVector{1.0}, ssde::TimeGrid::over(ssde::make_window(5.0), 50), 23);
  const ssde::MarginalLikelihood ml(p, m, 512, 8);
  const double th = 0.8, h = 1e-4;
  const auto d = ml.derivatives(ssde::ParamVector{th});
  const auto f = [&](double x) { return ml.evaluate(ssde::ParamVector{x}).estimate; };
  EXPECT_NEAR(d.value, f(th), 1e-12);
  EXPECT_NEAR(d.gradient[0], (f(th + h) - f(th - h)) / (2 * h), 1e-5 * std::max(1.0, std::abs(d.gradient[0])));
  EXPECT_NEAR(d.hessian(0, 0), (f(th + h) - 2 * f(th) + f(th - h)) / (h * h),
              1e-3 * std::max(1.0, std::abs(d.hessian(0, 0))));
}

TEST(ApproxLoglik, Examples) {
  const auto m = ssde::make_gbm_latent_model({1.0, 0.5});
  const auto w = ssde::make_window(30.0);
  const double L = w.length();
  const ssde::ParamVector th0{1.3, 0.7};
  EXPECT_NEAR(ssde::approx_loglik(th0, th0, m, w, 0.0), L * (1.3 * 1.3 / 2.0 + 4.0 * 0.7 * 0.7), 1e-10);
  EXPECT_EQ(ssde::approx_true_loglik(th0, m, w, 0.4), ssde::approx_loglik(th0, th0, m, w, 0.4));
  const ssde::ParamVector th{1.3, 0.0}, th0x{1.3, 0.0};
  EXPECT_NEAR(ssde::approx_loglik(th, th0x, m, w, 0.25), L * 1.3 * 1.3 / 2.0 + 1.3 * 0.25, 1e-10);
}

TEST(ApproxLoglik, NeedsRatioBounds) {
  auto m = unit_ratio();
  m.ratio_bounds.reset();
  try {
    ssde::approx_loglik(ssde::ParamVector{1.0}, ssde::ParamVector{1.0}, m, ssde::make_window(1.0), 0.0);
    FAIL();
  } catch (const ssde::Error& e) {
    EXPECT_EQ(e.kind(), ssde::ErrorKind::precondition_violation);
  }
}

TEST(Bounds, CollapseWithoutEnvelope) {
  auto m = unit_ratio();
  const auto w = ssde::make_window(10.0);
  const ssde::ResidualStats r{0.3, 0.0};
  const auto b0 = ssde::likelihood_log_bounds(ssde::ParamVector{0.5}, ssde::ParamVector{1.0}, m, w, 2.0, 3.0, r);
  EXPECT_DOUBLE_EQ(b0.lower, b0.upper);
  m.ratio_bounds->alpha_y1 = 0.2;
  m.ratio_bounds->alpha_y2 = 0.4;
  const auto bxi0 = ssde::likelihood_log_bounds(ssde::ParamVector{0.5}, ssde::ParamVector{1.0}, m, w, 0.0, 3.0, r);
  EXPECT_DOUBLE_EQ(bxi0.lower, bxi0.upper);
  EXPECT_DOUBLE_EQ(bxi0.lower, b0.lower);
}

TEST(Bounds, HandExpansion) {
  // K1 = L - 0 = 10, K2 = L + 1 * 1 * 2 = 12 (K_Y = 1, phi = phi0 = 1):
  //   lower = K1 - K2 / 2 = 4, upper = K2 - K1 / 2 = 7.
  auto m = unit_ratio();
  m.ratio_bounds->alpha_y2 = 1.0;
  ssde::ObservationWindow w{10.0, 0.0, 10.0};
  const auto b = ssde::likelihood_log_bounds(ssde::ParamVector{1.0}, ssde::ParamVector{1.0}, m, w, 1.0, 2.0, {});
  EXPECT_DOUBLE_EQ(b.lower, 4.0);
  EXPECT_DOUBLE_EQ(b.upper, 7.0);
  EXPECT_DOUBLE_EQ(b.upper - b.lower, 3.0);
  EXPECT_FALSE(b.envelope_too_loose);
}

TEST(Bounds, LooseEnvelopeClampsWithFlag) {
  auto m = unit_ratio();
  m.ratio_bounds->alpha_y1 = 10.0;
  ssde::ObservationWindow w{1.0, 0.0, 1.0};
  const auto b = ssde::likelihood_log_bounds(ssde::ParamVector{-0.5}, ssde::ParamVector{1.0}, m, w, 1.0, 1.0, {});
  EXPECT_TRUE(b.envelope_too_loose);
  EXPECT_LE(b.lower, b.upper);
}

TEST(Bounds, OrderedForRandomInputs) {
  auto m = unit_ratio();
  m.ratio_bounds->alpha_y1 = 0.3;
  m.ratio_bounds->alpha_y2 = 0.6;
  const ssde::CounterRng rng(3, 0);
  for (int i = 0; i < 200; ++i) {
    const double th = 4.0 * rng.normal(4 * i), th0 = 2.0 * rng.normal(4 * i + 1);
    const ssde::ResidualStats r{rng.normal(4 * i + 2), 0.0};
    const auto b = ssde::likelihood_log_bounds(ssde::ParamVector{th}, ssde::ParamVector{th0}, m,
                                               ssde::make_window(5.0), 1.5, 0.7, r);
    EXPECT_LE(b.lower, b.upper);
  }
}

TEST(KlRate, Examples) {
  const auto maps = unit_ratio().maps;
  EXPECT_EQ(ssde::kl_rate_h(ssde::ParamVector{0.4}, ssde::ParamVector{0.4}, maps, 1.0, 4.0), 0.0);
  EXPECT_DOUBLE_EQ(ssde::kl_rate_h(ssde::ParamVector{1.0}, ssde::ParamVector{0.0}, maps, 2.0, 4.0), 1.0);
}

TEST(KlRate, ViolationIsError) {
  const auto maps = ssde::make_gbm_latent_model({1.0, 0.5}).maps;
  try {
    ssde::kl_rate_h(ssde::ParamVector{1.0, 2.0}, ssde::ParamVector{1.0, 1.0}, maps, 1.0, 4.0);
    FAIL();
  } catch (const ssde::Error& e) {
    EXPECT_EQ(e.kind(), ssde::ErrorKind::assumption_violation);
    EXPECT_NE(std::string(e.what()).find("psi_X"), std::string::npos);
  }
  // |psi_X| below the truth keeps h non-negative.
  EXPECT_GE(ssde::kl_rate_h(ssde::ParamVector{1.0, 0.5}, ssde::ParamVector{1.0, 1.0}, maps, 1.0, 4.0), 0.0);
}

std::vector<ssde::ParamVector> line_grid(double lo, double hi, int n) {
  std::vector<ssde::ParamVector> g;
  for (int i = 0; i < n; ++i) g.push_back(ssde::ParamVector{lo + (hi - lo) * i / (n - 1)});
  return g;
}

TEST(JRate, TruthOnGrid) {
  const auto maps = unit_ratio().maps;
  const auto grid = line_grid(-2.0, 2.0, 41);
  const auto j = ssde::j_rate(ssde::ParamVector{1.5}, ssde::ParamVector{0.0}, grid, maps, 1.0, 4.0);
  EXPECT_EQ(j.h_theta_inf, 0.0);
  EXPECT_DOUBLE_EQ(j.j_theta, 1.125);
}

TEST(JRate, SingletonGrid) {
  const auto maps = unit_ratio().maps;
  const auto j = ssde::j_rate(ssde::ParamVector{0.7}, ssde::ParamVector{0.0}, {ssde::ParamVector{0.7}}, maps, 1.0, 4.0);
  EXPECT_EQ(j.j_theta, 0.0);
}

TEST(JRate, SetBoundaryInfimum) {
  const auto maps = unit_ratio().maps;
  const auto grid = line_grid(-3.0, 3.0, 601);
  const double delta = 1.0, cell = 0.01;
  std::vector<ssde::ParamVector> far;
  for (const auto& p : grid) {
    if (std::abs(p[0]) >= delta) far.push_back(p);
  }
  const double j = ssde::j_of_set(far, ssde::ParamVector{0.0}, grid, maps, 1.0, 4.0);
  // h = theta^2 / 2; one cell of variation at the boundary is about delta * cell.
  EXPECT_NEAR(j, delta * delta / 2.0, delta * cell + cell * cell);
}

}  // namespace
