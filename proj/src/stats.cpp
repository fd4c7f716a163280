#include "ssde/stats.hpp"

#include "ssde/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ssde {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, ErrorKind::invalid_argument, "normal_quantile: p outside (0, 1)");
  // Bisection on the cdf; adequate for test tables and interval widths.
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double kolmogorov_sf(double lambda, int terms) {
  if (lambda <= 0.0) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= terms; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
  }
  return std::clamp(sum, 0.0, 1.0);
}

double ks_distance(std::span<const double> samples, const std::function<double(double)>& cdf) {
  require(!samples.empty(), ErrorKind::insufficient_sample, "ks_distance: no samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const auto n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

KsResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf) {
  if (samples.size() < 8) fail(ErrorKind::insufficient_sample, "ks_test: needs at least 8 samples");
  KsResult r;
  r.statistic = ks_distance(samples, cdf);
  r.p_value = kolmogorov_sf(std::sqrt(static_cast<double>(samples.size())) * r.statistic);
  return r;
}

double mean(std::span<const double> v) {
  require(!v.empty(), ErrorKind::insufficient_sample, "mean: empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  require(v.size() >= 2, ErrorKind::insufficient_sample, "stddev: needs two values");
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double quantile(std::vector<double> v, double p) {
  require(!v.empty(), ErrorKind::insufficient_sample, "quantile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace ssde
