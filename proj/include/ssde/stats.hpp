#pragma once

#include <functional>
#include <span>
#include <vector>

namespace ssde {

double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);

// Survival function of the Kolmogorov distribution, series cut at `terms`.
double kolmogorov_sf(double lambda, int terms = 100);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// sup_x |F_n(x) - F(x)| for a continuous F; no sample-size restriction.
double ks_distance(std::span<const double> samples, const std::function<double(double)>& cdf);

// One-sample test with the asymptotic p-value; needs at least 8 samples.
KsResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf);

double mean(std::span<const double> v);
// Unbiased sample standard deviation.
double stddev(std::span<const double> v);
double quantile(std::vector<double> v, double p);

}  // namespace ssde
