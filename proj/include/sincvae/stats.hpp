#pragma once

#include "sincvae/error.hpp"

#include <span>
#include <vector>

namespace sincvae::stats {

// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);
// Regularized incomplete beta I_x(a, b).
double beta_i(double a, double b, double x);

double normal_cdf(double z);
double normal_sf(double z);
double normal_quantile(double p);
double chi2_cdf(double x, double df);
double chi2_sf(double x, double df);
double f_cdf(double x, double df1, double df2);
double f_sf(double x, double df1, double df2);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Midranks (1-based) and the tie term sum(t^3 - t) over tie groups.
struct Ranking {
  std::vector<double> ranks;
  double tie_term = 0.0;
};
Ranking midranks(std::span<const double> values);

// Royston's AS R94 algorithm; 3 <= n <= 50.
TestResult shapiro_wilk(std::span<const double> sample);

// H with tie correction; p from chi-square with groups - 1 degrees of freedom.
TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

// U for sample `a`; two-sided p from the normal approximation with
// tie-corrected variance and continuity correction.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

TestResult anova_oneway(const std::vector<std::vector<double>>& groups);

double mean(std::span<const double> values);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_std(std::span<const double> values);

}  // namespace sincvae::stats
