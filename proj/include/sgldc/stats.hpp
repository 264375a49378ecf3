#pragma once

#include "sgldc/series.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>

namespace sgldc {

double normal_cdf(double x);
double normal_quantile(double p);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_se = 0.0;
  std::size_t n = 0;
};

// Ordinary least squares y = intercept + slope * x; needs n >= 2.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

struct TrendTest {
  double slope = 0.0;
  double t_statistic = 0.0;
  // One-sided p-value for H1: slope > 0.
  double p_value = 1.0;
  bool positive_trend = false;
};

// Student-t test on the OLS slope; needs n >= 3.
TrendTest positive_trend_test(std::span<const double> x, std::span<const double> y,
                              double alpha = 0.05);

// Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_survival(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// One-sample Kolmogorov-Smirnov test against a continuous CDF.
KsResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf);

struct EnergyTest {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t permutations = 0;
};

// Energy distance 2 E|X-Y| - E|X-X'| - E|Y-Y'| between the rows of a and b
// (V-statistic form).
double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Permutation two-sample test on the energy distance.
EnergyTest energy_test(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       std::size_t permutations, std::uint64_t seed);

// Paired variant for coupled samples (row i of a is paired with row i of b):
// permutations swap the members of randomly chosen pairs, which is the valid
// null under exchangeability of each pair.
EnergyTest paired_energy_test(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              std::size_t permutations, std::uint64_t seed);

}  // namespace sgldc
