#pragma once

#include "sgldc/constants.hpp"
#include "sgldc/dynamics.hpp"
#include "sgldc/series.hpp"
#include "sgldc/stats.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace sgldc {

// Exact W1 between equal-size empirical measures on the line (sorted matching).
double w1_empirical_1d(std::span<const double> a, std::span<const double> b);

struct Assignment {
  double cost = 0.0;
  // row i is matched to column match[i]
  std::vector<std::size_t> match;
};

// Minimum-cost perfect matching on a square cost matrix (Hungarian method
// with potentials, O(n^3)).
Assignment solve_assignment(const Eigen::MatrixXd& cost);

inline constexpr std::size_t kMaxAssignmentSize = 256;

// Exact W1 between equal-weight empirical measures in R^d under the Euclidean
// cost; intended as a validation oracle, so n is capped at kMaxAssignmentSize.
double w1_empirical_assignment(const std::vector<Vector>& a, const std::vector<Vector>& b);

// Mean of f(|x_i - y_i|) over coupled pairs (rows of x and y). Any coupling
// upper-bounds the infimum defining W_f, so this is an upper bound on W_f.
double w_f_empirical(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                     const DistanceFunction& dist);

struct RateFit {
  double rate = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  // 95% half-width of the fitted rate from the regression standard error.
  double rate_ci_half_width = 0.0;
  std::size_t window_begin = 0;
  std::size_t window_end = 0;
  std::size_t points = 0;
};

// Least-squares line through (T_k, log value) over [begin, end); rate is minus
// the slope. Non-positive values are skipped; throws std::invalid_argument if
// fewer than 3 positive points remain.
RateFit fit_rate(const ExperimentSeries& series, std::size_t begin, std::size_t end);
RateFit fit_rate(const ExperimentSeries& series);

// Index range from the start of the series to the last point still above
// floor_fraction times the initial value (and positive).
std::pair<std::size_t, std::size_t> decay_window(const ExperimentSeries& series,
                                                 double floor_fraction);

struct TailPoint {
  double threshold = 0.0;
  double neg_log_survival = 0.0;
  std::size_t exceedances = 0;
  bool reliable = false;
};

struct TailProfile {
  std::vector<TailPoint> points;
  // -log P(stat > a) ~ slope * a^2 + intercept over the reliable points.
  double slope = 0.0;
  double intercept = 0.0;
  // slope * eta: the empirical counterpart of the sub-Gaussian constant.
  double c_hat = 0.0;
  std::size_t fitted_points = 0;
};

// Thresholds with fewer than `min_exceedances` exceedances are reported but
// left out of the quadratic fit.
TailProfile tail_profile(std::span<const double> samples, std::span<const double> thresholds,
                         double eta, std::size_t min_exceedances = 10);

// Per-snapshot E|X|^p with block-means confidence half-widths.
ExperimentSeries moment_series(const std::map<std::size_t, Eigen::MatrixXd>& snapshots,
                               const Schedule& schedule, double p, std::size_t blocks = 20);

// Reference sampler for pi = N(center, I / (stiffness beta)): an exact
// Ornstein-Uhlenbeck chain driven by the same gaussian draws as the SGLD
// chain. It stays exactly pi-distributed while being tightly correlated with
// the chain, which makes small W1 gaps measurable.
struct GaussianReference {
  double stiffness = 1.0;
  Vector center;
};

// Stationary per-coordinate variance of SGLD on U = k|x|^2/2 when minibatch
// gradients carry extra per-coordinate variance `batch_variance`:
// (2 eta / beta + eta^2 v) / (1 - (1 - k eta)^2).
double gaussian_sgld_stationary_variance(double eta, double beta, double stiffness = 1.0,
                                         double batch_variance = 0.0);

// W1 between N(0, s_eta^2) and N(0, 1/(k beta)) per coordinate:
// sqrt(2/pi) |s_eta - s|.
double gaussian_w1_oracle(double eta, double beta, double stiffness = 1.0,
                          double batch_variance = 0.0);

struct BiasOptions {
  std::vector<double> etas;
  double burn_in_time = 10.0;
  double harvest_time = 40.0;
  // Dense harvesting keeps the upward small-sample bias of the sorted W1
  // estimator well below the step-size bias being measured.
  double harvest_spacing = 0.1;
  std::size_t n_chains = 1000;
  BatchSpec batch{1, false};
  std::size_t blocks = 20;
  unsigned threads = 1;
};

struct BiasPoint {
  double eta = 0.0;
  double w1 = 0.0;
  double ci_half_width = 0.0;
  std::size_t samples = 0;
  std::vector<std::string> warnings;
};

struct BiasResult {
  std::vector<BiasPoint> points;
  // log W1 against log eta.
  LinearFit loglog;
  // W1(eta_i) / W1(eta_{i+1}) with etas sorted in decreasing order.
  std::vector<double> ratios;
};

// For each eta, runs chains started from pi to approximate stationarity,
// harvests coupled (chain, reference) samples and estimates W1(pi_eta, pi)
// by the sorted 1D formula per coordinate, averaged over coordinates.
BiasResult bias_experiment(const FieldModel& model, const GaussianReference& reference,
                           const BiasOptions& options, std::uint64_t seed);

}  // namespace sgldc
