#include "sgldc/diagnostics.hpp"
#include "sgldc/random.hpp"
#include "sgldc/targets.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

using namespace sgldc;

namespace {

double brute_assignment(const Eigen::MatrixXd& c) {
  std::vector<int> p(static_cast<std::size_t>(c.rows()));
  std::iota(p.begin(), p.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += c(static_cast<Eigen::Index>(i), p[i]);
    best = std::min(best, s);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

std::vector<Vector> cloud(CounterStream& s, int n, int d, double shift = 0.0) {
  std::vector<Vector> out;
  for (int i = 0; i < n; ++i) {
    Vector v(d);
    s.fill_normal(v);
    v.array() += shift;
    out.push_back(v);
  }
  return out;
}

ExperimentSeries series_of(const std::vector<double>& t, const std::vector<double>& v) {
  ExperimentSeries s;
  for (std::size_t i = 0; i < t.size(); ++i) s.push(i, t[i], v[i], 0.0);
  return s;
}

}  // namespace

TEST_CASE("1D empirical W1 examples") {
  const std::vector<double> a{0.0, 1.0}, b{0.0, 3.0};
  CHECK(w1_empirical_1d(a, b) == doctest::Approx(1.0));
  CHECK(w1_empirical_1d(a, a) == 0.0);
  const std::vector<double> c{3.0, 1.0, 2.0}, d{2.0, 4.0, 3.0};
  CHECK(w1_empirical_1d(c, d) == doctest::Approx(1.0));
  CHECK_THROWS(w1_empirical_1d(a, c));
}

TEST_CASE("assignment solver matches brute force") {
  CounterStream s(11, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 6;
    Eigen::MatrixXd c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = s.uniform() * 10.0;
    const auto sol = solve_assignment(c);
    CHECK(sol.cost == doctest::Approx(brute_assignment(c)).epsilon(1e-12));
    std::vector<std::size_t> m = sol.match;
    std::sort(m.begin(), m.end());
    for (int i = 0; i < n; ++i) CHECK(m[static_cast<std::size_t>(i)] == static_cast<std::size_t>(i));
    double recomputed = 0.0;
    for (int i = 0; i < n; ++i) recomputed += c(i, static_cast<Eigen::Index>(sol.match[static_cast<std::size_t>(i)]));
    CHECK(recomputed == doctest::Approx(sol.cost).epsilon(1e-12));
  }
}

TEST_CASE("assignment W1 agrees with the sorted formula in 1D") {
  CounterStream s(12, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = cloud(s, 40, 1), b = cloud(s, 40, 1, 0.3);
    std::vector<double> a1, b1;
    for (const auto& v : a) a1.push_back(v[0]);
    for (const auto& v : b) b1.push_back(v[0]);
    CHECK(std::abs(w1_empirical_assignment(a, b) - w1_empirical_1d(a1, b1)) <= 1e-12);
  }
}

TEST_CASE("assignment W1 is a metric on samples") {
  CounterStream s(13, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = cloud(s, 12, 3), b = cloud(s, 12, 3, 0.5), c = cloud(s, 12, 3, -0.2);
    const double ab = w1_empirical_assignment(a, b), bc = w1_empirical_assignment(b, c),
                 ac = w1_empirical_assignment(a, c);
    CHECK(ac <= ab + bc + 1e-12);
    CHECK(ab == doctest::Approx(w1_empirical_assignment(b, a)).epsilon(1e-12));
    CHECK(w1_empirical_assignment(a, a) == doctest::Approx(0.0).scale(1.0));
  }
  std::vector<Vector> big(kMaxAssignmentSize + 1, Vector::Zero(1));
  CHECK_THROWS(w1_empirical_assignment(big, big));
}

TEST_CASE("W_f of a coupling is bracketed by scaled mean distances") {
  const DistanceFunction f(1.0, 2.0);
  CHECK(f(1.0) == doctest::Approx(1.0 - std::exp(-1.0)));
  CounterStream s(14, 0);
  Eigen::MatrixXd x(100, 2), y(100, 2);
  for (Eigen::Index i = 0; i < 100; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) {
      x(i, j) = 3.0 * s.normal();
      y(i, j) = 3.0 * s.normal();
    }
  const double mean_dist = (x - y).rowwise().norm().mean();
  const double wf = w_f_empirical(x, y, f);
  CHECK(wf <= mean_dist);
  CHECK(wf >= f.floor_slope() * mean_dist);
  CHECK(w_f_empirical(x, x, f) == 0.0);
}

TEST_CASE("rate fit examples") {
  std::vector<double> t, v;
  for (int k = 0; k <= 40; ++k) {
    t.push_back(0.25 * k);
    v.push_back(std::exp(-0.5 * t.back()));
  }
  auto fit = fit_rate(series_of(t, v));
  CHECK(fit.rate == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(0.0).scale(1.0));

  std::vector<double> flat(t.size(), 3.0);
  CHECK(fit_rate(series_of(t, flat)).rate == doctest::Approx(0.0).scale(1.0));

  CounterStream s(15, 0);
  std::vector<double> noisy;
  for (double ti : t) noisy.push_back(2.0 * std::exp(-0.3 * ti) * std::exp(0.05 * s.normal()));
  fit = fit_rate(series_of(t, noisy));
  CHECK(fit.rate >= 0.25);
  CHECK(fit.rate <= 0.35);
  CHECK(std::abs(fit.rate - 0.3) <= 0.1 * 0.3);
  CHECK(fit.rate_ci_half_width > 0.0);

  std::vector<double> zeros(t.size(), 0.0);
  zeros[0] = 1.0;
  zeros[1] = 0.5;
  CHECK_THROWS_AS(fit_rate(series_of(t, zeros)), std::invalid_argument);
}

TEST_CASE("decay window stops at the floor") {
  const std::vector<double> t{0, 1, 2, 3, 4, 5};
  const std::vector<double> v{1.0, 0.1, 0.01, 0.001, 0.0001, 0.0};
  const auto [b, e] = decay_window(series_of(t, v), 1e-3);
  CHECK(b == 0);
  CHECK(e == 4);
}

TEST_CASE("tail profile") {
  std::vector<double> samples;
  for (int i = 1; i <= 100; ++i) samples.push_back(i);
  const std::vector<double> thr{50.0, 95.0, 99.0, 100.0};
  const auto prof = tail_profile(samples, thr, 0.01, 5);
  // Half the samples exceed the median.
  CHECK(prof.points[0].exceedances == 50);
  CHECK(prof.points[0].neg_log_survival == doctest::Approx(std::log(2.0)));
  CHECK(prof.points[1].exceedances == 5);
  CHECK(prof.points[1].reliable);
  CHECK_FALSE(prof.points[2].reliable);
  CHECK(std::isinf(prof.points[3].neg_log_survival));
  CHECK(prof.fitted_points == 2);
  CHECK(prof.c_hat == doctest::Approx(prof.slope * 0.01));

  // Half-normal samples against the same fit through exact survival values.
  CounterStream s(16, 0);
  std::vector<double> g(200000);
  for (auto& x : g) x = std::abs(s.normal());
  const std::vector<double> th{1.0, 1.5, 2.0, 2.5, 3.0};
  const auto hn = tail_profile(g, th, 1.0);
  std::vector<double> a2, exact;
  for (double a : th) {
    a2.push_back(a * a);
    exact.push_back(-std::log(2.0 * (1.0 - normal_cdf(a))));
  }
  CHECK(hn.slope == doctest::Approx(least_squares(a2, exact).slope).epsilon(0.03));
}

TEST_CASE("moment series from snapshots") {
  std::map<std::size_t, Eigen::MatrixXd> snaps;
  Eigen::MatrixXd m(4, 2);
  m << 3, 4, 0, 1, 1, 0, 0, 0;
  snaps[2] = m;
  const auto ser = moment_series(snaps, Schedule::constant(0.5, 4), 2.0, 2);
  REQUIRE(ser.size() == 1);
  CHECK(ser.steps[0] == 2);
  CHECK(ser.times[0] == doctest::Approx(1.0));
  CHECK(ser.values[0] == doctest::Approx((25.0 + 1.0 + 1.0 + 0.0) / 4.0));
}

TEST_CASE("gaussian bias oracle") {
  // k = 1, beta = 1: variance 2 eta / (2 eta - eta^2) = 1 / (1 - eta / 2).
  CHECK(gaussian_sgld_stationary_variance(0.1, 1.0) == doctest::Approx(1.0 / 0.95));
  CHECK(gaussian_w1_oracle(0.0001, 1.0) == doctest::Approx(std::sqrt(2.0 / std::numbers::pi) * 0.000025).epsilon(1e-3));
  CHECK(std::isinf(gaussian_sgld_stationary_variance(2.0, 1.0)));
  // Minibatch variance inflates the stationary variance.
  CHECK(gaussian_sgld_stationary_variance(0.1, 1.0, 1.0, 1.0) > gaussian_sgld_stationary_variance(0.1, 1.0));
  // Leading-order bias is linear in eta.
  const double r = gaussian_w1_oracle(0.02, 2.0) / gaussian_w1_oracle(0.01, 2.0);
  CHECK(r == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("bias experiment on the gaussian target tracks the oracle") {
  const auto m = make_gaussian_target(1, 1.0);
  GaussianReference ref{1.0, Vector::Zero(1)};
  BiasOptions opt;
  opt.etas = {0.05, 0.1};
  opt.n_chains = 2000;
  opt.burn_in_time = 5.0;
  opt.harvest_time = 20.0;
  const auto res = bias_experiment(m, ref, opt, 9);
  REQUIRE(res.points.size() == 2);
  CHECK(res.points[0].eta == 0.1);
  for (const auto& p : res.points) {
    const double oracle = gaussian_w1_oracle(p.eta, 1.0);
    CHECK(std::abs(p.w1 - oracle) <= 3.0 * p.ci_half_width / 1.96);
  }
  REQUIRE(res.ratios.size() == 1);
  CHECK(res.ratios[0] > 1.5);
  CHECK(res.ratios[0] < 2.8);
}
