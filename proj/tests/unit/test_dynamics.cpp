#include "sgldc/dynamics.hpp"

#include <doctest.h>

#include <cmath>

using namespace sgldc;

namespace {
Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}
}  // namespace

TEST_CASE("schedule clock and sup step") {
  const auto s = Schedule::from_steps({0.1, 0.3, 0.2});
  CHECK(s.size() == 3);
  CHECK(s.time(0) == 0.0);
  CHECK(s.time(3) == doctest::Approx(0.6));
  CHECK(s.delta0() == 0.3);
  CHECK(Schedule::constant(0.01, 100).time(100) == doctest::Approx(1.0));
  CHECK_THROWS(Schedule::from_steps({0.1, 0.0}));
  CHECK_THROWS(Schedule::from_steps({0.1, -1.0}));
}

TEST_CASE("one SGLD step follows the update rule") {
  const auto m = make_bump_target(2, 2.0, 2.0);
  ChainState s;
  s.position = vec({0.5, -1.0});
  const std::vector<std::size_t> batch{0};
  const Vector g = vec({0.3, -0.7});
  const double eta = 0.05;
  const auto next = sgld_step(s, m, batch, eta, g);
  const Vector expected = s.position - eta * grad_full(m, s.position) + std::sqrt(2.0 * eta / 2.0) * g;
  CHECK((next.position - expected).norm() < 1e-15);
  CHECK(next.step_index == 1);
  CHECK(next.clock == doctest::Approx(eta));
}

TEST_CASE("one random-batch Euler-Maruyama step for a drift model") {
  const auto m = make_rotational_drift(2, 1.0, 1.0);
  ChainState s;
  s.position = vec({1.0, 0.0});
  const std::vector<std::size_t> batch{0};
  const auto next = em_drift_step(s, m, batch, 0.1, Vector::Zero(2));
  CHECK((next.position - vec({0.9, 0.1})).norm() < 1e-15);
}

TEST_CASE("substeps with frozen drift add up to one step") {
  const auto m = make_bump_target(1, 1.5, 2.0);
  ChainState s;
  s.position = vec({0.8});
  const std::vector<std::size_t> batch{0};
  const std::vector<Vector> g{vec({0.4}), vec({-1.2}), vec({0.1}), vec({2.0})};
  const auto path = interpolate_substeps(s, m, batch, 0.08, g);
  REQUIRE(path.size() == 4);
  const double total = (0.4 - 1.2 + 0.1 + 2.0) / 2.0;
  const auto one = sgld_step(s, m, batch, 0.08, vec({total}));
  CHECK(path.back()[0] == doctest::Approx(one.position[0]).epsilon(1e-14));
}

TEST_CASE("step input errors") {
  const auto m = make_gaussian_target(2, 1.0);
  ChainState s;
  s.position = vec({0.0, 0.0});
  const std::vector<std::size_t> batch{0};
  CHECK_THROWS(sgld_step(s, m, batch, 0.0, Vector::Zero(2)));
  CHECK_THROWS(sgld_step(s, m, batch, 0.1, Vector::Zero(3)));
}

TEST_CASE("ensembles are reproducible and independent of the thread count") {
  const auto m = make_bump_target(2, 2.0, 2.0);
  EnsembleOptions o;
  o.n_chains = 200;
  o.record_every = 10;
  o.moment_orders = {2.0, 4.0};
  o.snapshot_steps = {50};
  InitialDistribution init{vec({1.0, 1.0}), 0.5};
  const auto a = simulate_ensemble(m, Schedule::constant(0.01, 100), o, init, 9);
  o.threads = 4;
  const auto b = simulate_ensemble(m, Schedule::constant(0.01, 100), o, init, 9);
  CHECK(a.moments[0].values == b.moments[0].values);
  CHECK(a.moments[1].ci_half_widths == b.moments[1].ci_half_widths);
  CHECK(a.snapshots.at(50) == b.snapshots.at(50));
  const auto c = simulate_ensemble(m, Schedule::constant(0.01, 100), o, init, 10);
  CHECK(a.moments[0].values != c.moments[0].values);
}

TEST_CASE("gaussian target started at the discrete stationary law keeps E|X|^2 flat") {
  const int d = 2;
  const double beta = 1.0, eta = 0.1;
  const double var = 2.0 / (beta * (2.0 - eta));
  const auto m = make_gaussian_target(d, beta);
  EnsembleOptions o;
  o.n_chains = 4000;
  o.record_every = 20;
  o.moment_orders = {1.0, 2.0};
  const auto r = simulate_ensemble(m, Schedule::constant(eta, 200), o, {Vector::Zero(d), std::sqrt(var)}, 3);
  const auto& m1 = r.moments[0];
  const auto& m2 = r.moments[1];
  for (std::size_t i = 0; i < m2.size(); ++i) {
    const double sigma = m2.ci_half_widths[i] / 1.96;
    CHECK(std::abs(m2.values[i] - d * var) <= 3.0 * sigma + 1e-12);
    CHECK(m1.values[i] <= std::sqrt(m2.values[i]));
  }
  for (std::size_t i = 1; i < m2.size(); ++i)
    CHECK(r.running_sup_moments[1].values[i] >= r.running_sup_moments[1].values[i - 1]);
}

TEST_CASE("noise-free contraction gives a decreasing moment series") {
  const auto m = make_gaussian_target(3, 1e300);
  EnsembleOptions o;
  o.n_chains = 10;
  const auto r = simulate_ensemble(m, Schedule::constant(0.1, 50), o, {vec({1.0, 2.0, 3.0}), 0.0}, 1);
  for (std::size_t i = 1; i < r.moments[0].size(); ++i) CHECK(r.moments[0].values[i] < r.moments[0].values[i - 1]);
}

TEST_CASE("unstable step sizes are flagged as divergence") {
  const auto m = make_quadratic_target(1, 1.0, 10.0);
  EnsembleOptions o;
  o.n_chains = 20;
  const auto r = simulate_ensemble(m, Schedule::constant(0.5, 200), o, {vec({1.0}), 0.0}, 1);
  CHECK(r.n_diverged == 20);
  for (const auto& s : r.divergence_steps) CHECK(s.has_value());
}
