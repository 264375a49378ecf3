#include "sgldc/coupling.hpp"
#include "sgldc/random.hpp"

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

CoupledState pair(const Vector& x, const Vector& y) {
  CoupledState s;
  s.x = x;
  s.y = y;
  return s;
}

const std::vector<std::size_t> kBatch0{0};

}  // namespace

TEST_CASE("reflection examples") {
  CHECK(reflect(vec({1, 0}), vec({3, 4})) == vec({-3, 4}));
  CHECK(reflect(vec({1, 0}), vec({0, 5})) == vec({0, 5}));
  CHECK_THROWS_AS(reflect(vec({1, 1}), vec({0, 5})), std::invalid_argument);
}

TEST_CASE("reflection is an involutive isometry") {
  CounterStream s(2, 0);
  for (int i = 0; i < 500; ++i) {
    Vector e(4), v(4);
    s.fill_normal(e);
    s.fill_normal(v);
    e.normalize();
    const Vector r = reflect(e, v);
    CHECK(std::abs(r.norm() - v.norm()) <= 1e-12 * v.norm());
    CHECK((reflect(e, r) - v).norm() <= 1e-12 * v.norm());
  }
}

TEST_CASE("reflected gaussian noise keeps standard normal moments") {
  CounterStream s(4, 0);
  const Vector e = vec({0.6, 0.8});
  const int n = 100000;
  Eigen::Vector2d m1 = Eigen::Vector2d::Zero();
  Eigen::Matrix2d m2 = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    Vector g(2);
    s.fill_normal(g);
    const Vector r = reflect(e, g);
    m1 += r;
    m2 += r * r.transpose();
  }
  m1 /= n;
  m2 /= n;
  const double se = 1.0 / std::sqrt(n);
  CHECK(m1.cwiseAbs().maxCoeff() <= 3.0 * se);
  CHECK(std::abs(m2(0, 0) - 1.0) <= 3.0 * std::sqrt(2.0) * se);
  CHECK(std::abs(m2(1, 1) - 1.0) <= 3.0 * std::sqrt(2.0) * se);
  CHECK(std::abs(m2(0, 1)) <= 3.0 * se);
}

TEST_CASE("merged pairs evolve identically") {
  const auto m = make_bump_target(2, 2.0, 2.0);
  auto s = pair(vec({0.3, 0.4}), vec({0.3, 0.4}));
  s.merged = true;
  s.merge_time = 0.0;
  CouplingConfig cfg;
  const std::vector<Vector> g{vec({1, 2}), vec({-1, 0.5}), vec({0.2, 0.1}), vec({0, -3})};
  const auto next = coupled_step(s, m, kBatch0, 0.01, cfg, g);
  CHECK(next.x == next.y);
  CHECK(next.merged);
  CHECK(next.merge_time == 0.0);
}

TEST_CASE("zero-drift reflection step moves the difference along e by twice the noise") {
  const auto m = make_free_diffusion(2, 1.0);
  const double eta = 0.04, gamma = 0.7;
  CouplingConfig cfg;
  cfg.substeps = 1;
  const std::vector<Vector> g{vec({gamma, 0.0})};
  const auto next = coupled_step(pair(vec({1, 0}), vec({-1, 0})), m, kBatch0, eta, cfg, g);
  const Vector z = next.x - next.y;
  CHECK(z[0] == doctest::Approx(2.0 + 2.0 * std::sqrt(2.0 * eta) * gamma).epsilon(1e-15));
  CHECK(z[1] == 0.0);
}

TEST_CASE("in 1D the reflected noise is the negated noise") {
  const auto m = make_bump_target(1, 2.0, 2.0);
  const double eta = 0.01;
  CouplingConfig cfg;
  cfg.substeps = 4;
  const std::vector<Vector> g{vec({0.5}), vec({-0.2}), vec({0.3}), vec({0.1})};
  const auto s = pair(vec({1.5}), vec({-0.5}));
  const auto next = coupled_step(s, m, kBatch0, eta, cfg, g);
  const double dx = grad_full(m, s.x)[0], dy = grad_full(m, s.y)[0];
  const double expected = 2.0 - eta * (dx - dy) + 2.0 * std::sqrt(2.0 * eta / (4.0 * 2.0)) * (0.5 - 0.2 + 0.3 + 0.1);
  CHECK(next.x[0] - next.y[0] == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("with one substep the noise in the difference is rank one along e") {
  const auto m = make_bump_target(3, 2.0, 2.0);
  CounterStream s(5, 0);
  CouplingConfig cfg;
  cfg.substeps = 1;
  for (int i = 0; i < 100; ++i) {
    Vector x(3), y(3), g(3);
    s.fill_normal(x);
    s.fill_normal(y);
    s.fill_normal(g);
    const std::vector<Vector> gs{g};
    const double eta = 0.01;
    const auto next = coupled_step(pair(x, y), m, kBatch0, eta, cfg, gs);
    if (next.merged) continue;
    const Vector z = x - y;
    const Vector e = z.normalized();
    const Vector noise = next.x - next.y - z + eta * (grad_full(m, x) - grad_full(m, y));
    const Vector ortho = noise - noise.dot(e) * e;
    CHECK(ortho.norm() <= 1e-12 * std::max(1.0, noise.norm()));
  }
}

TEST_CASE("synchronous baseline") {
  const auto gauss = make_gaussian_target(2, 1.0);
  const auto s = pair(vec({1.0, 2.0}), vec({-1.0, 0.5}));
  const double eta = 0.1;
  const auto next = synchronous_step(s, gauss, kBatch0, eta, vec({0.9, -1.4}));
  CHECK(((next.x - next.y) - (1.0 - eta) * (s.x - s.y)).norm() <= 1e-15);

  const auto free = make_free_diffusion(2, 1.0);
  const auto still = synchronous_step(s, free, kBatch0, eta, vec({0.9, -1.4}));
  CHECK(((still.x - still.y) - (s.x - s.y)).norm() <= 1e-15);

  const auto bump = make_bump_target(2, 1.0, 2.0);
  const auto a = synchronous_step(s, bump, kBatch0, eta, vec({0.9, -1.4}));
  const auto b = synchronous_step(s, bump, kBatch0, eta, vec({-3.0, 2.0}));
  CHECK(((a.x - a.y) - (b.x - b.y)).norm() <= 1e-14);
}

TEST_CASE("zero difference merges immediately even with a zero threshold") {
  const auto m = make_gaussian_target(1, 1.0);
  CouplingConfig cfg;
  cfg.substeps = 1;
  cfg.merge_threshold = 0.0;
  const std::vector<Vector> g{vec({0.3})};
  const auto next = coupled_step(pair(vec({0.2}), vec({0.2})), m, kBatch0, 0.1, cfg, g);
  CHECK(next.merged);
  CHECK(next.merge_time == 0.0);
  CHECK(next.x == next.y);
}

TEST_CASE("a sign change of the difference along e is a merge") {
  const auto m = make_free_diffusion(1, 1.0);
  CouplingConfig cfg;
  cfg.substeps = 1;
  // z = 0.1 + 2 sqrt(2 * 0.01) * (-1) < 0
  const std::vector<Vector> g{vec({-1.0})};
  const auto next = coupled_step(pair(vec({0.05}), vec({-0.05})), m, kBatch0, 0.01, cfg, g);
  CHECK(next.merged);
  CHECK(next.x == next.y);
  CHECK(next.merge_time == doctest::Approx(0.01));
}

TEST_CASE("merge is absorbing along a trajectory") {
  const auto m = make_bump_target(2, 2.0, 2.0);
  CouplingKernel kernel(m, CouplingConfig{});
  StreamNoise noise(3, 0);
  auto s = pair(vec({0.5, 0.0}), vec({-0.5, 0.0}));
  int merged_at = -1;
  for (int k = 0; k < 5000; ++k) {
    kernel.step(s, kBatch0, 0.01, noise);
    if (s.merged && merged_at < 0) merged_at = k;
    if (merged_at >= 0) REQUIRE(s.x == s.y);
  }
  CHECK(merged_at >= 0);
}

TEST_CASE("coupled start gives an identically zero series") {
  const auto m = make_bump_target(2, 2.0, 2.0);
  CoupledEnsembleOptions o;
  o.n_pairs = 50;
  o.init_x = {vec({1.0, 0.0}), 1.0};
  o.init_y = o.init_x;
  o.coupled_start = true;
  const auto cs = run_coupled_ensemble(m, Schedule::constant(0.01, 100), CouplingConfig{}, DistanceFunction(1.0, 3.0), o, 1);
  for (std::size_t i = 0; i < cs.mean_f.size(); ++i) {
    CHECK(cs.mean_f.values[i] == 0.0);
    CHECK(cs.merged_fraction.values[i] == 1.0);
  }
}

TEST_CASE("synchronous ensemble on the gaussian target follows the exact difference recursion") {
  const auto m = make_gaussian_target(1, 1.0);
  CouplingConfig cfg;
  cfg.mode = CouplingMode::synchronous;
  cfg.substeps = 1;
  CoupledEnsembleOptions o;
  o.n_pairs = 40;
  o.init_x = {vec({1.0}), 0.0};
  o.init_y = {vec({-1.0}), 0.0};
  o.record_every = 5;
  const double eta = 0.05;
  const DistanceFunction f(1e-6, 10.0);
  const auto cs = run_coupled_ensemble(m, Schedule::constant(eta, 100), cfg, f, o, 2);
  for (std::size_t i = 0; i < cs.mean_abs_z.size(); ++i) {
    const double exact = 2.0 * std::pow(1.0 - eta, static_cast<double>(cs.mean_abs_z.steps[i]));
    CHECK(cs.mean_abs_z.values[i] == doctest::Approx(exact).epsilon(1e-12));
    CHECK(cs.mean_f.values[i] == doctest::Approx(f(exact)).epsilon(1e-12));
  }
}

TEST_CASE("reflection ensemble: merged fraction is nondecreasing and threads do not matter") {
  const auto m = make_bump_target(2, 2.0, 2.0);
  CoupledEnsembleOptions o;
  o.n_pairs = 300;
  o.init_x = {vec({1.5, 0.0}), 0.0};
  o.init_y = {vec({-1.5, 0.0}), 0.0};
  o.record_every = 10;
  const DistanceFunction f(2.0, 5.0);
  const auto a = run_coupled_ensemble(m, Schedule::constant(0.01, 400), CouplingConfig{}, f, o, 8);
  for (std::size_t i = 1; i < a.merged_fraction.size(); ++i)
    CHECK(a.merged_fraction.values[i] >= a.merged_fraction.values[i - 1]);
  CHECK(a.merged_fraction.values.back() > 0.5);
  o.threads = 3;
  const auto b = run_coupled_ensemble(m, Schedule::constant(0.01, 400), CouplingConfig{}, f, o, 8);
  CHECK(a.mean_f.values == b.mean_f.values);
  CHECK(a.merge_times == b.merge_times);
}

TEST_CASE("within-step noise records") {
  const auto m = make_free_diffusion(1, 1.0);
  CouplingConfig cfg;
  cfg.substeps = 2;
  CouplingKernel kernel(m, cfg);
  const std::vector<Vector> g{vec({1.0}), vec({-0.5})};
  ReplayNoise noise(g);
  auto s = pair(vec({5.0}), vec({-5.0}));
  NoiseSupRecord rec;
  kernel.step(s, kBatch0, 0.02, noise, &rec);
  // zeta path: 0 -> 0.1 -> 0.05; a unit bridge uniform gives the larger endpoint.
  CHECK(rec.sup_projection == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(rec.sup_norm == doctest::Approx(0.1).epsilon(1e-14));
}
