#include "sgldc/constants.hpp"
#include "sgldc/random.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include <cmath>
#include <limits>

using namespace sgldc;

namespace {

// f by adaptive quadrature of its defining integral.
double f_quadrature(double c_f, double R1, double r) {
  auto integrand = [&](double s) { return std::exp(-c_f * std::min(s, R1)); };
  using boost::math::quadrature::gauss_kronrod;
  if (r <= R1) return gauss_kronrod<double, 31>::integrate(integrand, 0.0, r, 15, 1e-14);
  return gauss_kronrod<double, 31>::integrate(integrand, 0.0, R1, 15, 1e-14) +
         gauss_kronrod<double, 31>::integrate(integrand, R1, r, 15, 1e-14);
}

StepSizeInputs feasible_inputs() {
  StepSizeInputs in;
  in.beta = 1.0;
  in.K = 0.2;
  in.R = 3.0;
  in.R1 = 4.6;
  in.c_f = 0.5;
  in.kappa = 0.1;
  in.cbar = default_cbar();
  return in;
}

}  // namespace

TEST_CASE("geometry from the assumption constants") {
  const auto g = derive_geometry({1.0, 1.0, 2.0, 0.0});
  CHECK(g.R == 12.0);
  CHECK(g.kappa == 0.5);
  const auto small = derive_geometry({0.0, 1.0, 1.0, 0.0});
  CHECK(small.R == 2.0);
  CHECK(small.kappa == 0.5);
  CHECK_THROWS(derive_geometry({1.0, 0.0, 1.0, 0.0}));
  const auto drift = drift_geometry({0.0, 1.0, 1.4, 0.0});
  CHECK(drift.R == 2.0);
  CHECK(drift.kappa == 1.0);
}

TEST_CASE("pipeline for R0 = 1, kappa0 = 1, K = 2, beta = 2 against a long-double evaluation") {
  const auto rep = build_rate_report({1.0, 1.0, 2.0, 0.0}, 2.0);
  CHECK(rep.geometry.R == 12.0);
  CHECK(rep.geometry.kappa == 0.5);
  CHECK(rep.distance.c_f() == doctest::Approx(48.0).epsilon(1e-15));
  const long double R1 = 1.51L * 12.0L;
  const long double cf = 2.0L * 2.0L * 12.0L / std::sqrt(2.0L / 2.0L);
  const long double log_c0 = cf * R1;
  const long double inner = std::min(std::sqrt(2.0L / 2.0L) * cf / R1, 0.5L);
  const long double log_c = std::log(inner / 3.0L) - log_c0;
  CHECK(std::abs(rep.distance.R1() - static_cast<double>(R1)) <= 1e-12 * static_cast<double>(R1));
  CHECK(std::abs(rep.rate.log_c0 - static_cast<double>(log_c0)) <= 1e-12 * static_cast<double>(log_c0));
  CHECK(std::abs(rep.rate.log_c - static_cast<double>(log_c)) <= 1e-12 * std::abs(static_cast<double>(log_c)));
  CHECK(std::isinf(rep.rate.c0));
  CHECK(rep.rate.c == 0.0);
}

TEST_CASE("gaussian constants at beta = 2") {
  const auto rep = build_rate_report({0.0, 1.0, 1.0, 0.0}, 2.0);
  CHECK(rep.geometry.R == 2.0);
  CHECK(rep.geometry.kappa == 0.5);
  CHECK(rep.distance.c_f() == doctest::Approx(4.0));
  CHECK(rep.distance.R1() == doctest::Approx(3.02));
  const double expected = std::exp(-4.0 * 3.02) / 3.0 * std::min(4.0 / 3.02, 0.5);
  CHECK(rep.rate.c == doctest::Approx(expected).epsilon(1e-12));
  CHECK(rep.rate.c0 == doctest::Approx(std::exp(4.0 * 3.02)).epsilon(1e-12));
  // R = 2 leaves no room for the crossing constant.
  CHECK(std::isinf(rep.cprime));
  CHECK_FALSE(rep.step.feasible);
}

TEST_CASE("general-drift variant uses the larger coupling factor") {
  CHECK(choose_cf(2.0, 1.0, 2.0, Variant::general_drift) == doctest::Approx(6.0));
  CHECK(choose_cf(2.0, 1.0, 2.0, Variant::gradient) == doctest::Approx(4.0));
}

TEST_CASE("distance function: closed form against quadrature and its properties") {
  CHECK(DistanceFunction(1.0, 2.0)(1.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
  CHECK(DistanceFunction(3.0, 2.0)(0.0) == 0.0);
  CounterStream s(17, 0, StreamPurpose::diagnostic);
  for (int i = 0; i < 2000; ++i) {
    const double c_f = std::exp(-3.0 + 6.0 * s.uniform());
    const double R1 = std::exp(-2.0 + 4.0 * s.uniform());
    const double r = 3.0 * R1 * s.uniform();
    const DistanceFunction f(c_f, R1);
    const double q = f_quadrature(c_f, R1, r);
    CHECK(std::abs(f(r) - q) <= 1e-10 * q);
    CHECK(f(r) <= r * (1.0 + 1e-15));
    CHECK(f(r) >= f.floor_slope() * r * (1.0 - 1e-15));
    const double d1 = f.derivative(r), d2 = f.derivative(r * 1.1 + 1e-3);
    CHECK(d1 > 0.0);
    CHECK(d1 <= 1.0);
    CHECK(d2 <= d1);
  }
  CHECK_THROWS(DistanceFunction(0.0, 1.0));
  CHECK_THROWS(DistanceFunction(1.0, 1.0)(-1.0));
}

TEST_CASE("step-size budget: bisection against a grid scan") {
  const StepSizeInputs in = feasible_inputs();
  const auto bound = max_step_size(in);
  REQUIRE(bound.feasible);
  CHECK(bound.delta0_max > 0.0);
  CHECK(bound.delta0_max <= std::exp(-1.0));

  auto all_hold = [&](double delta) {
    for (std::size_t i = 0; i < kRestrictionCount; ++i)
      if (!restriction_holds(static_cast<Restriction>(i), in, bound.cprime, delta)) return false;
    return true;
  };
  // Grid oracle on log D: the admissible set is an interval ending at log Delta0.
  double last_ok = -std::numeric_limits<double>::infinity();
  const double lo = bound.log_delta0_max - 3.0;
  for (int i = 0; i <= 60000; ++i) {
    const double L = lo + (-1.0 - lo) * i / 60000.0;
    if (all_hold(std::exp(L))) last_ok = L;
    else if (std::isfinite(last_ok)) break;
  }
  CHECK(std::abs(last_ok - bound.log_delta0_max) <= 2.0 * (-1.0 - lo) / 60000.0);
  CHECK(all_hold(bound.delta0_max * (1.0 - 1e-9)));
  CHECK_FALSE(all_hold(bound.delta0_max * (1.0 + 1e-6)));
  CHECK_FALSE(restriction_holds(bound.binding, in, bound.cprime, bound.delta0_max * (1.0 + 1e-6)));
}

TEST_CASE("each restriction's threshold is tight") {
  const StepSizeInputs in = feasible_inputs();
  const auto bound = max_step_size(in);
  for (std::size_t i = 0; i < kRestrictionCount; ++i) {
    const auto r = static_cast<Restriction>(i);
    const double L = bound.log_thresholds[i];
    CAPTURE(to_string(r));
    REQUIRE(std::isfinite(L));
    CHECK(restriction_holds(r, in, bound.cprime, std::exp(L) * (1.0 - 1e-9)));
    if (L < -1.0) CHECK_FALSE(restriction_holds(r, in, bound.cprime, std::exp(L) * (1.0 + 1e-6)));
  }
}

TEST_CASE("binding restriction is the smallest threshold") {
  const auto bound = max_step_size(feasible_inputs());
  for (double t : bound.log_thresholds) CHECK(bound.log_delta0_max <= t);
  CHECK(bound.log_thresholds[static_cast<std::size_t>(bound.binding)] == bound.log_delta0_max);
}

TEST_CASE("realistic constants give an underflowing but finite log budget") {
  const auto rep = build_rate_report({1.0, 1.0, 2.0, 0.0}, 2.0);
  CHECK(std::isfinite(rep.step.log_delta0_max));
  CHECK_FALSE(rep.step.feasible);
  CHECK(rep.step.binding == Restriction::noise_vs_rate);
}

TEST_CASE("step-size budget input errors") {
  auto in = feasible_inputs();
  in.R1 = 1.5 * in.R;
  CHECK_THROWS_AS(max_step_size(in), std::invalid_argument);
  in = feasible_inputs();
  in.cbar = 0.0;
  CHECK_THROWS_AS(max_step_size(in), std::invalid_argument);
  CHECK_FALSE(restriction_holds(Restriction::unit, feasible_inputs(), 1.0, 0.5));
}

TEST_CASE("moment step bound") {
  CHECK(moment_step_bound(0.5, 2.0, 2.0) == doctest::Approx(0.5 / 8.0));
  CHECK(moment_step_bound(0.5, 2.0, 4.0) == doctest::Approx(0.5 / 24.0));
  CHECK_THROWS(moment_step_bound(0.5, 2.0, 1.0));
}

TEST_CASE("far-field convexity witness on the bump target") {
  for (int d : {1, 2}) {
    const auto m = make_bump_target(d, 2.0, 2.0);
    const auto g = derive_geometry(m.params());
    const auto w = far_field_witness(m, g, 3.0 * g.R, 1000, 5);
    CHECK(w.pairs == 1000);
    CHECK(w.satisfied == w.pairs);
  }
}
