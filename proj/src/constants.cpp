#include "sgldc/constants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace sgldc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(1 + e^t) without overflow.
double softplus(double t) { return t > 30.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double log_or_neg_inf(double v) { return v > 0.0 ? std::log(v) : -kInf; }

// Largest L <= -1 with h(L) <= bound for h increasing on (-inf, -1].
template <class H>
double bisect_log_threshold(H h, double bound) {
  if (std::isnan(bound) || bound == -kInf) return -kInf;
  if (h(-1.0) <= bound) return -1.0;
  double hi = -1.0;
  double lo = -2.0;
  while (h(lo) > bound) {
    hi = lo;
    lo *= 2.0;
    if (lo < -1e300) return -kInf;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::abs(lo); ++it) {
    const double mid = 0.5 * (lo + hi);
    (h(mid) <= bound ? lo : hi) = mid;
  }
  return lo;
}

// log of the denominator of the crossing-tail restriction,
// log(45 R1/R (1 + sqrt(2 beta) / c_f e^{c_f R1} K R)).
double log_crossing_denominator(const StepSizeInputs& in) {
  const double t = std::log(std::sqrt(2.0 * in.beta) * in.K * in.R / in.c_f) + in.c_f * in.R1;
  return std::log(45.0 * in.R1 / in.R) + softplus(t);
}

void check_inputs(const StepSizeInputs& in) {
  if (!(in.beta > 0.0) || !(in.K > 0.0) || !(in.R > 0.0) || !(in.c_f > 0.0) ||
      !(in.kappa > 0.0))
    throw std::invalid_argument("beta, K, R, c_f and kappa must be positive");
  if (!(in.R1 > 1.5 * in.R)) throw std::invalid_argument("R1 must exceed 3R/2");
  if (!(in.cbar > 0.0)) throw std::invalid_argument("cbar must be positive");
}

}  // namespace

std::string_view to_string(Variant v) noexcept {
  return v == Variant::gradient ? "gradient" : "general_drift";
}

ContractionGeometry derive_geometry(const AssumptionParams& p) {
  if (!(p.kappa0 > 0.0)) throw std::invalid_argument("kappa0 must be positive");
  if (p.R0 < 0.0 || !(p.K > 0.0)) throw std::invalid_argument("need R0 >= 0 and K > 0");
  return {std::max(4.0 * p.R0 * (p.K + p.kappa0) / p.kappa0, 2.0), p.kappa0 / 2.0};
}

ContractionGeometry drift_geometry(const AssumptionParams& p) {
  if (!(p.kappa0 > 0.0)) throw std::invalid_argument("kappa must be positive");
  return {std::max(p.R0, 2.0), p.kappa0};
}

double choose_cf(double beta, double K, double R, Variant variant) {
  if (!(beta > 0.0) || !(K > 0.0) || !(R > 0.0))
    throw std::invalid_argument("beta, K and R must be positive");
  const double factor = variant == Variant::gradient ? 2.0 : 3.0;
  return factor * K * R / std::sqrt(2.0 / beta);
}

DistanceFunction::DistanceFunction(double c_f, double R1) : c_f_(c_f), R1_(R1) {
  if (!(c_f_ > 0.0) || !std::isfinite(c_f_)) throw std::invalid_argument("c_f must be positive");
  if (!(R1_ > 0.0) || !std::isfinite(R1_)) throw std::invalid_argument("R1 must be positive");
}

double DistanceFunction::operator()(double r) const {
  if (!(r >= 0.0)) throw std::invalid_argument("f is defined for r >= 0");
  if (r <= R1_) return -std::expm1(-c_f_ * r) / c_f_;
  return -std::expm1(-c_f_ * R1_) / c_f_ + floor_slope() * (r - R1_);
}

double DistanceFunction::derivative(double r) const {
  if (!(r >= 0.0)) throw std::invalid_argument("f is defined for r >= 0");
  return std::exp(-c_f_ * std::min(r, R1_));
}

double DistanceFunction::floor_slope() const noexcept { return std::exp(-c_f_ * R1_); }

double f_eval(const DistanceFunction& dist, double r) { return dist(r); }
double f_prime(const DistanceFunction& dist, double r) { return dist.derivative(r); }

ContractionRate contraction_rate(double beta, const DistanceFunction& dist, double kappa) {
  if (!(beta > 0.0) || !(kappa > 0.0)) throw std::invalid_argument("beta and kappa must be positive");
  ContractionRate out;
  const double inner = std::min(std::sqrt(2.0 / beta) * dist.c_f() / dist.R1(), kappa);
  out.log_c0 = dist.c_f() * dist.R1();
  out.log_c = -std::log(3.0) - out.log_c0 + std::log(inner);
  out.c = std::exp(out.log_c);
  out.c0 = std::exp(out.log_c0);
  return out;
}

double default_cbar() noexcept { return 1.0 / (2.0 * std::numbers::e * 2.0); }

double default_cprime(double cbar, double K, double R, double c_f) {
  if (!(cbar > 0.0)) throw std::invalid_argument("cbar must be positive");
  const double half = R / 2.0 - 1.0;
  if (!(half > 0.0)) return kInf;
  const double s = 1.0 / std::sqrt(cbar);
  return s * (2.0 * K / half + K * c_f * std::exp(-c_f * half)) + 4.0 * s / R;
}

std::string_view to_string(Restriction r) noexcept {
  switch (r) {
    case Restriction::noise_vs_rate: return "noise_vs_rate";
    case Restriction::noise_vs_cbar: return "noise_vs_cbar";
    case Restriction::drift_vs_noise: return "drift_vs_noise";
    case Restriction::lipschitz: return "lipschitz";
    case Restriction::radius: return "radius";
    case Restriction::unit: return "unit";
    case Restriction::far_tail: return "far_tail";
    case Restriction::log5_tail: return "log5_tail";
    case Restriction::rate_tail: return "rate_tail";
    case Restriction::crossing_tail: return "crossing_tail";
    case Restriction::search_cap: return "search_cap";
  }
  return "unknown";
}

StepSizeBound max_step_size(const StepSizeInputs& in) {
  check_inputs(in);
  StepSizeBound out;
  out.cprime = in.cprime ? *in.cprime : default_cprime(in.cbar, in.K, in.R, in.c_f);
  if (!(out.cprime > 0.0)) throw std::invalid_argument("cprime must be positive");

  const double log_cbar = std::log(in.cbar);
  const double gap = in.R1 - 1.5 * in.R;
  // h(L) = log sqrt(D |log D|) and log(D / sqrt(D |log D|)), with L = log D.
  const auto log_sqrt_dlogd = [](double L) { return 0.5 * (L + std::log(-L)); };
  const auto log_sqrt_d_over_logd = [](double L) { return 0.5 * (L - std::log(-L)); };
  const auto linear = [](double bound) { return std::min(log_or_neg_inf(bound), -1.0); };

  auto& t = out.log_thresholds;
  t[static_cast<std::size_t>(Restriction::noise_vs_rate)] = bisect_log_threshold(
      log_sqrt_dlogd,
      -in.c_f * in.R1 + std::log(in.kappa) - std::log(6.0) - log_or_neg_inf(out.cprime));
  t[static_cast<std::size_t>(Restriction::noise_vs_cbar)] =
      bisect_log_threshold(log_sqrt_dlogd, 0.5 * log_cbar);
  t[static_cast<std::size_t>(Restriction::drift_vs_noise)] =
      bisect_log_threshold(log_sqrt_d_over_logd, -0.5 * log_cbar - std::log(in.K * in.R));
  t[static_cast<std::size_t>(Restriction::lipschitz)] = linear(1.0 / (2.0 * in.K));
  t[static_cast<std::size_t>(Restriction::radius)] = linear(in.R * in.R / 9.0);
  t[static_cast<std::size_t>(Restriction::unit)] = linear(1.0);
  t[static_cast<std::size_t>(Restriction::far_tail)] =
      linear(in.cbar * in.beta * in.R1 * gap / 16.0);
  t[static_cast<std::size_t>(Restriction::log5_tail)] =
      linear(in.cbar * in.beta * in.R * in.R / (128.0 * std::log(5.0)));
  {
    const double denom = in.c_f * in.R1 + std::log(18.0 / in.kappa);
    t[static_cast<std::size_t>(Restriction::rate_tail)] =
        denom > 0.0 ? linear(in.cbar * in.beta * in.R * in.R / (128.0 * denom)) : -1.0;
  }
  t[static_cast<std::size_t>(Restriction::crossing_tail)] =
      std::min(std::log(in.cbar * in.beta * gap * gap / 8.0) -
                   std::log(log_crossing_denominator(in)),
               -1.0);
  t[static_cast<std::size_t>(Restriction::search_cap)] = -1.0;

  std::size_t arg = static_cast<std::size_t>(Restriction::search_cap);
  for (std::size_t i = 0; i < kRestrictionCount; ++i)
    if (t[i] < t[arg]) arg = i;
  out.binding = static_cast<Restriction>(arg);
  out.log_delta0_max = t[arg];
  out.feasible = out.log_delta0_max > std::log(std::numeric_limits<double>::epsilon());
  out.delta0_max = out.feasible ? std::exp(out.log_delta0_max) : 0.0;
  return out;
}

bool restriction_holds(Restriction r, const StepSizeInputs& in, double cprime, double delta) {
  if (!(delta > 0.0) || delta > std::exp(-1.0)) return false;
  const double g = std::sqrt(delta * std::abs(std::log(delta)));
  const double gap = in.R1 - 1.5 * in.R;
  switch (r) {
    case Restriction::noise_vs_rate:
      return std::log(g) <= -in.c_f * in.R1 + std::log(in.kappa / (6.0 * cprime));
    case Restriction::noise_vs_cbar: return g <= std::sqrt(in.cbar);
    case Restriction::drift_vs_noise: return delta <= g / (std::sqrt(in.cbar) * in.K * in.R);
    case Restriction::lipschitz: return delta <= 1.0 / (2.0 * in.K);
    case Restriction::radius: return delta <= in.R * in.R / 9.0;
    case Restriction::unit: return delta <= 1.0;
    case Restriction::far_tail: return delta <= in.cbar * in.beta * in.R1 * gap / 16.0;
    case Restriction::log5_tail:
      return delta <= in.cbar * in.beta * in.R * in.R / (128.0 * std::log(5.0));
    case Restriction::rate_tail: {
      const double denom = in.c_f * in.R1 + std::log(18.0 / in.kappa);
      return denom <= 0.0 || delta <= in.cbar * in.beta * in.R * in.R / (128.0 * denom);
    }
    case Restriction::crossing_tail:
      return std::log(delta) <=
             std::log(in.cbar * in.beta * gap * gap / 8.0) - std::log(log_crossing_denominator(in));
    case Restriction::search_cap: return true;
  }
  return false;
}

double moment_step_bound(double kappa, double K, double p) {
  if (!(p >= 2.0)) throw std::invalid_argument("moment order p must be at least 2");
  if (!(kappa > 0.0) || !(K > 0.0)) throw std::invalid_argument("kappa and K must be positive");
  return kappa / (2.0 * (p - 1.0) * K * K);
}

RateReport build_rate_report(const AssumptionParams& params, double beta,
                             const ConstantsOptions& options) {
  if (!(options.r1_factor > 1.5)) throw std::invalid_argument("r1_factor must exceed 3/2");
  RateReport report;
  report.params = params;
  report.beta = beta;
  report.variant = options.variant;
  report.geometry = options.variant == Variant::gradient ? derive_geometry(params)
                                                         : drift_geometry(params);
  const double c_f = choose_cf(beta, params.K, report.geometry.R, options.variant);
  report.distance = DistanceFunction(c_f, options.r1_factor * report.geometry.R);
  report.rate = contraction_rate(beta, report.distance, report.geometry.kappa);
  report.cbar = options.cbar;

  StepSizeInputs in;
  in.beta = beta;
  in.K = params.K;
  in.R = report.geometry.R;
  in.R1 = report.distance.R1();
  in.c_f = c_f;
  in.kappa = report.geometry.kappa;
  in.cbar = options.cbar;
  in.cprime = options.cprime;
  report.step = max_step_size(in);
  report.cprime = report.step.cprime;
  return report;
}

FarFieldWitness far_field_witness(const FieldModel& model, const ContractionGeometry& geometry,
                                  double region_radius, std::size_t n_pairs, std::uint64_t seed) {
  if (n_pairs == 0) throw std::invalid_argument("n_pairs must be positive");
  const int d = model.dimension();
  CounterStream stream(seed, 1, StreamPurpose::initial);
  FarFieldWitness out;
  out.min_ratio = kInf;
  Vector x(d), dir(d), fx(d), fy(d);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    stream.fill_normal(x);
    x *= region_radius / std::sqrt(static_cast<double>(d));
    do {
      stream.fill_normal(dir);
    } while (dir.norm() == 0.0);
    dir.normalize();
    // Separation uniform in (R, 3R].
    const double sep = geometry.R * (1.0 + 2.0 * stream.uniform());
    const Vector y = x + sep * dir;
    model.full_drift_into(x, fx);
    model.full_drift_into(y, fy);
    const Vector diff = x - y;
    const double ratio = -diff.dot(fx - fy) / diff.squaredNorm();
    out.min_ratio = std::min(out.min_ratio, ratio);
    ++out.pairs;
    if (ratio >= geometry.kappa) ++out.satisfied;
  }
  return out;
}

}  // namespace sgldc
