#pragma once

#include "sgldc/targets.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace sgldc {

// Far-field convexity: (x - y).(grad U(x) - grad U(y)) >= kappa |x - y|^2
// whenever |x - y| > R.
struct ContractionGeometry {
  double R = 2.0;
  double kappa = 0.5;
};

enum class Variant { gradient, general_drift };

std::string_view to_string(Variant v) noexcept;

// R = max(4 R0 (K + kappa0) / kappa0, 2), kappa = kappa0 / 2.
ContractionGeometry derive_geometry(const AssumptionParams& params);

// For drift models the declared (R0, kappa0) already are the far-field
// constants; R is only lifted to the R >= 2 convention.
ContractionGeometry drift_geometry(const AssumptionParams& params);

// Smallest c_f with sqrt(2/beta) c_f / (m R) >= K, m = 2 (gradient) or 3
// (general drift).
double choose_cf(double beta, double K, double R, Variant variant);

// f(r) = int_0^r exp(-c_f min(s, R1)) ds: concave, increasing, f(0) = 0 and
// exp(-c_f R1) r <= f(r) <= r.
class DistanceFunction {
 public:
  DistanceFunction(double c_f, double R1);

  double c_f() const noexcept { return c_f_; }
  double R1() const noexcept { return R1_; }

  double operator()(double r) const;
  double derivative(double r) const;
  // exp(-c_f R1), the lower bracketing slope.
  double floor_slope() const noexcept;

 private:
  double c_f_;
  double R1_;
};

double f_eval(const DistanceFunction& dist, double r);
double f_prime(const DistanceFunction& dist, double r);

// Certified rate c = (1/3) e^{-c_f R1} min(sqrt(2/beta) c_f / R1, kappa) and
// W1 prefactor c0 = e^{c_f R1}. Realistic constants push both outside double
// range, so the logarithms are carried alongside.
struct ContractionRate {
  double c = 0.0;
  double c0 = 1.0;
  double log_c = 0.0;
  double log_c0 = 0.0;
};

ContractionRate contraction_rate(double beta, const DistanceFunction& dist, double kappa);

// Heuristic sub-Gaussian constant 1 / (2e(1 + C)) with BDG constant C = 1.
double default_cbar() noexcept;

// c' = cbar^{-1/2} (2K / (R/2 - 1) + K c_f e^{-c_f (R/2 - 1)}) + 4 cbar^{-1/2} / R.
// Infinite when R <= 2.
double default_cprime(double cbar, double K, double R, double c_f);

enum class Restriction : std::size_t {
  noise_vs_rate,   // sqrt(D |log D|) <= e^{-c_f R1} kappa / (6 c')
  noise_vs_cbar,   // sqrt(D |log D|) <= sqrt(cbar)
  drift_vs_noise,  // D <= cbar^{-1/2} sqrt(D |log D|) / (K R)
  lipschitz,       // D <= 1 / (2K)
  radius,          // D <= R^2 / 9
  unit,            // D <= 1
  far_tail,        // D <= cbar beta R1 (R1 - 3R/2) / 16
  log5_tail,       // D <= cbar beta R^2 / (128 log 5)
  rate_tail,       // D <= cbar beta R^2 / (128 (c_f R1 + log(18 / kappa)))
  crossing_tail,   // D <= (cbar beta (R1 - 3R/2)^2 / 8) / log(45 R1/R (1 + ...))
  search_cap,      // D <= 1/e, the domain on which D |log D| is monotone
};

inline constexpr std::size_t kRestrictionCount = 11;

std::string_view to_string(Restriction r) noexcept;

struct StepSizeInputs {
  double beta = 1.0;
  double K = 1.0;
  double R = 2.0;
  double R1 = 3.02;
  double c_f = 1.0;
  double kappa = 0.5;
  double cbar = 0.0;
  // Defaults to default_cprime when unset.
  std::optional<double> cprime;
};

struct StepSizeBound {
  bool feasible = false;
  // Largest admissible sup_k eta_k (0 when infeasible).
  double delta0_max = 0.0;
  // log of the largest admissible step; finite even when it underflows.
  double log_delta0_max = 0.0;
  Restriction binding = Restriction::search_cap;
  double cprime = 0.0;
  // log of the threshold imposed by each restriction alone.
  std::array<double, kRestrictionCount> log_thresholds{};
};

// Every restriction reads h(D) <= bound with h increasing on (0, 1/e], so the
// admissible set is (0, D*] with D* the smallest individual threshold. Each
// nonlinear threshold is located by bisection in log D. Throws
// std::invalid_argument when R1 <= 3R/2 or cbar, cprime are not positive.
StepSizeBound max_step_size(const StepSizeInputs& in);

// Direct evaluation of one restriction at a step size in (0, 1/e].
bool restriction_holds(Restriction r, const StepSizeInputs& in, double cprime, double delta);

// Supremum kappa / (2 (p - 1) K^2) of step sizes with uniformly bounded p-th
// moments.
double moment_step_bound(double kappa, double K, double p);

struct ConstantsOptions {
  Variant variant = Variant::gradient;
  double cbar = default_cbar();
  std::optional<double> cprime;
  // R1 = r1_factor * R; must exceed 3/2.
  double r1_factor = 1.51;
};

struct RateReport {
  AssumptionParams params;
  double beta = 1.0;
  Variant variant = Variant::gradient;
  ContractionGeometry geometry;
  DistanceFunction distance{1.0, 1.0};
  ContractionRate rate;
  StepSizeBound step;
  double cbar = 0.0;
  double cprime = 0.0;
};

RateReport build_rate_report(const AssumptionParams& params, double beta,
                             const ConstantsOptions& options = {});

struct FarFieldWitness {
  std::size_t pairs = 0;
  std::size_t satisfied = 0;
  double min_ratio = 0.0;
};

// Samples pairs with |x - y| > R and checks the far-field inequality of the
// geometry against the full field of the model.
FarFieldWitness far_field_witness(const FieldModel& model, const ContractionGeometry& geometry,
                                  double region_radius, std::size_t n_pairs, std::uint64_t seed);

}  // namespace sgldc
