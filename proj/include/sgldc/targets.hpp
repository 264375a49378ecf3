#pragma once

#include "sgldc/random.hpp"
#include "sgldc/types.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace sgldc {

// Structural constants of a target. For gradient targets these are
// (R0, kappa0, K, b0): Hessian >= kappa0 outside B(0, R0), every minibatch
// gradient K-Lipschitz, b0 = sup over batches of |grad U^xi(0)|. For drift
// models R0 is the one-sided dissipativity radius and kappa0 its modulus.
struct AssumptionParams {
  double R0 = 0.0;
  double kappa0 = 1.0;
  double K = 1.0;
  double b0 = 0.0;
};

// Throws std::invalid_argument unless kappa0 > 0, K > 0, kappa0 <= K, R0 >= 0,
// b0 >= 0 and everything is finite.
void validate(const AssumptionParams& params);

struct BatchSpec {
  std::size_t batch_size = 1;
  bool replacement = false;
};

// x -> grad l_i(x) (gradient targets) or x -> b_i(x) (drift models).
using ComponentField = std::function<void(ConstVectorRef x, VectorRef out)>;

enum class FieldKind { gradient, drift };

// A finite average of component vector fields. Immutable after construction,
// safe to share across threads provided the component callables are pure.
class FieldModel {
 public:
  FieldModel(FieldKind kind, int dimension, double beta, std::vector<ComponentField> components,
             AssumptionParams params, std::string name);

  FieldKind kind() const noexcept { return kind_; }
  int dimension() const noexcept { return dimension_; }
  double beta() const noexcept { return beta_; }
  std::size_t size() const noexcept { return components_.size(); }
  const AssumptionParams& params() const noexcept { return params_; }
  const std::string& name() const noexcept { return name_; }

  // A copy carrying different declared constants (used to test the checker).
  FieldModel with_params(AssumptionParams params) const;

  void component_into(std::size_t index, ConstVectorRef x, VectorRef out) const;
  // Mean of the component fields over a batch of 0-based indices.
  void batch_field_into(ConstVectorRef x, std::span<const std::size_t> batch,
                        VectorRef out) const;
  void full_field_into(ConstVectorRef x, VectorRef out) const;

  // Deterministic part of the update direction: -grad for gradient targets,
  // +b for drift models.
  void batch_drift_into(ConstVectorRef x, std::span<const std::size_t> batch,
                        VectorRef out) const;
  void full_drift_into(ConstVectorRef x, VectorRef out) const;

 private:
  FieldKind kind_;
  int dimension_;
  double beta_;
  std::vector<ComponentField> components_;
  AssumptionParams params_;
  std::string name_;
};

// U = (1/N) sum l_i, supplied through component gradients.
class TargetModel : public FieldModel {
 public:
  TargetModel(int dimension, double beta, std::vector<ComponentField> gradients,
              AssumptionParams params, std::string name = "custom");
};

// Non-gradient drift b = (1/N) sum b_i.
class DriftModel : public FieldModel {
 public:
  DriftModel(int dimension, double beta, std::vector<ComponentField> drifts,
             AssumptionParams params, std::string name = "custom");
};

Vector grad_full(const TargetModel& model, ConstVectorRef x);
// Indices are 0-based; duplicates are allowed (sampling with replacement).
Vector grad_batch(const TargetModel& model, ConstVectorRef x, std::span<const std::size_t> batch);
Vector drift_full(const DriftModel& model, ConstVectorRef x);
Vector drift_batch(const DriftModel& model, ConstVectorRef x, std::span<const std::size_t> batch);

// Draws minibatches of component indices. Without replacement the batch is a
// uniform subset; a batch as large as the data set is the full batch and
// consumes no randomness.
class BatchSampler {
 public:
  BatchSampler(BatchSpec spec, std::size_t population);

  std::span<const std::size_t> draw(CounterStream& stream);
  bool is_full_batch() const noexcept { return full_; }
  const BatchSpec& spec() const noexcept { return spec_; }

 private:
  BatchSpec spec_;
  std::size_t population_;
  bool full_;
  std::vector<std::size_t> pool_;
  std::vector<std::size_t> batch_;
};

// Every batch of the given size (without replacement), in lexicographic order.
std::vector<std::vector<std::size_t>> enumerate_batches(std::size_t population,
                                                        std::size_t batch_size);

// U(x) = |x|^2 / 2.
TargetModel make_gaussian_target(int dimension, double beta);
// U(x) = stiffness |x|^2 / 2.
TargetModel make_quadratic_target(int dimension, double beta, double stiffness);
// U(x) = |x|^2 / 2 + a exp(-|x|^2 / 2); nonconvex near the origin for a > 1.
TargetModel make_bump_target(int dimension, double beta, double a);
// l_i(x) = |x - m_i|^2 / 2, so minibatches add gradient noise while U stays
// a quadratic centred at the mean offset.
TargetModel make_shifted_gaussian_target(int dimension, double beta,
                                         const std::vector<Vector>& offsets);
// b(x) = -x + gamma J x, J the block rotation generator; d must be even.
DriftModel make_rotational_drift(int dimension, double beta, double gamma);
// b = 0. Its declared constants are placeholders; it exists for noise tests.
DriftModel make_free_diffusion(int dimension, double beta);

struct AssumptionReport {
  // Gradient targets: smallest directional curvature v.H(x).v over sampled x
  // outside B(0, R0). Drift models: smallest -(x-y).(b(x)-b(y))/|x-y|^2 over
  // pairs with |x-y| > R0.
  double min_convexity = 0.0;
  Vector worst_convexity_point;
  std::size_t convexity_samples = 0;
  // Largest |F_i(x) - F_i(y)| / |x - y| over sampled pairs and components
  // (component-wise Lipschitz bounds every batch average).
  double max_lipschitz = 0.0;
  std::size_t worst_lipschitz_component = 0;
  std::size_t lipschitz_samples = 0;
  bool convexity_violated = false;
  bool lipschitz_violated = false;
  double tolerance = 1e-9;

  bool ok() const noexcept { return !convexity_violated && !lipschitz_violated; }
};

// Falsification check of the declared constants by sampling B(0, region_radius).
AssumptionReport verify_assumptions(const FieldModel& model, double region_radius,
                                    std::size_t n_samples, std::uint64_t seed);

}  // namespace sgldc
