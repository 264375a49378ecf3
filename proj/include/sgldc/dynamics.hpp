#pragma once

#include "sgldc/random.hpp"
#include "sgldc/series.hpp"
#include "sgldc/targets.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace sgldc {

// Step sizes eta_k with cumulative clock T_k = sum_{i<k} eta_i.
class Schedule {
 public:
  static Schedule constant(double eta, std::size_t n_steps);
  static Schedule from_steps(std::vector<double> step_sizes);

  std::size_t size() const noexcept { return steps_.size(); }
  double eta(std::size_t k) const { return steps_.at(k); }
  // T_k for k in [0, size()].
  double time(std::size_t k) const { return times_.at(k); }
  double delta0() const noexcept { return delta0_; }
  const std::vector<double>& step_sizes() const noexcept { return steps_; }

 private:
  explicit Schedule(std::vector<double> steps);

  std::vector<double> steps_;
  std::vector<double> times_;
  double delta0_ = 0.0;
};

// Positions beyond this norm count as numerical blow-up.
inline constexpr double kDivergenceNorm = 1e12;

struct ChainState {
  Vector position;
  std::size_t step_index = 0;
  double clock = 0.0;
  bool diverged = false;
  // Step whose update produced the divergence.
  std::optional<std::size_t> diverged_at;
};

// x' = x - eta grad U^xi(x) + sqrt(2 eta / beta) g.
ChainState sgld_step(const ChainState& state, const TargetModel& model,
                     std::span<const std::size_t> batch, double eta, ConstVectorRef gauss);

// x' = x + eta b^xi(x) + sqrt(2 eta / beta) g.
ChainState em_drift_step(const ChainState& state, const DriftModel& model,
                         std::span<const std::size_t> batch, double eta, ConstVectorRef gauss);

// Either of the above, dispatched on the model kind.
ChainState field_step(const ChainState& state, const FieldModel& model,
                      std::span<const std::size_t> batch, double eta, ConstVectorRef gauss);

// Refines one step of the continuous interpolation into m substeps of length
// eta/m, drift frozen at the step's start. Returns the m intermediate
// positions; the last one is the step's endpoint.
std::vector<Vector> interpolate_substeps(const ChainState& state, const FieldModel& model,
                                         std::span<const std::size_t> batch, double eta,
                                         std::span<const Vector> gauss);

// Initial law: a point mass (spread = 0) or an isotropic gaussian blob.
struct InitialDistribution {
  Vector center;
  double spread = 0.0;

  Vector sample(CounterStream& stream) const;
};

struct EnsembleOptions {
  std::size_t n_chains = 1;
  BatchSpec batch{1, false};
  // Record statistics every `record_every` steps (step 0 and the last step
  // are always recorded).
  std::size_t record_every = 1;
  std::vector<double> moment_orders{2.0};
  // Steps whose full ensemble positions are kept.
  std::vector<std::size_t> snapshot_steps;
  std::size_t blocks = 20;
  unsigned threads = 1;
};

struct EnsembleResult {
  std::size_t n_chains = 0;
  std::size_t n_diverged = 0;
  std::vector<std::optional<std::size_t>> divergence_steps;
  // One series of E|X|^p per requested order, and of E sup_{s<=t} |X_s|^p.
  std::vector<ExperimentSeries> moments;
  std::vector<ExperimentSeries> running_sup_moments;
  // step -> (n_chains x d) positions; rows of diverged chains are NaN.
  std::map<std::size_t, Eigen::MatrixXd> snapshots;
};

// Runs independent SGLD / random-batch EM chains. Chain i owns streams
// (seed, i); block reductions are combined in block order, so the output does
// not depend on the thread count.
EnsembleResult simulate_ensemble(const FieldModel& model, const Schedule& schedule,
                                 const EnsembleOptions& options, const InitialDistribution& init,
                                 std::uint64_t seed);

}  // namespace sgldc
