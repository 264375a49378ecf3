#pragma once

#include "sgldc/constants.hpp"
#include "sgldc/dynamics.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sgldc {

enum class CouplingMode { reflection, synchronous };

std::string_view to_string(CouplingMode mode) noexcept;

struct CouplingConfig {
  std::size_t substeps = 4;
  // Defaults to 1e-3 sqrt(eta / beta) when unset.
  std::optional<double> merge_threshold;
  CouplingMode mode = CouplingMode::reflection;
  // In reflection mode the difference moves along e like a 1D Brownian path;
  // a pair also merges when that path crosses zero between substeps, either
  // visibly (sign change) or through a Brownian-bridge excursion.
  bool bridge_crossing = true;

  double threshold_for(double eta, double beta) const;
};

struct CoupledState {
  Vector x;
  Vector y;
  bool merged = false;
  std::optional<double> merge_time;
  std::size_t step_index = 0;
  double clock = 0.0;
  bool diverged = false;
  // |x - y| fell below machine precision without meeting a zero threshold.
  bool underflow = false;

  Vector difference() const { return x - y; }
};

// v - 2 (e.v) e for a unit vector e.
Vector reflect(ConstVectorRef e, ConstVectorRef v);

// Within-step record of the reflected-noise martingale
// zeta_t = int_{T_k}^t (Z Z^T / |Z|^2) dW.
struct NoiseSupRecord {
  // max over substep endpoints of |zeta|.
  double sup_norm = 0.0;
  // Continuous-path supremum of zeta . e_{T_k}, obtained by sampling the
  // Brownian-bridge maximum on every substep.
  double sup_projection = 0.0;
};

// Randomness consumed by one coupled step: m gaussian d-vectors, plus one
// bridge uniform per substep (merge test) and, when recording, one
// diagnostic uniform per substep.
class CoupledNoise {
 public:
  virtual ~CoupledNoise() = default;
  virtual void gaussian(VectorRef out) = 0;
  virtual double bridge_uniform() = 0;
  virtual double diagnostic_uniform() = 0;
};

// Noise backed by a pair's counter streams.
class StreamNoise final : public CoupledNoise {
 public:
  StreamNoise(std::uint64_t seed, std::uint32_t pair_id);
  void gaussian(VectorRef out) override { brownian_.fill_normal(out); }
  double bridge_uniform() override { return bridge_.uniform(); }
  double diagnostic_uniform() override { return diagnostic_.uniform(); }

 private:
  CounterStream brownian_;
  CounterStream bridge_;
  CounterStream diagnostic_;
};

// Replays explicit draws; bridge / diagnostic uniforms default to 1 (no
// bridge crossing, bridge maximum equal to the larger endpoint).
class ReplayNoise final : public CoupledNoise {
 public:
  explicit ReplayNoise(std::span<const Vector> gauss, std::span<const double> bridge = {},
                       std::span<const double> diagnostic = {});
  void gaussian(VectorRef out) override;
  double bridge_uniform() override;
  double diagnostic_uniform() override;

 private:
  std::span<const Vector> gauss_;
  std::span<const double> bridge_;
  std::span<const double> diagnostic_;
  std::size_t g_ = 0, b_ = 0, u_ = 0;
};

// Allocation-free coupled integrator.
class CouplingKernel {
 public:
  CouplingKernel(const FieldModel& model, CouplingConfig config);

  // One step of length eta with a shared minibatch.
  void step(CoupledState& state, std::span<const std::size_t> batch, double eta,
            CoupledNoise& noise, NoiseSupRecord* record = nullptr);

  const CouplingConfig& config() const noexcept { return config_; }

 private:
  const FieldModel& model_;
  CouplingConfig config_;
  Vector drift_x_, drift_y_, g_, gy_, z_prev_, e_, zeta_;
};

// Coupled step of the two interpolated chains, drifts frozen at the step's
// start. In reflection mode Y is driven by reflect(e, g_j) with e recomputed
// from the current difference before each substep; in synchronous mode by g_j.
CoupledState coupled_step(const CoupledState& state, const FieldModel& model,
                          std::span<const std::size_t> batch, double eta,
                          const CouplingConfig& config, std::span<const Vector> gauss,
                          std::span<const double> bridge_uniforms = {});

// Synchronous baseline: one substep, identical noise for both chains.
CoupledState synchronous_step(const CoupledState& state, const FieldModel& model,
                              std::span<const std::size_t> batch, double eta,
                              ConstVectorRef gauss, std::optional<double> merge_threshold = {});

struct CoupledEnsembleOptions {
  std::size_t n_pairs = 1;
  BatchSpec batch{1, false};
  std::size_t record_every = 1;
  InitialDistribution init_x;
  InitialDistribution init_y;
  // Draw Y_0 = X_0 (a coupled start) instead of independently.
  bool coupled_start = false;
  std::vector<std::size_t> snapshot_steps;
  // Record the within-step noise supremum for the first this-many steps.
  std::size_t noise_sup_steps = 0;
  std::size_t blocks = 20;
  unsigned threads = 1;
};

struct CouplingSeries {
  ExperimentSeries mean_f;
  ExperimentSeries mean_abs_z;
  ExperimentSeries merged_fraction;
  // Per-pair merge time (nullopt if never merged within the horizon).
  std::vector<std::optional<double>> merge_times;
  std::size_t n_pairs = 0;
  std::size_t n_diverged = 0;
  std::size_t n_underflow = 0;
  // step -> (x positions, y positions), each n_pairs x d.
  std::map<std::size_t, std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> snapshots;
  // [pair][step] noise supremum records.
  std::vector<std::vector<NoiseSupRecord>> noise_sups;
};

CouplingSeries run_coupled_ensemble(const FieldModel& model, const Schedule& schedule,
                                    const CouplingConfig& config, const DistanceFunction& dist,
                                    const CoupledEnsembleOptions& options, std::uint64_t seed);

}  // namespace sgldc
