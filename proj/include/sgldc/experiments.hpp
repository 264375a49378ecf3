#pragma once

#include "sgldc/constants.hpp"
#include "sgldc/coupling.hpp"
#include "sgldc/diagnostics.hpp"
#include "sgldc/dynamics.hpp"
#include "sgldc/targets.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgldc {

enum class CommandKind { constants, simulate, couple, bias, verify, tails };

std::string_view to_string(CommandKind kind) noexcept;
CommandKind parse_command(std::string_view name);

struct TargetSpec {
  // gaussian | quadratic | bump | shifted_gaussian | rotational | free
  std::string name = "gaussian";
  int dimension = 1;
  std::optional<double> beta;
  double a = 2.0;
  double gamma = 1.0;
  double stiffness = 1.0;
  std::vector<std::vector<double>> offsets;
  // Overrides the constructor's declared constants.
  std::optional<AssumptionParams> params;
};

struct ScheduleSpec {
  std::optional<double> eta;
  // eta = fraction * moment_step_bound(kappa, K, max moment order).
  std::optional<double> moment_bound_fraction;
  std::vector<double> step_sizes;
  std::size_t steps = 1000;
};

struct BiasSpec {
  std::vector<double> etas{0.02, 0.01, 0.005};
  double burn_in_time = 10.0;
  double harvest_time = 40.0;
  double harvest_spacing = 0.1;
  double ratio_low = 1.5;
  double ratio_high = 2.8;
  double slope_tolerance = 0.35;
};

struct VerifySpec {
  double radius = 5.0;
  std::size_t samples = 1000;
};

struct TailsSpec {
  std::vector<double> etas{0.01, 0.005};
  // Thresholds in units of sqrt(eta).
  std::vector<double> scaled_thresholds{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75};
  std::size_t min_exceedances = 10;
  double ks_level = 0.01;
  double ratio_tolerance = 0.15;
};

struct CoupleSpec {
  // Runs the equal-marginals energy test at this step when set.
  std::optional<std::size_t> marginals_step;
  std::size_t permutations = 199;
  double marginals_level = 0.01;
  // Fit the rate while the series stays above this fraction of its start.
  double fit_floor = 1e-3;
  double min_r_squared = 0.9;
  // Adds a verdict on the merged fraction at the horizon when set.
  std::optional<double> min_merged_fraction;
  // Also applies to `simulate`.
  double max_divergence_fraction = 0.01;
  // Relative tolerance of the synchronous-rate check on quadratic targets.
  double sync_tolerance = 0.05;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string output_dir = "sgldc_out";
  TargetSpec target;
  ScheduleSpec schedule;
  // Unset means full batch.
  std::optional<BatchSpec> batch;
  CouplingConfig coupling;
  std::size_t n = 1000;
  std::size_t record_every = 10;
  std::size_t blocks = 20;
  InitialDistribution init_x;
  InitialDistribution init_y;
  bool coupled_start = false;
  ConstantsOptions constants;
  std::vector<double> moment_orders{2.0};
  double trend_level = 0.05;
  BiasSpec bias;
  VerifySpec verify;
  TailsSpec tails;
  CoupleSpec couple;
};

// Parses a JSON document; unknown fields are rejected. Throws ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
// JSON echo of a config with every default filled in.
std::string config_to_json(const ExperimentConfig& config);

std::shared_ptr<const FieldModel> build_model(const TargetSpec& spec);
Schedule build_schedule(const ExperimentConfig& config, const FieldModel& model);

struct Verdict {
  std::string statistic;
  double estimate = 0.0;
  double ci_half_width = 0.0;
  std::optional<double> reference;
  bool pass = true;
  std::string tolerance;
};

inline constexpr const char* kVerdictHeader = "statistic,estimate,ci_half_width,reference,pass,tolerance";

void write_verdicts(std::ostream& out, const std::vector<Verdict>& verdicts);

struct CommandResult {
  CommandKind kind = CommandKind::constants;
  std::vector<Verdict> verdicts;
  // Files written, relative to the output directory.
  std::vector<std::string> files;
  std::string summary;

  bool passed() const;
};

// Runs one experiment and writes CSV data, verdicts.csv and metadata.json
// into config.output_dir.
CommandResult run_command(CommandKind kind, const ExperimentConfig& config);

}  // namespace sgldc
