#include "sgldc/experiments.hpp"

#include "sgldc/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace sgldc {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(CommandKind kind) noexcept {
  switch (kind) {
    case CommandKind::constants: return "constants";
    case CommandKind::simulate: return "simulate";
    case CommandKind::couple: return "couple";
    case CommandKind::bias: return "bias";
    case CommandKind::verify: return "verify";
    case CommandKind::tails: return "tails";
  }
  return "unknown";
}

CommandKind parse_command(std::string_view name) {
  for (auto k : {CommandKind::constants, CommandKind::simulate, CommandKind::couple,
                 CommandKind::bias, CommandKind::verify, CommandKind::tails})
    if (to_string(k) == name) return k;
  if (name == "verify-assumptions") return CommandKind::verify;
  throw ConfigError("command", "unknown command '" + std::string(name) + "'");
}

namespace {

// ---------------------------------------------------------------------------
// Strict JSON reading

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  // A present key counts as seen even when null, which reads as "unset".
  bool has(const std::string& key) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    return !j_.at(key).is_null();
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  Reader object(const std::string& key) { return Reader(raw(key), field(key)); }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(field(key), "must be finite");
    return x;
  }

  double positive(const std::string& key) {
    const double x = number(key);
    if (!(x > 0.0)) throw ConfigError(field(key), "must be positive");
    return x;
  }

  std::uint64_t unsigned_integer(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_unsigned()) throw ConfigError(field(key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(field(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
      if (!std::isfinite(out.back()))
        throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "must be finite");
    }
    return out;
  }

  std::vector<std::vector<double>> number_rows(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw ConfigError(field(key), "expected an array of arrays");
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string at = field(key) + "[" + std::to_string(i) + "]";
      if (!v[i].is_array()) throw ConfigError(at, "expected an array of numbers");
      std::vector<double> row;
      for (const auto& e : v[i]) {
        if (!e.is_number()) throw ConfigError(at, "expected numbers");
        row.push_back(e.get<double>());
      }
      out.push_back(std::move(row));
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(field(key), "unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_initial(Reader r, InitialDistribution& out) {
  if (r.has("center")) {
    const auto c = r.numbers("center");
    out.center = Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size()));
  }
  if (r.has("spread")) {
    out.spread = r.number("spread");
    if (out.spread < 0.0) throw ConfigError(r.field("spread"), "must be nonnegative");
  }
  r.finish();
}

std::size_t positive_count(Reader& r, const std::string& key) {
  const auto v = r.unsigned_integer(key);
  if (v == 0) throw ConfigError(r.field(key), "must be at least 1");
  return static_cast<std::size_t>(v);
}

// ---------------------------------------------------------------------------
// Output helpers

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json number_json(double x) {
  if (std::isfinite(x)) return x;
  return num(x);
}

class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
  }

  std::ofstream open(const std::string& name, CommandResult& result) {
    std::ofstream out(dir_ / name);
    if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    result.files.push_back(name);
    return out;
  }

 private:
  std::filesystem::path dir_;
};

std::string eta_label(double eta) { return num(eta); }

// ---------------------------------------------------------------------------
// Shared experiment plumbing

BatchSpec batch_for(const ExperimentConfig& cfg, const FieldModel& model) {
  BatchSpec b = cfg.batch.value_or(BatchSpec{model.size(), false});
  if (b.batch_size < 1) throw ConfigError("batch.size", "must be at least 1");
  if (!b.replacement && b.batch_size > model.size())
    throw ConfigError("batch.size", "exceeds the number of components without replacement");
  return b;
}

InitialDistribution resolved_initial(const InitialDistribution& in, int d, const char* field) {
  InitialDistribution out = in;
  if (out.center.size() == 0) out.center = Vector::Zero(d);
  if (out.center.size() != d) throw ConfigError(field, "center must have the target's dimension");
  return out;
}

RateReport report_for(const ExperimentConfig& cfg, const FieldModel& model) {
  ConstantsOptions opts = cfg.constants;
  opts.variant = model.kind() == FieldKind::drift ? Variant::general_drift : Variant::gradient;
  try {
    return build_rate_report(model.params(), model.beta(), opts);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("target.params", e.what());
  }
}

ContractionGeometry geometry_for(const FieldModel& model) {
  return model.kind() == FieldKind::drift ? drift_geometry(model.params()) : derive_geometry(model.params());
}

bool is_quadratic_family(const TargetSpec& t) {
  return t.name == "gaussian" || t.name == "quadratic" || t.name == "shifted_gaussian";
}

double quadratic_stiffness(const TargetSpec& t) { return t.name == "quadratic" ? t.stiffness : 1.0; }

Verdict divergence_verdict(std::size_t diverged, std::size_t total, double max_fraction) {
  const double frac = static_cast<double>(diverged) / static_cast<double>(total);
  return {"divergence_fraction", frac, 0.0, 0.0, frac <= max_fraction, "<= " + num(max_fraction)};
}

// ---------------------------------------------------------------------------
// Commands

void cmd_constants(const ExperimentConfig& cfg, const FieldModel& model, OutputDir& dir,
                   CommandResult& res, ordered_json& meta) {
  const RateReport rep = report_for(cfg, model);
  {
    auto out = dir.open("constants.csv", res);
    out << "name,value\n";
    const std::vector<std::pair<std::string, std::string>> rows = {
        {"variant", std::string(to_string(rep.variant))},
        {"beta", num(rep.beta)},
        {"R0", num(rep.params.R0)},
        {"kappa0", num(rep.params.kappa0)},
        {"K", num(rep.params.K)},
        {"b0", num(rep.params.b0)},
        {"R", num(rep.geometry.R)},
        {"kappa", num(rep.geometry.kappa)},
        {"c_f", num(rep.distance.c_f())},
        {"R1", num(rep.distance.R1())},
        {"c", num(rep.rate.c)},
        {"log_c", num(rep.rate.log_c)},
        {"c0", num(rep.rate.c0)},
        {"log_c0", num(rep.rate.log_c0)},
        {"cbar", num(rep.cbar)},
        {"cprime", num(rep.cprime)},
        {"feasible", rep.step.feasible ? "true" : "false"},
        {"delta0_max", num(rep.step.delta0_max)},
        {"log_delta0_max", num(rep.step.log_delta0_max)},
        {"binding_restriction", std::string(to_string(rep.step.binding))},
    };
    for (const auto& [k, v] : rows) out << k << ',' << v << '\n';
    ordered_json j;
    for (const auto& [k, v] : rows) j[k] = v;
    meta["report"] = j;
  }
  {
    auto out = dir.open("restrictions.csv", res);
    out << "restriction,log_threshold,binding\n";
    for (std::size_t i = 0; i < kRestrictionCount; ++i) {
      const auto r = static_cast<Restriction>(i);
      out << to_string(r) << ',' << num(rep.step.log_thresholds[i]) << ','
          << (rep.step.feasible && r == rep.step.binding ? "true" : "false") << '\n';
    }
  }

  const FarFieldWitness w = far_field_witness(model, rep.geometry, cfg.verify.radius, cfg.verify.samples, cfg.seed);
  res.verdicts.push_back({"far_field_convexity_fraction",
                          static_cast<double>(w.satisfied) / static_cast<double>(w.pairs), 0.0, 1.0,
                          w.satisfied == w.pairs, "all sampled pairs"});
  res.verdicts.push_back({"far_field_min_ratio", w.min_ratio, 0.0, rep.geometry.kappa,
                          w.min_ratio >= rep.geometry.kappa, ">= kappa"});

  std::ostringstream s;
  s << "R = " << num(rep.geometry.R) << ", kappa = " << num(rep.geometry.kappa) << ", c_f = " << num(rep.distance.c_f())
    << ", R1 = " << num(rep.distance.R1()) << "\n"
    << "log c = " << num(rep.rate.log_c) << " (c = " << num(rep.rate.c) << "), log c0 = " << num(rep.rate.log_c0) << "\n";
  if (rep.step.feasible)
    s << "Delta0 = " << num(rep.step.delta0_max) << " (binding: " << to_string(rep.step.binding) << ")\n";
  else
    s << "Delta0 infeasible (log bound " << num(rep.step.log_delta0_max) << ", binding: " << to_string(rep.step.binding)
      << ")\n";
  res.summary += s.str();
}

void cmd_simulate(const ExperimentConfig& cfg, const FieldModel& model, const Schedule& schedule,
                  OutputDir& dir, CommandResult& res, ordered_json& meta) {
  EnsembleOptions opts;
  opts.n_chains = cfg.n;
  opts.batch = batch_for(cfg, model);
  opts.record_every = cfg.record_every;
  opts.moment_orders = cfg.moment_orders;
  opts.blocks = cfg.blocks;
  opts.threads = cfg.threads;
  const auto init = resolved_initial(cfg.init_x, model.dimension(), "initial.x.center");
  const EnsembleResult er = simulate_ensemble(model, schedule, opts, init, cfg.seed);

  {
    auto out = dir.open("moments.csv", res);
    out << "p,k,T_k,mean,ci_half_width,running_sup_mean,running_sup_ci_half_width\n";
    for (std::size_t o = 0; o < cfg.moment_orders.size(); ++o) {
      const auto& m = er.moments[o];
      const auto& s = er.running_sup_moments[o];
      for (std::size_t i = 0; i < m.size(); ++i)
        out << num(cfg.moment_orders[o]) << ',' << m.steps[i] << ',' << num(m.times[i]) << ',' << num(m.values[i])
            << ',' << num(m.ci_half_widths[i]) << ',' << num(s.values[i]) << ',' << num(s.ci_half_widths[i]) << '\n';
    }
  }
  {
    auto out = dir.open("divergence.csv", res);
    out << "chain,step\n";
    for (std::size_t i = 0; i < er.divergence_steps.size(); ++i)
      if (er.divergence_steps[i]) out << i << ',' << *er.divergence_steps[i] << '\n';
  }

  res.verdicts.push_back(divergence_verdict(er.n_diverged, er.n_chains, cfg.couple.max_divergence_fraction));
  for (std::size_t o = 0; o < cfg.moment_orders.size(); ++o) {
    const auto& m = er.moments[o];
    std::vector<double> t, v;
    for (std::size_t i = m.size() / 2; i < m.size(); ++i)
      if (std::isfinite(m.values[i])) {
        t.push_back(m.times[i]);
        v.push_back(m.values[i]);
      }
    if (t.size() < 3) continue;
    const TrendTest tt = positive_trend_test(t, v, cfg.trend_level);
    const double se = std::isfinite(tt.t_statistic) && tt.t_statistic != 0.0 ? tt.slope / tt.t_statistic : 0.0;
    res.verdicts.push_back({"moment_trend_p" + num(cfg.moment_orders[o]), tt.slope, normal_quantile(0.975) * std::abs(se),
                            0.0, !tt.positive_trend, "one-sided p >= " + num(cfg.trend_level)});
  }
  meta["eta_max"] = schedule.delta0();
  meta["n_diverged"] = er.n_diverged;

  std::ostringstream s;
  s << er.n_chains << " chains, " << schedule.size() << " steps, sup eta = " << num(schedule.delta0()) << ", "
    << er.n_diverged << " diverged\n";
  for (std::size_t o = 0; o < cfg.moment_orders.size(); ++o)
    s << "E|X|^" << num(cfg.moment_orders[o]) << " at horizon: " << num(er.moments[o].values.back()) << "\n";
  res.summary += s.str();
}

void cmd_couple(const ExperimentConfig& cfg, const FieldModel& model, const Schedule& schedule, OutputDir& dir,
                CommandResult& res, ordered_json& meta) {
  const RateReport rep = report_for(cfg, model);
  CoupledEnsembleOptions opts;
  opts.n_pairs = cfg.n;
  opts.batch = batch_for(cfg, model);
  opts.record_every = cfg.record_every;
  opts.init_x = resolved_initial(cfg.init_x, model.dimension(), "initial.x.center");
  opts.init_y = resolved_initial(cfg.init_y, model.dimension(), "initial.y.center");
  opts.coupled_start = cfg.coupled_start;
  opts.blocks = cfg.blocks;
  opts.threads = cfg.threads;
  if (cfg.couple.marginals_step) {
    if (*cfg.couple.marginals_step > schedule.size())
      throw ConfigError("couple.marginals_step", "beyond the schedule's horizon");
    opts.snapshot_steps.push_back(*cfg.couple.marginals_step);
  }
  const CouplingSeries cs = run_coupled_ensemble(model, schedule, cfg.coupling, rep.distance, opts, cfg.seed);

  {
    auto out = dir.open("coupling.csv", res);
    out << "k,T_k,mean_f_absZ,ci_lo,ci_hi,mean_absZ,merged_fraction\n";
    for (std::size_t i = 0; i < cs.mean_f.size(); ++i)
      out << cs.mean_f.steps[i] << ',' << num(cs.mean_f.times[i]) << ',' << num(cs.mean_f.values[i]) << ','
          << num(cs.mean_f.values[i] - cs.mean_f.ci_half_widths[i]) << ','
          << num(cs.mean_f.values[i] + cs.mean_f.ci_half_widths[i]) << ',' << num(cs.mean_abs_z.values[i]) << ','
          << num(cs.merged_fraction.values[i]) << '\n';
  }
  {
    auto out = dir.open("merge_times.csv", res);
    out << "pair,merge_time\n";
    for (std::size_t i = 0; i < cs.merge_times.size(); ++i)
      if (cs.merge_times[i]) out << i << ',' << num(*cs.merge_times[i]) << '\n';
  }

  const bool sync = cfg.coupling.mode == CouplingMode::synchronous;
  const ExperimentSeries& series = sync ? cs.mean_abs_z : cs.mean_f;
  const std::string stat = sync ? "E|Z|" : "E f(|Z|)";
  res.verdicts.push_back(divergence_verdict(cs.n_diverged, cs.n_pairs, cfg.couple.max_divergence_fraction));

  std::ostringstream s;
  s << cs.n_pairs << " pairs, " << to_string(cfg.coupling.mode) << " coupling, " << schedule.size() << " steps\n";
  const double final_merged = cs.merged_fraction.values.back();
  s << "merged fraction at horizon: " << num(final_merged) << "\n";
  meta["certified_rate"] = number_json(rep.rate.c);
  meta["certified_log_rate"] = rep.rate.log_c;
  meta["final_merged_fraction"] = final_merged;

  if (series.values.front() == 0.0) {
    const bool all_zero = std::all_of(series.values.begin(), series.values.end(), [](double v) { return v == 0.0; });
    res.verdicts.push_back({"identical_start_series_zero", all_zero ? 0.0 : 1.0, 0.0, 0.0, all_zero, "== 0"});
    s << stat << " is identically zero from a coupled start\n";
  } else {
    const auto [b, e] = decay_window(series, cfg.couple.fit_floor);
    try {
      const RateFit fit = fit_rate(series, b, e);
      res.verdicts.push_back({"rate_fit_r_squared", fit.r_squared, 0.0, cfg.couple.min_r_squared,
                              fit.r_squared >= cfg.couple.min_r_squared, ">= " + num(cfg.couple.min_r_squared)});
      if (sync && is_quadratic_family(cfg.target) && schedule.step_sizes().size() > 0 &&
          std::all_of(schedule.step_sizes().begin(), schedule.step_sizes().end(),
                      [&](double h) { return h == schedule.eta(0); })) {
        const double eta = schedule.eta(0);
        const double k = quadratic_stiffness(cfg.target);
        const double ref = -std::log1p(-k * eta) / eta;
        res.verdicts.push_back({"synchronous_rate", fit.rate, fit.rate_ci_half_width, ref,
                                std::abs(fit.rate / ref - 1.0) <= cfg.couple.sync_tolerance,
                                "relative " + num(cfg.couple.sync_tolerance)});
      } else if (!sync) {
        res.verdicts.push_back({"fitted_rate_vs_certified", fit.rate, fit.rate_ci_half_width, rep.rate.c,
                                fit.rate > 0.0 && fit.rate + fit.rate_ci_half_width >= rep.rate.c,
                                "rate > 0 and rate >= c - ci"});
      }
      meta["fit"] = {{"rate", fit.rate}, {"rate_ci_half_width", fit.rate_ci_half_width},
                     {"r_squared", fit.r_squared}, {"window_begin", fit.window_begin},
                     {"window_end", fit.window_end}};
      s << "fitted rate of " << stat << ": " << num(fit.rate) << " +/- " << num(fit.rate_ci_half_width)
        << " (r^2 = " << num(fit.r_squared) << ", points " << fit.points << ")\n";
    } catch (const std::invalid_argument& err) {
      res.verdicts.push_back({"rate_fit_r_squared", 0.0, 0.0, cfg.couple.min_r_squared, false, err.what()});
    }
    s << "certified rate c = " << num(rep.rate.c) << " (log c = " << num(rep.rate.log_c) << ")\n";
  }

  if (cfg.couple.min_merged_fraction)
    res.verdicts.push_back({"final_merged_fraction", final_merged, cs.merged_fraction.ci_half_widths.back(),
                            *cfg.couple.min_merged_fraction, final_merged >= *cfg.couple.min_merged_fraction,
                            ">= " + num(*cfg.couple.min_merged_fraction)});

  if (cfg.couple.marginals_step) {
    const auto& [xs, ys] = cs.snapshots.at(*cfg.couple.marginals_step);
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < xs.rows(); ++i)
      if (xs.row(i).allFinite() && ys.row(i).allFinite()) rows.push_back(i);
    Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), xs.cols()), c(a.rows(), a.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      a.row(static_cast<Eigen::Index>(i)) = xs.row(rows[i]);
      c.row(static_cast<Eigen::Index>(i)) = ys.row(rows[i]);
    }
    const EnergyTest et = paired_energy_test(a, c, cfg.couple.permutations, cfg.seed);
    res.verdicts.push_back({"equal_marginals_energy_p_value", et.p_value, 0.0, cfg.couple.marginals_level,
                            et.p_value >= cfg.couple.marginals_level, "p >= " + num(cfg.couple.marginals_level)});
    meta["energy_statistic"] = et.statistic;
    s << "equal marginals at step " << *cfg.couple.marginals_step << ": energy " << num(et.statistic) << ", p = "
      << num(et.p_value) << "\n";
  }
  res.summary += s.str();
}

double batch_mean_variance(const TargetSpec& t, const BatchSpec& b, std::size_t n_components) {
  if (t.name != "shifted_gaussian" || (b.batch_size >= n_components && !b.replacement)) return 0.0;
  const std::size_t d = t.offsets.front().size();
  const double n = static_cast<double>(n_components);
  const double bs = static_cast<double>(b.batch_size);
  double total = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0, sq = 0.0;
    for (const auto& o : t.offsets) mean += o[c];
    mean /= n;
    for (const auto& o : t.offsets) sq += (o[c] - mean) * (o[c] - mean);
    const double pop = sq / n;
    total += b.replacement ? pop / bs : (n > 1 ? pop / bs * (n - bs) / (n - 1.0) : 0.0);
  }
  return total / static_cast<double>(d);
}

void cmd_bias(const ExperimentConfig& cfg, const FieldModel& model, OutputDir& dir, CommandResult& res,
              ordered_json& meta) {
  if (!is_quadratic_family(cfg.target))
    throw ConfigError("target.name", "the bias experiment needs a gaussian, quadratic or shifted_gaussian target");
  GaussianReference ref;
  ref.stiffness = quadratic_stiffness(cfg.target);
  ref.center = Vector::Zero(model.dimension());
  if (cfg.target.name == "shifted_gaussian") {
    for (const auto& o : cfg.target.offsets) ref.center += Eigen::Map<const Vector>(o.data(), model.dimension());
    ref.center /= static_cast<double>(cfg.target.offsets.size());
  }
  BiasOptions opts;
  opts.etas = cfg.bias.etas;
  opts.burn_in_time = cfg.bias.burn_in_time;
  opts.harvest_time = cfg.bias.harvest_time;
  opts.harvest_spacing = cfg.bias.harvest_spacing;
  opts.n_chains = cfg.n;
  opts.batch = batch_for(cfg, model);
  opts.blocks = cfg.blocks;
  opts.threads = cfg.threads;
  const BiasResult br = bias_experiment(model, ref, opts, cfg.seed);
  const double v = batch_mean_variance(cfg.target, opts.batch, model.size());
  const bool exact_oracle = v == 0.0;

  {
    auto out = dir.open("bias.csv", res);
    out << "eta,w1,ci_half_width,oracle,samples,warnings\n";
    for (const auto& p : br.points) {
      std::string w;
      for (const auto& m : p.warnings) w += (w.empty() ? "" : "; ") + m;
      out << num(p.eta) << ',' << num(p.w1) << ',' << num(p.ci_half_width) << ','
          << num(gaussian_w1_oracle(p.eta, model.beta(), ref.stiffness, v)) << ',' << p.samples << ','
          << csv_field(w) << '\n';
    }
  }

  const double z = normal_quantile(0.975);
  std::ostringstream s;
  s << "eta, W1 estimate, oracle" << (exact_oracle ? "" : " (approximate)") << ":\n";
  for (const auto& p : br.points) {
    const double oracle = gaussian_w1_oracle(p.eta, model.beta(), ref.stiffness, v);
    s << "  " << num(p.eta) << "  " << num(p.w1) << " +/- " << num(p.ci_half_width) << "  " << num(oracle) << "\n";
    for (const auto& w : p.warnings) s << "  warning (eta " << num(p.eta) << "): " << w << "\n";
    if (exact_oracle) {
      const double sigma = p.ci_half_width / z;
      res.verdicts.push_back({"w1_vs_oracle_eta_" + eta_label(p.eta), p.w1, p.ci_half_width, oracle,
                              std::abs(p.w1 - oracle) <= 3.0 * sigma, "3 sigma"});
    }
  }
  for (std::size_t i = 0; i < br.ratios.size(); ++i) {
    const auto& a = br.points[i];
    const auto& b = br.points[i + 1];
    const double r = br.ratios[i];
    const double hw = r * std::hypot(a.ci_half_width / a.w1, b.ci_half_width / b.w1);
    res.verdicts.push_back({"bias_ratio_" + eta_label(a.eta) + "_over_" + eta_label(b.eta), r, hw, a.eta / b.eta,
                            r >= cfg.bias.ratio_low && r <= cfg.bias.ratio_high,
                            "[" + num(cfg.bias.ratio_low) + ", " + num(cfg.bias.ratio_high) + "]"});
  }
  if (br.points.size() >= 2) {
    double min_drop = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < br.points.size(); ++i)
      min_drop = std::min(min_drop, br.points[i].w1 - br.points[i + 1].w1);
    res.verdicts.push_back({"bias_decreasing_min_drop", min_drop, 0.0, 0.0, min_drop > 0.0, "> 0"});
    res.verdicts.push_back({"bias_loglog_slope", br.loglog.slope, z * br.loglog.slope_se, 1.0,
                            std::abs(br.loglog.slope - 1.0) <= cfg.bias.slope_tolerance,
                            "+/- " + num(cfg.bias.slope_tolerance)});
    s << "log-log slope: " << num(br.loglog.slope) << "\n";
  }
  meta["batch_gradient_variance"] = v;
  res.summary += s.str();
}

void cmd_verify(const ExperimentConfig& cfg, const FieldModel& model, OutputDir& dir, CommandResult& res,
                ordered_json& meta) {
  if (!(cfg.verify.radius > model.params().R0))
    throw ConfigError("verify.radius", "must exceed the declared R0");
  const AssumptionReport rep = verify_assumptions(model, cfg.verify.radius, cfg.verify.samples, cfg.seed);
  {
    auto out = dir.open("assumptions.csv", res);
    out << "name,value\n"
        << "min_convexity," << num(rep.min_convexity) << '\n'
        << "convexity_samples," << rep.convexity_samples << '\n'
        << "max_lipschitz," << num(rep.max_lipschitz) << '\n'
        << "worst_lipschitz_component," << rep.worst_lipschitz_component << '\n'
        << "lipschitz_samples," << rep.lipschitz_samples << '\n';
  }
  const auto& p = model.params();
  res.verdicts.push_back({"convexity_outside_R0", rep.min_convexity, 0.0, p.kappa0, !rep.convexity_violated,
                          ">= kappa0 (relative 1e-9)"});
  res.verdicts.push_back({"lipschitz_ratio", rep.max_lipschitz, 0.0, p.K, !rep.lipschitz_violated,
                          "<= K (relative 1e-9)"});
  meta["worst_convexity_point"] = std::vector<double>(rep.worst_convexity_point.data(),
                                                      rep.worst_convexity_point.data() + rep.worst_convexity_point.size());
  std::ostringstream s;
  s << "min convexity " << num(rep.min_convexity) << " (declared " << num(p.kappa0) << "), max Lipschitz ratio "
    << num(rep.max_lipschitz) << " (declared " << num(p.K) << ")\n";
  res.summary += s.str();
}

void cmd_tails(const ExperimentConfig& cfg, const FieldModel& model, OutputDir& dir, CommandResult& res,
               ordered_json& meta) {
  const int d = model.dimension();
  CouplingConfig cc = cfg.coupling;
  cc.mode = CouplingMode::reflection;
  // Start far apart so that no pair can meet within the single recorded step.
  CoupledEnsembleOptions opts;
  opts.n_pairs = cfg.n;
  opts.batch = batch_for(cfg, model);
  opts.init_x.center = Vector::Zero(d);
  opts.init_y.center = Vector::Zero(d);
  opts.init_x.center[0] = 5.0;
  opts.init_y.center[0] = -5.0;
  opts.noise_sup_steps = 1;
  opts.blocks = cfg.blocks;
  opts.threads = cfg.threads;
  const DistanceFunction dist(1.0, 10.0);

  auto out = dir.open("tails.csv", res);
  out << "eta,threshold,exceedances,neg_log_survival,oracle_neg_log_survival,reliable\n";
  std::vector<TailProfile> profiles;
  std::ostringstream s;
  for (std::size_t e = 0; e < cfg.tails.etas.size(); ++e) {
    const double eta = cfg.tails.etas[e];
    if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("tails.etas", "step sizes must lie in (0, 1)");
    const Schedule one = Schedule::constant(eta, 1);
    const auto cs = run_coupled_ensemble(model, one, cc, dist, opts, cfg.seed + e);
    std::vector<double> sup;
    sup.reserve(cs.noise_sups.size());
    for (const auto& r : cs.noise_sups) sup.push_back(r.front().sup_projection);
    const double se = std::sqrt(eta);
    auto cdf = [se](double a) { return a <= 0.0 ? 0.0 : 2.0 * normal_cdf(a / se) - 1.0; };
    const KsResult ks = ks_test(sup, cdf);
    std::vector<double> thresholds;
    for (double u : cfg.tails.scaled_thresholds) thresholds.push_back(u * se);
    const TailProfile tp = tail_profile(sup, thresholds, eta, cfg.tails.min_exceedances);
    for (const auto& pt : tp.points)
      out << num(eta) << ',' << num(pt.threshold) << ',' << pt.exceedances << ',' << num(pt.neg_log_survival) << ','
          << num(-std::log(1.0 - cdf(pt.threshold))) << ',' << (pt.reliable ? "true" : "false") << '\n';
    res.verdicts.push_back({"ks_p_value_eta_" + eta_label(eta), ks.p_value, 0.0, cfg.tails.ks_level,
                            ks.p_value >= cfg.tails.ks_level, "p >= " + num(cfg.tails.ks_level)});
    s << "eta " << num(eta) << ": KS D = " << num(ks.statistic) << ", p = " << num(ks.p_value)
      << ", tail slope = " << num(tp.slope) << ", c_hat = " << num(tp.c_hat) << "\n";
    meta["c_hat_eta_" + eta_label(eta)] = tp.c_hat;
    profiles.push_back(tp);
  }
  for (std::size_t e = 0; e + 1 < profiles.size(); ++e) {
    const double ratio = profiles[e + 1].slope / profiles[e].slope;
    const double expected = cfg.tails.etas[e] / cfg.tails.etas[e + 1];
    res.verdicts.push_back({"tail_slope_ratio_" + eta_label(cfg.tails.etas[e]) + "_to_" +
                                eta_label(cfg.tails.etas[e + 1]),
                            ratio, 0.0, expected, std::abs(ratio / expected - 1.0) <= cfg.tails.ratio_tolerance,
                            "relative " + num(cfg.tails.ratio_tolerance)});
  }
  res.summary += s.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Reader root(doc, "");
  if (root.has("seed")) cfg.seed = root.unsigned_integer("seed");
  if (root.has("threads")) cfg.threads = static_cast<unsigned>(positive_count(root, "threads"));
  if (root.has("output_dir")) cfg.output_dir = root.string("output_dir");
  if (root.has("max_divergence_fraction")) cfg.couple.max_divergence_fraction = root.number("max_divergence_fraction");

  if (!root.has("target")) throw ConfigError("target", "missing required field");
  {
    Reader t = root.object("target");
    if (!t.has("name")) throw ConfigError("target.name", "missing required field");
    cfg.target.name = t.string("name");
    static const std::set<std::string> names{"gaussian", "quadratic", "bump", "shifted_gaussian", "rotational", "free"};
    if (!names.count(cfg.target.name)) throw ConfigError("target.name", "unknown target '" + cfg.target.name + "'");
    if (t.has("dimension")) cfg.target.dimension = static_cast<int>(positive_count(t, "dimension"));
    if (!t.has("beta")) throw ConfigError("target.beta", "missing required field");
    cfg.target.beta = t.positive("beta");
    if (t.has("a")) cfg.target.a = t.number("a");
    if (t.has("gamma")) cfg.target.gamma = t.number("gamma");
    if (t.has("stiffness")) cfg.target.stiffness = t.positive("stiffness");
    if (t.has("offsets")) cfg.target.offsets = t.number_rows("offsets");
    if (t.has("params")) {
      Reader p = t.object("params");
      AssumptionParams ap;
      for (const char* key : {"R0", "kappa0", "K", "b0"})
        if (!p.has(key)) throw ConfigError(p.field(key), "missing required field");
      ap.R0 = p.number("R0");
      ap.kappa0 = p.number("kappa0");
      ap.K = p.number("K");
      ap.b0 = p.number("b0");
      p.finish();
      cfg.target.params = ap;
    }
    t.finish();
  }
  if (root.has("schedule")) {
    Reader s = root.object("schedule");
    if (s.has("eta")) cfg.schedule.eta = s.positive("eta");
    if (s.has("moment_bound_fraction")) cfg.schedule.moment_bound_fraction = s.positive("moment_bound_fraction");
    if (s.has("step_sizes")) cfg.schedule.step_sizes = s.numbers("step_sizes");
    if (s.has("steps")) cfg.schedule.steps = positive_count(s, "steps");
    const int given = int(cfg.schedule.eta.has_value()) + int(cfg.schedule.moment_bound_fraction.has_value()) +
                      int(!cfg.schedule.step_sizes.empty());
    if (given > 1) throw ConfigError("schedule", "give only one of eta, moment_bound_fraction, step_sizes");
    s.finish();
  }
  if (root.has("batch")) {
    Reader b = root.object("batch");
    BatchSpec spec;
    if (!b.has("size")) throw ConfigError("batch.size", "missing required field");
    spec.batch_size = positive_count(b, "size");
    if (b.has("replacement")) spec.replacement = b.boolean("replacement");
    b.finish();
    cfg.batch = spec;
  }
  if (root.has("coupling")) {
    Reader c = root.object("coupling");
    if (c.has("mode")) {
      const std::string m = c.string("mode");
      if (m == "reflection") cfg.coupling.mode = CouplingMode::reflection;
      else if (m == "synchronous") cfg.coupling.mode = CouplingMode::synchronous;
      else throw ConfigError("coupling.mode", "expected 'reflection' or 'synchronous'");
    }
    if (c.has("substeps")) cfg.coupling.substeps = positive_count(c, "substeps");
    if (c.has("merge_threshold")) {
      cfg.coupling.merge_threshold = c.number("merge_threshold");
      if (*cfg.coupling.merge_threshold < 0.0) throw ConfigError("coupling.merge_threshold", "must be nonnegative");
    }
    if (c.has("bridge_crossing")) cfg.coupling.bridge_crossing = c.boolean("bridge_crossing");
    c.finish();
  }
  if (root.has("ensemble")) {
    Reader e = root.object("ensemble");
    if (e.has("n")) cfg.n = positive_count(e, "n");
    if (e.has("record_every")) cfg.record_every = positive_count(e, "record_every");
    if (e.has("blocks")) cfg.blocks = positive_count(e, "blocks");
    e.finish();
  }
  if (root.has("initial")) {
    Reader i = root.object("initial");
    if (i.has("x")) read_initial(i.object("x"), cfg.init_x);
    if (i.has("y")) read_initial(i.object("y"), cfg.init_y);
    if (i.has("coupled")) cfg.coupled_start = i.boolean("coupled");
    i.finish();
  }
  if (root.has("constants")) {
    Reader c = root.object("constants");
    if (c.has("cbar")) cfg.constants.cbar = c.positive("cbar");
    if (c.has("cprime")) cfg.constants.cprime = c.positive("cprime");
    if (c.has("r1_factor")) {
      cfg.constants.r1_factor = c.number("r1_factor");
      if (!(cfg.constants.r1_factor > 1.5)) throw ConfigError("constants.r1_factor", "must exceed 1.5");
    }
    c.finish();
  }
  if (root.has("simulate")) {
    Reader s = root.object("simulate");
    if (s.has("moment_orders")) {
      cfg.moment_orders = s.numbers("moment_orders");
      if (cfg.moment_orders.empty()) throw ConfigError("simulate.moment_orders", "must not be empty");
      for (double p : cfg.moment_orders)
        if (!(p >= 1.0)) throw ConfigError("simulate.moment_orders", "orders must be at least 1");
    }
    if (s.has("trend_level")) cfg.trend_level = s.positive("trend_level");
    s.finish();
  }
  if (root.has("couple")) {
    Reader c = root.object("couple");
    if (c.has("marginals_step")) cfg.couple.marginals_step = static_cast<std::size_t>(c.unsigned_integer("marginals_step"));
    if (c.has("permutations")) cfg.couple.permutations = positive_count(c, "permutations");
    if (c.has("marginals_level")) cfg.couple.marginals_level = c.positive("marginals_level");
    if (c.has("fit_floor")) cfg.couple.fit_floor = c.positive("fit_floor");
    if (c.has("min_r_squared")) cfg.couple.min_r_squared = c.number("min_r_squared");
    if (c.has("min_merged_fraction")) cfg.couple.min_merged_fraction = c.number("min_merged_fraction");
    if (c.has("sync_tolerance")) cfg.couple.sync_tolerance = c.positive("sync_tolerance");
    c.finish();
  }
  if (root.has("bias")) {
    Reader b = root.object("bias");
    if (b.has("etas")) cfg.bias.etas = b.numbers("etas");
    if (b.has("burn_in_time")) cfg.bias.burn_in_time = b.number("burn_in_time");
    if (b.has("harvest_time")) cfg.bias.harvest_time = b.positive("harvest_time");
    if (b.has("harvest_spacing")) cfg.bias.harvest_spacing = b.positive("harvest_spacing");
    if (b.has("ratio_low")) cfg.bias.ratio_low = b.number("ratio_low");
    if (b.has("ratio_high")) cfg.bias.ratio_high = b.number("ratio_high");
    if (b.has("slope_tolerance")) cfg.bias.slope_tolerance = b.positive("slope_tolerance");
    if (cfg.bias.etas.empty()) throw ConfigError("bias.etas", "must not be empty");
    for (double e : cfg.bias.etas)
      if (!(e > 0.0)) throw ConfigError("bias.etas", "step sizes must be positive");
    b.finish();
  }
  if (root.has("verify")) {
    Reader v = root.object("verify");
    if (v.has("radius")) cfg.verify.radius = v.positive("radius");
    if (v.has("samples")) cfg.verify.samples = positive_count(v, "samples");
    v.finish();
  }
  if (root.has("tails")) {
    Reader t = root.object("tails");
    if (t.has("etas")) cfg.tails.etas = t.numbers("etas");
    if (t.has("scaled_thresholds")) cfg.tails.scaled_thresholds = t.numbers("scaled_thresholds");
    if (t.has("min_exceedances")) cfg.tails.min_exceedances = static_cast<std::size_t>(t.unsigned_integer("min_exceedances"));
    if (t.has("ks_level")) cfg.tails.ks_level = t.positive("ks_level");
    if (t.has("ratio_tolerance")) cfg.tails.ratio_tolerance = t.positive("ratio_tolerance");
    if (cfg.tails.etas.empty()) throw ConfigError("tails.etas", "must not be empty");
    t.finish();
  }
  root.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  ordered_json j;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["output_dir"] = cfg.output_dir;
  j["max_divergence_fraction"] = cfg.couple.max_divergence_fraction;
  ordered_json t;
  t["name"] = cfg.target.name;
  t["dimension"] = cfg.target.dimension;
  t["beta"] = cfg.target.beta ? json(*cfg.target.beta) : json(nullptr);
  t["a"] = cfg.target.a;
  t["gamma"] = cfg.target.gamma;
  t["stiffness"] = cfg.target.stiffness;
  t["offsets"] = cfg.target.offsets;
  if (cfg.target.params)
    t["params"] = {{"R0", cfg.target.params->R0}, {"kappa0", cfg.target.params->kappa0},
                   {"K", cfg.target.params->K}, {"b0", cfg.target.params->b0}};
  j["target"] = t;
  ordered_json s;
  if (cfg.schedule.eta) s["eta"] = *cfg.schedule.eta;
  if (cfg.schedule.moment_bound_fraction) s["moment_bound_fraction"] = *cfg.schedule.moment_bound_fraction;
  if (!cfg.schedule.step_sizes.empty()) s["step_sizes"] = cfg.schedule.step_sizes;
  s["steps"] = cfg.schedule.steps;
  j["schedule"] = s;
  if (cfg.batch) j["batch"] = {{"size", cfg.batch->batch_size}, {"replacement", cfg.batch->replacement}};
  ordered_json c;
  c["mode"] = std::string(to_string(cfg.coupling.mode));
  c["substeps"] = cfg.coupling.substeps;
  c["merge_threshold"] = cfg.coupling.merge_threshold ? json(*cfg.coupling.merge_threshold) : json(nullptr);
  c["bridge_crossing"] = cfg.coupling.bridge_crossing;
  j["coupling"] = c;
  j["ensemble"] = {{"n", cfg.n}, {"record_every", cfg.record_every}, {"blocks", cfg.blocks}};
  ordered_json init;
  init["x"] = {{"center", vec(cfg.init_x.center)}, {"spread", cfg.init_x.spread}};
  init["y"] = {{"center", vec(cfg.init_y.center)}, {"spread", cfg.init_y.spread}};
  init["coupled"] = cfg.coupled_start;
  j["initial"] = init;
  ordered_json k;
  k["cbar"] = cfg.constants.cbar;
  k["cprime"] = cfg.constants.cprime ? json(*cfg.constants.cprime) : json(nullptr);
  k["r1_factor"] = cfg.constants.r1_factor;
  j["constants"] = k;
  j["simulate"] = {{"moment_orders", cfg.moment_orders}, {"trend_level", cfg.trend_level}};
  ordered_json cp;
  cp["marginals_step"] = cfg.couple.marginals_step ? json(*cfg.couple.marginals_step) : json(nullptr);
  cp["permutations"] = cfg.couple.permutations;
  cp["marginals_level"] = cfg.couple.marginals_level;
  cp["fit_floor"] = cfg.couple.fit_floor;
  cp["min_r_squared"] = cfg.couple.min_r_squared;
  cp["min_merged_fraction"] = cfg.couple.min_merged_fraction ? json(*cfg.couple.min_merged_fraction) : json(nullptr);
  cp["sync_tolerance"] = cfg.couple.sync_tolerance;
  j["couple"] = cp;
  ordered_json b;
  b["etas"] = cfg.bias.etas;
  b["burn_in_time"] = cfg.bias.burn_in_time;
  b["harvest_time"] = cfg.bias.harvest_time;
  b["harvest_spacing"] = cfg.bias.harvest_spacing;
  b["ratio_low"] = cfg.bias.ratio_low;
  b["ratio_high"] = cfg.bias.ratio_high;
  b["slope_tolerance"] = cfg.bias.slope_tolerance;
  j["bias"] = b;
  j["verify"] = {{"radius", cfg.verify.radius}, {"samples", cfg.verify.samples}};
  ordered_json tl;
  tl["etas"] = cfg.tails.etas;
  tl["scaled_thresholds"] = cfg.tails.scaled_thresholds;
  tl["min_exceedances"] = cfg.tails.min_exceedances;
  tl["ks_level"] = cfg.tails.ks_level;
  tl["ratio_tolerance"] = cfg.tails.ratio_tolerance;
  j["tails"] = tl;
  return j.dump(2);
}

std::shared_ptr<const FieldModel> build_model(const TargetSpec& spec) {
  const int d = spec.dimension;
  if (!spec.beta) throw ConfigError("target.beta", "missing required field");
  const double beta = *spec.beta;
  std::shared_ptr<const FieldModel> model;
  try {
    if (spec.name == "gaussian") {
      model = std::make_shared<TargetModel>(make_gaussian_target(d, beta));
    } else if (spec.name == "quadratic") {
      model = std::make_shared<TargetModel>(make_quadratic_target(d, beta, spec.stiffness));
    } else if (spec.name == "bump") {
      if (spec.a < 0.0) throw ConfigError("target.a", "must be nonnegative");
      model = std::make_shared<TargetModel>(make_bump_target(d, beta, spec.a));
    } else if (spec.name == "shifted_gaussian") {
      if (spec.offsets.empty()) throw ConfigError("target.offsets", "needs at least one offset");
      std::vector<Vector> offsets;
      for (const auto& o : spec.offsets) {
        if (static_cast<int>(o.size()) != d) throw ConfigError("target.offsets", "each offset must have length dimension");
        offsets.push_back(Eigen::Map<const Vector>(o.data(), d));
      }
      model = std::make_shared<TargetModel>(make_shifted_gaussian_target(d, beta, offsets));
    } else if (spec.name == "rotational") {
      if (d % 2 != 0) throw ConfigError("target.dimension", "the rotational drift needs an even dimension");
      if (spec.gamma < 0.0) throw ConfigError("target.gamma", "must be nonnegative");
      model = std::make_shared<DriftModel>(make_rotational_drift(d, beta, spec.gamma));
    } else if (spec.name == "free") {
      model = std::make_shared<DriftModel>(make_free_diffusion(d, beta));
    } else {
      throw ConfigError("target.name", "unknown target '" + spec.name + "'");
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError("target", e.what());
  }
  if (spec.params) {
    try {
      validate(*spec.params);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("target.params", e.what());
    }
    model = std::make_shared<FieldModel>(model->with_params(*spec.params));
  }
  return model;
}

Schedule build_schedule(const ExperimentConfig& cfg, const FieldModel& model) {
  const auto& s = cfg.schedule;
  if (!s.step_sizes.empty()) {
    for (double h : s.step_sizes)
      if (!(h > 0.0)) throw ConfigError("schedule.step_sizes", "step sizes must be positive");
    return Schedule::from_steps(s.step_sizes);
  }
  if (s.eta) return Schedule::constant(*s.eta, s.steps);
  if (s.moment_bound_fraction) {
    try {
      validate(model.params());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("target.params", e.what());
    }
    const double p = *std::max_element(cfg.moment_orders.begin(), cfg.moment_orders.end());
    if (!(p >= 2.0)) throw ConfigError("schedule.moment_bound_fraction", "needs a moment order of at least 2");
    const double bound = moment_step_bound(geometry_for(model).kappa, model.params().K, p);
    return Schedule::constant(*s.moment_bound_fraction * bound, s.steps);
  }
  throw ConfigError("schedule.eta", "missing: give eta, moment_bound_fraction or step_sizes");
}

void write_verdicts(std::ostream& out, const std::vector<Verdict>& verdicts) {
  out << kVerdictHeader << '\n';
  for (const auto& v : verdicts)
    out << csv_field(v.statistic) << ',' << num(v.estimate) << ',' << num(v.ci_half_width) << ','
        << (v.reference ? num(*v.reference) : std::string()) << ',' << (v.pass ? "pass" : "fail") << ','
        << csv_field(v.tolerance) << '\n';
}

bool CommandResult::passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

CommandResult run_command(CommandKind kind, const ExperimentConfig& config) {
  const auto model = build_model(config.target);
  CommandResult res;
  res.kind = kind;
  OutputDir dir(config.output_dir);
  ordered_json meta;
  meta["command"] = std::string(to_string(kind));
  meta["version"] = "0.1.0";
  meta["config"] = ordered_json::parse(config_to_json(config));

  switch (kind) {
    case CommandKind::constants:
      cmd_constants(config, *model, dir, res, meta);
      break;
    case CommandKind::simulate: {
      const Schedule schedule = build_schedule(config, *model);
      cmd_simulate(config, *model, schedule, dir, res, meta);
      break;
    }
    case CommandKind::couple: {
      const Schedule schedule = build_schedule(config, *model);
      cmd_couple(config, *model, schedule, dir, res, meta);
      break;
    }
    case CommandKind::bias:
      cmd_bias(config, *model, dir, res, meta);
      break;
    case CommandKind::verify:
      cmd_verify(config, *model, dir, res, meta);
      break;
    case CommandKind::tails:
      cmd_tails(config, *model, dir, res, meta);
      break;
  }

  {
    auto out = dir.open("verdicts.csv", res);
    write_verdicts(out, res.verdicts);
  }
  ordered_json verdicts = ordered_json::array();
  for (const auto& v : res.verdicts)
    verdicts.push_back({{"statistic", v.statistic},
                        {"estimate", number_json(v.estimate)},
                        {"ci_half_width", number_json(v.ci_half_width)},
                        {"reference", v.reference ? number_json(*v.reference) : json(nullptr)},
                        {"pass", v.pass},
                        {"tolerance", v.tolerance}});
  meta["verdicts"] = verdicts;
  meta["passed"] = res.passed();
  res.files.push_back("metadata.json");
  meta["files"] = res.files;
  {
    std::ofstream out(std::filesystem::path(config.output_dir) / "metadata.json");
    if (!out) throw std::runtime_error("cannot write metadata.json");
    out << meta.dump(2) << '\n';
  }
  return res;
}

}  // namespace sgldc
