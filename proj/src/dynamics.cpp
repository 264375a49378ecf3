#include "sgldc/dynamics.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sgldc {

Schedule::Schedule(std::vector<double> steps) : steps_(std::move(steps)) {
  times_.resize(steps_.size() + 1);
  times_[0] = 0.0;
  for (std::size_t k = 0; k < steps_.size(); ++k) {
    if (!(steps_[k] > 0.0) || !std::isfinite(steps_[k]))
      throw std::invalid_argument("step sizes must be positive and finite");
    times_[k + 1] = times_[k] + steps_[k];
    delta0_ = std::max(delta0_, steps_[k]);
  }
}

Schedule Schedule::constant(double eta, std::size_t n_steps) {
  return Schedule(std::vector<double>(n_steps, eta));
}

Schedule Schedule::from_steps(std::vector<double> step_sizes) {
  return Schedule(std::move(step_sizes));
}

namespace {

void check_step_inputs(const ChainState& state, const FieldModel& model, double eta,
                       Eigen::Index gauss_size) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be positive");
  if (state.position.size() != model.dimension())
    throw std::invalid_argument("position has wrong dimension");
  if (gauss_size != model.dimension())
    throw std::invalid_argument("gaussian draw has wrong dimension");
}

bool blown_up(const Vector& x) { return !x.allFinite() || x.norm() > kDivergenceNorm; }

void mark_divergence(ChainState& s) {
  if (!s.diverged && blown_up(s.position)) {
    s.diverged = true;
    s.diverged_at = s.step_index;
  }
}

}  // namespace

ChainState field_step(const ChainState& state, const FieldModel& model,
                      std::span<const std::size_t> batch, double eta, ConstVectorRef gauss) {
  check_step_inputs(state, model, eta, gauss.size());
  ChainState next = state;
  if (state.diverged) return next;
  Vector drift(model.dimension());
  model.batch_drift_into(state.position, batch, drift);
  next.position += eta * drift + std::sqrt(2.0 * eta / model.beta()) * gauss;
  mark_divergence(next);
  next.step_index += 1;
  next.clock += eta;
  return next;
}

ChainState sgld_step(const ChainState& state, const TargetModel& model,
                     std::span<const std::size_t> batch, double eta, ConstVectorRef gauss) {
  return field_step(state, model, batch, eta, gauss);
}

ChainState em_drift_step(const ChainState& state, const DriftModel& model,
                         std::span<const std::size_t> batch, double eta, ConstVectorRef gauss) {
  return field_step(state, model, batch, eta, gauss);
}

std::vector<Vector> interpolate_substeps(const ChainState& state, const FieldModel& model,
                                         std::span<const std::size_t> batch, double eta,
                                         std::span<const Vector> gauss) {
  if (gauss.empty()) throw std::invalid_argument("need at least one substep");
  check_step_inputs(state, model, eta, gauss.front().size());
  const double h = eta / static_cast<double>(gauss.size());
  const double scale = std::sqrt(2.0 * h / model.beta());
  Vector drift(model.dimension());
  model.batch_drift_into(state.position, batch, drift);

  std::vector<Vector> path;
  path.reserve(gauss.size());
  Vector x = state.position;
  for (const auto& g : gauss) {
    if (g.size() != model.dimension()) throw std::invalid_argument("gaussian draw has wrong dimension");
    x += h * drift + scale * g;
    path.push_back(x);
  }
  return path;
}

Vector InitialDistribution::sample(CounterStream& stream) const {
  Vector x = center;
  if (spread > 0.0) {
    Vector g(center.size());
    stream.fill_normal(g);
    x += spread * g;
  }
  return x;
}

EnsembleResult simulate_ensemble(const FieldModel& model, const Schedule& schedule,
                                 const EnsembleOptions& options, const InitialDistribution& init,
                                 std::uint64_t seed) {
  if (options.n_chains < 1) throw std::invalid_argument("n_chains must be at least 1");
  if (options.record_every < 1) throw std::invalid_argument("record_every must be at least 1");
  if (init.center.size() != model.dimension())
    throw std::invalid_argument("initial centre has wrong dimension");
  for (double p : options.moment_orders)
    if (!(p > 0.0)) throw std::invalid_argument("moment orders must be positive");

  const std::size_t n = options.n_chains;
  const std::size_t n_steps = schedule.size();
  const int d = model.dimension();

  std::vector<std::size_t> recorded;
  for (std::size_t k = 0; k <= n_steps; k += options.record_every) recorded.push_back(k);
  if (recorded.back() != n_steps) recorded.push_back(n_steps);
  const std::size_t n_rec = recorded.size();
  const std::size_t n_orders = options.moment_orders.size();
  const std::size_t blocks = std::max<std::size_t>(1, std::min(options.blocks, n));

  std::vector<std::size_t> snap_steps = options.snapshot_steps;
  std::sort(snap_steps.begin(), snap_steps.end());
  snap_steps.erase(std::unique(snap_steps.begin(), snap_steps.end()), snap_steps.end());
  for (std::size_t s : snap_steps)
    if (s > n_steps) throw std::invalid_argument("snapshot step beyond the horizon");

  EnsembleResult result;
  result.n_chains = n;
  result.divergence_steps.assign(n, std::nullopt);
  for (std::size_t s : snap_steps)
    result.snapshots.emplace(s, Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), d,
                                                          std::numeric_limits<double>::quiet_NaN()));

  // [block][order][record] sums; counts of live chains per [block][record].
  std::vector<std::vector<double>> sums(blocks, std::vector<double>(n_orders * n_rec, 0.0));
  std::vector<std::vector<double>> sup_sums(blocks, std::vector<double>(n_orders * n_rec, 0.0));
  std::vector<std::vector<double>> counts(blocks, std::vector<double>(n_rec, 0.0));

  detail::parallel_for(blocks, options.threads, [&](std::size_t b) {
    BatchSampler sampler(options.batch, model.size());
    Vector x(d), drift(d), g(d);
    for (std::size_t i = detail::block_begin(n, blocks, b);
         i < detail::block_begin(n, blocks, b + 1); ++i) {
      const auto id = static_cast<std::uint32_t>(i);
      CounterStream noise(seed, id, StreamPurpose::brownian);
      CounterStream batches(seed, id, StreamPurpose::batch);
      CounterStream start(seed, id, StreamPurpose::initial);
      x = init.sample(start);
      double max_norm = 0.0;
      std::size_t rec = 0;
      auto snap = result.snapshots.begin();
      bool alive = true;

      for (std::size_t k = 0; k <= n_steps && alive; ++k) {
        if (rec < n_rec && recorded[rec] == k) {
          const double r = x.norm();
          max_norm = std::max(max_norm, r);
          for (std::size_t o = 0; o < n_orders; ++o) {
            sums[b][o * n_rec + rec] += std::pow(r, options.moment_orders[o]);
            sup_sums[b][o * n_rec + rec] += std::pow(max_norm, options.moment_orders[o]);
          }
          counts[b][rec] += 1.0;
          ++rec;
        }
        while (snap != result.snapshots.end() && snap->first < k) ++snap;
        if (snap != result.snapshots.end() && snap->first == k)
          snap->second.row(static_cast<Eigen::Index>(i)) = x.transpose();
        if (k == n_steps) break;

        const double eta = schedule.eta(k);
        model.batch_drift_into(x, sampler.draw(batches), drift);
        noise.fill_normal(g);
        x += eta * drift + std::sqrt(2.0 * eta / model.beta()) * g;
        if (blown_up(x)) {
          result.divergence_steps[i] = k;
          alive = false;
        }
      }
    }
  });

  for (const auto& s : result.divergence_steps)
    if (s) ++result.n_diverged;

  for (std::size_t o = 0; o < n_orders; ++o) {
    ExperimentSeries series, sup_series;
    for (std::size_t r = 0; r < n_rec; ++r) {
      double total = 0.0, sup_total = 0.0, count = 0.0;
      std::vector<double> means, sup_means;
      for (std::size_t b = 0; b < blocks; ++b) {
        total += sums[b][o * n_rec + r];
        sup_total += sup_sums[b][o * n_rec + r];
        count += counts[b][r];
        if (counts[b][r] > 0) {
          means.push_back(sums[b][o * n_rec + r] / counts[b][r]);
          sup_means.push_back(sup_sums[b][o * n_rec + r] / counts[b][r]);
        }
      }
      const double mean = count > 0 ? total / count : std::numeric_limits<double>::quiet_NaN();
      const double sup_mean = count > 0 ? sup_total / count : std::numeric_limits<double>::quiet_NaN();
      const auto hw = block_estimate(means).half_width;
      const auto sup_hw = block_estimate(sup_means).half_width;
      series.push(recorded[r], schedule.time(recorded[r]), mean, hw);
      sup_series.push(recorded[r], schedule.time(recorded[r]), sup_mean, sup_hw);
    }
    series.n_samples = sup_series.n_samples = n;
    result.moments.push_back(std::move(series));
    result.running_sup_moments.push_back(std::move(sup_series));
  }
  return result;
}

}  // namespace sgldc
