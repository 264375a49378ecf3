#include "sgldc/coupling.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sgldc {
namespace {

bool blown_up(const Vector& v) { return !v.allFinite() || v.norm() > kDivergenceNorm; }

// Distance from the origin to the segment [a, b].
double segment_distance_to_origin(const Vector& a, const Vector& b) {
  const Vector ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return a.norm();
  const double t = std::clamp(-a.dot(ab) / len2, 0.0, 1.0);
  return (a + t * ab).norm();
}

}  // namespace

std::string_view to_string(CouplingMode mode) noexcept {
  return mode == CouplingMode::reflection ? "reflection" : "synchronous";
}

double CouplingConfig::threshold_for(double eta, double beta) const {
  return merge_threshold ? *merge_threshold : 1e-3 * std::sqrt(eta / beta);
}

Vector reflect(ConstVectorRef e, ConstVectorRef v) {
  if (e.size() != v.size()) throw std::invalid_argument("reflect: dimension mismatch");
  if (std::abs(e.norm() - 1.0) > 1e-12) throw std::invalid_argument("reflect: e must be a unit vector");
  return v - 2.0 * e.dot(v) * e;
}

StreamNoise::StreamNoise(std::uint64_t seed, std::uint32_t pair_id)
    : brownian_(seed, pair_id, StreamPurpose::brownian),
      bridge_(seed, pair_id, StreamPurpose::bridge),
      diagnostic_(seed, pair_id, StreamPurpose::diagnostic) {}

ReplayNoise::ReplayNoise(std::span<const Vector> gauss, std::span<const double> bridge,
                         std::span<const double> diagnostic)
    : gauss_(gauss), bridge_(bridge), diagnostic_(diagnostic) {}

void ReplayNoise::gaussian(VectorRef out) {
  if (g_ >= gauss_.size()) throw std::out_of_range("replay noise: not enough gaussian draws");
  if (gauss_[g_].size() != out.size()) throw std::invalid_argument("replay noise: wrong dimension");
  out = gauss_[g_++];
}

double ReplayNoise::bridge_uniform() { return b_ < bridge_.size() ? bridge_[b_++] : 1.0; }

double ReplayNoise::diagnostic_uniform() {
  return u_ < diagnostic_.size() ? diagnostic_[u_++] : 1.0;
}

CouplingKernel::CouplingKernel(const FieldModel& model, CouplingConfig config)
    : model_(model), config_(config) {
  if (config_.substeps < 1) throw std::invalid_argument("substeps must be at least 1");
  if (config_.merge_threshold && !(*config_.merge_threshold >= 0.0))
    throw std::invalid_argument("merge threshold must be nonnegative");
  const int d = model_.dimension();
  drift_x_.resize(d);
  drift_y_.resize(d);
  g_.resize(d);
  gy_.resize(d);
  z_prev_.resize(d);
  e_.resize(d);
  zeta_.resize(d);
}

void CouplingKernel::step(CoupledState& s, std::span<const std::size_t> batch, double eta,
                          CoupledNoise& noise, NoiseSupRecord* record) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be positive");
  if (s.x.size() != model_.dimension() || s.y.size() != model_.dimension())
    throw std::invalid_argument("coupled state has wrong dimension");
  if (record) *record = NoiseSupRecord{};
  if (s.diverged) return;

  const std::size_t m = config_.substeps;
  const double h = eta / static_cast<double>(m);
  const double scale = std::sqrt(2.0 * h / model_.beta());
  const double threshold = config_.threshold_for(eta, model_.beta());
  const bool reflecting = config_.mode == CouplingMode::reflection;
  const double start_clock = s.clock;

  model_.batch_drift_into(s.x, batch, drift_x_);
  if (!s.merged) model_.batch_drift_into(s.y, batch, drift_y_);

  // Direction at T_k for the projected supremum.
  Vector e0;
  double projection = 0.0;
  if (record && !s.merged) {
    zeta_.setZero();
    const double r0 = (s.x - s.y).norm();
    if (r0 > 0.0) e0 = (s.x - s.y) / r0;
  }

  for (std::size_t j = 0; j < m; ++j) {
    z_prev_ = s.x - s.y;
    const double r = z_prev_.norm();
    if (!s.merged && r == 0.0) {
      s.merged = true;
      s.merge_time = start_clock + static_cast<double>(j) * h;
    }
    if (s.merged) {
      noise.gaussian(g_);
      s.x += h * drift_x_ + scale * g_;
      s.y = s.x;
      continue;
    }

    noise.gaussian(g_);
    double along = 0.0;
    if (reflecting) {
      e_ = z_prev_ / r;
      along = e_.dot(g_);
      gy_ = g_ - 2.0 * along * e_;
    } else {
      gy_ = g_;
    }
    s.x += h * drift_x_ + scale * g_;
    s.y += h * drift_y_ + scale * gy_;

    if (record && reflecting && e0.size() > 0) {
      const double sqrt_h = std::sqrt(h);
      zeta_ += e_ * (along * sqrt_h);
      record->sup_norm = std::max(record->sup_norm, zeta_.norm());
      const double c = e_.dot(e0);
      const double next = projection + along * sqrt_h * c;
      const double var = h * c * c;
      const double u = noise.diagnostic_uniform();
      const double bridge_max =
          0.5 * (projection + next +
                 std::sqrt((next - projection) * (next - projection) - 2.0 * var * std::log(u)));
      record->sup_projection = std::max(record->sup_projection, bridge_max);
      projection = next;
    }

    const Vector z_new = s.x - s.y;
    const double r_new = z_new.norm();
    bool hit = r_new <= threshold || segment_distance_to_origin(z_prev_, z_new) <= threshold;
    if (!hit && reflecting) {
      const double b = z_new.dot(e_);
      if (b <= 0.0) {
        hit = true;
      } else if (config_.bridge_crossing) {
        // Difference along e: endpoints r and b, variance 4 * 2h / beta.
        const double var = 8.0 * h / model_.beta();
        hit = noise.bridge_uniform() < std::exp(-2.0 * r * b / var);
      }
    }
    if (hit) {
      s.merged = true;
      s.merge_time = start_clock + static_cast<double>(j + 1) * h;
      s.y = s.x;
    } else if (threshold == 0.0 && r_new < std::numeric_limits<double>::epsilon() *
                                               std::max(1.0, s.x.norm())) {
      s.underflow = true;
    }
  }

  s.step_index += 1;
  s.clock += eta;
  if (blown_up(s.x) || blown_up(s.y)) s.diverged = true;
}

CoupledState coupled_step(const CoupledState& state, const FieldModel& model,
                          std::span<const std::size_t> batch, double eta,
                          const CouplingConfig& config, std::span<const Vector> gauss,
                          std::span<const double> bridge_uniforms) {
  if (gauss.size() != config.substeps)
    throw std::invalid_argument("need one gaussian draw per substep");
  CouplingKernel kernel(model, config);
  ReplayNoise noise(gauss, bridge_uniforms);
  CoupledState next = state;
  kernel.step(next, batch, eta, noise);
  return next;
}

CoupledState synchronous_step(const CoupledState& state, const FieldModel& model,
                              std::span<const std::size_t> batch, double eta,
                              ConstVectorRef gauss, std::optional<double> merge_threshold) {
  CouplingConfig config;
  config.substeps = 1;
  config.mode = CouplingMode::synchronous;
  config.merge_threshold = merge_threshold;
  const Vector g = gauss;
  return coupled_step(state, model, batch, eta, config, std::span<const Vector>(&g, 1));
}

CouplingSeries run_coupled_ensemble(const FieldModel& model, const Schedule& schedule,
                                    const CouplingConfig& config, const DistanceFunction& dist,
                                    const CoupledEnsembleOptions& options, std::uint64_t seed) {
  if (options.n_pairs < 1) throw std::invalid_argument("n_pairs must be at least 1");
  if (options.record_every < 1) throw std::invalid_argument("record_every must be at least 1");
  const int d = model.dimension();
  if (options.init_x.center.size() != d || options.init_y.center.size() != d)
    throw std::invalid_argument("initial centres have wrong dimension");

  const std::size_t n = options.n_pairs;
  const std::size_t n_steps = schedule.size();
  std::vector<std::size_t> recorded;
  for (std::size_t k = 0; k <= n_steps; k += options.record_every) recorded.push_back(k);
  if (recorded.back() != n_steps) recorded.push_back(n_steps);
  const std::size_t n_rec = recorded.size();
  const std::size_t blocks = std::max<std::size_t>(1, std::min(options.blocks, n));

  CouplingSeries out;
  out.n_pairs = n;
  out.merge_times.assign(n, std::nullopt);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::size_t last_snapshot = 0;
  for (std::size_t s : options.snapshot_steps) {
    if (s > n_steps) throw std::invalid_argument("snapshot step beyond the horizon");
    out.snapshots.emplace(s, std::make_pair(Eigen::MatrixXd::Constant(n, d, nan),
                                            Eigen::MatrixXd::Constant(n, d, nan)));
    last_snapshot = std::max(last_snapshot, s);
  }
  const std::size_t sup_steps = std::min(options.noise_sup_steps, n_steps);
  if (sup_steps > 0) out.noise_sups.assign(n, std::vector<NoiseSupRecord>(sup_steps));

  struct BlockSums {
    std::vector<double> f, abs_z, merged, alive;
    std::size_t diverged = 0, underflow = 0;
  };
  std::vector<BlockSums> sums(blocks);
  for (auto& b : sums) {
    b.f.assign(n_rec, 0.0);
    b.abs_z.assign(n_rec, 0.0);
    b.merged.assign(n_rec, 0.0);
    b.alive.assign(n_rec, 0.0);
  }

  detail::parallel_for(blocks, options.threads, [&](std::size_t b) {
    CouplingKernel kernel(model, config);
    BatchSampler sampler(options.batch, model.size());
    BlockSums& acc = sums[b];
    for (std::size_t i = detail::block_begin(n, blocks, b);
         i < detail::block_begin(n, blocks, b + 1); ++i) {
      const auto id = static_cast<std::uint32_t>(i);
      StreamNoise noise(seed, id);
      CounterStream batches(seed, id, StreamPurpose::batch);
      CounterStream start_x(seed, id, StreamPurpose::initial);
      CounterStream start_y(seed, id, StreamPurpose::initial_partner);

      CoupledState s;
      s.x = options.init_x.sample(start_x);
      s.y = options.coupled_start ? s.x : options.init_y.sample(start_y);
      if (options.coupled_start || (s.x - s.y).norm() == 0.0) {
        s.merged = true;
        s.merge_time = 0.0;
      }

      std::size_t rec = 0;
      for (std::size_t k = 0; k <= n_steps; ++k) {
        if (rec < n_rec && recorded[rec] == k) {
          if (!s.diverged) {
            const double r = (s.x - s.y).norm();
            acc.f[rec] += dist(r);
            acc.abs_z[rec] += r;
            acc.merged[rec] += s.merged ? 1.0 : 0.0;
            acc.alive[rec] += 1.0;
          }
          ++rec;
        }
        if (auto it = out.snapshots.find(k); it != out.snapshots.end() && !s.diverged) {
          it->second.first.row(static_cast<Eigen::Index>(i)) = s.x.transpose();
          it->second.second.row(static_cast<Eigen::Index>(i)) = s.y.transpose();
        }
        if (k == n_steps) break;

        // A merged pair contributes zeros from here on; skip the simulation
        // unless its positions are still needed.
        if (s.merged && k >= last_snapshot && k >= sup_steps) {
          for (; rec < n_rec; ++rec) {
            acc.merged[rec] += 1.0;
            acc.alive[rec] += 1.0;
          }
          break;
        }

        NoiseSupRecord* record = k < sup_steps ? &out.noise_sups[i][k] : nullptr;
        kernel.step(s, sampler.draw(batches), schedule.eta(k), noise, record);
        if (s.diverged) {
          ++acc.diverged;
          break;
        }
      }
      if (s.underflow) ++acc.underflow;
      out.merge_times[i] = s.merge_time;
    }
  });

  for (const auto& b : sums) {
    out.n_diverged += b.diverged;
    out.n_underflow += b.underflow;
  }
  for (std::size_t r = 0; r < n_rec; ++r) {
    double f = 0, z = 0, merged = 0, alive = 0;
    std::vector<double> f_means, z_means, m_means;
    for (const auto& b : sums) {
      f += b.f[r];
      z += b.abs_z[r];
      merged += b.merged[r];
      alive += b.alive[r];
      if (b.alive[r] > 0) {
        f_means.push_back(b.f[r] / b.alive[r]);
        z_means.push_back(b.abs_z[r] / b.alive[r]);
        m_means.push_back(b.merged[r] / b.alive[r]);
      }
    }
    const double t = schedule.time(recorded[r]);
    const double inv = alive > 0 ? 1.0 / alive : nan;
    out.mean_f.push(recorded[r], t, f * inv, block_estimate(f_means).half_width);
    out.mean_abs_z.push(recorded[r], t, z * inv, block_estimate(z_means).half_width);
    out.merged_fraction.push(recorded[r], t, merged * inv, block_estimate(m_means).half_width);
  }
  out.mean_f.n_samples = out.mean_abs_z.n_samples = out.merged_fraction.n_samples = n;
  return out;
}

}  // namespace sgldc
