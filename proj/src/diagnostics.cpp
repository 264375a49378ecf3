#include "sgldc/diagnostics.hpp"

#include "parallel.hpp"
#include "sgldc/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace sgldc {

double w1_empirical_1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("w1_empirical_1d: sample sizes differ");
  if (a.empty()) throw std::invalid_argument("w1_empirical_1d: empty samples");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double total = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) total += std::abs(sa[i] - sb[i]);
  return total / static_cast<double>(sa.size());
}

Assignment solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw std::invalid_argument("assignment needs a square cost matrix");
  const std::size_t n = static_cast<std::size_t>(cost.rows());
  Assignment out;
  if (n == 0) return out;
  if (!cost.allFinite()) throw std::invalid_argument("assignment costs must be finite");

  // 1-based shortest augmenting path formulation with row/column potentials.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) -
                           u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  out.match.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) out.match[p[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i)
    out.cost += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(out.match[i]));
  return out;
}

double w1_empirical_assignment(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("w1_empirical_assignment: sample sizes differ");
  if (a.empty()) throw std::invalid_argument("w1_empirical_assignment: empty samples");
  if (a.size() > kMaxAssignmentSize)
    throw std::invalid_argument("w1_empirical_assignment: at most 256 points per sample");
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& x = a[static_cast<std::size_t>(i)];
      const auto& y = b[static_cast<std::size_t>(j)];
      if (x.size() != y.size()) throw std::invalid_argument("w1_empirical_assignment: dimension mismatch");
      cost(i, j) = (x - y).norm();
    }
  return solve_assignment(cost).cost / static_cast<double>(n);
}

double w_f_empirical(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const DistanceFunction& dist) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw std::invalid_argument("w_f_empirical: shape mismatch");
  if (x.rows() == 0) throw std::invalid_argument("w_f_empirical: no pairs");
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) total += dist((x.row(i) - y.row(i)).norm());
  return total / static_cast<double>(x.rows());
}

RateFit fit_rate(const ExperimentSeries& series, std::size_t begin, std::size_t end) {
  series.check();
  end = std::min(end, series.size());
  std::vector<double> t, logv;
  for (std::size_t k = begin; k < end; ++k) {
    if (series.values[k] > 0.0 && std::isfinite(series.values[k])) {
      t.push_back(series.times[k]);
      logv.push_back(std::log(series.values[k]));
    }
  }
  if (t.size() < 3) throw std::invalid_argument("fit_rate: fewer than 3 positive points in the window");
  const LinearFit fit = least_squares(t, logv);
  RateFit out;
  out.rate = -fit.slope;
  out.intercept = fit.intercept;
  out.r_squared = fit.r_squared;
  out.rate_ci_half_width = normal_quantile(0.975) * fit.slope_se;
  out.window_begin = begin;
  out.window_end = end;
  out.points = t.size();
  return out;
}

RateFit fit_rate(const ExperimentSeries& series) { return fit_rate(series, 0, series.size()); }

std::pair<std::size_t, std::size_t> decay_window(const ExperimentSeries& series, double floor_fraction) {
  series.check();
  if (series.size() == 0) return {0, 0};
  const double floor = floor_fraction * series.values.front();
  std::size_t end = 0;
  for (std::size_t k = 0; k < series.size(); ++k)
    if (series.values[k] > 0.0 && series.values[k] >= floor) end = k + 1;
  return {0, end};
}

TailProfile tail_profile(std::span<const double> samples, std::span<const double> thresholds,
                         double eta, std::size_t min_exceedances) {
  if (samples.empty()) throw std::invalid_argument("tail_profile: no samples");
  if (!(eta > 0.0)) throw std::invalid_argument("tail_profile: eta must be positive");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());

  TailProfile out;
  std::vector<double> a2, y;
  for (double a : thresholds) {
    TailPoint pt;
    pt.threshold = a;
    pt.exceedances = static_cast<std::size_t>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), a));
    pt.neg_log_survival = pt.exceedances > 0 ? -std::log(static_cast<double>(pt.exceedances) / n)
                                             : std::numeric_limits<double>::infinity();
    pt.reliable = pt.exceedances >= std::max<std::size_t>(min_exceedances, 1);
    if (pt.reliable) {
      a2.push_back(a * a);
      y.push_back(pt.neg_log_survival);
    }
    out.points.push_back(pt);
  }
  out.fitted_points = a2.size();
  if (a2.size() >= 2) {
    const LinearFit fit = least_squares(a2, y);
    out.slope = fit.slope;
    out.intercept = fit.intercept;
    out.c_hat = fit.slope * eta;
  }
  return out;
}

ExperimentSeries moment_series(const std::map<std::size_t, Eigen::MatrixXd>& snapshots,
                               const Schedule& schedule, double p, std::size_t blocks) {
  if (!(p > 0.0)) throw std::invalid_argument("moment order must be positive");
  ExperimentSeries out;
  for (const auto& [step, pts] : snapshots) {
    const std::size_t n = static_cast<std::size_t>(pts.rows());
    const std::size_t nb = std::max<std::size_t>(1, std::min(blocks, n));
    std::vector<double> means;
    double total = 0.0, count = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      double s = 0.0, c = 0.0;
      for (std::size_t i = detail::block_begin(n, nb, b); i < detail::block_begin(n, nb, b + 1); ++i) {
        const auto row = pts.row(static_cast<Eigen::Index>(i));
        if (!row.allFinite()) continue;
        s += std::pow(row.norm(), p);
        c += 1.0;
      }
      if (c > 0) means.push_back(s / c);
      total += s;
      count += c;
    }
    out.push(step, schedule.time(step), count > 0 ? total / count : std::numeric_limits<double>::quiet_NaN(),
             block_estimate(means).half_width);
    out.n_samples = std::max(out.n_samples, static_cast<std::size_t>(count));
  }
  return out;
}

double gaussian_sgld_stationary_variance(double eta, double beta, double stiffness, double batch_variance) {
  const double a = 1.0 - stiffness * eta;
  const double denom = 1.0 - a * a;
  if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
  return (2.0 * eta / beta + eta * eta * batch_variance) / denom;
}

double gaussian_w1_oracle(double eta, double beta, double stiffness, double batch_variance) {
  const double s_eta = std::sqrt(gaussian_sgld_stationary_variance(eta, beta, stiffness, batch_variance));
  const double s = std::sqrt(1.0 / (stiffness * beta));
  return std::sqrt(2.0 / std::numbers::pi) * std::abs(s_eta - s);
}

namespace {

BiasPoint run_bias_eta(const FieldModel& model, const GaussianReference& ref, const BiasOptions& opt,
                       double eta, std::uint32_t eta_index, std::uint64_t seed) {
  const int d = model.dimension();
  const double beta = model.beta();
  const double k = ref.stiffness;
  const auto burn = static_cast<std::size_t>(std::ceil(opt.burn_in_time / eta));
  const auto spacing = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(opt.harvest_spacing / eta)));
  const auto harvests = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(opt.harvest_time / opt.harvest_spacing)));
  const std::size_t n = opt.n_chains;
  const std::size_t nb = std::max<std::size_t>(1, std::min(opt.blocks, n));

  const double decay = std::exp(-k * eta);
  const double ref_scale = std::sqrt(-std::expm1(-2.0 * k * eta) / (k * beta));
  const double noise_scale = std::sqrt(2.0 * eta / beta);
  const double stat_sd = 1.0 / std::sqrt(k * beta);

  // Harvested coordinates, laid out [chain][harvest][coordinate].
  const std::size_t per_chain = harvests * static_cast<std::size_t>(d);
  std::vector<double> xs(n * per_chain), rs(n * per_chain);
  std::vector<std::vector<double>> sq_norm(nb, std::vector<double>(harvests, 0.0));
  std::vector<std::size_t> diverged(nb, 0);

  detail::parallel_for(nb, opt.threads, [&](std::size_t b) {
    BatchSampler sampler(opt.batch, model.size());
    Vector x(d), r(d), drift(d), g(d);
    for (std::size_t i = detail::block_begin(n, nb, b); i < detail::block_begin(n, nb, b + 1); ++i) {
      // Separate stream ids per eta keep the runs independent across etas.
      const auto id = static_cast<std::uint32_t>(i + static_cast<std::size_t>(eta_index) * n);
      CounterStream noise(seed, id, StreamPurpose::brownian);
      CounterStream batches(seed, id, StreamPurpose::batch);
      CounterStream start(seed, id, StreamPurpose::initial);
      start.fill_normal(g);
      r = ref.center + stat_sd * g;
      x = r;
      const std::size_t total = burn + harvests * spacing;
      std::size_t h = 0;
      bool alive = true;
      for (std::size_t step = 1; step <= total; ++step) {
        noise.fill_normal(g);
        if (alive) {
          model.batch_drift_into(x, sampler.draw(batches), drift);
          x += eta * drift + noise_scale * g;
          if (!x.allFinite() || x.norm() > kDivergenceNorm) {
            alive = false;
            ++diverged[b];
          }
        }
        r = ref.center + decay * (r - ref.center) + ref_scale * g;
        if (step > burn && (step - burn) % spacing == 0) {
          double* px = xs.data() + i * per_chain + h * static_cast<std::size_t>(d);
          double* pr = rs.data() + i * per_chain + h * static_cast<std::size_t>(d);
          for (int c = 0; c < d; ++c) {
            px[c] = alive ? x[c] : std::numeric_limits<double>::quiet_NaN();
            pr[c] = r[c];
          }
          sq_norm[b][h] += alive ? (x - ref.center).squaredNorm() : 0.0;
          ++h;
        }
      }
    }
  });

  BiasPoint pt;
  pt.eta = eta;
  std::size_t n_div = 0;
  for (auto v : diverged) n_div += v;
  if (n_div > 0) {
    pt.warnings.push_back(std::to_string(n_div) + " chains diverged");
    pt.w1 = std::numeric_limits<double>::infinity();
    pt.ci_half_width = std::numeric_limits<double>::infinity();
    return pt;
  }

  auto w1_over = [&](std::size_t lo, std::size_t hi) {
    double acc = 0.0;
    std::vector<double> a, c;
    for (int coord = 0; coord < d; ++coord) {
      a.clear();
      c.clear();
      for (std::size_t i = lo; i < hi; ++i)
        for (std::size_t h = 0; h < harvests; ++h) {
          const std::size_t at = i * per_chain + h * static_cast<std::size_t>(d) + static_cast<std::size_t>(coord);
          a.push_back(xs[at]);
          c.push_back(rs[at]);
        }
      acc += w1_empirical_1d(a, c);
    }
    return acc / static_cast<double>(d);
  };

  std::vector<double> block_w1;
  for (std::size_t b = 0; b < nb; ++b)
    block_w1.push_back(w1_over(detail::block_begin(n, nb, b), detail::block_begin(n, nb, b + 1)));
  pt.w1 = w1_over(0, n);
  pt.ci_half_width = block_estimate(block_w1).half_width;
  pt.samples = n * harvests;

  if (opt.burn_in_time * k < 5.0)
    pt.warnings.push_back("burn-in shorter than five relaxation times");
  if (harvests >= 4) {
    std::vector<double> hx, hy;
    for (std::size_t h = harvests / 2; h < harvests; ++h) {
      double s = 0.0;
      for (std::size_t b = 0; b < nb; ++b) s += sq_norm[b][h];
      hx.push_back(static_cast<double>(h));
      hy.push_back(s / static_cast<double>(n));
    }
    if (hx.size() >= 3) {
      const LinearFit fit = least_squares(hx, hy);
      if (fit.slope_se > 0.0 && std::abs(fit.slope / fit.slope_se) > 3.0)
        pt.warnings.push_back("second moment still trending in the harvest window");
    }
  }
  return pt;
}

}  // namespace

BiasResult bias_experiment(const FieldModel& model, const GaussianReference& reference,
                           const BiasOptions& options, std::uint64_t seed) {
  if (options.etas.empty()) throw std::invalid_argument("bias experiment needs at least one eta");
  if (reference.center.size() != model.dimension())
    throw std::invalid_argument("reference centre has wrong dimension");
  if (!(reference.stiffness > 0.0)) throw std::invalid_argument("reference stiffness must be positive");
  if (options.n_chains < 2) throw std::invalid_argument("bias experiment needs at least two chains");
  if (!(options.harvest_spacing > 0.0) || !(options.harvest_time > 0.0) || !(options.burn_in_time >= 0.0))
    throw std::invalid_argument("bias experiment times must be positive");

  std::vector<double> etas = options.etas;
  for (double e : etas)
    if (!(e > 0.0)) throw std::invalid_argument("step sizes must be positive");
  std::sort(etas.begin(), etas.end(), std::greater<>());

  BiasResult result;
  for (std::size_t i = 0; i < etas.size(); ++i)
    result.points.push_back(run_bias_eta(model, reference, options, etas[i], static_cast<std::uint32_t>(i), seed));

  std::vector<double> lx, ly;
  for (const auto& p : result.points)
    if (p.w1 > 0.0 && std::isfinite(p.w1)) {
      lx.push_back(std::log(p.eta));
      ly.push_back(std::log(p.w1));
    }
  if (lx.size() >= 2) result.loglog = least_squares(lx, ly);
  for (std::size_t i = 0; i + 1 < result.points.size(); ++i)
    result.ratios.push_back(result.points[i].w1 / result.points[i + 1].w1);
  return result;
}

}  // namespace sgldc
