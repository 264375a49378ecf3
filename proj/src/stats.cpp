#include "sgldc/stats.hpp"

#include "sgldc/random.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace sgldc {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<>(0.0, 1.0), p);
}

BlockEstimate block_estimate(std::span<const double> values, double confidence) {
  BlockEstimate out;
  out.blocks = values.size();
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  const double z = normal_quantile(0.5 + 0.5 * confidence);
  out.half_width = z * sd / std::sqrt(static_cast<double>(values.size()));
  return out;
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("least_squares: size mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("least_squares: need at least two points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("least_squares: x values are all equal");
  LinearFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    sse += r * r;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  fit.slope_se = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
  return fit;
}

TrendTest positive_trend_test(std::span<const double> x, std::span<const double> y, double alpha) {
  if (x.size() < 3) throw std::invalid_argument("trend test needs at least three points");
  const LinearFit fit = least_squares(x, y);
  TrendTest out;
  out.slope = fit.slope;
  if (fit.slope_se == 0.0) {
    out.t_statistic = fit.slope > 0 ? INFINITY : (fit.slope < 0 ? -INFINITY : 0.0);
    out.p_value = fit.slope > 0 ? 0.0 : 1.0;
  } else {
    out.t_statistic = fit.slope / fit.slope_se;
    const boost::math::students_t dist(static_cast<double>(fit.n - 2));
    out.p_value = boost::math::cdf(boost::math::complement(dist, out.t_statistic));
  }
  out.positive_trend = out.p_value < alpha;
  return out;
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_test: no samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double sqrt_n = std::sqrt(n);
  // Stephens' small-sample correction.
  return {d, kolmogorov_survival((sqrt_n + 0.12 + 0.11 / sqrt_n) * d)};
}

namespace {

// Column-major d x n point set for tight distance loops.
struct PointSet {
  std::size_t dim = 0;
  std::vector<double> coords;

  const double* point(std::size_t i) const { return coords.data() + i * dim; }
  std::size_t size() const { return dim ? coords.size() / dim : 0; }
};

double distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t c = 0; c < dim; ++c) {
    const double t = a[c] - b[c];
    s += t * t;
  }
  return std::sqrt(s);
}

// Sum of |p_i - p_j| over i < j, for i, j drawn from `idx`.
double within_sum(const PointSet& pts, std::span<const std::size_t> idx) {
  // Gather so the inner loop is contiguous.
  std::vector<double> g(idx.size() * pts.dim);
  for (std::size_t k = 0; k < idx.size(); ++k)
    std::copy_n(pts.point(idx[k]), pts.dim, g.begin() + static_cast<std::ptrdiff_t>(k * pts.dim));
  double total = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const double* pi = g.data() + i * pts.dim;
    double row = 0.0;
    for (std::size_t j = i + 1; j < idx.size(); ++j) row += distance(pi, g.data() + j * pts.dim, pts.dim);
    total += row;
  }
  return total;
}

PointSet pool(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("energy distance: dimension mismatch");
  if (a.rows() < 2 || b.rows() < 2) throw std::invalid_argument("energy distance: need >= 2 points per sample");
  PointSet p;
  p.dim = static_cast<std::size_t>(a.cols());
  p.coords.reserve(static_cast<std::size_t>(a.size() + b.size()));
  for (const auto* m : {&a, &b})
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index c = 0; c < m->cols(); ++c) p.coords.push_back((*m)(i, c));
  return p;
}

double energy_from_sums(double total, double saa, double sbb, double n, double m) {
  const double sab = total - saa - sbb;
  return 2.0 * sab / (n * m) - 2.0 * saa / (n * n) - 2.0 * sbb / (m * m);
}

}  // namespace

double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const PointSet p = pool(a, b);
  const std::size_t n = static_cast<std::size_t>(a.rows());
  std::vector<std::size_t> all(p.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double total = within_sum(p, all);
  const std::span<const std::size_t> ia(all.data(), n), ib(all.data() + n, all.size() - n);
  return energy_from_sums(total, within_sum(p, ia), within_sum(p, ib), static_cast<double>(n),
                          static_cast<double>(all.size() - n));
}

EnergyTest energy_test(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       std::size_t permutations, std::uint64_t seed) {
  const PointSet p = pool(a, b);
  const std::size_t n = static_cast<std::size_t>(a.rows());
  const std::size_t total_n = p.size();
  const double dn = static_cast<double>(n), dm = static_cast<double>(total_n - n);
  std::vector<std::size_t> labels(total_n);
  std::iota(labels.begin(), labels.end(), std::size_t{0});
  const double total = within_sum(p, labels);

  auto statistic = [&](const std::vector<std::size_t>& order) {
    const std::span<const std::size_t> ia(order.data(), n), ib(order.data() + n, total_n - n);
    return energy_from_sums(total, within_sum(p, ia), within_sum(p, ib), dn, dm);
  };

  EnergyTest out;
  out.statistic = statistic(labels);
  out.permutations = permutations;
  CounterStream stream(seed, 0, StreamPurpose::diagnostic);
  std::size_t at_least = 0;
  for (std::size_t r = 0; r < permutations; ++r) {
    for (std::size_t i = total_n - 1; i > 0; --i) std::swap(labels[i], labels[stream.uniform_index(i + 1)]);
    if (statistic(labels) >= out.statistic) ++at_least;
  }
  out.p_value = static_cast<double>(at_least + 1) / static_cast<double>(permutations + 1);
  return out;
}

EnergyTest paired_energy_test(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              std::size_t permutations, std::uint64_t seed) {
  if (a.rows() != b.rows()) throw std::invalid_argument("paired energy test: samples must pair up");
  const PointSet p = pool(a, b);
  const std::size_t n = static_cast<std::size_t>(a.rows());
  const double dn = static_cast<double>(n);
  std::vector<std::size_t> labels(2 * n);
  std::iota(labels.begin(), labels.end(), std::size_t{0});
  const double total = within_sum(p, labels);

  auto statistic = [&](const std::vector<std::size_t>& order) {
    const std::span<const std::size_t> ia(order.data(), n), ib(order.data() + n, n);
    return energy_from_sums(total, within_sum(p, ia), within_sum(p, ib), dn, dn);
  };

  EnergyTest out;
  out.statistic = statistic(labels);
  out.permutations = permutations;
  CounterStream stream(seed, 0, StreamPurpose::diagnostic);
  std::size_t at_least = 0;
  for (std::size_t r = 0; r < permutations; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const bool swap = stream.uniform() < 0.5;
      labels[i] = swap ? n + i : i;
      labels[n + i] = swap ? i : n + i;
    }
    if (statistic(labels) >= out.statistic) ++at_least;
  }
  out.p_value = static_cast<double>(at_least + 1) / static_cast<double>(permutations + 1);
  return out;
}

}  // namespace sgldc
