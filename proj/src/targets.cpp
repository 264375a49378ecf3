#include "sgldc/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace sgldc {

void validate(const AssumptionParams& p) {
  if (!std::isfinite(p.R0) || !std::isfinite(p.kappa0) || !std::isfinite(p.K) ||
      !std::isfinite(p.b0))
    throw std::invalid_argument("assumption parameters must be finite");
  if (p.R0 < 0.0) throw std::invalid_argument("R0 must be nonnegative");
  if (p.kappa0 <= 0.0) throw std::invalid_argument("kappa0 must be positive");
  if (p.K <= 0.0) throw std::invalid_argument("K must be positive");
  if (p.kappa0 > p.K) throw std::invalid_argument("kappa0 cannot exceed K");
  if (p.b0 < 0.0) throw std::invalid_argument("b0 must be nonnegative");
}

FieldModel::FieldModel(FieldKind kind, int dimension, double beta,
                       std::vector<ComponentField> components, AssumptionParams params,
                       std::string name)
    : kind_(kind),
      dimension_(dimension),
      beta_(beta),
      components_(std::move(components)),
      params_(params),
      name_(std::move(name)) {
  if (dimension_ < 1) throw std::invalid_argument("dimension must be at least 1");
  if (!(beta_ > 0.0) || !std::isfinite(beta_))
    throw std::invalid_argument("beta must be positive and finite");
  if (components_.empty()) throw std::invalid_argument("model needs at least one component");
  for (const auto& c : components_)
    if (!c) throw std::invalid_argument("empty component callable");
}

FieldModel FieldModel::with_params(AssumptionParams params) const {
  FieldModel copy = *this;
  copy.params_ = params;
  return copy;
}

void FieldModel::component_into(std::size_t index, ConstVectorRef x, VectorRef out) const {
  components_[index](x, out);
  if (!out.allFinite())
    throw EvaluationError(index, "component " + std::to_string(index) +
                                     " returned a non-finite value");
}

void FieldModel::batch_field_into(ConstVectorRef x, std::span<const std::size_t> batch,
                                  VectorRef out) const {
  if (batch.empty()) throw std::invalid_argument("batch must be nonempty");
  if (x.size() != dimension_) throw std::invalid_argument("position has wrong dimension");
  for (const std::size_t i : batch)
    if (i >= components_.size())
      throw std::out_of_range("batch index " + std::to_string(i) + " out of range");

  if (batch.size() == 1) {
    component_into(batch[0], x, out);
    return;
  }
  Vector term(dimension_);
  out.setZero();
  for (const std::size_t i : batch) {
    component_into(i, x, term);
    out += term;
  }
  out /= static_cast<double>(batch.size());
}

void FieldModel::full_field_into(ConstVectorRef x, VectorRef out) const {
  if (x.size() != dimension_) throw std::invalid_argument("position has wrong dimension");
  if (components_.size() == 1) {
    component_into(0, x, out);
    return;
  }
  Vector term(dimension_);
  out.setZero();
  for (std::size_t i = 0; i < components_.size(); ++i) {
    component_into(i, x, term);
    out += term;
  }
  out /= static_cast<double>(components_.size());
}

void FieldModel::batch_drift_into(ConstVectorRef x, std::span<const std::size_t> batch,
                                  VectorRef out) const {
  batch_field_into(x, batch, out);
  if (kind_ == FieldKind::gradient) out = -out;
}

void FieldModel::full_drift_into(ConstVectorRef x, VectorRef out) const {
  full_field_into(x, out);
  if (kind_ == FieldKind::gradient) out = -out;
}

TargetModel::TargetModel(int dimension, double beta, std::vector<ComponentField> gradients,
                         AssumptionParams params, std::string name)
    : FieldModel(FieldKind::gradient, dimension, beta, std::move(gradients), params,
                 std::move(name)) {}

DriftModel::DriftModel(int dimension, double beta, std::vector<ComponentField> drifts,
                       AssumptionParams params, std::string name)
    : FieldModel(FieldKind::drift, dimension, beta, std::move(drifts), params, std::move(name)) {}

Vector grad_full(const TargetModel& model, ConstVectorRef x) {
  Vector out(model.dimension());
  model.full_field_into(x, out);
  return out;
}

Vector grad_batch(const TargetModel& model, ConstVectorRef x, std::span<const std::size_t> batch) {
  Vector out(model.dimension());
  model.batch_field_into(x, batch, out);
  return out;
}

Vector drift_full(const DriftModel& model, ConstVectorRef x) {
  Vector out(model.dimension());
  model.full_field_into(x, out);
  return out;
}

Vector drift_batch(const DriftModel& model, ConstVectorRef x, std::span<const std::size_t> batch) {
  Vector out(model.dimension());
  model.batch_field_into(x, batch, out);
  return out;
}

BatchSampler::BatchSampler(BatchSpec spec, std::size_t population)
    : spec_(spec), population_(population) {
  if (population_ == 0) throw std::invalid_argument("population must be positive");
  if (spec_.batch_size < 1 || spec_.batch_size > population_)
    throw std::invalid_argument("batch size must lie in [1, N]");
  full_ = !spec_.replacement && spec_.batch_size == population_;
  pool_.resize(population_);
  std::iota(pool_.begin(), pool_.end(), std::size_t{0});
  batch_.resize(spec_.batch_size);
  if (full_) std::copy(pool_.begin(), pool_.end(), batch_.begin());
}

std::span<const std::size_t> BatchSampler::draw(CounterStream& stream) {
  if (full_) return batch_;
  if (spec_.replacement) {
    for (auto& b : batch_) b = stream.uniform_index(population_);
    return batch_;
  }
  // Partial Fisher-Yates; the pool stays a permutation between draws.
  for (std::size_t i = 0; i < spec_.batch_size; ++i) {
    const std::size_t j = i + stream.uniform_index(population_ - i);
    std::swap(pool_[i], pool_[j]);
    batch_[i] = pool_[i];
  }
  return batch_;
}

std::vector<std::vector<std::size_t>> enumerate_batches(std::size_t population,
                                                        std::size_t batch_size) {
  if (batch_size < 1 || batch_size > population)
    throw std::invalid_argument("batch size must lie in [1, N]");
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> current(batch_size);
  std::iota(current.begin(), current.end(), std::size_t{0});
  while (true) {
    out.push_back(current);
    std::size_t pos = batch_size;
    while (pos > 0 && current[pos - 1] == population - batch_size + pos - 1) --pos;
    if (pos == 0) break;
    ++current[pos - 1];
    for (std::size_t k = pos; k < batch_size; ++k) current[k] = current[k - 1] + 1;
  }
  return out;
}

TargetModel make_gaussian_target(int dimension, double beta) {
  return TargetModel(
      dimension, beta, {[](ConstVectorRef x, VectorRef out) { out = x; }},
      AssumptionParams{0.0, 1.0, 1.0, 0.0}, "gaussian");
}

TargetModel make_quadratic_target(int dimension, double beta, double stiffness) {
  if (!(stiffness > 0.0)) throw std::invalid_argument("stiffness must be positive");
  return TargetModel(
      dimension, beta,
      {[stiffness](ConstVectorRef x, VectorRef out) { out = stiffness * x; }},
      AssumptionParams{0.0, stiffness, stiffness, 0.0}, "quadratic");
}

TargetModel make_bump_target(int dimension, double beta, double a) {
  if (!(a >= 0.0) || !std::isfinite(a)) throw std::invalid_argument("bump height must be >= 0");

  // Hessian eigenvalues: radial 1 + a e^{-u/2}(u - 1), tangential
  // 1 - a e^{-u/2}, with u = |x|^2. The radial one peaks at u = 3.
  const double K = std::max({1.0 + 2.0 * a * std::exp(-1.5), std::abs(1.0 - a), 1.0});
  AssumptionParams params{0.0, 1.0, K, 0.0};
  if (dimension == 1) {
    if (a > 0.0) params.R0 = 1.0;
  } else if (a <= 0.5) {
    params.kappa0 = 1.0 - a;
  } else {
    // Tangential curvature reaches 1/2 at u = 2 log(2a); radial is larger there.
    params.kappa0 = 0.5;
    params.R0 = std::sqrt(2.0 * std::log(2.0 * a));
  }

  return TargetModel(
      dimension, beta,
      {[a](ConstVectorRef x, VectorRef out) {
        out = x * (1.0 - a * std::exp(-0.5 * x.squaredNorm()));
      }},
      params, "bump");
}

TargetModel make_shifted_gaussian_target(int dimension, double beta,
                                         const std::vector<Vector>& offsets) {
  if (offsets.empty()) throw std::invalid_argument("need at least one offset");
  std::vector<ComponentField> components;
  double b0 = 0.0;
  for (const auto& m : offsets) {
    if (m.size() != dimension) throw std::invalid_argument("offset has wrong dimension");
    b0 = std::max(b0, m.norm());
    components.emplace_back([m](ConstVectorRef x, VectorRef out) { out = x - m; });
  }
  return TargetModel(dimension, beta, std::move(components), AssumptionParams{0.0, 1.0, 1.0, b0},
                     "shifted_gaussian");
}

DriftModel make_rotational_drift(int dimension, double beta, double gamma) {
  if (dimension % 2 != 0) throw std::invalid_argument("rotational drift needs an even dimension");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be >= 0");
  return DriftModel(
      dimension, beta,
      {[gamma](ConstVectorRef x, VectorRef out) {
        for (Eigen::Index i = 0; i + 1 < x.size(); i += 2) {
          out[i] = -x[i] - gamma * x[i + 1];
          out[i + 1] = -x[i + 1] + gamma * x[i];
        }
      }},
      AssumptionParams{0.0, 1.0, std::sqrt(1.0 + gamma * gamma), 0.0}, "rotational");
}

DriftModel make_free_diffusion(int dimension, double beta) {
  return DriftModel(
      dimension, beta, {[](ConstVectorRef, VectorRef out) { out.setZero(); }},
      AssumptionParams{0.0, 0.0, 0.0, 0.0}, "free");
}

namespace {

Vector sample_in_ball(CounterStream& stream, int dimension, double radius) {
  Vector v(dimension);
  do {
    stream.fill_normal(v);
  } while (v.norm() == 0.0);
  const double r = radius * std::pow(stream.uniform(), 1.0 / dimension);
  return v.normalized() * r;
}

Vector sample_direction(CounterStream& stream, int dimension) {
  Vector v(dimension);
  do {
    stream.fill_normal(v);
  } while (v.norm() == 0.0);
  return v.normalized();
}

// v . H(x) . v by a Richardson-extrapolated central difference of the gradient.
double directional_curvature(const FieldModel& model, const Vector& x, const Vector& v) {
  Vector plus(model.dimension()), minus(model.dimension());
  auto central = [&](double h) {
    model.full_field_into(x + h * v, plus);
    model.full_field_into(x - h * v, minus);
    return v.dot(plus - minus) / (2.0 * h);
  };
  constexpr double h = 1e-3;
  return (4.0 * central(h / 2.0) - central(h)) / 3.0;
}

}  // namespace

AssumptionReport verify_assumptions(const FieldModel& model, double region_radius,
                                    std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0) throw std::invalid_argument("n_samples must be positive");
  const AssumptionParams& p = model.params();
  if (!(region_radius > p.R0)) throw std::invalid_argument("region radius must exceed R0");

  const int d = model.dimension();
  CounterStream stream(seed, 0, StreamPurpose::initial);
  AssumptionReport report;
  report.min_convexity = std::numeric_limits<double>::infinity();
  report.worst_convexity_point = Vector::Zero(d);

  Vector fx(d), fy(d);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Vector x = sample_in_ball(stream, d, region_radius);
    const Vector y = sample_in_ball(stream, d, region_radius);

    if (model.kind() == FieldKind::gradient) {
      if (x.norm() >= p.R0) {
        const double curvature = directional_curvature(model, x, sample_direction(stream, d));
        ++report.convexity_samples;
        if (curvature < report.min_convexity) {
          report.min_convexity = curvature;
          report.worst_convexity_point = x;
        }
      }
    } else {
      const Vector dxy = x - y;
      if (dxy.norm() > p.R0) {
        model.full_field_into(x, fx);
        model.full_field_into(y, fy);
        const double ratio = -dxy.dot(fx - fy) / dxy.squaredNorm();
        ++report.convexity_samples;
        if (ratio < report.min_convexity) {
          report.min_convexity = ratio;
          report.worst_convexity_point = x;
        }
      }
    }

    const double dist = (x - y).norm();
    if (dist == 0.0) continue;
    for (std::size_t i = 0; i < model.size(); ++i) {
      model.component_into(i, x, fx);
      model.component_into(i, y, fy);
      const double ratio = (fx - fy).norm() / dist;
      if (ratio > report.max_lipschitz) {
        report.max_lipschitz = ratio;
        report.worst_lipschitz_component = i;
      }
    }
    ++report.lipschitz_samples;
  }

  const double tol = report.tolerance;
  report.convexity_violated =
      report.convexity_samples > 0 &&
      report.min_convexity < p.kappa0 - tol * std::max(1.0, std::abs(p.kappa0));
  report.lipschitz_violated = report.max_lipschitz > p.K * (1.0 + tol);
  return report;
}

}  // namespace sgldc
