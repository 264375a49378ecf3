#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sgldc {

using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<Vector>;
using ConstVectorRef = Eigen::Ref<const Vector>;

// Raised when a component oracle returns a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(std::size_t component, const std::string& what)
      : std::runtime_error(what), component_(component) {}

  std::size_t component() const noexcept { return component_; }

 private:
  std::size_t component_;
};

// Malformed or inconsistent experiment configuration. `field` is the JSON
// path of the offending entry (empty for syntax errors).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

inline bool all_finite(ConstVectorRef v) { return v.allFinite(); }

}  // namespace sgldc
