#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace sgldc {

// A time-indexed statistic with confidence half-widths.
struct ExperimentSeries {
  std::vector<std::size_t> steps;
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> ci_half_widths;
  std::size_t n_samples = 0;
  double confidence = 0.95;

  std::size_t size() const noexcept { return values.size(); }

  void push(std::size_t step, double time, double value, double half_width) {
    steps.push_back(step);
    times.push_back(time);
    values.push_back(value);
    ci_half_widths.push_back(half_width);
  }

  void check() const {
    if (times.size() != values.size() || ci_half_widths.size() != values.size() ||
        steps.size() != values.size())
      throw std::logic_error("series columns have different lengths");
  }
};

// Mean over equally weighted blocks with a normal-approximation half-width.
struct BlockEstimate {
  double mean = 0.0;
  double half_width = 0.0;
  std::size_t blocks = 0;
};

BlockEstimate block_estimate(std::span<const double> block_values, double confidence = 0.95);

}  // namespace sgldc
