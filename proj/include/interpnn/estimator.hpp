#pragma once

#include <cstddef>

#include "interpnn/core.hpp"
#include "interpnn/neighbors.hpp"

namespace interpnn {

struct EstimatorConfig {
  std::size_t k = 1;
  WeightScheme scheme = WeightScheme::log_interpolated();
  SearchBackend backend = {};
  Task task = Task::Regression;

  /// Throws if k is not in [1, n - 1].
  void validate(std::size_t n) const;
};

} // namespace interpnn
