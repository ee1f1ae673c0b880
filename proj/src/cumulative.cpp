#include "interpnn/cumulative.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace interpnn {

CumulativeEstimator::CumulativeEstimator(const WeightScheme &scheme, const NeighborQuery &query,
                                         std::span<const double> responses,
                                         std::span<const double> residuals, double alpha)
    : scheme_(scheme), k_max_(query.k()), has_residuals_(!residuals.empty()),
      distances_(query.distances), boundary_(query.boundary_distance) {
  // Full validate() sorts the indices; ordering of distances is all that is used here.
  if (k_max_ == 0 || distances_.size() != k_max_) {
    throw std::invalid_argument("CumulativeEstimator: malformed query");
  }
  for (std::size_t i = 0; i < k_max_; ++i) {
    const double next = i + 1 < k_max_ ? distances_[i + 1] : boundary_;
    if (!(distances_[i] >= 0.0) || !(next >= distances_[i])) {
      throw std::invalid_argument("CumulativeEstimator: distances must be nonnegative and nondecreasing");
    }
  }
  if (responses.size() != k_max_) {
    throw std::invalid_argument("CumulativeEstimator: one response per neighbor required");
  }
  if (has_residuals_ && residuals.size() != k_max_) {
    throw std::invalid_argument("CumulativeEstimator: one residual per neighbor required");
  }
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("CumulativeEstimator: alpha must be positive");
  }

  if (scheme_.interpolating()) {
    while (zeros_ < k_max_ && distances_[zeros_] == 0.0) {
      ++zeros_;
    }
  }

  const std::size_t size = k_max_ + 1;
  w0_.assign(size, 0.0L);
  wy0_.assign(size, 0.0L);
  wd0_.assign(size, 0.0L);
  wr0_.assign(size, 0.0L);
  w1_.assign(size, 0.0L);
  wy1_.assign(size, 0.0L);
  wd1_.assign(size, 0.0L);
  wr1_.assign(size, 0.0L);
  wr2_.assign(size, 0.0L);

  if (zeros_ > 0) {
    // Exact-match rule applies to every k; only the matched prefix is needed.
    for (std::size_t i = 0; i < k_max_; ++i) {
      const long double r2 = has_residuals_ ? static_cast<long double>(residuals[i]) * residuals[i] : 0.0L;
      wy0_[i + 1] = wy0_[i] + responses[i];
      wr0_[i + 1] = wr0_[i] + r2;
    }
    return;
  }

  const bool is_log = std::holds_alternative<LogInterpolated>(scheme_.kind());
  const bool is_power = std::holds_alternative<PowerInterpolated>(scheme_.kind());
  if (is_log) {
    c_ = std::get<LogInterpolated>(scheme_.kind()).c;
  }
  const double kappa = is_power ? std::get<PowerInterpolated>(scheme_.kind()).kappa : 0.0;
  const double nearest = distances_.front();

  for (std::size_t i = 0; i < k_max_; ++i) {
    const long double d = distances_[i];
    const long double y = responses[i];
    const long double r2 = has_residuals_ ? static_cast<long double>(residuals[i]) * residuals[i] : 0.0L;
    const long double dalpha = alpha == 1.0 ? d : std::pow(d, static_cast<long double>(alpha));
    // Power weights are taken relative to the nearest neighbor so they stay <= 1.
    const long double u = is_power ? std::pow(d / nearest, -static_cast<long double>(kappa)) : 1.0L;
    const long double v = is_log ? -std::log(d) : 0.0L;

    w0_[i + 1] = w0_[i] + u;
    wy0_[i + 1] = wy0_[i] + u * y;
    wd0_[i + 1] = wd0_[i] + u * dalpha;
    wr0_[i + 1] = wr0_[i] + u * u * r2;
    w1_[i + 1] = w1_[i] + v;
    wy1_[i + 1] = wy1_[i] + v * y;
    wd1_[i + 1] = wd1_[i] + v * dalpha;
    wr1_[i + 1] = wr1_[i] + u * v * r2;
    wr2_[i + 1] = wr2_[i] + v * v * r2;
  }
}

void CumulativeEstimator::check(std::size_t k) const {
  if (k == 0 || k > k_max_) {
    throw std::out_of_range("CumulativeEstimator: k outside [1, max_k]");
  }
}

double CumulativeEstimator::boundary(std::size_t k) const {
  return k < k_max_ ? distances_[k] : boundary_;
}

double CumulativeEstimator::estimate(std::size_t k) const {
  check(k);
  if (zeros_ > 0) {
    const std::size_t m = std::min(k, zeros_);
    return static_cast<double>(wy0_[m] / static_cast<long double>(m));
  }
  if (c_ > 0.0) {
    const long double a = 1.0L + c_ * std::log(static_cast<long double>(boundary(k)));
    const long double total = a * w0_[k] + c_ * w1_[k];
    return static_cast<double>((a * wy0_[k] + c_ * wy1_[k]) / total);
  }
  return static_cast<double>(wy0_[k] / w0_[k]);
}

double CumulativeEstimator::bias_proxy(std::size_t k) const {
  check(k);
  if (zeros_ > 0) {
    return 0.0;
  }
  long double mean = 0.0L;
  if (c_ > 0.0) {
    const long double a = 1.0L + c_ * std::log(static_cast<long double>(boundary(k)));
    mean = (a * wd0_[k] + c_ * wd1_[k]) / (a * w0_[k] + c_ * w1_[k]);
  } else {
    mean = wd0_[k] / w0_[k];
  }
  return static_cast<double>(mean * mean);
}

double CumulativeEstimator::variance_proxy(std::size_t k) const {
  check(k);
  if (!has_residuals_) {
    throw std::logic_error("CumulativeEstimator: residuals were not supplied");
  }
  if (zeros_ > 0) {
    const auto m = static_cast<long double>(std::min(k, zeros_));
    return static_cast<double>(wr0_[std::min(k, zeros_)] / (m * m));
  }
  if (c_ > 0.0) {
    const long double a = 1.0L + c_ * std::log(static_cast<long double>(boundary(k)));
    const long double total = a * w0_[k] + c_ * w1_[k];
    const long double num = a * a * wr0_[k] + 2.0L * a * c_ * wr1_[k] + c_ * c_ * wr2_[k];
    return static_cast<double>(num / (total * total));
  }
  return static_cast<double>(wr0_[k] / (w0_[k] * w0_[k]));
}

} // namespace interpnn
