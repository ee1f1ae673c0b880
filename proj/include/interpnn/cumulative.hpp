#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "interpnn/core.hpp"

namespace interpnn {

/// Evaluates the weighted estimate for every k = 1..K from a single
/// K-neighbor query in O(K) total work.
///
/// Each kernel's normalised weights reduce to a handful of running sums:
/// Uniform needs sum(y); LogInterpolated, with L = ln d_(k+1),
///   phi_i = 1 + c L - c ln d_i
/// needs sum(y) and sum(y ln d); PowerInterpolated's boundary factor cancels,
/// leaving sum(d^-kappa y) / sum(d^-kappa). The same trick gives the two
/// bias-variance proxy terms.
///
/// Results agree with compute_weights() on truncate(query, k) up to rounding.
class CumulativeEstimator {
public:
  /// `responses[i]` is the response of query.indices[i]. `residuals` (same
  /// length, y - eta at the neighbor) may be empty if variance_proxy() is not
  /// needed. `alpha` is the exponent used by bias_proxy().
  CumulativeEstimator(const WeightScheme &scheme, const NeighborQuery &query,
                      std::span<const double> responses, std::span<const double> residuals = {},
                      double alpha = 1.0);

  std::size_t max_k() const { return k_max_; }

  double estimate(std::size_t k) const;
  /// [sum_i W_i d_i^alpha]^2
  double bias_proxy(std::size_t k) const;
  /// sum_i W_i^2 r_i^2
  double variance_proxy(std::size_t k) const;

private:
  double boundary(std::size_t k) const;
  void check(std::size_t k) const;

  WeightScheme scheme_;
  std::size_t k_max_;
  std::size_t zeros_ = 0;
  bool has_residuals_;
  double c_ = 0.0;
  std::vector<double> distances_;
  double boundary_;
  // Prefix sums over the first k neighbors, index k = sum over [0, k).
  // Log kernel: base weight 1, log weight -ln d. Power kernel: base weight u.
  std::vector<long double> w0_, wy0_, wd0_, wr0_;
  std::vector<long double> w1_, wy1_, wd1_, wr1_, wr2_;
};

} // namespace interpnn
