#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "interpnn/core.hpp"
#include "interpnn/estimator.hpp"
#include "interpnn/matrix.hpp"

namespace interpnn {

/// Regression function (or class-1 probability) evaluated at a point.
using Truth = std::function<double(std::span<const double>)>;

/// Draws `count` feature rows from some design distribution.
using FeatureGenerator = std::function<Matrix(std::size_t count, std::uint64_t seed)>;

/// Averages over test points of the two terms bounding the pointwise MSE of a
/// weighted NN estimate, with the smoothness constant fixed to 1:
///   bias_proxy     = [sum_i W_i |X_(i) - x|^alpha]^2
///   variance_proxy = sum_i W_i^2 (Y_(i) - eta(X_(i)))^2
struct BiasVarianceReport {
  double bias_proxy = 0.0;
  double variance_proxy = 0.0;
  double mse = 0.0;
  double alpha = 1.0;
  std::size_t test_points = 0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points; // (log x, log metric)
};

BiasVarianceReport bias_variance(const Truth &truth, const Dataset &dataset,
                                 const Matrix &test_points, const EstimatorConfig &config,
                                 double alpha, unsigned threads = 1);

/// Mean over test points of |1 - 2 eta(x)| * 1{g_hat(x) != g(x)}, with
/// g(x) = 1{eta(x) >= 1/2}. Throws if eta leaves [0, 1].
double excess_risk(const Truth &eta, const Dataset &dataset, const Matrix &test_points,
                   const EstimatorConfig &config, unsigned threads = 1);

/// The same average from precomputed eta values and predicted labels.
double excess_risk_from_labels(std::span<const double> eta, std::span<const int> predicted);

/// Ordinary least squares of ln(metric) on ln(n). Needs at least 3 points,
/// distinct n and positive metrics.
RateFit fit_rate(std::span<const std::pair<double, double>> points);

/// Least-squares line through already-logged (x, y) pairs.
RateFit fit_line(std::vector<std::pair<double, double>> points);

struct ScalingOptions {
  std::size_t queries_per_repetition = 200;
  SearchBackend backend = {};
  unsigned threads = 1;
};

/// Monte Carlo estimate of E|X_(k) - x|^(2 alpha) for each n in the grid, with
/// training rows and query points drawn from `generator`, fitted against
/// ln(k/n). The expected slope is 2 alpha / d.
RateFit kth_distance_scaling(const FeatureGenerator &generator, std::span<const std::size_t> n_grid,
                             const std::function<std::size_t(std::size_t)> &k_rule, double alpha,
                             std::size_t repetitions, std::uint64_t seed,
                             const ScalingOptions &options = {});

} // namespace interpnn
