#include "interpnn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "interpnn/parallel.hpp"
#include "interpnn/random.hpp"

namespace interpnn {

void EstimatorConfig::validate(std::size_t n) const {
  if (k < 1 || k >= n) {
    throw std::invalid_argument("k must satisfy 1 <= k < n (k = " + std::to_string(k) +
                                ", n = " + std::to_string(n) + ")");
  }
}

namespace {

void require_test_points(const Dataset &dataset, const Matrix &test_points) {
  if (test_points.rows() == 0) {
    throw std::invalid_argument("diagnostics: test set is empty");
  }
  if (test_points.cols() != dataset.d()) {
    throw std::invalid_argument("diagnostics: test points have the wrong dimension");
  }
}

} // namespace

BiasVarianceReport bias_variance(const Truth &truth, const Dataset &dataset,
                                 const Matrix &test_points, const EstimatorConfig &config,
                                 double alpha, unsigned threads) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("bias_variance: alpha must be positive");
  }
  require_test_points(dataset, test_points);
  config.validate(dataset.n());

  std::vector<double> residual(dataset.n());
  for (std::size_t i = 0; i < dataset.n(); ++i) {
    residual[i] = dataset.response(i) - truth(dataset.row(i));
  }

  const FittedIndex index = build_index(dataset, config.backend);
  const std::size_t m = test_points.rows();
  std::vector<double> bias(m), variance(m), squared_error(m);
  parallel_for(m, threads, [&](std::size_t t) {
    const auto x = test_points.row(t);
    const NeighborQuery q = index.query(x, config.k);
    const WeightVector w = compute_weights(config.scheme, q);
    double reach = 0.0;
    double spread = 0.0;
    double fit = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const std::size_t row = q.indices[i];
      reach += w[i] * std::pow(q.distances[i], alpha);
      spread += w[i] * w[i] * residual[row] * residual[row];
      fit += w[i] * dataset.response(row);
    }
    const double err = fit - truth(x);
    bias[t] = reach * reach;
    variance[t] = spread;
    squared_error[t] = err * err;
  });

  BiasVarianceReport report;
  report.alpha = alpha;
  report.test_points = m;
  for (std::size_t t = 0; t < m; ++t) {
    report.bias_proxy += bias[t];
    report.variance_proxy += variance[t];
    report.mse += squared_error[t];
  }
  report.bias_proxy /= static_cast<double>(m);
  report.variance_proxy /= static_cast<double>(m);
  report.mse /= static_cast<double>(m);
  return report;
}

double excess_risk_from_labels(std::span<const double> eta, std::span<const int> predicted) {
  if (eta.size() != predicted.size()) {
    throw std::invalid_argument("excess_risk: eta and predictions differ in length");
  }
  if (eta.empty()) {
    throw std::invalid_argument("excess_risk: test set is empty");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < eta.size(); ++t) {
    if (!(eta[t] >= 0.0 && eta[t] <= 1.0)) {
      throw std::domain_error("excess_risk: eta must lie in [0, 1]");
    }
    if (predicted[t] != plug_in_label(eta[t])) {
      total += std::abs(1.0 - 2.0 * eta[t]);
    }
  }
  return total / static_cast<double>(eta.size());
}

double excess_risk(const Truth &eta, const Dataset &dataset, const Matrix &test_points,
                   const EstimatorConfig &config, unsigned threads) {
  if (dataset.task() != Task::Classification || config.task != Task::Classification) {
    throw TaskMismatchError("excess_risk: requires a classification dataset and config");
  }
  require_test_points(dataset, test_points);
  config.validate(dataset.n());

  const std::size_t m = test_points.rows();
  std::vector<double> eta_values(m);
  for (std::size_t t = 0; t < m; ++t) {
    eta_values[t] = eta(test_points.row(t));
    if (!(eta_values[t] >= 0.0 && eta_values[t] <= 1.0)) {
      throw std::domain_error("excess_risk: eta must lie in [0, 1]");
    }
  }
  const FittedIndex index = build_index(dataset, config.backend);
  std::vector<int> labels(m);
  parallel_for(m, threads, [&](std::size_t t) {
    labels[t] = classify(dataset, index.query(test_points.row(t), config.k), config.scheme);
  });
  return excess_risk_from_labels(eta_values, labels);
}

RateFit fit_line(std::vector<std::pair<double, double>> points) {
  if (points.size() < 3) {
    throw std::invalid_argument("rate fit: at least 3 points are required");
  }
  const auto count = static_cast<double>(points.size());
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (const auto &[x, y] : points) {
    if (!std::isfinite(x) || !std::isfinite(y)) {
      throw std::invalid_argument("rate fit: non-finite point");
    }
    mean_x += x;
    mean_y += y;
  }
  mean_x /= count;
  mean_y /= count;

  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto &[x, y] : points) {
    sxx += (x - mean_x) * (x - mean_x);
    sxy += (x - mean_x) * (y - mean_y);
    syy += (y - mean_y) * (y - mean_y);
  }
  std::vector<double> xs;
  for (const auto &p : points) {
    xs.push_back(p.first);
  }
  std::sort(xs.begin(), xs.end());
  if (std::adjacent_find(xs.begin(), xs.end()) != xs.end() || sxx <= 0.0) {
    throw std::invalid_argument("rate fit: abscissae must be distinct");
  }

  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = mean_y - fit.slope * mean_x;
  if (syy <= 0.0) {
    fit.r_squared = 1.0;
  } else {
    double sse = 0.0;
    for (const auto &[x, y] : points) {
      const double r = y - (fit.intercept + fit.slope * x);
      sse += r * r;
    }
    fit.r_squared = std::clamp(1.0 - sse / syy, 0.0, 1.0);
  }
  fit.points = std::move(points);
  return fit;
}

RateFit fit_rate(std::span<const std::pair<double, double>> points) {
  std::vector<std::pair<double, double>> logged;
  logged.reserve(points.size());
  for (const auto &[n, metric] : points) {
    if (!(n > 0.0)) {
      throw std::invalid_argument("fit_rate: n must be positive");
    }
    if (!(metric > 0.0)) {
      throw std::invalid_argument("fit_rate: metrics must be positive");
    }
    logged.emplace_back(std::log(n), std::log(metric));
  }
  return fit_line(std::move(logged));
}

RateFit kth_distance_scaling(const FeatureGenerator &generator, std::span<const std::size_t> n_grid,
                             const std::function<std::size_t(std::size_t)> &k_rule, double alpha,
                             std::size_t repetitions, std::uint64_t seed,
                             const ScalingOptions &options) {
  if (n_grid.size() < 3) {
    throw std::invalid_argument("kth_distance_scaling: need at least 3 grid points");
  }
  for (std::size_t i = 1; i < n_grid.size(); ++i) {
    if (n_grid[i] <= n_grid[i - 1]) {
      throw std::invalid_argument("kth_distance_scaling: n grid must be strictly increasing");
    }
  }
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("kth_distance_scaling: alpha must be positive");
  }
  if (repetitions < 1 || options.queries_per_repetition < 1) {
    throw std::invalid_argument("kth_distance_scaling: need at least one repetition and query");
  }

  std::vector<std::pair<double, double>> points;
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    const std::size_t n = n_grid[g];
    const std::size_t k = k_rule(n);
    if (k < 1 || k >= n) {
      throw std::invalid_argument("kth_distance_scaling: k rule must give 1 <= k < n");
    }
    const std::size_t queries = options.queries_per_repetition;
    std::vector<double> moments(repetitions * queries);
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      const std::uint64_t rep_seed = derive_seed(derive_seed(seed, n), rep);
      const Matrix train = generator(n, derive_seed(rep_seed, 0));
      const Matrix probes = generator(queries, derive_seed(rep_seed, 1));
      const FittedIndex index(train, options.backend);
      parallel_for(queries, options.threads, [&](std::size_t q) {
        const NeighborQuery nq = index.query(probes.row(q), k);
        moments[rep * queries + q] = std::pow(nq.distances[k - 1], 2.0 * alpha);
      });
    }
    double mean = 0.0;
    for (double v : moments) {
      mean += v;
    }
    mean /= static_cast<double>(moments.size());
    if (!(mean > 0.0)) {
      throw std::runtime_error("kth_distance_scaling: degenerate design (zero kth distance)");
    }
    points.emplace_back(std::log(static_cast<double>(k) / static_cast<double>(n)), std::log(mean));
  }
  return fit_line(std::move(points));
}

} // namespace interpnn
