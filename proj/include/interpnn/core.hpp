#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "interpnn/matrix.hpp"

namespace interpnn {

enum class Task { Regression, Classification };

std::string_view to_string(Task task);

// Raised when a classification-only operation is handed a regression dataset
// (or the reverse).
class TaskMismatchError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Weight kernels
// ---------------------------------------------------------------------------

struct Uniform {
  friend bool operator==(const Uniform &, const Uniform &) = default;
};

// phi(t) = 1 - c ln t
struct LogInterpolated {
  double c = 2.0;
  friend bool operator==(const LogInterpolated &, const LogInterpolated &) = default;
};

// phi(t) = t^(-kappa)
struct PowerInterpolated {
  double kappa;
  friend bool operator==(const PowerInterpolated &, const PowerInterpolated &) = default;
};

/// Kernel applied to the ratio of a neighbor's distance to the (k+1)-th
/// neighbor distance. The two interpolating variants diverge as the ratio goes
/// to zero, which pins the estimate to any training point the query lands on.
class WeightScheme {
public:
  using Variant = std::variant<Uniform, LogInterpolated, PowerInterpolated>;

  WeightScheme() = default;
  WeightScheme(Uniform u) : kind_(u) {}
  WeightScheme(LogInterpolated l);
  WeightScheme(PowerInterpolated p);

  static WeightScheme uniform() { return WeightScheme(Uniform{}); }
  static WeightScheme log_interpolated(double c = 2.0) {
    return WeightScheme(LogInterpolated{c});
  }
  static WeightScheme power_interpolated(double kappa) {
    return WeightScheme(PowerInterpolated{kappa});
  }

  /// Parses "uniform", "log", "log:<c>" or "power:<kappa>".
  static WeightScheme parse(std::string_view text);

  const Variant &kind() const { return kind_; }
  bool interpolating() const { return !std::holds_alternative<Uniform>(kind_); }

  /// Stable textual form, inverse of parse(): "uniform", "log:2", "power:1.5".
  std::string label() const;

  friend bool operator==(const WeightScheme &, const WeightScheme &) = default;

private:
  Variant kind_ = Uniform{};
};

/// Kernel value at t in (0, 1]. Throws std::domain_error outside that range.
double phi(const WeightScheme &scheme, double t);

/// E[exp(s * phi(T))] for T ~ Uniform(0, 1). Returns +infinity when the
/// integral diverges (every PowerInterpolated kernel, and LogInterpolated with
/// s * c >= 1).
double mgf_bound(const WeightScheme &scheme, double s);

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

/// Immutable training sample: n x d features plus one response per row.
/// Construction validates finiteness, n >= 2, d >= 1, and binary responses for
/// classification.
class Dataset {
public:
  Dataset(Matrix features, std::vector<double> responses, Task task);

  std::size_t n() const { return features_.rows(); }
  std::size_t d() const { return features_.cols(); }
  Task task() const { return task_; }

  const Matrix &features() const { return features_; }
  std::span<const double> responses() const { return responses_; }
  std::span<const double> row(std::size_t i) const { return features_.row(i); }
  double response(std::size_t i) const { return responses_[i]; }

  friend bool operator==(const Dataset &, const Dataset &) = default;

private:
  Matrix features_;
  std::vector<double> responses_;
  Task task_;
};

/// The k nearest training rows of one query point, nearest first, plus the
/// distance to the (k+1)-th neighbor used to normalise distance ratios.
struct NeighborQuery {
  std::vector<std::size_t> indices;
  std::vector<double> distances;
  double boundary_distance = 0.0;

  std::size_t k() const { return indices.size(); }

  /// Throws std::invalid_argument if ordering, bounds or index validity is
  /// violated. Pass n = 0 to skip the index range check.
  void validate(std::size_t n = 0) const;

  friend bool operator==(const NeighborQuery &, const NeighborQuery &) = default;
};

/// Restricts a query to its first k neighbors. The (k+1)-th distance of the
/// original becomes the new boundary.
NeighborQuery truncate(const NeighborQuery &query, std::size_t k);

struct WeightVector {
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
  double operator[](std::size_t i) const { return weights[i]; }
};

/// Normalised kernel weights for a neighbor set.
///
/// For the interpolating kernels, m >= 1 neighbors at distance exactly zero
/// take weight 1/m each and everything else gets zero. Uniform is classical
/// k-NN and always returns 1/k.
WeightVector compute_weights(const WeightScheme &scheme, const NeighborQuery &query);

/// Weighted average of the neighbors' responses.
double estimate(const Dataset &dataset, const NeighborQuery &query, const WeightScheme &scheme);

/// Plug-in classifier: 1 iff the estimate is >= 1/2.
int classify(const Dataset &dataset, const NeighborQuery &query, const WeightScheme &scheme);

/// Threshold rule shared by classify() and the sweep fast path.
inline int plug_in_label(double eta_hat) { return eta_hat >= 0.5 ? 1 : 0; }

/// k ~ n^(2 alpha / (2 alpha + d)), clamped to [1, n - 1].
std::size_t default_k(std::size_t n, double alpha, std::size_t d);

} // namespace interpnn
