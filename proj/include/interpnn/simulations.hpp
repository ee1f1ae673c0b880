#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "interpnn/core.hpp"
#include "interpnn/diagnostics.hpp"
#include "interpnn/neighbors.hpp"
#include "interpnn/random.hpp"

namespace interpnn {

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

class RandomStream {
public:
  explicit RandomStream(std::uint64_t seed) : engine_(make_rng(seed)) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return normal_(engine_); }
  bool bernoulli(double p) { return uniform() < p; }

private:
  Rng engine_;
  std::normal_distribution<double> normal_;
};

/// Student t with 5 degrees of freedom: Z / sqrt(V / 5), V a sum of 5 squared
/// standard normals.
double draw_student_t5(RandomStream &stream);

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

/// X ~ Unif[-3, 3]^10, y = psi(x) + t5 noise, psi the posterior weight of
/// N(1, I) against N(0, I).
struct RegressionModel1 {};
/// X ~ N(0, I_5), y = (sum x)^2 + N(0, 1).
struct RegressionModel2 {};
/// Equal mixture of N(0, I_5) (label 0) and N(gamma 1, I_5) (label 1).
struct GaussianClassification {
  double gamma = 1.0;
};

enum class ToyTruth { Zero, Square, ShiftedSquare };

/// One-dimensional fixed design on [-5, 25]: eta = 0 (noise sd 1),
/// x^2 (noiseless) or (x - 10)^2 / 8 (noise sd 5). Test points are drawn
/// from (0, 20), away from the design boundary.
struct ToyAppendix {
  ToyTruth truth = ToyTruth::Zero;
};

/// X ~ Unif[0, 1]^d with a Holder-alpha target built from randomly oriented
/// triangle waves at dyadic scales, plus N(0, 0.1^2) noise. The target has
/// structure at every scale down to 2^-16, so the nearest-neighbor bias stays
/// first order in the neighborhood radius.
struct SyntheticRate {
  double alpha = 1.0;
  std::size_t d = 2;
};

using ScenarioKind =
    std::variant<RegressionModel1, RegressionModel2, GaussianClassification, ToyAppendix, SyntheticRate>;

struct ScenarioSpec {
  ScenarioKind kind = RegressionModel1{};
  std::size_t n = 256;
  std::uint64_t seed = 0;
  /// Multiplies the scenario's noise; 0 gives noiseless responses.
  double noise_scale = 1.0;

  /// Throws if n < 4, gamma <= 0, alpha <= 0 or d == 0.
  void validate() const;
};

std::string scenario_name(const ScenarioKind &kind);
ToyTruth parse_toy_truth(std::string_view text);

struct Sample {
  Matrix features;
  std::vector<double> responses;
  std::vector<double> eta;
};

/// Stateless description of a data-generating process.
class Scenario {
public:
  explicit Scenario(const ScenarioSpec &spec);

  Task task() const;
  std::size_t dimension() const;
  /// True regression function (class-1 probability for classification).
  double truth(std::span<const double> x) const;
  Truth truth_function() const;

  /// Training sample. Uses the fixed design for ToyAppendix.
  Sample draw_train(std::size_t n, RandomStream &stream) const;
  /// Fresh points from the test distribution, with responses.
  Sample draw_test(std::size_t m, RandomStream &stream) const;
  /// Feature rows only, from the test distribution.
  Matrix draw_features(std::size_t m, RandomStream &stream) const;

  const ScenarioSpec &spec() const { return spec_; }

private:
  double noise(RandomStream &stream) const;
  Sample finish(Matrix features, RandomStream &stream) const;

  ScenarioSpec spec_;
  // SyntheticRate wave directions (d per level) and phases.
  std::vector<double> directions_;
  std::vector<double> phases_;
};

struct GeneratedData {
  Dataset dataset;
  Truth truth;
};

/// Training data for spec.n rows drawn from the stream seeded by spec.seed.
GeneratedData generate(const ScenarioSpec &spec);

/// psi(x) = 1 / (1 + exp(d/2 - sum x)), the closed form of the density ratio
/// in RegressionModel1.
double model1_psi(std::span<const double> x);
/// P(label 1 | x) for the Gaussian mixture.
double gaussian_class_probability(std::span<const double> x, double gamma);
/// Phi(-gamma sqrt(d) / 2).
double gaussian_bayes_risk(double gamma, std::size_t d = 5);

// ---------------------------------------------------------------------------
// Monte Carlo sweep
// ---------------------------------------------------------------------------

/// Set of k values to try. Either an explicit list or "every k up to n/2".
class KGrid {
public:
  static KGrid list(std::vector<std::size_t> ks);
  static KGrid half();

  /// "half", "a:b", "a:b:step", or a comma list of those / single integers.
  static KGrid parse(std::string_view text);

  /// Sorted distinct k values for training size n; throws if any exceeds
  /// n - 1 or the grid is empty.
  std::vector<std::size_t> resolve(std::size_t n) const;

private:
  std::vector<std::size_t> ks_;
  bool half_ = false;
};

struct SweepRow {
  std::size_t n = 0;
  std::size_t k = 0;
  std::string scheme;
  std::size_t repetition = 0;
  std::string metric_name;
  double metric_value = 0.0;
  std::optional<double> bias_proxy;
  std::optional<double> variance_proxy;

  friend bool operator==(const SweepRow &, const SweepRow &) = default;
};

struct SweepAverage {
  std::size_t n = 0;
  std::string scheme;
  std::size_t k = 0;
  std::string metric_name;
  double mean = 0.0;

  friend bool operator==(const SweepAverage &, const SweepAverage &) = default;
};

struct SweepSummary {
  std::size_t n = 0;
  std::string scheme;
  std::size_t optimal_k = 0;
  double optimal_metric = 0.0;

  friend bool operator==(const SweepSummary &, const SweepSummary &) = default;
};

struct SweepResult {
  std::string primary_metric;
  std::vector<SweepRow> rows;
  std::vector<SweepAverage> averages;
  std::vector<SweepSummary> summary;

  /// Repetition average of `metric` (defaults to the primary metric).
  double average(std::size_t n, std::string_view scheme, std::size_t k,
                 std::string_view metric = {}) const;
  const SweepSummary &optimal(std::size_t n, std::string_view scheme) const;

  /// Concatenates another sweep with the same primary metric.
  void append(SweepResult other);

  friend bool operator==(const SweepResult &, const SweepResult &) = default;
};

struct SweepOptions {
  std::size_t repetitions = 10;
  std::size_t test_size = 1000;
  std::uint64_t base_seed = 0;
  SearchBackend backend = {};
  unsigned threads = 1;
  /// Exponent in the bias proxy.
  double alpha = 1.0;
};

/// Runs `repetitions` independent train/test draws at spec.n. Each repetition
/// performs one neighbor search per test point at the largest k in the grid
/// and evaluates every smaller k from that search. Regression rows report
/// "mse" against the noiseless target; classification rows report
/// "excess_risk" (primary) and "misclassification_rate".
SweepResult sweep(const ScenarioSpec &spec, std::span<const WeightScheme> schemes,
                  const KGrid &k_grid, const SweepOptions &options);

} // namespace interpnn
