#include "interpnn/simulations.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "interpnn/cumulative.hpp"
#include "interpnn/parallel.hpp"

namespace interpnn {

namespace {

constexpr std::size_t kModel1Dim = 10;
constexpr std::size_t kModel2Dim = 5;
constexpr std::size_t kGaussianDim = 5;
constexpr std::size_t kRateLevels = 16;
constexpr double kRateNoiseSd = 0.1;
constexpr std::uint64_t kRateShapeSeed = 0x7a1e5eedULL;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double logistic(double z) {
  // Branches keep exp() from overflowing.
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double triangle_wave(double s) { return std::abs(s - std::floor(s) - 0.5); }

double toy_eta(ToyTruth truth, double x) {
  switch (truth) {
  case ToyTruth::Zero:
    return 0.0;
  case ToyTruth::Square:
    return x * x;
  case ToyTruth::ShiftedSquare:
    return (x - 10.0) * (x - 10.0) / 8.0;
  }
  return 0.0;
}

double toy_noise_sd(ToyTruth truth) {
  switch (truth) {
  case ToyTruth::Zero:
    return 1.0;
  case ToyTruth::Square:
    return 0.0;
  case ToyTruth::ShiftedSquare:
    return 5.0;
  }
  return 0.0;
}

std::size_t parse_size(std::string_view text) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("k grid: cannot parse '" + std::string(text) + "'");
  }
  return value;
}

} // namespace

double draw_student_t5(RandomStream &stream) {
  const double z = stream.normal();
  double chi2 = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double g = stream.normal();
    chi2 += g * g;
  }
  return z / std::sqrt(chi2 / 5.0);
}

void ScenarioSpec::validate() const {
  if (n < 4) {
    throw std::invalid_argument("scenario: n must be at least 4");
  }
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    throw std::invalid_argument("scenario: noise scale must be finite and nonnegative");
  }
  std::visit(Overloaded{
                 [](const GaussianClassification &g) {
                   if (!(g.gamma > 0.0) || !std::isfinite(g.gamma)) {
                     throw std::invalid_argument("scenario: gamma must be positive");
                   }
                 },
                 [](const SyntheticRate &r) {
                   if (!(r.alpha > 0.0) || r.alpha > 1.0) {
                     throw std::invalid_argument("scenario: rate alpha must lie in (0, 1]");
                   }
                   if (r.d == 0) {
                     throw std::invalid_argument("scenario: d must be positive");
                   }
                 },
                 [](const auto &) {},
             },
             kind);
}

std::string scenario_name(const ScenarioKind &kind) {
  return std::visit(Overloaded{
                        [](const RegressionModel1 &) -> std::string { return "model1"; },
                        [](const RegressionModel2 &) -> std::string { return "model2"; },
                        [](const GaussianClassification &) -> std::string { return "gaussian"; },
                        [](const ToyAppendix &) -> std::string { return "toy"; },
                        [](const SyntheticRate &) -> std::string { return "rate"; },
                    },
                    kind);
}

ToyTruth parse_toy_truth(std::string_view text) {
  if (text == "zero") {
    return ToyTruth::Zero;
  }
  if (text == "square") {
    return ToyTruth::Square;
  }
  if (text == "shifted-square") {
    return ToyTruth::ShiftedSquare;
  }
  throw std::invalid_argument("unknown toy truth '" + std::string(text) +
                              "' (expected zero, square or shifted-square)");
}

double model1_psi(std::span<const double> x) {
  const double sum = std::accumulate(x.begin(), x.end(), 0.0);
  return logistic(sum - static_cast<double>(x.size()) / 2.0);
}

double gaussian_class_probability(std::span<const double> x, double gamma) {
  const double sum = std::accumulate(x.begin(), x.end(), 0.0);
  return logistic(gamma * sum - static_cast<double>(x.size()) * gamma * gamma / 2.0);
}

double gaussian_bayes_risk(double gamma, std::size_t d) {
  const double z = -gamma * std::sqrt(static_cast<double>(d)) / 2.0;
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

Scenario::Scenario(const ScenarioSpec &spec) : spec_(spec) {
  spec_.validate();
  if (const auto *rate = std::get_if<SyntheticRate>(&spec_.kind)) {
    RandomStream shape(derive_seed(kRateShapeSeed, rate->d));
    directions_.resize(kRateLevels * rate->d);
    phases_.resize(kRateLevels);
    for (std::size_t level = 0; level < kRateLevels; ++level) {
      double norm = 0.0;
      for (std::size_t j = 0; j < rate->d; ++j) {
        const double g = shape.normal();
        directions_[level * rate->d + j] = g;
        norm += g * g;
      }
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < rate->d; ++j) {
        directions_[level * rate->d + j] /= norm;
      }
      phases_[level] = shape.uniform();
    }
  }
}

Task Scenario::task() const {
  return std::holds_alternative<GaussianClassification>(spec_.kind) ? Task::Classification
                                                                    : Task::Regression;
}

std::size_t Scenario::dimension() const {
  return std::visit(Overloaded{
                        [](const RegressionModel1 &) { return kModel1Dim; },
                        [](const RegressionModel2 &) { return kModel2Dim; },
                        [](const GaussianClassification &) { return kGaussianDim; },
                        [](const ToyAppendix &) { return std::size_t{1}; },
                        [](const SyntheticRate &r) { return r.d; },
                    },
                    spec_.kind);
}

double Scenario::truth(std::span<const double> x) const {
  return std::visit(Overloaded{
                        [&](const RegressionModel1 &) { return model1_psi(x); },
                        [&](const RegressionModel2 &) {
                          const double s = std::accumulate(x.begin(), x.end(), 0.0);
                          return s * s;
                        },
                        [&](const GaussianClassification &g) {
                          return gaussian_class_probability(x, g.gamma);
                        },
                        [&](const ToyAppendix &t) { return toy_eta(t.truth, x[0]); },
                        [&](const SyntheticRate &r) {
                          double value = 0.0;
                          for (std::size_t level = 0; level < kRateLevels; ++level) {
                            double proj = 0.0;
                            for (std::size_t j = 0; j < r.d; ++j) {
                              proj += directions_[level * r.d + j] * x[j];
                            }
                            const double scale = std::ldexp(1.0, static_cast<int>(level));
                            value += std::pow(scale, -r.alpha) *
                                     triangle_wave(scale * proj + phases_[level]);
                          }
                          return value;
                        },
                    },
                    spec_.kind);
}

Truth Scenario::truth_function() const {
  return [self = *this](std::span<const double> x) { return self.truth(x); };
}

double Scenario::noise(RandomStream &stream) const {
  const double raw = std::visit(Overloaded{
                                    [&](const RegressionModel1 &) { return draw_student_t5(stream); },
                                    [&](const RegressionModel2 &) { return stream.normal(); },
                                    [&](const GaussianClassification &) { return 0.0; },
                                    [&](const ToyAppendix &t) {
                                      return toy_noise_sd(t.truth) * stream.normal();
                                    },
                                    [&](const SyntheticRate &) { return kRateNoiseSd * stream.normal(); },
                                },
                                spec_.kind);
  return spec_.noise_scale * raw;
}

Matrix Scenario::draw_features(std::size_t m, RandomStream &stream) const {
  const std::size_t d = dimension();
  Matrix x(m, d);
  std::visit(Overloaded{
                 [&](const RegressionModel1 &) {
                   for (double &v : x.data()) {
                     v = stream.uniform(-3.0, 3.0);
                   }
                 },
                 [&](const RegressionModel2 &) {
                   for (double &v : x.data()) {
                     v = stream.normal();
                   }
                 },
                 [&](const GaussianClassification &g) {
                   for (std::size_t i = 0; i < m; ++i) {
                     const double shift = stream.bernoulli(0.5) ? g.gamma : 0.0;
                     for (std::size_t j = 0; j < d; ++j) {
                       x(i, j) = stream.normal() + shift;
                     }
                   }
                 },
                 [&](const ToyAppendix &) {
                   for (double &v : x.data()) {
                     v = stream.uniform(0.0, 20.0);
                   }
                 },
                 [&](const SyntheticRate &) {
                   for (double &v : x.data()) {
                     v = stream.uniform();
                   }
                 },
             },
             spec_.kind);
  return x;
}

Sample Scenario::finish(Matrix features, RandomStream &stream) const {
  Sample s;
  s.eta.resize(features.rows());
  s.responses.resize(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) {
    s.eta[i] = truth(features.row(i));
    s.responses[i] = s.eta[i] + noise(stream);
  }
  s.features = std::move(features);
  return s;
}

Sample Scenario::draw_test(std::size_t m, RandomStream &stream) const {
  if (const auto *g = std::get_if<GaussianClassification>(&spec_.kind)) {
    // Label first, then the class-conditional normal.
    Sample s;
    s.features = Matrix(m, kGaussianDim);
    s.responses.resize(m);
    s.eta.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const bool positive = stream.bernoulli(0.5);
      for (std::size_t j = 0; j < kGaussianDim; ++j) {
        s.features(i, j) = stream.normal() + (positive ? g->gamma : 0.0);
      }
      s.responses[i] = positive ? 1.0 : 0.0;
      s.eta[i] = gaussian_class_probability(s.features.row(i), g->gamma);
    }
    return s;
  }
  return finish(draw_features(m, stream), stream);
}

Sample Scenario::draw_train(std::size_t n, RandomStream &stream) const {
  if (std::holds_alternative<ToyAppendix>(spec_.kind)) {
    Matrix x(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      x(i, 0) = -5.0 + 30.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return finish(std::move(x), stream);
  }
  return draw_test(n, stream);
}

GeneratedData generate(const ScenarioSpec &spec) {
  const Scenario scenario(spec);
  RandomStream stream(spec.seed);
  Sample s = scenario.draw_train(spec.n, stream);
  return {Dataset(std::move(s.features), std::move(s.responses), scenario.task()),
          scenario.truth_function()};
}

// ---------------------------------------------------------------------------

KGrid KGrid::list(std::vector<std::size_t> ks) {
  if (ks.empty()) {
    throw std::invalid_argument("k grid: empty");
  }
  KGrid g;
  g.ks_ = std::move(ks);
  return g;
}

KGrid KGrid::half() {
  KGrid g;
  g.half_ = true;
  return g;
}

KGrid KGrid::parse(std::string_view text) {
  if (text == "half") {
    return half();
  }
  std::vector<std::size_t> ks;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);

    std::vector<std::size_t> parts;
    std::string_view rest = item;
    while (true) {
      const auto colon = rest.find(':');
      parts.push_back(parse_size(rest.substr(0, colon)));
      if (colon == std::string_view::npos) {
        break;
      }
      rest = rest.substr(colon + 1);
    }
    if (parts.size() == 1) {
      ks.push_back(parts[0]);
    } else if (parts.size() <= 3) {
      const std::size_t step = parts.size() == 3 ? parts[2] : 1;
      if (step == 0 || parts[1] < parts[0]) {
        throw std::invalid_argument("k grid: bad range '" + std::string(item) + "'");
      }
      for (std::size_t k = parts[0]; k <= parts[1]; k += step) {
        ks.push_back(k);
      }
    } else {
      throw std::invalid_argument("k grid: bad range '" + std::string(item) + "'");
    }
  }
  return list(std::move(ks));
}

std::vector<std::size_t> KGrid::resolve(std::size_t n) const {
  std::vector<std::size_t> out;
  if (half_) {
    for (std::size_t k = 1; k <= n / 2; ++k) {
      out.push_back(k);
    }
  } else {
    out = ks_;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) {
    throw std::invalid_argument("k grid: no k values for n = " + std::to_string(n));
  }
  if (out.front() < 1 || out.back() >= n) {
    throw std::invalid_argument("k grid: every k must satisfy 1 <= k <= n - 1 (n = " +
                                std::to_string(n) + ")");
  }
  return out;
}

double SweepResult::average(std::size_t n, std::string_view scheme, std::size_t k,
                            std::string_view metric) const {
  const std::string_view name = metric.empty() ? std::string_view(primary_metric) : metric;
  for (const auto &a : averages) {
    if (a.n == n && a.k == k && a.scheme == scheme && a.metric_name == name) {
      return a.mean;
    }
  }
  throw std::out_of_range("SweepResult: no average for the requested cell");
}

const SweepSummary &SweepResult::optimal(std::size_t n, std::string_view scheme) const {
  for (const auto &s : summary) {
    if (s.n == n && s.scheme == scheme) {
      return s;
    }
  }
  throw std::out_of_range("SweepResult: no summary for the requested (n, scheme)");
}

void SweepResult::append(SweepResult other) {
  if (primary_metric.empty()) {
    primary_metric = other.primary_metric;
  } else if (!other.primary_metric.empty() && other.primary_metric != primary_metric) {
    throw std::invalid_argument("SweepResult: cannot merge sweeps with different metrics");
  }
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  averages.insert(averages.end(), other.averages.begin(), other.averages.end());
  summary.insert(summary.end(), other.summary.begin(), other.summary.end());
}

namespace {

// Per-(scheme, k) running totals for one block of test points.
struct Totals {
  std::vector<double> primary, secondary, bias, variance;

  explicit Totals(std::size_t cells)
      : primary(cells, 0.0), secondary(cells, 0.0), bias(cells, 0.0), variance(cells, 0.0) {}

  void add(const Totals &other) {
    for (std::size_t i = 0; i < primary.size(); ++i) {
      primary[i] += other.primary[i];
      secondary[i] += other.secondary[i];
      bias[i] += other.bias[i];
      variance[i] += other.variance[i];
    }
  }
};

constexpr std::size_t kBlock = 32;

} // namespace

SweepResult sweep(const ScenarioSpec &spec, std::span<const WeightScheme> schemes,
                  const KGrid &k_grid, const SweepOptions &options) {
  const Scenario scenario(spec);
  if (schemes.empty()) {
    throw std::invalid_argument("sweep: at least one weight scheme is required");
  }
  if (options.repetitions < 1) {
    throw std::invalid_argument("sweep: repetitions must be at least 1");
  }
  if (options.test_size < 1) {
    throw std::invalid_argument("sweep: test size must be at least 1");
  }
  if (!(options.alpha > 0.0)) {
    throw std::invalid_argument("sweep: alpha must be positive");
  }
  const std::size_t n = spec.n;
  const std::vector<std::size_t> ks = k_grid.resolve(n);
  const std::size_t k_max = ks.back();
  const bool classification = scenario.task() == Task::Classification;
  const std::size_t cells = schemes.size() * ks.size();
  const std::size_t m = options.test_size;

  SweepResult result;
  result.primary_metric = classification ? "excess_risk" : "mse";
  const std::string secondary_metric = "misclassification_rate";

  std::vector<std::string> labels;
  for (const auto &s : schemes) {
    labels.push_back(s.label());
  }

  // rep_means[rep][cell]
  std::vector<std::vector<double>> primary_means(options.repetitions);
  std::vector<std::vector<double>> secondary_means(options.repetitions);

  for (std::size_t rep = 0; rep < options.repetitions; ++rep) {
    const std::uint64_t rep_seed = derive_seed(derive_seed(options.base_seed, n), rep);
    RandomStream train_stream(derive_seed(rep_seed, 0));
    RandomStream test_stream(derive_seed(rep_seed, 1));
    Sample train = scenario.draw_train(n, train_stream);
    const Sample test = scenario.draw_test(m, test_stream);

    std::vector<double> residual(n);
    for (std::size_t i = 0; i < n; ++i) {
      residual[i] = train.responses[i] - train.eta[i];
    }
    const Dataset dataset(std::move(train.features), std::move(train.responses), scenario.task());
    const FittedIndex index = build_index(dataset, options.backend);

    const std::size_t blocks = (m + kBlock - 1) / kBlock;
    std::vector<Totals> block_totals(blocks, Totals(0));
    parallel_for(blocks, options.threads, [&](std::size_t b) {
      Totals totals(cells);
      std::vector<double> responses(k_max), residuals(k_max);
      for (std::size_t t = b * kBlock; t < std::min(m, (b + 1) * kBlock); ++t) {
        const NeighborQuery q = index.query(test.features.row(t), k_max);
        for (std::size_t i = 0; i < k_max; ++i) {
          responses[i] = dataset.response(q.indices[i]);
          residuals[i] = residual[q.indices[i]];
        }
        const double eta = test.eta[t];
        for (std::size_t s = 0; s < schemes.size(); ++s) {
          const CumulativeEstimator fast(schemes[s], q, responses, residuals, options.alpha);
          for (std::size_t j = 0; j < ks.size(); ++j) {
            const std::size_t cell = s * ks.size() + j;
            const double eta_hat = fast.estimate(ks[j]);
            if (classification) {
              const int label = plug_in_label(eta_hat);
              if (label != plug_in_label(eta)) {
                totals.primary[cell] += std::abs(1.0 - 2.0 * eta);
              }
              if (static_cast<double>(label) != test.responses[t]) {
                totals.secondary[cell] += 1.0;
              }
            } else {
              const double err = eta_hat - eta;
              totals.primary[cell] += err * err;
              totals.bias[cell] += fast.bias_proxy(ks[j]);
              totals.variance[cell] += fast.variance_proxy(ks[j]);
            }
          }
        }
      }
      block_totals[b] = std::move(totals);
    });

    Totals sum(cells);
    for (const auto &bt : block_totals) {
      sum.add(bt);
    }
    const double inv = 1.0 / static_cast<double>(m);
    primary_means[rep].resize(cells);
    secondary_means[rep].resize(cells);
    for (std::size_t s = 0; s < schemes.size(); ++s) {
      for (std::size_t j = 0; j < ks.size(); ++j) {
        const std::size_t cell = s * ks.size() + j;
        primary_means[rep][cell] = sum.primary[cell] * inv;
        secondary_means[rep][cell] = sum.secondary[cell] * inv;
        SweepRow row{n, ks[j], labels[s], rep, result.primary_metric, sum.primary[cell] * inv,
                     std::nullopt, std::nullopt};
        if (!classification) {
          row.bias_proxy = sum.bias[cell] * inv;
          row.variance_proxy = sum.variance[cell] * inv;
        }
        result.rows.push_back(row);
        if (classification) {
          result.rows.push_back(SweepRow{n, ks[j], labels[s], rep, secondary_metric,
                                         sum.secondary[cell] * inv, std::nullopt, std::nullopt});
        }
      }
    }
  }

  const double inv_reps = 1.0 / static_cast<double>(options.repetitions);
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    SweepSummary best{n, labels[s], 0, 0.0};
    for (std::size_t j = 0; j < ks.size(); ++j) {
      const std::size_t cell = s * ks.size() + j;
      double primary = 0.0;
      double secondary = 0.0;
      for (std::size_t rep = 0; rep < options.repetitions; ++rep) {
        primary += primary_means[rep][cell];
        secondary += secondary_means[rep][cell];
      }
      primary *= inv_reps;
      secondary *= inv_reps;
      result.averages.push_back({n, labels[s], ks[j], result.primary_metric, primary});
      if (classification) {
        result.averages.push_back({n, labels[s], ks[j], secondary_metric, secondary});
      }
      // Strict comparison keeps the smallest k on ties.
      if (j == 0 || primary < best.optimal_metric) {
        best.optimal_k = ks[j];
        best.optimal_metric = primary;
      }
    }
    result.summary.push_back(best);
  }
  return result;
}

} // namespace interpnn
