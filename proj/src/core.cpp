#include "interpnn/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <system_error>

namespace interpnn {

namespace {

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

double parse_positive(std::string_view text, std::string_view what) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value) ||
      value <= 0.0) {
    throw std::invalid_argument("weight scheme: " + std::string(what) +
                                " must be a positive number, got '" + std::string(text) + "'");
  }
  return value;
}

} // namespace

std::string_view to_string(Task task) {
  return task == Task::Regression ? "regression" : "classification";
}

WeightScheme::WeightScheme(LogInterpolated l) : kind_(l) {
  if (!(l.c > 0.0) || !std::isfinite(l.c)) {
    throw std::invalid_argument("LogInterpolated: c must be positive");
  }
}

WeightScheme::WeightScheme(PowerInterpolated p) : kind_(p) {
  if (!(p.kappa > 0.0) || !std::isfinite(p.kappa)) {
    throw std::invalid_argument("PowerInterpolated: kappa must be positive");
  }
}

WeightScheme WeightScheme::parse(std::string_view text) {
  const auto colon = text.find(':');
  const auto name = text.substr(0, colon);
  const bool has_arg = colon != std::string_view::npos;
  const auto arg = has_arg ? text.substr(colon + 1) : std::string_view{};

  if (name == "uniform" && !has_arg) {
    return uniform();
  }
  if (name == "log") {
    return log_interpolated(has_arg ? parse_positive(arg, "c") : 2.0);
  }
  if (name == "power") {
    if (!has_arg) {
      throw std::invalid_argument("weight scheme: power requires an exponent, e.g. power:1");
    }
    return power_interpolated(parse_positive(arg, "kappa"));
  }
  throw std::invalid_argument("unknown weight scheme '" + std::string(text) +
                              "' (expected uniform, log:<c> or power:<kappa>)");
}

std::string WeightScheme::label() const {
  return std::visit(
      [](const auto &k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Uniform>) {
          return "uniform";
        } else if constexpr (std::is_same_v<K, LogInterpolated>) {
          return "log:" + format_number(k.c);
        } else {
          return "power:" + format_number(k.kappa);
        }
      },
      kind_);
}

double phi(const WeightScheme &scheme, double t) {
  if (!(t > 0.0) || t > 1.0) {
    throw std::domain_error("phi: argument must lie in (0, 1]");
  }
  return std::visit(
      [t](const auto &k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Uniform>) {
          return 1.0;
        } else if constexpr (std::is_same_v<K, LogInterpolated>) {
          return 1.0 - k.c * std::log(t);
        } else {
          return std::pow(t, -k.kappa);
        }
      },
      scheme.kind());
}

double mgf_bound(const WeightScheme &scheme, double s) {
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw std::domain_error("mgf_bound: s must be positive");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  return std::visit(
      [s](const auto &k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Uniform>) {
          return std::exp(s);
        } else if constexpr (std::is_same_v<K, LogInterpolated>) {
          // e^s * integral of t^(-s c) over (0, 1)
          const double sc = s * k.c;
          return sc < 1.0 ? std::exp(s) / (1.0 - sc) : inf;
        } else {
          // exp(s t^-kappa) outgrows any power of 1/t near zero.
          return inf;
        }
      },
      scheme.kind());
}

Dataset::Dataset(Matrix features, std::vector<double> responses, Task task)
    : features_(std::move(features)), responses_(std::move(responses)), task_(task) {
  if (features_.rows() < 2) {
    throw std::invalid_argument("Dataset: need at least 2 rows");
  }
  if (features_.cols() < 1) {
    throw std::invalid_argument("Dataset: need at least 1 feature");
  }
  if (responses_.size() != features_.rows()) {
    throw std::invalid_argument("Dataset: response count does not match row count");
  }
  for (double v : features_.data()) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("Dataset: non-finite feature value");
    }
  }
  for (double y : responses_) {
    if (!std::isfinite(y)) {
      throw std::invalid_argument("Dataset: non-finite response");
    }
    if (task_ == Task::Classification && y != 0.0 && y != 1.0) {
      throw std::invalid_argument("Dataset: classification responses must be 0 or 1");
    }
  }
}

void NeighborQuery::validate(std::size_t n) const {
  if (indices.empty()) {
    throw std::invalid_argument("NeighborQuery: k must be positive");
  }
  if (distances.size() != indices.size()) {
    throw std::invalid_argument("NeighborQuery: indices and distances differ in length");
  }
  if (!(boundary_distance >= 0.0) || !std::isfinite(boundary_distance)) {
    throw std::invalid_argument("NeighborQuery: invalid boundary distance");
  }
  double previous = 0.0;
  for (double dist : distances) {
    if (!(dist >= previous)) {
      throw std::invalid_argument("NeighborQuery: distances must be nonnegative and nondecreasing");
    }
    previous = dist;
  }
  if (previous > boundary_distance) {
    throw std::invalid_argument("NeighborQuery: neighbor distance exceeds boundary distance");
  }
  std::vector<std::size_t> sorted(indices);
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("NeighborQuery: duplicate neighbor index");
  }
  if (n != 0) {
    if (sorted.back() >= n) {
      throw std::invalid_argument("NeighborQuery: neighbor index out of range");
    }
    if (indices.size() + 1 > n) {
      throw std::invalid_argument("NeighborQuery: k must be at most n - 1");
    }
  }
}

NeighborQuery truncate(const NeighborQuery &query, std::size_t k) {
  if (k == 0 || k > query.k()) {
    throw std::invalid_argument("truncate: k must lie in [1, query.k()]");
  }
  NeighborQuery out;
  out.indices.assign(query.indices.begin(), query.indices.begin() + k);
  out.distances.assign(query.distances.begin(), query.distances.begin() + k);
  out.boundary_distance = k == query.k() ? query.boundary_distance : query.distances[k];
  return out;
}

namespace {

// Unnormalised kernel values and their sum. Exact matches get weight 1 each.
double raw_weights(const WeightScheme &scheme, const NeighborQuery &query, std::vector<double> &raw) {
  const std::size_t k = query.k();
  raw.assign(k, 0.0);
  if (scheme.interpolating()) {
    // Distances are sorted, so exact matches form a prefix.
    const auto zeros = static_cast<std::size_t>(
        std::find_if(query.distances.begin(), query.distances.end(),
                     [](double dist) { return dist > 0.0; }) -
        query.distances.begin());
    if (zeros > 0) {
      std::fill_n(raw.begin(), zeros, 1.0);
      return static_cast<double>(zeros);
    }
    if (query.boundary_distance == 0.0) {
      throw std::invalid_argument("compute_weights: corrupted query (zero boundary, positive distance)");
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double t = scheme.interpolating() ? query.distances[i] / query.boundary_distance : 1.0;
    raw[i] = phi(scheme, t);
    total += raw[i];
  }
  return total;
}

} // namespace

WeightVector compute_weights(const WeightScheme &scheme, const NeighborQuery &query) {
  query.validate();
  WeightVector out;
  const double total = raw_weights(scheme, query, out.weights);
  for (double &w : out.weights) {
    w /= total;
  }
  return out;
}

double estimate(const Dataset &dataset, const NeighborQuery &query, const WeightScheme &scheme) {
  query.validate(dataset.n());
  // Dividing once at the end keeps label averages such as 10/20 exact.
  std::vector<double> raw;
  const double total = raw_weights(scheme, query, raw);
  double value = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    value += raw[i] * dataset.response(query.indices[i]);
  }
  return value / total;
}

int classify(const Dataset &dataset, const NeighborQuery &query, const WeightScheme &scheme) {
  if (dataset.task() != Task::Classification) {
    throw TaskMismatchError("classify: dataset is not a classification dataset");
  }
  return plug_in_label(estimate(dataset, query, scheme));
}

std::size_t default_k(std::size_t n, double alpha, std::size_t d) {
  if (n < 2) {
    throw std::invalid_argument("default_k: need n >= 2");
  }
  if (!(alpha > 0.0) || d == 0) {
    throw std::invalid_argument("default_k: alpha and d must be positive");
  }
  const double exponent = 2.0 * alpha / (2.0 * alpha + static_cast<double>(d));
  const double k = std::round(std::pow(static_cast<double>(n), exponent));
  return std::clamp<std::size_t>(static_cast<std::size_t>(k), 1, n - 1);
}

} // namespace interpnn
