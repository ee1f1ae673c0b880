#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "interpnn/core.hpp"
#include "interpnn/simulations.hpp"

namespace interpnn {

/// Malformed input, reported with the 1-based line number.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::filesystem::path &path, std::size_t line, const std::string &message);
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

struct CsvSchema {
  /// Expected feature column count; inferred from the first data row if unset.
  std::optional<std::size_t> n_features;
  /// Last column is the response.
  bool has_label = true;
  bool header = false;
  /// Responses must be 0/1 when classification is requested.
  Task task = Task::Regression;
};

struct CsvTable {
  Matrix features;
  std::vector<double> responses; // empty when the schema has no label
};

/// Reads a comma-separated table. Row order is preserved.
CsvTable read_csv(const std::filesystem::path &path, const CsvSchema &schema);

/// read_csv() plus Dataset validation; requires a label column.
Dataset load_csv(const std::filesystem::path &path, const CsvSchema &schema);

/// Writes features then response, shortest round-trip decimal form.
void write_dataset(const Dataset &dataset, const std::filesystem::path &path, bool header = false);

enum class Normalization { None, ZScoreFromTrain };

struct SplitSpec {
  std::size_t test_size = 2000;
  std::uint64_t seed = 0;
  Normalization normalize = Normalization::ZScoreFromTrain;
};

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> sd; // population standard deviation of the training rows
  std::vector<bool> constant; // passed through unscaled

  friend bool operator==(const NormalizationStats &, const NormalizationStats &) = default;
};

struct Split {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_rows; // source row of each train row
  std::vector<std::size_t> test_rows;
  NormalizationStats stats;
};

/// Uniformly random test subset of exactly spec.test_size rows; rows keep
/// their original relative order on both sides. Normalisation statistics come
/// from the training rows only.
Split split_normalize(const Dataset &dataset, const SplitSpec &spec);

inline constexpr const char *kResultsHeader =
    "n,k,scheme,repetition,metric_name,metric_value,bias_proxy,variance_proxy";
inline constexpr const char *kSummaryHeader = "n,scheme,optimal_k,optimal_metric";

/// Results CSV sorted by (n, scheme, k, repetition, metric_name).
void write_results(std::vector<SweepRow> rows, const std::filesystem::path &path);
/// Summary CSV sorted by (n, scheme).
void write_summary(std::vector<SweepSummary> rows, const std::filesystem::path &path);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

} // namespace interpnn
