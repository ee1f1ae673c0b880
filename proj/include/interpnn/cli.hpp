#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "interpnn/core.hpp"
#include "interpnn/data_io.hpp"
#include "interpnn/neighbors.hpp"
#include "interpnn/simulations.hpp"

namespace interpnn::cli {

struct FitPredictOptions {
  std::filesystem::path train_csv;
  std::filesystem::path query_csv;
  std::filesystem::path out_csv;
  Task task = Task::Regression;
  /// Unset: n^(2/(2+d)), i.e. the rate-optimal order for Lipschitz targets.
  std::optional<std::size_t> k;
  WeightScheme scheme = WeightScheme::log_interpolated();
  SearchBackend backend = {};
  bool header = false;
  unsigned threads = 1;
};

/// Scenario selection shared by simulate and diagnose.
struct ScenarioOptions {
  std::string scenario = "model1";
  double gamma = 1.0;
  std::string truth = "zero";
  double alpha = 1.0;
  std::size_t d = 2;
  double noise_scale = 1.0;

  ScenarioKind kind() const;
};

struct SimulateOptions {
  ScenarioOptions scenario;
  std::vector<std::size_t> n_grid;
  std::string k_grid = "half";
  std::size_t repetitions = 10;
  std::size_t test_size = 1000;
  std::vector<WeightScheme> schemes;
  SearchBackend backend = {};
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::filesystem::path out_csv = "results.csv";
  std::filesystem::path summary_csv; // default: <out stem>_summary.csv
};

struct Htru2Options {
  std::filesystem::path data_csv;
  bool header = false;
  std::vector<WeightScheme> schemes;
  std::string k_grid = "1:61:2";
  std::size_t test_size = 2000;
  std::uint64_t seed = 0;
  Normalization normalize = Normalization::ZScoreFromTrain;
  SearchBackend backend = {};
  unsigned threads = 1;
  std::filesystem::path out_csv = "htru2_results.csv";
};

struct Htru2Result {
  std::size_t n_train = 0;
  std::vector<SweepRow> rows; // one misclassification_rate row per (scheme, k)
};

struct DiagnoseOptions {
  ScenarioOptions scenario;
  std::vector<std::size_t> n_grid;
  std::optional<std::size_t> k;
  std::size_t repetitions = 5;
  std::size_t test_size = 500;
  std::size_t queries = 200;
  std::vector<WeightScheme> schemes;
  SearchBackend backend = {};
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::filesystem::path out_csv = "diagnose.csv";
};

struct DiagnoseResult {
  std::vector<SweepRow> rows;
  /// Present when the n grid has at least 3 points.
  std::optional<RateFit> kth_distance_fit;
};

void cmd_fit_predict(const FitPredictOptions &options, std::ostream &log);
SweepResult cmd_simulate(const SimulateOptions &options, std::ostream &log);
Htru2Result cmd_htru2(const Htru2Options &options, std::ostream &log);
DiagnoseResult cmd_diagnose(const DiagnoseOptions &options, std::ostream &log);

/// Parses `args` (without the program name) and dispatches to a subcommand.
/// Returns the process exit code; failures print one line to `err`.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace interpnn::cli
