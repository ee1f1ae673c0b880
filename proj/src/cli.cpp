#include "interpnn/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>

#include "interpnn/cumulative.hpp"
#include "interpnn/diagnostics.hpp"
#include "interpnn/parallel.hpp"

namespace interpnn::cli {

namespace {

std::vector<WeightScheme> parse_schemes(const std::vector<std::string> &texts) {
  std::vector<WeightScheme> out;
  for (const auto &t : texts) {
    out.push_back(WeightScheme::parse(t));
  }
  return out;
}

std::vector<WeightScheme> default_schemes(const ScenarioOptions &scenario) {
  if (scenario.scenario == "toy") {
    // The three kernels compared on the one-dimensional toy design.
    return {WeightScheme::uniform(), WeightScheme::log_interpolated(1.0),
            WeightScheme::power_interpolated(1.0)};
  }
  return {WeightScheme::uniform(), WeightScheme::log_interpolated(2.0)};
}

std::filesystem::path summary_path_for(const std::filesystem::path &out) {
  auto p = out;
  p.replace_filename(out.stem().string() + "_summary" + out.extension().string());
  return p;
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

void print_fit(std::ostream &log, const std::string &what, const RateFit &fit, double reference) {
  log << what << ": empirical slope " << fixed(fit.slope) << " (r^2 " << fixed(fit.r_squared, 4)
      << "), reference " << fixed(reference) << '\n';
}

Matrix test_features(const Scenario &scenario, std::size_t m, std::uint64_t seed) {
  RandomStream stream(seed);
  return scenario.draw_features(m, stream);
}

} // namespace

ScenarioKind ScenarioOptions::kind() const {
  if (scenario == "model1") {
    return RegressionModel1{};
  }
  if (scenario == "model2") {
    return RegressionModel2{};
  }
  if (scenario == "gaussian") {
    return GaussianClassification{gamma};
  }
  if (scenario == "toy") {
    return ToyAppendix{parse_toy_truth(truth)};
  }
  if (scenario == "rate") {
    return SyntheticRate{alpha, d};
  }
  throw std::invalid_argument("unknown scenario '" + scenario +
                              "' (expected model1, model2, gaussian, toy or rate)");
}

// ---------------------------------------------------------------------------

void cmd_fit_predict(const FitPredictOptions &options, std::ostream &log) {
  CsvSchema train_schema;
  train_schema.header = options.header;
  train_schema.task = options.task;
  const Dataset train = load_csv(options.train_csv, train_schema);

  CsvSchema query_schema;
  query_schema.header = options.header;
  query_schema.has_label = false;
  query_schema.n_features = train.d();
  const CsvTable queries = read_csv(options.query_csv, query_schema);

  const std::size_t k = options.k ? *options.k : default_k(train.n(), 1.0, train.d());
  if (k < 1 || k >= train.n()) {
    throw std::invalid_argument("k must satisfy 1 <= k < n (k = " + std::to_string(k) +
                                ", n = " + std::to_string(train.n()) + ")");
  }
  const FittedIndex index = build_index(train, options.backend);
  const auto neighbors = query_batch(index, queries.features, k, options.threads);

  std::ofstream out(options.out_csv, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + options.out_csv.string() + "' for writing");
  }
  const bool classification = options.task == Task::Classification;
  out << (classification ? "row,prediction,class\n" : "row,prediction\n");
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    const double eta_hat = estimate(train, neighbors[i], options.scheme);
    out << i << ',' << format_double(eta_hat);
    if (classification) {
      out << ',' << plug_in_label(eta_hat);
    }
    out << '\n';
  }
  if (!out.flush()) {
    throw std::runtime_error("failed writing '" + options.out_csv.string() + "'");
  }
  log << "wrote " << neighbors.size() << " predictions (k = " << k << ", scheme "
      << options.scheme.label() << ") to " << options.out_csv.string() << '\n';
}

SweepResult cmd_simulate(const SimulateOptions &options, std::ostream &log) {
  if (options.n_grid.empty()) {
    throw std::invalid_argument("simulate: --n needs at least one value");
  }
  const auto schemes = options.schemes.empty() ? default_schemes(options.scenario) : options.schemes;
  const KGrid grid = KGrid::parse(options.k_grid);
  const ScenarioKind kind = options.scenario.kind();

  SweepOptions sweep_options;
  sweep_options.repetitions = options.repetitions;
  sweep_options.test_size = options.test_size;
  sweep_options.base_seed = options.seed;
  sweep_options.backend = options.backend;
  sweep_options.threads = options.threads;
  sweep_options.alpha = options.scenario.alpha;

  SweepResult all;
  for (std::size_t n : options.n_grid) {
    ScenarioSpec spec{kind, n, options.seed, options.scenario.noise_scale};
    all.append(sweep(spec, schemes, grid, sweep_options));
  }

  std::vector<SweepSummary> summary = all.summary;
  const auto *gaussian = std::get_if<GaussianClassification>(&kind);
  double bayes = 0.0;
  if (gaussian) {
    bayes = gaussian_bayes_risk(gaussian->gamma);
    for (std::size_t n : options.n_grid) {
      summary.push_back({n, "bayes_risk", 0, bayes});
    }
  }

  write_results(all.rows, options.out_csv);
  const auto summary_csv =
      options.summary_csv.empty() ? summary_path_for(options.out_csv) : options.summary_csv;
  write_summary(summary, summary_csv);

  log << "scenario " << options.scenario.scenario << ", metric " << all.primary_metric << '\n';
  for (const auto &s : all.summary) {
    log << "  n=" << s.n << " " << s.scheme << ": optimal k " << s.optimal_k << ", "
        << all.primary_metric << " " << fixed(s.optimal_metric) << '\n';
  }
  if (gaussian) {
    log << "reference Bayes risk " << fixed(bayes) << '\n';
  }
  if (options.n_grid.size() >= 3) {
    for (const auto &scheme : schemes) {
      std::vector<std::pair<double, double>> points;
      for (std::size_t n : options.n_grid) {
        points.emplace_back(static_cast<double>(n), all.optimal(n, scheme.label()).optimal_metric);
      }
      if (std::all_of(points.begin(), points.end(), [](const auto &p) { return p.second > 0.0; })) {
        const RateFit fit = fit_rate(points);
        log << scheme.label() << ": empirical slope of optimal " << all.primary_metric << " vs n "
            << fixed(fit.slope) << " (r^2 " << fixed(fit.r_squared, 4) << ")\n";
      }
    }
  }
  log << "wrote " << options.out_csv.string() << " and " << summary_csv.string() << '\n';
  return all;
}

Htru2Result cmd_htru2(const Htru2Options &options, std::ostream &log) {
  CsvSchema schema;
  schema.header = options.header;
  schema.task = Task::Classification;
  schema.n_features = 8;
  const Dataset data = load_csv(options.data_csv, schema);
  const Split split = split_normalize(data, {options.test_size, options.seed, options.normalize});
  const auto schemes = options.schemes.empty()
                           ? std::vector<WeightScheme>{WeightScheme::uniform(),
                                                       WeightScheme::log_interpolated(2.0)}
                           : options.schemes;
  const std::vector<std::size_t> ks = KGrid::parse(options.k_grid).resolve(split.train.n());
  const std::size_t k_max = ks.back();
  const FittedIndex index = build_index(split.train, options.backend);

  const std::size_t m = split.test.n();
  const std::size_t cells = schemes.size() * ks.size();
  // errors[t * cells + cell]
  std::vector<unsigned char> errors(m * cells, 0);
  parallel_for(m, options.threads, [&](std::size_t t) {
    const NeighborQuery q = index.query(split.test.row(t), k_max);
    std::vector<double> responses(k_max);
    for (std::size_t i = 0; i < k_max; ++i) {
      responses[i] = split.train.response(q.indices[i]);
    }
    for (std::size_t s = 0; s < schemes.size(); ++s) {
      const CumulativeEstimator fast(schemes[s], q, responses);
      for (std::size_t j = 0; j < ks.size(); ++j) {
        const int label = plug_in_label(fast.estimate(ks[j]));
        errors[t * cells + s * ks.size() + j] =
            static_cast<double>(label) != split.test.response(t) ? 1 : 0;
      }
    }
  });

  Htru2Result result;
  result.n_train = split.train.n();
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    for (std::size_t j = 0; j < ks.size(); ++j) {
      std::size_t wrong = 0;
      for (std::size_t t = 0; t < m; ++t) {
        wrong += errors[t * cells + s * ks.size() + j];
      }
      result.rows.push_back({split.train.n(), ks[j], schemes[s].label(), 0, "misclassification_rate",
                             static_cast<double>(wrong) / static_cast<double>(m), std::nullopt,
                             std::nullopt});
    }
  }
  write_results(result.rows, options.out_csv);

  log << "HTRU2: " << split.train.n() << " training rows, " << m << " test rows\n";
  for (std::size_t s = 0; s < schemes.size(); ++s) {
    double best = 1.0;
    std::size_t best_k = 0;
    for (std::size_t j = 0; j < ks.size(); ++j) {
      const double e = result.rows[s * ks.size() + j].metric_value;
      if (e < best) {
        best = e;
        best_k = ks[j];
      }
    }
    log << "  " << schemes[s].label() << ": lowest test error " << fixed(best) << " at k " << best_k
        << '\n';
  }
  if (schemes.size() == 2) {
    std::size_t wins = 0;
    for (std::size_t j = 0; j < ks.size(); ++j) {
      if (result.rows[ks.size() + j].metric_value <= result.rows[j].metric_value) {
        ++wins;
      }
    }
    log << "observed ordering: " << schemes[1].label() << " error <= " << schemes[0].label()
        << " error at " << wins << " of " << ks.size() << " k values\n";
  }
  log << "wrote " << options.out_csv.string() << '\n';
  return result;
}

DiagnoseResult cmd_diagnose(const DiagnoseOptions &options, std::ostream &log) {
  const double alpha = options.scenario.alpha;
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("diagnose: --alpha must be positive");
  }
  if (options.n_grid.empty()) {
    throw std::invalid_argument("diagnose: --n needs at least one value");
  }
  if (options.repetitions < 1 || options.test_size < 1) {
    throw std::invalid_argument("diagnose: --reps and --test-size must be positive");
  }
  const auto schemes = options.schemes.empty() ? default_schemes(options.scenario) : options.schemes;
  const ScenarioKind kind = options.scenario.kind();

  DiagnoseResult result;
  for (std::size_t n : options.n_grid) {
    const ScenarioSpec base{kind, n, 0, options.scenario.noise_scale};
    const Scenario scenario(base);
    const std::size_t k = options.k ? *options.k : default_k(n, alpha, scenario.dimension());
    std::map<std::string, BiasVarianceReport> totals;
    for (std::size_t rep = 0; rep < options.repetitions; ++rep) {
      const std::uint64_t rep_seed = derive_seed(derive_seed(options.seed, n), rep);
      ScenarioSpec spec = base;
      spec.seed = derive_seed(rep_seed, 0);
      const GeneratedData data = generate(spec);
      const Matrix test = test_features(scenario, options.test_size, derive_seed(rep_seed, 1));
      for (const auto &scheme : schemes) {
        const EstimatorConfig config{k, scheme, options.backend, scenario.task()};
        const BiasVarianceReport r =
            bias_variance(data.truth, data.dataset, test, config, alpha, options.threads);
        result.rows.push_back(
            {n, k, scheme.label(), rep, "mse", r.mse, r.bias_proxy, r.variance_proxy});
        auto &t = totals[scheme.label()];
        t.bias_proxy += r.bias_proxy / static_cast<double>(options.repetitions);
        t.variance_proxy += r.variance_proxy / static_cast<double>(options.repetitions);
        t.mse += r.mse / static_cast<double>(options.repetitions);
      }
    }
    log << "n=" << n << " k=" << k << " alpha=" << alpha << '\n';
    for (const auto &scheme : schemes) {
      const auto &t = totals[scheme.label()];
      log << "  " << scheme.label() << ": bias_proxy " << fixed(t.bias_proxy) << ", variance_proxy "
          << fixed(t.variance_proxy) << ", mse " << fixed(t.mse) << '\n';
    }
    if (totals.count("uniform") && schemes.size() > 1) {
      const auto &u = totals["uniform"];
      for (const auto &scheme : schemes) {
        if (!scheme.interpolating()) {
          continue;
        }
        const auto &w = totals[scheme.label()];
        log << "  observed ordering vs uniform, " << scheme.label() << ": bias_proxy "
            << (w.bias_proxy < u.bias_proxy ? "smaller" : "not smaller") << ", variance_proxy "
            << (w.variance_proxy > u.variance_proxy ? "larger" : "not larger") << '\n';
      }
    }
  }

  if (options.n_grid.size() >= 3 && options.scenario.scenario != "toy") {
    const Scenario scenario(ScenarioSpec{kind, options.n_grid.front(), 0, options.scenario.noise_scale});
    const FeatureGenerator generator = [&scenario](std::size_t count, std::uint64_t seed) {
      RandomStream stream(seed);
      return scenario.draw_features(count, stream);
    };
    const auto k_rule = [](std::size_t n) {
      return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    };
    ScalingOptions scaling;
    scaling.queries_per_repetition = options.queries;
    scaling.backend = options.backend;
    scaling.threads = options.threads;
    const RateFit fit = kth_distance_scaling(generator, options.n_grid, k_rule, alpha,
                                             options.repetitions, options.seed, scaling);
    for (std::size_t g = 0; g < options.n_grid.size(); ++g) {
      const std::size_t n = options.n_grid[g];
      result.rows.push_back({n, k_rule(n), "none", 0, "kth_distance_moment",
                             std::exp(fit.points[g].second), std::nullopt, std::nullopt});
    }
    print_fit(log, "kth-neighbor distance moment vs k/n (k = ceil(sqrt(n)))", fit,
              2.0 * alpha / static_cast<double>(scenario.dimension()));
    result.kth_distance_fit = fit;
  }

  write_results(result.rows, options.out_csv);
  log << "wrote " << options.out_csv.string() << '\n';
  return result;
}

// ---------------------------------------------------------------------------

namespace {

struct CommonFlags {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string out;
  std::string backend = "kdtree";
  std::vector<std::string> schemes;
};

void add_common(CLI::App *cmd, CommonFlags &f) {
  cmd->add_option("--seed", f.seed, "Base random seed");
  cmd->add_option("--threads", f.threads, "Worker threads (0 = all cores); output does not depend on it");
  cmd->add_option("--out", f.out, "Output CSV path");
  cmd->add_option("--backend", f.backend, "Neighbor search: brute, kdtree or kdtree:<leaf_size>");
  cmd->add_option("--scheme", f.schemes, "Weight scheme(s): uniform, log:<c>, power:<kappa>")
      ->delimiter(',');
}

void add_scenario(CLI::App *cmd, ScenarioOptions &s) {
  cmd->add_option("--scenario", s.scenario, "model1, model2, gaussian, toy or rate")
      ->check(CLI::IsMember({"model1", "model2", "gaussian", "toy", "rate"}));
  cmd->add_option("--gamma", s.gamma, "Class separation for the gaussian scenario");
  cmd->add_option("--truth", s.truth, "Toy target: zero, square or shifted-square");
  cmd->add_option("--alpha", s.alpha, "Smoothness exponent (rate target and bias proxy)");
  cmd->add_option("--d", s.d, "Dimension of the rate scenario");
  cmd->add_option("--noise-scale", s.noise_scale, "Multiplier on the scenario noise");
}

unsigned resolve_threads(unsigned t) { return t == 0 ? default_threads() : t; }

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Interpolated nearest-neighbor regression and classification", "interpnn"};
  app.require_subcommand(1);

  CommonFlags fit_flags;
  FitPredictOptions fit;
  std::string fit_task = "regression";
  std::size_t fit_k = 0;
  std::string train_csv, query_csv;
  auto *fit_cmd = app.add_subcommand("fit-predict", "Predict query rows from a labelled training CSV");
  add_common(fit_cmd, fit_flags);
  fit_cmd->add_option("--train", train_csv, "Training CSV (features then response)")->required();
  fit_cmd->add_option("--query", query_csv, "Query CSV (features only)")->required();
  fit_cmd->add_option("--task", fit_task, "regression or classification")
      ->check(CLI::IsMember({"regression", "classification"}));
  fit_cmd->add_option("--k", fit_k, "Number of neighbors (default n^(2/(2+d)))");
  fit_cmd->add_flag("--header", fit.header, "Input files start with a header line");

  CommonFlags sim_flags;
  SimulateOptions sim;
  std::string sim_summary;
  auto *sim_cmd = app.add_subcommand("simulate", "Monte Carlo sweep over n, k and weight schemes");
  add_common(sim_cmd, sim_flags);
  add_scenario(sim_cmd, sim.scenario);
  sim_cmd->add_option("--n", sim.n_grid, "Training sizes, comma separated")->delimiter(',');
  sim_cmd->add_option("--k", sim.k_grid, "k grid: half, a:b[:step] or a comma list");
  sim_cmd->add_option("--reps", sim.repetitions, "Repetitions per n");
  sim_cmd->add_option("--test-size", sim.test_size, "Test points per repetition");
  sim_cmd->add_option("--summary", sim_summary, "Summary CSV path (default <out>_summary.csv)");

  CommonFlags htru_flags;
  Htru2Options htru;
  std::string htru_data, htru_normalize = "zscore";
  auto *htru_cmd = app.add_subcommand("htru2", "Test error curves on the HTRU2 pulsar data");
  add_common(htru_cmd, htru_flags);
  htru_cmd->add_option("--data", htru_data, "HTRU2 CSV (8 features then 0/1 label)")->required();
  htru_cmd->add_flag("--header", htru.header, "Data file starts with a header line");
  htru_cmd->add_option("--k", htru.k_grid, "k grid: a:b[:step] or a comma list");
  htru_cmd->add_option("--test-size", htru.test_size, "Rows held out for testing");
  htru_cmd->add_option("--normalize", htru_normalize, "zscore or none")
      ->check(CLI::IsMember({"zscore", "none"}));

  CommonFlags diag_flags;
  DiagnoseOptions diag;
  std::size_t diag_k = 0;
  auto *diag_cmd = app.add_subcommand("diagnose", "Bias/variance proxies and kth-neighbor distance scaling");
  add_common(diag_cmd, diag_flags);
  add_scenario(diag_cmd, diag.scenario);
  diag_cmd->add_option("--n", diag.n_grid, "Training sizes, comma separated")->delimiter(',');
  diag_cmd->add_option("--k", diag_k, "Number of neighbors (default n^(2 alpha/(2 alpha+d)))");
  diag_cmd->add_option("--reps", diag.repetitions, "Repetitions per n");
  diag_cmd->add_option("--test-size", diag.test_size, "Test points per repetition");
  diag_cmd->add_option("--queries", diag.queries, "Query points per repetition for distance scaling");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (fit_cmd->parsed()) {
      fit.train_csv = train_csv;
      fit.query_csv = query_csv;
      fit.out_csv = fit_flags.out.empty() ? "predictions.csv" : fit_flags.out;
      fit.task = fit_task == "classification" ? Task::Classification : Task::Regression;
      if (fit_cmd->count("--k") > 0) {
        fit.k = fit_k;
      }
      if (fit_flags.schemes.size() > 1) {
        throw std::invalid_argument("fit-predict takes a single --scheme");
      }
      if (!fit_flags.schemes.empty()) {
        fit.scheme = WeightScheme::parse(fit_flags.schemes.front());
      }
      fit.backend = SearchBackend::parse(fit_flags.backend);
      fit.threads = resolve_threads(fit_flags.threads);
      cmd_fit_predict(fit, out);
    } else if (sim_cmd->parsed()) {
      if (sim.n_grid.empty()) {
        sim.n_grid = sim.scenario.scenario == "toy" ? std::vector<std::size_t>{31}
                                                    : std::vector<std::size_t>{256, 512, 1024, 2048};
      }
      sim.schemes = parse_schemes(sim_flags.schemes);
      sim.backend = SearchBackend::parse(sim_flags.backend);
      sim.seed = sim_flags.seed;
      sim.threads = resolve_threads(sim_flags.threads);
      if (!sim_flags.out.empty()) {
        sim.out_csv = sim_flags.out;
      }
      sim.summary_csv = sim_summary;
      cmd_simulate(sim, out);
    } else if (htru_cmd->parsed()) {
      htru.data_csv = htru_data;
      htru.normalize = htru_normalize == "none" ? Normalization::None : Normalization::ZScoreFromTrain;
      htru.schemes = parse_schemes(htru_flags.schemes);
      htru.backend = SearchBackend::parse(htru_flags.backend);
      htru.seed = htru_flags.seed;
      htru.threads = resolve_threads(htru_flags.threads);
      if (!htru_flags.out.empty()) {
        htru.out_csv = htru_flags.out;
      }
      cmd_htru2(htru, out);
    } else if (diag_cmd->parsed()) {
      if (diag.n_grid.empty()) {
        diag.n_grid = diag.scenario.scenario == "toy" ? std::vector<std::size_t>{31}
                                                      : std::vector<std::size_t>{512, 1024, 2048, 4096};
      }
      if (diag_cmd->count("--k") > 0) {
        diag.k = diag_k;
      } else if (diag.scenario.scenario == "toy") {
        diag.k = 10;
      }
      diag.schemes = parse_schemes(diag_flags.schemes);
      diag.backend = SearchBackend::parse(diag_flags.backend);
      diag.seed = diag_flags.seed;
      diag.threads = resolve_threads(diag_flags.threads);
      if (!diag_flags.out.empty()) {
        diag.out_csv = diag_flags.out;
      }
      cmd_diagnose(diag, out);
    }
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

} // namespace interpnn::cli
