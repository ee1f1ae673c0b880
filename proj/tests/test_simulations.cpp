#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "interpnn/simulations.hpp"
#include "oracles.hpp"

using namespace interpnn;

namespace {

// Multivariate normal density with identity covariance, up to the shared constant.
double isotropic_density(std::span<const double> x, double mean) {
  double s = 0.0;
  for (double v : x) {
    s += (v - mean) * (v - mean);
  }
  return std::exp(-0.5 * s);
}

} // namespace

TEST_CASE("Student t5 draws") {
  RandomStream stream(2024);
  const std::size_t draws = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double t = draw_student_t5(stream);
    sum += t;
    sum_sq += t * t;
  }
  const double mean = sum / static_cast<double>(draws);
  const double var = sum_sq / static_cast<double>(draws) - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 5.0 / 3.0) < 0.02);

  RandomStream a(77), b(77);
  CHECK(draw_student_t5(a) == draw_student_t5(b));
}

TEST_CASE("Model 1 target matches the Gaussian density ratio") {
  const std::vector<double> zero(10, 0.0);
  CHECK(model1_psi(zero) == doctest::Approx(0.0066929).epsilon(1e-4));
  CHECK(model1_psi(zero) == doctest::Approx(1.0 / (1.0 + std::exp(5.0))).epsilon(1e-14));

  std::vector<double> half(10, 0.5);
  CHECK(model1_psi(half) == doctest::Approx(0.5).epsilon(1e-15));

  RandomStream stream(1);
  const Scenario model1(ScenarioSpec{RegressionModel1{}, 16, 0});
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(10);
    for (double &v : x) {
      v = stream.uniform(-3.0, 3.0);
    }
    const double one = isotropic_density(x, 1.0);
    const double zero_mean = isotropic_density(x, 0.0);
    const double psi = model1.truth(x);
    REQUIRE(psi == doctest::Approx(one / (one + zero_mean)).epsilon(1e-12));
    REQUIRE(psi > 0.0);
    REQUIRE(psi < 1.0);
  }
}

TEST_CASE("Gaussian mixture closed forms") {
  CHECK(gaussian_bayes_risk(1.0) == doctest::Approx(0.13178).epsilon(1e-4));
  CHECK(std::abs(gaussian_bayes_risk(1.0) - oracle::normal_cdf(-std::sqrt(5.0) / 2.0)) < 1e-12);
  CHECK(std::abs(gaussian_bayes_risk(2.0, 3) - oracle::normal_cdf(-std::sqrt(3.0))) < 1e-12);

  RandomStream stream(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(5);
    for (double &v : x) {
      v = 2.0 * stream.normal();
    }
    const double gamma = 0.2 + stream.uniform(0.0, 2.0);
    double s0 = 0.0, s1 = 0.0;
    for (double v : x) {
      s0 += v * v;
      s1 += (v - gamma) * (v - gamma);
    }
    const double posterior = 1.0 / (1.0 + std::exp(-0.5 * s0 + 0.5 * s1));
    REQUIRE(gaussian_class_probability(x, gamma) == doctest::Approx(posterior).epsilon(1e-10));
  }
}

TEST_CASE("property: mixture labels agree with Bernoulli(eta) per bin") {
  const ScenarioSpec spec{GaussianClassification{1.0}, 100000, 9};
  const Scenario scenario(spec);
  RandomStream stream(123);
  const Sample s = scenario.draw_test(100000, stream);
  constexpr int kBins = 8;
  std::array<double, kBins> count{}, labels{}, eta_sum{}, eta_var{};
  for (std::size_t i = 0; i < s.responses.size(); ++i) {
    const auto row = s.features.row(i);
    const double z = std::accumulate(row.begin(), row.end(), 0.0);
    const int bin = std::clamp(static_cast<int>(std::floor((z + 6.0) / 2.0)), 0, kBins - 1);
    count[bin] += 1.0;
    labels[bin] += s.responses[i];
    eta_sum[bin] += s.eta[i];
    eta_var[bin] += s.eta[i] * (1.0 - s.eta[i]);
  }
  for (int b = 0; b < kBins; ++b) {
    if (count[b] < 200) {
      continue;
    }
    const double se = std::sqrt(eta_var[b]);
    CHECK(std::abs(labels[b] - eta_sum[b]) <= 3.0 * se + 1e-9);
  }
}

TEST_CASE("scenario generation") {
  SUBCASE("toy zero truth") {
    const GeneratedData data = generate({ToyAppendix{ToyTruth::Zero}, 31, 5});
    CHECK(data.dataset.n() == 31);
    for (std::size_t i = 0; i < 31; ++i) {
      CHECK(data.dataset.row(i)[0] == doctest::Approx(-5.0 + static_cast<double>(i)).epsilon(1e-14));
      CHECK(data.truth(data.dataset.row(i)) == 0.0);
    }
  }
  SUBCASE("toy noiseless square") {
    const GeneratedData data = generate({ToyAppendix{ToyTruth::Square}, 31, 5});
    for (std::size_t i = 0; i < 31; ++i) {
      const double x = data.dataset.row(i)[0];
      CHECK(data.dataset.response(i) == x * x);
    }
  }
  SUBCASE("pure function of the spec") {
    const ScenarioSpec spec{RegressionModel2{}, 64, 11};
    const GeneratedData a = generate(spec);
    const GeneratedData b = generate(spec);
    CHECK(a.dataset.features() == b.dataset.features());
    CHECK(std::ranges::equal(a.dataset.responses(), b.dataset.responses()));
    CHECK(a.dataset.d() == 5);
    const GeneratedData c = generate({RegressionModel2{}, 64, 12});
    CHECK_FALSE(std::ranges::equal(a.dataset.responses(), c.dataset.responses()));
  }
  SUBCASE("rate target is bounded and noise scale zero removes noise") {
    const ScenarioSpec spec{SyntheticRate{1.0, 2}, 200, 3, 0.0};
    const GeneratedData data = generate(spec);
    for (std::size_t i = 0; i < data.dataset.n(); ++i) {
      const double y = data.dataset.response(i);
      CHECK(y == data.truth(data.dataset.row(i)));
      CHECK(y >= 0.0);
      CHECK(y <= 1.0);
    }
  }
  SUBCASE("invalid specs") {
    CHECK_THROWS_AS(generate({RegressionModel1{}, 3, 0}), std::invalid_argument);
    CHECK_THROWS_AS(generate({GaussianClassification{0.0}, 10, 0}), std::invalid_argument);
    CHECK_THROWS_AS(generate({SyntheticRate{0.0, 2}, 10, 0}), std::invalid_argument);
    CHECK_THROWS_AS(generate({SyntheticRate{1.0, 0}, 10, 0}), std::invalid_argument);
    CHECK_THROWS_AS(generate({RegressionModel1{}, 10, 0, -1.0}), std::invalid_argument);
    CHECK_THROWS_AS(parse_toy_truth("cubic"), std::invalid_argument);
  }
}

TEST_CASE("k grid parsing") {
  CHECK(KGrid::parse("1:5").resolve(10) == std::vector<std::size_t>{1, 2, 3, 4, 5});
  CHECK(KGrid::parse("1:9:4,2").resolve(10) == std::vector<std::size_t>{1, 2, 5, 9});
  CHECK(KGrid::parse("half").resolve(9) == std::vector<std::size_t>{1, 2, 3, 4});
  CHECK(KGrid::parse("7").resolve(8) == std::vector<std::size_t>{7});
  CHECK_THROWS_AS(KGrid::parse("8").resolve(8), std::invalid_argument);
  CHECK_THROWS_AS(KGrid::parse("0").resolve(8), std::invalid_argument);
  CHECK_THROWS_AS(KGrid::parse("5:2"), std::invalid_argument);
  CHECK_THROWS_AS(KGrid::parse("1:4:0"), std::invalid_argument);
  CHECK_THROWS_AS(KGrid::parse("a"), std::invalid_argument);
  CHECK_THROWS_AS(KGrid::parse(""), std::invalid_argument);
}

TEST_CASE("sweep worked examples") {
  const std::vector<WeightScheme> uniform{WeightScheme::uniform()};
  SUBCASE("noiseless constant target") {
    const ScenarioSpec spec{ToyAppendix{ToyTruth::Zero}, 31, 0, 0.0};
    const SweepResult r = sweep(spec, uniform, KGrid::list({1}), {1, 50, 3});
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].metric_name == "mse");
    CHECK(r.rows[0].metric_value == 0.0);
    CHECK(*r.rows[0].variance_proxy == 0.0);
    CHECK(r.optimal(31, "uniform").optimal_metric == 0.0);
  }
  SUBCASE("argument errors") {
    const ScenarioSpec spec{RegressionModel2{}, 20, 0};
    CHECK_THROWS_AS(sweep(spec, uniform, KGrid::list({20}), {}), std::invalid_argument);
    CHECK_THROWS_AS(sweep(spec, {}, KGrid::list({2}), {}), std::invalid_argument);
    CHECK_THROWS_AS(sweep(spec, uniform, KGrid::list({2}), {0, 10}), std::invalid_argument);
    CHECK_THROWS_AS(sweep(spec, uniform, KGrid::list({2}), {1, 0}), std::invalid_argument);
  }
  SUBCASE("toy zero truth favours uniform at k = 10") {
    const std::vector<WeightScheme> schemes{WeightScheme::uniform(), WeightScheme::log_interpolated(1.0),
                                            WeightScheme::power_interpolated(1.0)};
    const SweepResult r = sweep({ToyAppendix{ToyTruth::Zero}, 31, 0}, schemes, KGrid::list({10}), {20, 500, 8});
    const double u = r.optimal(31, "uniform").optimal_metric;
    CHECK(u < r.optimal(31, "log:1").optimal_metric);
    CHECK(u < r.optimal(31, "power:1").optimal_metric);
  }
}

TEST_CASE("sweep determinism and bookkeeping") {
  const std::vector<WeightScheme> schemes{WeightScheme::uniform(), WeightScheme::log_interpolated()};
  for (const ScenarioSpec &spec : {ScenarioSpec{RegressionModel1{}, 80, 0}, ScenarioSpec{GaussianClassification{1.0}, 80, 0}}) {
    SweepOptions options{3, 100, 99};
    const SweepResult one = sweep(spec, schemes, KGrid::half(), options);
    options.threads = 4;
    const SweepResult four = sweep(spec, schemes, KGrid::half(), options);
    options.backend = BruteForce{};
    const SweepResult brute = sweep(spec, schemes, KGrid::half(), options);
    CHECK(one == four);
    CHECK(one == brute);
    options.base_seed = 100;
    CHECK_FALSE(one == sweep(spec, schemes, KGrid::half(), options));

    for (const auto &summary : one.summary) {
      for (const auto &avg : one.averages) {
        if (avg.n == summary.n && avg.scheme == summary.scheme && avg.metric_name == one.primary_metric) {
          REQUIRE(summary.optimal_metric <= avg.mean);
          if (avg.mean == summary.optimal_metric) {
            REQUIRE(summary.optimal_k <= avg.k);
          }
        }
      }
      CHECK(one.average(summary.n, summary.scheme, summary.optimal_k) == summary.optimal_metric);
    }
  }
}

TEST_CASE("property: sweep truncation matches direct k-queries") {
  const std::vector<WeightScheme> schemes{WeightScheme::uniform(), WeightScheme::log_interpolated(),
                                          WeightScheme::power_interpolated(1.0)};
  const std::size_t n = 60, m = 40;
  const std::uint64_t base = 5;

  SUBCASE("regression") {
    const ScenarioSpec spec{RegressionModel2{}, n, 0};
    const SweepResult r = sweep(spec, schemes, KGrid::parse("1:20"), {1, m, base, KdTree{}, 1, 0.7});
    const Scenario scenario(spec);
    const std::uint64_t rep_seed = derive_seed(derive_seed(base, n), 0);
    RandomStream train_stream(derive_seed(rep_seed, 0)), test_stream(derive_seed(rep_seed, 1));
    Sample train = scenario.draw_train(n, train_stream);
    const Sample test = scenario.draw_test(m, test_stream);
    const Dataset data(std::move(train.features), std::move(train.responses), Task::Regression);
    for (const auto &row : r.rows) {
      const WeightScheme scheme = WeightScheme::parse(row.scheme);
      const auto direct =
          bias_variance(scenario.truth_function(), data, test.features, {row.k, scheme, BruteForce{}, Task::Regression}, 0.7);
      REQUIRE(row.metric_value == doctest::Approx(direct.mse).epsilon(1e-12));
      REQUIRE(*row.bias_proxy == doctest::Approx(direct.bias_proxy).epsilon(1e-11));
      // The direct report uses responses minus the truth as residuals too.
      REQUIRE(*row.variance_proxy == doctest::Approx(direct.variance_proxy).epsilon(1e-11));
    }
  }
  SUBCASE("classification") {
    const ScenarioSpec spec{GaussianClassification{1.0}, n, 0};
    const SweepResult r = sweep(spec, schemes, KGrid::parse("1:20"), {1, m, base});
    const Scenario scenario(spec);
    const std::uint64_t rep_seed = derive_seed(derive_seed(base, n), 0);
    RandomStream train_stream(derive_seed(rep_seed, 0)), test_stream(derive_seed(rep_seed, 1));
    Sample train = scenario.draw_train(n, train_stream);
    const Sample test = scenario.draw_test(m, test_stream);
    const Dataset data(std::move(train.features), std::move(train.responses), Task::Classification);
    for (const auto &row : r.rows) {
      if (row.metric_name != "excess_risk") {
        continue;
      }
      const WeightScheme scheme = WeightScheme::parse(row.scheme);
      const double direct = excess_risk(scenario.truth_function(), data, test.features,
                                        {row.k, scheme, BruteForce{}, Task::Classification});
      INFO(row.k, " ", row.scheme);
      REQUIRE(row.metric_value == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}
