#include <doctest.h>

#include "pbsdm/errors.hpp"
#include "pbsdm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

using namespace pbsdm;

TEST_CASE("prevalence matches closed forms") {
  // mpmath, 30 digits
  const std::pair<ScenarioKind, double> expect[] = {
      {ScenarioKind::Constant, 0.3},
      {ScenarioKind::Linear, 0.15},
      {ScenarioKind::Exponential, 0.245421090277816455},
      {ScenarioKind::Quadratic, 0.388916666666666667},
      {ScenarioKind::Gaussian, 0.330780521535908130},
      {ScenarioKind::SemiLogistic, 0.435112332500651024},
      {ScenarioKind::Logistic1, 0.054389041562581378},
      {ScenarioKind::Logistic2, 0.5},
  };
  for (auto [kind, value] : expect) {
    INFO(to_string(kind));
    CHECK(std::abs(prevalence(kind) - value) < 1e-9);
    CHECK(Scenario(kind).prevalence() == prevalence(kind));
  }
}

TEST_CASE("true probability golden values") {
  const double xs[] = {0, 0.25, 0.5, 0.75, 1};
  const std::pair<ScenarioKind, std::array<double, 5>> golden[] = {
      {ScenarioKind::Constant, {0.3, 0.3, 0.3, 0.3, 0.3}},
      {ScenarioKind::Linear, {0.05, 0.1, 0.15, 0.2, 0.25}},
      {ScenarioKind::Exponential,
       {0.018315638888734180, 0.049787068367863943, 0.13533528323661269, 0.36787944117144232, 1.0}},
      {ScenarioKind::Quadratic, {0.16675, 0.4166875, 0.5, 0.4166875, 0.16675}},
      {ScenarioKind::Gaussian,
       {0.013736729166550635, 0.27590958087858174, 0.75, 0.27590958087858174, 0.013736729166550635}},
      {ScenarioKind::SemiLogistic,
       {0.14388967969673246, 0.23449784601085055, 0.37940698542053425, 0.60686544016994841,
        0.95362337617694045}},
      {ScenarioKind::Logistic1,
       {0.017986209962091558, 0.029312230751356319, 0.047425873177566781, 0.075858180021243551,
        0.11920292202211756}},
      {ScenarioKind::Logistic2,
       {0.017986209962091558, 0.11920292202211756, 0.5, 0.88079707797788244, 0.98201379003790844}},
  };
  for (const auto& [kind, values] : golden) {
    for (int i = 0; i < 5; ++i) {
      INFO(to_string(kind), " x=", xs[i]);
      CHECK(true_prob(kind, xs[i]) == doctest::Approx(values[i]).epsilon(1e-14));
    }
  }
  CHECK_THROWS_AS(true_prob(ScenarioKind::Linear, 1.5), DomainError);
}

TEST_CASE("scenario names") {
  CHECK(parse_scenario("logistic2") == ScenarioKind::Logistic2);
  CHECK(parse_scenario("Logistic-2") == ScenarioKind::Logistic2);
  CHECK(parse_scenario("semi-logistic") == ScenarioKind::SemiLogistic);
  CHECK(parse_scenario("GAUSSIAN") == ScenarioKind::Gaussian);
  for (ScenarioKind k : kAllScenarios) CHECK(parse_scenario(to_string(k)) == k);
  CHECK_THROWS_AS(parse_scenario("cubic"), ConfigError);
  CHECK(scenario_names().find("logistic2") != std::string::npos);
  CHECK(Scenario(ScenarioKind::Gaussian).fitting_design().width() == 3);
  CHECK(Scenario(ScenarioKind::Linear).fitting_design().width() == 2);
}

TEST_CASE("Constant presence draws are uniform") {
  SplitMix64 rng(77);
  const int n = 100000;
  const Matrix x = sample_presence(Scenario(ScenarioKind::Constant), n, rng);
  std::vector<double> v(x.data(), x.data() + n);
  std::sort(v.begin(), v.end());
  double ks = 0;
  for (int i = 0; i < n; ++i)
    ks = std::max({ks, std::abs((i + 1.0) / n - v[i]), std::abs(v[i] - static_cast<double>(i) / n)});
  CHECK(ks < 1.63 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("Logistic-2 presence draws follow p(x|y=1)") {
  SplitMix64 rng(78);
  const int n = 200000;
  const Matrix x = sample_presence(Scenario(ScenarioKind::Logistic2), n, rng);
  // E[x | y=1] = int x p(x) dx / 0.5, by mpmath
  const double mean_exact = 0.704272820451069298;
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().sum() / (n - 1));
  CHECK(std::abs(mean - mean_exact) < 3 * sd / std::sqrt(static_cast<double>(n)));

  // binned density against the normalised true probability
  const int bins = 20;
  std::vector<double> count(bins, 0.0);
  for (int i = 0; i < n; ++i) count[std::min(bins - 1, static_cast<int>(x(i, 0) * bins))] += 1;
  const Scenario sc(ScenarioKind::Logistic2);
  double worst = 0;
  for (int b = 0; b < bins; ++b) {
    double mass = 0;  // midpoint rule on 100 sub-points
    for (int k = 0; k < 100; ++k) mass += sc.true_prob((b + (k + 0.5) / 100.0) / bins);
    mass /= 100.0 * bins * sc.prevalence();
    worst = std::max(worst, std::abs(count[b] / n - mass));
  }
  CHECK(worst < 0.01);
}

TEST_CASE("background draws") {
  SplitMix64 rng(79);
  const Matrix b = sample_background(1000000, rng);
  CHECK(std::abs(b.mean() - 0.5) < 0.002);
  CHECK(b.minCoeff() >= 0.0);
  CHECK(b.maxCoeff() < 1.0);
}

TEST_CASE("simulation is deterministic in the seed") {
  SimConfig cfg;
  cfg.n_presence = 50;
  cfg.n_background = 200;
  cfg.seed = 123;
  const Scenario sc(ScenarioKind::Gaussian);
  const Dataset a = simulate_dataset(sc, cfg, 3);
  const Dataset b = simulate_dataset(sc, cfg, 3);
  CHECK(a.presence_x() == b.presence_x());
  CHECK(a.background_x() == b.background_x());
  const Dataset c = simulate_dataset(sc, cfg, 4);
  CHECK(a.presence_x() != c.presence_x());
  CHECK(dataset_seed(123, ScenarioKind::Gaussian, 3) != dataset_seed(123, ScenarioKind::Quadratic, 3));
  cfg.n_presence = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("covariate CSV round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "pbsdm_test_simulate";
  std::filesystem::create_directories(dir);
  SplitMix64 rng(80);
  Matrix x(25, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform() * 1e-3 + rng.uniform();
  write_covariates_csv(dir / "x.csv", x);
  CHECK(read_covariates_csv(dir / "x.csv") == x);

  std::ofstream(dir / "ragged.csv") << "x1,x2\n0.1,0.2\n0.3\n";
  try {
    read_covariates_csv(dir / "ragged.csv");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  std::ofstream(dir / "bad.csv") << "x1\nabc\n";
  CHECK_THROWS_AS(read_covariates_csv(dir / "bad.csv"), DataError);
  CHECK_THROWS_AS(read_covariates_csv(dir / "missing.csv"), IoError);
  std::filesystem::remove_all(dir);
}
