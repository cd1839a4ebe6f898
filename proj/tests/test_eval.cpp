#include <doctest.h>

#include "pbsdm/errors.hpp"
#include "pbsdm/eval.hpp"
#include "pbsdm/fit.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace pbsdm;
using namespace pbsdm::testing;

namespace {

FitResult fit_with(std::initializer_list<double> beta, bool identifiable = true) {
  FitResult f;
  f.beta_hat = Vector(static_cast<Eigen::Index>(beta.size()));
  Eigen::Index i = 0;
  for (double b : beta) f.beta_hat[i++] = b;
  f.identifiable = identifiable;
  return f;
}

}  // namespace

TEST_CASE("grid") {
  const Vector g = unit_grid(1001);
  CHECK(g.size() == 1001);
  CHECK(g[0] == 0.0);
  CHECK(g[1000] == 1.0);
  CHECK(g[500] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(unit_grid(1), ConfigError);
}

TEST_CASE("RMS error") {
  SUBCASE("exact fit scores zero") {
    // Logistic-2 is logit-linear: (-4, 8)
    const Scenario sc(ScenarioKind::Logistic2);
    const ModelSpec m(LinkKind::logit, DesignSpec::linear());
    CHECK(rms_error(Params{{-4.0, 8.0}}, m, sc) < 1e-15);
    // Exponential is log-linear: (-4, 4)
    CHECK(rms_error(Params{{-4.0, 4.0}}, ModelSpec(LinkKind::log, DesignSpec::linear()),
                    Scenario(ScenarioKind::Exponential)) < 1e-15);
  }
  SUBCASE("constant offset") {
    // Constant species at 0.3; log-link intercept-only fit at 0.4.
    const ModelSpec m(LinkKind::log, DesignSpec::intercept_only());
    CHECK(rms_error(Params{{std::log(0.4)}}, m, Scenario(ScenarioKind::Constant)) ==
          doctest::Approx(0.1).epsilon(1e-14));
  }
  SUBCASE("non-negative") {
    SplitMix64 rng(3);
    const ModelSpec m(LinkKind::cloglog, DesignSpec::quadratic());
    for (int k = 0; k < 20; ++k)
      CHECK(rms_error(random_vector(rng, 3, -3, 3), m, Scenario(ScenarioKind::Gaussian)) > 0.0);
  }
}

TEST_CASE("ratio curves") {
  SplitMix64 rng(4);
  const Dataset d = random_dataset(rng, 30, 200);
  SUBCASE("intercept-only is identically one") {
    for (LinkKind link : {LinkKind::logit, LinkKind::log, LinkKind::cloglog}) {
      const RatioCurve rc = ratio_curve(Params{{-1.3}}, ModelSpec(link, DesignSpec::intercept_only()), d, 101);
      CHECK((rc.ratio.array() - 1.0).abs().maxCoeff() < 1e-14);
    }
  }
  SUBCASE("log link is invariant to the intercept") {
    const ModelSpec m(LinkKind::log, DesignSpec::quadratic());
    for (int k = 0; k < 20; ++k) {
      Params beta = random_vector(rng, 3, -2, 2);
      const RatioCurve a = ratio_curve(beta, m, d);
      beta[0] += rng.uniform(-5, 5);
      const RatioCurve b = ratio_curve(beta, m, d);
      CHECK((a.ratio - b.ratio).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("pi_hat is the background mean") {
    const ModelSpec m(LinkKind::logit, DesignSpec::linear());
    const RatioCurve rc = ratio_curve(Params{{0.2, -1.0}}, m, d, 11);
    double mean = 0;
    for (Eigen::Index j = 0; j < d.background_x().rows(); ++j)
      mean += prob(LinkKind::logit, 0.2 - d.background_x()(j, 0));
    CHECK(rc.pi_hat == doctest::Approx(mean / 200).epsilon(1e-14));
  }
  SUBCASE("clamped intercept keeps a positive background mean") {
    const ModelSpec m(LinkKind::log, DesignSpec::intercept_only());
    const RatioCurve rc = ratio_curve(Params{{-800.0}}, m, d, 5);
    CHECK(rc.pi_hat > 0.0);
    CHECK((rc.ratio.array() - 1.0).abs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("summaries") {
  const std::vector<std::string> one{"beta0"};
  SUBCASE("mean and sample SD") {
    const Summary s = summarize({fit_with({1.0}), fit_with({3.0})}, one);
    CHECK(s.coefs[0].mean == 2.0);
    CHECK(s.coefs[0].se == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(s.retained == 2);
    CHECK(s.removed == 0);
  }
  SUBCASE("unidentifiable fits are removed") {
    const Summary s = summarize({fit_with({1.0}), fit_with({100.0}, false), fit_with({3.0})}, one);
    CHECK(s.removed == 1);
    CHECK(s.retained == 2);
    CHECK(s.coefs[0].mean == 2.0);
  }
  SUBCASE("single retained fit has undefined SE") {
    const Summary s = summarize({fit_with({1.5})}, one);
    CHECK(std::isnan(s.coefs[0].se));
  }
  SUBCASE("everything removed") {
    CHECK_THROWS_AS(summarize({fit_with({1.0}, false)}, one), EvaluationError);
  }
  SUBCASE("prevalence column") {
    FitResult f = fit_with({-1.0, 2.0});
    f.pi_hat = 0.25;
    const Summary s = summarize({f, f}, coefficient_names(DesignSpec::linear(), true));
    REQUIRE(s.coefs.size() == 3);
    CHECK(s.coefs[2].name == "pi");
    CHECK(s.coefs[2].mean == 0.25);
    CHECK(s.coefs[2].se == 0.0);
    CHECK_THROWS_AS(summarize({f}, one), ConfigError);
  }
  SUBCASE("permutation invariance") {
    SplitMix64 rng(9);
    std::vector<FitResult> fits;
    for (int k = 0; k < 40; ++k) fits.push_back(fit_with({rng.uniform(-5, 5), rng.uniform(0, 9)}, k % 7 != 0));
    const auto names = coefficient_names(DesignSpec::linear(), false);
    const Summary a = summarize(fits, names);
    std::mt19937 shuffle_rng(1);
    std::shuffle(fits.begin(), fits.end(), shuffle_rng);
    const Summary b = summarize(fits, names);
    CHECK(a.removed == b.removed);
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(a.coefs[c].mean == doctest::Approx(b.coefs[c].mean).epsilon(1e-14));
      CHECK(a.coefs[c].se == doctest::Approx(b.coefs[c].se).epsilon(1e-14));
    }
  }
}

TEST_CASE("screening policy") {
  FitResult f = fit_with({0.0, 3.0});
  f.identifiable = false;
  f.hessian = Matrix::Zero(2, 2);
  f.hessian(1, 1) = -50;  // flat intercept, curved slope
  const ModelSpec log_lin(LinkKind::log, DesignSpec::linear());
  CHECK(screen_for(LikelihoodKind::LK, log_lin)(f));
  CHECK_FALSE(screen_for(LikelihoodKind::LK, ModelSpec(LinkKind::logit, DesignSpec::linear()))(f));
  CHECK_FALSE(screen_for(LikelihoodKind::CLK, log_lin.with_constraint(0.2))(f));
}

TEST_CASE("RSPF log-curvature screen") {
  const RspfScreen e = rspf_screen(Scenario(ScenarioKind::Exponential));
  REQUIRE(e.deviation);
  CHECK(*e.deviation < 1e-14);
  CHECK_FALSE(e.log_nonlinear);
  CHECK(*rspf_screen(Scenario(ScenarioKind::Constant)).deviation == 0.0);
  // log p = log 0.75 - (4x-2)^2 against a flat secant: gap 4 at x = 0.5
  const RspfScreen g = rspf_screen(Scenario(ScenarioKind::Gaussian));
  CHECK(*g.deviation == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(g.log_nonlinear);

  std::vector<ScenarioKind> flagged;
  for (ScenarioKind k : kAllScenarios)
    if (rspf_screen(Scenario(k)).log_nonlinear) flagged.push_back(k);
  CHECK(flagged == std::vector<ScenarioKind>{ScenarioKind::Quadratic, ScenarioKind::Gaussian,
                                              ScenarioKind::Logistic2});
}

TEST_CASE("logit ratio curves of LK and CLK agree on Logistic2") {
  const Scenario sc(ScenarioKind::Logistic2);
  SimConfig cfg;
  cfg.seed = 5;
  const Dataset data = simulate_dataset(sc, cfg, 0);
  OptimSettings s;
  const ModelSpec lk(LinkKind::logit, sc.fitting_design());
  const ModelSpec clk(LinkKind::logit, sc.fitting_design(), sc.prevalence());
  const RatioCurve a = ratio_curve(fit_method(LikelihoodKind::LK, lk, data, s).beta_hat, lk, data, kCurveGridSize);
  const RatioCurve b = ratio_curve(fit_method(LikelihoodKind::CLK, clk, data, s).beta_hat, clk, data, kCurveGridSize);
  CHECK((a.ratio - b.ratio).cwiseAbs().maxCoeff() < 0.1);
}
