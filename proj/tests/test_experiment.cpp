#include <doctest.h>

#include "../src/cell_io.hpp"
#include "pbsdm/csv.hpp"
#include "pbsdm/errors.hpp"
#include "pbsdm/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pbsdm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pbsdm_exp_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.scenarios = {ScenarioKind::Constant, ScenarioKind::Logistic2};
  c.sim.n_presence = 200;
  c.sim.n_background = 2000;
  c.sim.replications = 2;
  c.sim.seed = 11;
  c.out_dir = out;
  return c;
}

}  // namespace

TEST_CASE("method lists") {
  CHECK(default_methods().size() == 7);
  const auto m = parse_method_list("lk:logit, clk:log,lk:logit");
  REQUIRE(m.size() == 2);
  CHECK(m[1].label() == "CLK-log");
  CHECK_THROWS_AS(parse_method_list("ppmcond:logit"), ConfigError);
  CHECK_THROWS_AS(parse_method_list("lk"), ConfigError);
  CHECK_THROWS_AS(parse_method_list(""), ConfigError);
  CHECK(cross_methods({LikelihoodKind::LK, LikelihoodKind::LI}, {LinkKind::log}).size() == 2);
  CHECK_THROWS_AS(cross_methods({LikelihoodKind::PPMcond}, {LinkKind::logit, LinkKind::log}), ConfigError);
}

TEST_CASE("prevalence sources") {
  const Scenario sc(ScenarioKind::Logistic2);
  CHECK(PrevalenceSource::parse("true").pi0(sc) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(PrevalenceSource::parse("value:0.3").pi0(sc) == 0.3);
  CHECK_THROWS_AS(PrevalenceSource::parse("value:1.5"), ConfigError);
  CHECK_THROWS_AS(PrevalenceSource::parse("guess"), ConfigError);
  const fs::path dir = scratch("pi0");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "pi0.csv") << "scenario,pi0\nlogistic2,0.45\n";
  }
  const auto src = PrevalenceSource::parse("file:" + (dir / "pi0.csv").string());
  CHECK(src.pi0(sc) == 0.45);
  CHECK_THROWS_AS(src.pi0(Scenario(ScenarioKind::Constant)), ConfigError);
  CHECK_THROWS_AS(PrevalenceSource::parse("file:" + (dir / "missing.csv").string()), IoError);
}

TEST_CASE("sensitivity clamp") {
  CHECK(shifted_pi0(0.05, -0.1) == kPi0Min);
  CHECK(shifted_pi0(0.95, 0.1) == kPi0Max);
  CHECK(shifted_pi0(0.5, 0.1) == doctest::Approx(0.6));
}

TEST_CASE("config validation and hash") {
  ExperimentConfig c;
  c.validate();
  ExperimentConfig d = c;
  d.threads = 8;
  d.out_dir = "elsewhere";
  CHECK(c.canonical() == d.canonical());
  d.sim.seed = 1;
  CHECK(c.canonical() != d.canonical());
  d = c;
  d.threads = 0;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d = c;
  d.methods.clear();
  CHECK_THROWS_AS(d.validate(), ConfigError);
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("small experiment end to end") {
  const fs::path a = scratch("a"), b = scratch("b");
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentOutcome oa = run_experiment(small_config(a));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 60.0);
  CHECK(oa.cells_failed == 0);
  CHECK(oa.cells_ok + oa.cells_nonconverged == 16);  // 2 scenarios x (7 methods + sensitivity)
  CHECK(oa.cells_reused == 0);
  for (const char* f : {"summary.csv", "rms.csv", "ratio_curves.csv", "sensitivity.csv", "fits.csv", "rspf.csv",
                        "curves.csv", "rms.svg", "rspf.svg", "curves_logistic2.svg", "ratio_constant.svg",
                        "manifest.txt"})
    CHECK_MESSAGE(fs::exists(a / f), f);

  const auto manifest = read_manifest(a / "manifest.txt");
  CHECK(manifest.at("version") == kVersion);
  CHECK(manifest.count("assumption.presence_sampler"));
  CHECK(manifest.at("cell.logistic2__CLK-logit.status") != "pending");
  CHECK(manifest.at("cell.logistic2__LK-logit.dataset_seeds").find(';') != std::string::npos);

  SUBCASE("summary layout") {
    const CsvTable t = read_csv(a / "summary.csv");
    CHECK(t.header == std::vector<std::string>{"scenario", "method", "link", "coef", "mean", "se", "n_removed"});
    // Constant/Logistic2 fit a linear design: 2 coefficients, plus pi for LI.
    CHECK(t.rows.size() == 2 * (5 * 2 + 2 * 3));
  }
  SUBCASE("CLK fits honour the constraint") {
    const CsvTable t = read_csv(a / "fits.csv");
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < t.header.size(); ++i) col[t.header[i]] = i;
    int checked = 0;
    for (const auto& r : t.rows) {
      if (r[col["method"]] != "CLK" || r[col["converged"]] != "1") continue;
      const double pi0 = Scenario(parse_scenario(r[col["scenario"]])).prevalence();
      CHECK(std::abs(parse_double(r[col["background_mean"]]) - pi0) < 1e-6);
      ++checked;
    }
    CHECK(checked > 0);
  }
  SUBCASE("sensitivity rows") {
    const CsvTable t = read_csv(a / "sensitivity.csv");
    CHECK(t.rows.size() == 2 * 3 * 3);
  }
  SUBCASE("same config in a fresh directory, more threads: identical summary") {
    ExperimentConfig cb = small_config(b);
    cb.threads = 3;
    run_experiment(cb);
    CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
    CHECK(slurp(a / "fits.csv") == slurp(b / "fits.csv"));
    CHECK(slurp(a / "cells" / "logistic2__sensitivity.csv") == slurp(b / "cells" / "logistic2__sensitivity.csv"));
  }
  SUBCASE("resume reuses finished cells") {
    const std::string before = slurp(a / "summary.csv");
    const ExperimentOutcome again = run_experiment(small_config(a));
    CHECK(again.cells_reused == 16);
    CHECK(slurp(a / "summary.csv") == before);
  }
  SUBCASE("a cell marked failed is recomputed") {
    auto m = read_manifest(a / "manifest.txt");
    m["cell.constant__LK-logit.status"] = "failed";
    detail::write_manifest(a / "manifest.txt", m);
    const ExperimentOutcome again = run_experiment(small_config(a));
    CHECK(again.cells_reused == 15);
  }
  SUBCASE("a changed config recomputes everything") {
    ExperimentConfig c = small_config(a);
    c.sim.seed = 12;
    const ExperimentOutcome again = run_experiment(c);
    CHECK(again.cells_reused == 0);
  }
  SUBCASE("reports regenerate from the cell files") {
    const std::string before = slurp(a / "summary.csv");
    fs::remove(a / "summary.csv");
    write_reports(a);
    CHECK(slurp(a / "summary.csv") == before);
  }
}

TEST_CASE("cell files round trip") {
  const fs::path dir = scratch("cells");
  fs::create_directories(dir);
  detail::RepRecord ok;
  ok.rep = 0;
  ok.converged = ok.identifiable = ok.retained = true;
  ok.recip_cond = 0.125;
  ok.loglik = -1234.5678901234567;
  ok.constraint_residual = std::nan("");
  ok.pi_hat = 0.4;
  ok.beta = Vector::LinSpaced(2, -4.0, 8.0);
  detail::RepRecord bad;
  bad.rep = 1;
  bad.failed = true;
  bad.error = "stuck, badly\nreally";
  detail::write_rep_cell(dir / "c.csv", {ok, bad}, 2);
  const auto back = detail::read_rep_cell(dir / "c.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].loglik == ok.loglik);
  CHECK(std::isnan(back[0].constraint_residual));
  CHECK(back[0].beta == ok.beta);
  CHECK(back[1].failed);
  CHECK(back[1].error.find(',') == std::string::npos);
}

TEST_CASE("unwritable output directory") {
  const fs::path dir = scratch("blocked");
  { std::ofstream(dir) << "a file, not a directory"; }
  ExperimentConfig c = small_config(dir / "out");
  CHECK_THROWS_AS(run_experiment(c), IoError);
  fs::remove(dir);
}
