#include <doctest.h>

#include "pbsdm/cli.hpp"
#include "pbsdm/csv.hpp"
#include "pbsdm/experiment.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace pbsdm;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pbsdm_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::size_t count_files(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

}  // namespace

TEST_CASE("usage") {
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"experiment", "--reps", "two"}).code == kExitUsage);
  CHECK(cli({"--version"}).out.find(kVersion) != std::string::npos);
}

TEST_CASE("simulate") {
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  const auto args = [](const fs::path& out) {
    return std::vector<std::string>{"simulate", "--scenario", "logistic2", "--n1", "200", "--n0", "500",
                                    "--reps", "3", "--seed", "7", "--out", out.string()};
  };
  REQUIRE(cli(args(a)).code == 0);
  CHECK(count_files(a) == 2 * 3 + 1);
  const auto m = read_manifest(a / "manifest.txt");
  CHECK(m.at("seed") == "7");
  CHECK(m.at("n1") == "200");
  CHECK(m.count("scenario.logistic2.prevalence"));
  CHECK(read_csv(a / "logistic2_rep002_presence.csv").rows.size() == 200);
  REQUIRE(cli(args(b)).code == 0);
  for (const auto& e : fs::directory_iterator(a))
    CHECK_MESSAGE(slurp(e.path()) == slurp(b / e.path().filename()), e.path().filename().string());

  const Run bad = cli({"simulate", "--scenario", "logistic9", "--out", scratch("sim_c").string()});
  CHECK(bad.code == kExitUsage);
  CHECK(bad.err.find("logistic2") != std::string::npos);
  CHECK(bad.err.find("gaussian") != std::string::npos);

  const fs::path blocker = scratch("sim_blocker");
  { std::ofstream(blocker) << "x"; }
  const Run io = cli({"simulate", "--scenario", "constant", "--reps", "1", "--out", (blocker / "sub").string()});
  CHECK(io.code == kExitUsage);
  CHECK(io.err.find(blocker.string()) != std::string::npos);
  fs::remove(blocker);
}

TEST_CASE("fit") {
  const fs::path dir = scratch("fit");
  REQUIRE(cli({"simulate", "--scenario", "logistic2", "--reps", "1", "--seed", "7", "--out", dir.string()}).code == 0);
  const std::string pres = (dir / "logistic2_rep000_presence.csv").string();
  const std::string bg = (dir / "logistic2_rep000_background.csv").string();

  SUBCASE("CLK intercept-only returns logit(pi0)") {
    const Run r = cli({"fit", "--presence", pres, "--background", bg, "--methods", "clk", "--links", "logit",
                       "--design", "intercept", "--pi0", "0.3"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    REQUIRE(j["fits"].size() == 1);
    CHECK(j["fits"][0]["beta"]["beta0"].get<double>() == doctest::Approx(-0.847298).epsilon(1e-6));
    CHECK(j["fits"][0]["identifiable"].get<bool>());
  }
  SUBCASE("LK logit recovers the Logistic2 coefficients") {
    const fs::path report = dir / "fit.json";
    const Run r = cli({"fit", "--presence", pres, "--background", bg, "--methods", "lk:logit", "--out",
                       report.string()});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(slurp(report));
    const auto& beta = j["fits"][0]["beta"];
    // Sampling SDs at this size are about 0.243 and 0.777.
    CHECK(std::abs(beta["beta0"].get<double>() + 4.0) < 4 * 0.243);
    CHECK(std::abs(beta["beta1"].get<double>() - 8.0) < 4 * 0.777);
    CHECK(j["n1"] == 2000);
    CHECK(j["fits"][0]["converged"].get<bool>());
  }
  SUBCASE("every method and link") {
    const Run r = cli({"fit", "--presence", pres, "--background", bg, "--methods",
                       "lk,li,lele,emsb,ppmcond,clk", "--links", "logit,log,cloglog", "--pi0", "0.5"});
    CHECK(r.code == 0);
    CHECK(nlohmann::json::parse(r.out)["fits"].size() == 5 * 3 + 1);
  }
  SUBCASE("input errors") {
    CHECK(cli({"fit", "--presence", (dir / "missing.csv").string(), "--background", bg}).code == kExitUsage);
    std::ofstream(dir / "ragged.csv") << "x1\n0.1\n0.2\n0.3,0.4\n";
    const Run rag = cli({"fit", "--presence", (dir / "ragged.csv").string(), "--background", bg});
    CHECK(rag.code == kExitUsage);
    CHECK(rag.err.find(":4:") != std::string::npos);
    std::ofstream(dir / "nan.csv") << "x1\n0.1\nnan\n";
    CHECK(cli({"fit", "--presence", (dir / "nan.csv").string(), "--background", bg}).code == kExitUsage);
    CHECK(cli({"fit", "--presence", pres, "--background", bg, "--methods", "ppmcond:logit"}).code == kExitUsage);
    CHECK(cli({"fit", "--presence", pres, "--background", bg, "--methods", "clk"}).code == kExitUsage);
    CHECK(cli({"fit", "--presence", pres, "--background", bg, "--design", "quadratic2"}).code == kExitUsage);
  }
}

TEST_CASE("verify") {
  const Run r = cli({"verify"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  const Run j = cli({"verify", "--json"});
  REQUIRE(j.code == 0);
  const auto doc = nlohmann::json::parse(j.out);
  CHECK(doc["passed"].get<bool>());
  CHECK(doc["checks"].size() == 11);
  for (const auto& c : doc["checks"]) CHECK(c["max_error"].get<double>() < c["tolerance"].get<double>());
}

TEST_CASE("experiment smoke run at full size") {
  const fs::path dir = scratch("smoke");
  const auto t0 = std::chrono::steady_clock::now();
  const Run r = cli({"experiment", "--reps", "2", "--seed", "3", "--out", dir.string()});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE("smoke run took ", secs, " s");
  CHECK(r.code == 0);
  CHECK(secs < 60.0);
  CHECK(r.out.find("64 ok") != std::string::npos);
  for (const char* f : {"summary.csv", "rms.csv", "ratio_curves.csv", "sensitivity.csv", "rms.svg"})
    CHECK(fs::exists(dir / f));

  SUBCASE("report regenerates identical tables") {
    const std::string before = slurp(dir / "summary.csv");
    fs::remove(dir / "summary.csv");
    CHECK(cli({"report", "--out", dir.string()}).code == 0);
    CHECK(slurp(dir / "summary.csv") == before);
  }
}

TEST_CASE("experiment reruns are byte-identical") {
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  const auto args = [](const fs::path& out, const char* threads) {
    return std::vector<std::string>{"experiment", "--scenario", "linear,gaussian", "--n1", "300", "--n0", "3000",
                                    "--reps", "3", "--seed", "99", "--threads", threads, "--out", out.string()};
  };
  REQUIRE(cli(args(a, "1")).code == 0);
  REQUIRE(cli(args(b, "4")).code == 0);
  for (const char* f : {"summary.csv", "rms.csv", "fits.csv", "ratio_curves.csv", "sensitivity.csv", "manifest.txt"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  // Same directory: every cell is reused and summary.csv is unchanged.
  const std::string before = slurp(a / "summary.csv");
  const Run again = cli(args(a, "1"));
  CHECK(again.out.find("16 reused") != std::string::npos);
  CHECK(slurp(a / "summary.csv") == before);
}

TEST_CASE("experiment method selection and config file") {
  const fs::path dir = scratch("select");
  const fs::path ini = scratch("select.ini");
  std::ofstream(ini) << "[sim]\nscenarios = exponential\nn1 = 200\nn0 = 2000\nreps = 5\n\n[run]\nseed = 4\n";
  const Run r = cli({"experiment", "--config", ini.string(), "--methods", "lk,li", "--links", "log", "--reps", "2",
                     "--out", dir.string()});
  REQUIRE(r.code == 0);
  const CsvTable t = read_csv(dir / "summary.csv");
  std::set<std::string> methods;
  for (const auto& row : t.rows) methods.insert(row[1] + "-" + row[2]);
  CHECK(methods == std::set<std::string>{"LK-log", "LI-log"});
  const auto m = read_manifest(dir / "manifest.txt");
  CHECK(m.at("config.reps") == "2");  // flag beats file
  CHECK(m.at("config.seed") == "4");
  CHECK(m.at("config.scenarios") == "Exponential");
  CHECK(!fs::exists(dir / "cells" / "exponential__sensitivity.csv"));  // no CLK method

  std::ofstream(ini) << "[sim]\nreplications = 5\n";
  CHECK(cli({"experiment", "--config", ini.string(), "--out", dir.string()}).code == kExitUsage);
  CHECK(cli({"experiment", "--config", (dir / "none.ini").string()}).code == kExitUsage);
  CHECK(cli({"experiment", "--pi0", "value:2", "--out", dir.string()}).code == kExitUsage);
  CHECK(cli({"report", "--out", (dir / "nothing").string()}).code == kExitUsage);
  fs::remove(ini);
}
