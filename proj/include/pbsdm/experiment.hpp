#pragma once

// The replication experiment: every (scenario, method, link) cell fitted on
// every simulated replication, plus CLK prevalence-sensitivity fits, with
// per-cell result files, a resumable manifest and the report tables/plots.

#include "pbsdm/eval.hpp"

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace pbsdm {

inline constexpr const char* kVersion = "1.0.0";

struct MethodSpec {
  LikelihoodKind kind = LikelihoodKind::LK;
  LinkKind link = LinkKind::logit;

  std::string label() const;  // "LK-logit"
  bool operator==(const MethodSpec&) const = default;
};

// LK and LI under logit and log, CLK under all three links.
std::vector<MethodSpec> default_methods();
// Cross product; throws ConfigError for combinations that cannot be fitted.
std::vector<MethodSpec> cross_methods(const std::vector<LikelihoodKind>& kinds,
                                      const std::vector<LinkKind>& links);
// "lk:logit,clk:log"
std::vector<MethodSpec> parse_method_list(std::string_view text);

struct PrevalenceSource {
  enum class Kind { truth, value, file };
  Kind kind = Kind::truth;
  double value = 0.0;
  std::filesystem::path file;
  std::map<ScenarioKind, double> table;  // loaded from `file`

  // "true", "value:0.3", "file:path.csv" (CSV columns scenario,pi0).
  static PrevalenceSource parse(std::string_view text);
  double pi0(const Scenario& scenario) const;  // throws ConfigError if missing
  std::string describe() const;
};

struct ExperimentConfig {
  std::vector<ScenarioKind> scenarios{kAllScenarios.begin(), kAllScenarios.end()};
  std::vector<MethodSpec> methods = default_methods();
  SimConfig sim;
  OptimSettings optim;
  PrevalenceSource prevalence;
  double sensitivity_shift = 0.1;  // CLK refits at pi0 -/+ shift on replication 0; 0 disables
  int threads = 1;
  int grid_size = kCurveGridSize;
  std::filesystem::path out_dir = "results";

  void validate() const;          // throws ConfigError
  std::string canonical() const;  // stable text form, hashed into the manifest
};

std::uint64_t fnv1a(std::string_view text);

// Sensitivity prevalences are clamped into this range.
inline constexpr double kPi0Min = 0.001;
inline constexpr double kPi0Max = 0.999;
double shifted_pi0(double pi0, double shift);

struct ExperimentOutcome {
  int cells_ok = 0;
  int cells_nonconverged = 0;  // every fit ran, some did not converge
  int cells_failed = 0;        // some replication raised an error
  int cells_reused = 0;        // loaded from a previous run
  std::vector<std::string> problems;

  bool ok() const { return cells_nonconverged == 0 && cells_failed == 0; }
};

// Runs (or resumes) the experiment under config.out_dir and writes the reports.
// Throws IoError if the output directory cannot be written.
ExperimentOutcome run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

// Regenerates summary.csv, rms.csv, ratio_curves.csv, sensitivity.csv,
// fits.csv, rspf.csv and the SVG plots from the cell files of a finished run.
void write_reports(const std::filesystem::path& out_dir);

// Key/value manifest ("key = value" lines, sorted).
std::map<std::string, std::string> read_manifest(const std::filesystem::path& path);

}  // namespace pbsdm
