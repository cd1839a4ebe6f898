#pragma once

// The eight simulated species of the replication study: true probability of
// presence on x in [0,1], prevalence under uniform F(x), and samplers.

#include "pbsdm/likelihood.hpp"
#include "pbsdm/rng.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace pbsdm {

enum class ScenarioKind {
  Constant,
  Linear,
  Exponential,
  Quadratic,
  Gaussian,
  SemiLogistic,
  Logistic1,
  Logistic2,
};

inline constexpr std::array<ScenarioKind, 8> kAllScenarios = {
    ScenarioKind::Constant,  ScenarioKind::Linear,       ScenarioKind::Exponential,
    ScenarioKind::Quadratic, ScenarioKind::Gaussian,     ScenarioKind::SemiLogistic,
    ScenarioKind::Logistic1, ScenarioKind::Logistic2,
};

std::string_view to_string(ScenarioKind kind);
// Case-insensitive; accepts "logistic2", "Logistic-2", "semi-logistic", ...
ScenarioKind parse_scenario(std::string_view name);  // throws ConfigError
std::string scenario_names();                        // comma-separated valid names

// Formula value; throws DomainError for x outside [0,1].
double true_prob(ScenarioKind kind, double x);

class Scenario {
 public:
  explicit Scenario(ScenarioKind kind);

  ScenarioKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return to_string(kind_); }
  double true_prob(double x) const { return pbsdm::true_prob(kind_, x); }
  double prevalence() const noexcept { return prevalence_; }
  // Rejection envelope: grid supremum of true_prob, inflated by 1e-12.
  double envelope() const noexcept { return envelope_; }
  // Design used to fit this species (quadratic for Quadratic and Gaussian).
  DesignSpec fitting_design() const;

 private:
  ScenarioKind kind_;
  double prevalence_;
  double envelope_;
};

// Adaptive Gauss-Kronrod integral of true_prob over [0,1].
double prevalence(ScenarioKind kind);

struct SimConfig {
  std::int64_t n_presence = 2000;
  std::int64_t n_background = 20000;
  std::int64_t replications = 100;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

// n draws from p(x|y=1) by rejection from Uniform[0,1]; n x 1 matrix.
Matrix sample_presence(const Scenario& scenario, std::int64_t n, SplitMix64& rng);
Matrix sample_background(std::int64_t n, SplitMix64& rng);

// Seed of the dataset for replication `rep` of `kind` under a run seed.
std::uint64_t dataset_seed(std::uint64_t run_seed, ScenarioKind kind, std::int64_t rep);

// Presence and background drawn from independent substreams of dataset_seed.
Dataset simulate_dataset(const Scenario& scenario, const SimConfig& config, std::int64_t rep);

// Covariate CSV: header x1..xd, one row per site.
void write_covariates_csv(const std::filesystem::path& path, const Matrix& x);
Matrix read_covariates_csv(const std::filesystem::path& path);  // DataError / IoError

}  // namespace pbsdm
