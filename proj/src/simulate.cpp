#include "pbsdm/simulate.hpp"

#include "pbsdm/csv.hpp"
#include "pbsdm/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace pbsdm {

namespace {

constexpr int kEnvelopeGrid = 10001;
constexpr double kMinAcceptance = 1e-4;

std::string normalise(std::string_view name) {
  std::string s;
  for (char c : name)
    if (std::isalnum(static_cast<unsigned char>(c)))
      s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return s;
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Constant: return "Constant";
    case ScenarioKind::Linear: return "Linear";
    case ScenarioKind::Exponential: return "Exponential";
    case ScenarioKind::Quadratic: return "Quadratic";
    case ScenarioKind::Gaussian: return "Gaussian";
    case ScenarioKind::SemiLogistic: return "SemiLogistic";
    case ScenarioKind::Logistic1: return "Logistic1";
    case ScenarioKind::Logistic2: return "Logistic2";
  }
  return "?";
}

ScenarioKind parse_scenario(std::string_view name) {
  const std::string key = normalise(name);
  for (ScenarioKind k : kAllScenarios)
    if (normalise(to_string(k)) == key) return k;
  if (key == "semilogit") return ScenarioKind::SemiLogistic;
  throw ConfigError("unknown scenario '" + std::string(name) + "' (valid: " + scenario_names() + ")");
}

std::string scenario_names() {
  std::string out;
  for (ScenarioKind k : kAllScenarios) {
    if (!out.empty()) out += ", ";
    out += normalise(to_string(k));
  }
  return out;
}

double true_prob(ScenarioKind kind, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("true_prob: x must lie in [0,1]");
  switch (kind) {
    case ScenarioKind::Constant: return 0.3;
    case ScenarioKind::Linear: return 0.05 + 0.2 * x;
    case ScenarioKind::Exponential: return std::exp(-4.0 + 4.0 * x);
    case ScenarioKind::Quadratic: return 0.5 - 1.333 * (x - 0.5) * (x - 0.5);
    case ScenarioKind::Gaussian: {
      const double u = 4.0 * x - 2.0;
      return 0.75 * std::exp(-u * u);
    }
    case ScenarioKind::SemiLogistic: return 8.0 / (1.0 + std::exp(4.0 - 2.0 * x));
    case ScenarioKind::Logistic1: return 1.0 / (1.0 + std::exp(4.0 - 2.0 * x));
    case ScenarioKind::Logistic2: return 1.0 / (1.0 + std::exp(4.0 - 8.0 * x));
  }
  return 0.0;
}

double prevalence(ScenarioKind kind) {
  using boost::math::quadrature::gauss_kronrod;
  double error = 0.0;
  const double value = gauss_kronrod<double, 31>::integrate(
      [kind](double x) { return true_prob(kind, x); }, 0.0, 1.0, 15, 1e-14, &error);
  return value;
}

Scenario::Scenario(ScenarioKind kind) : kind_(kind), prevalence_(pbsdm::prevalence(kind)) {
  double sup = 0.0;
  for (int i = 0; i < kEnvelopeGrid; ++i) {
    const double x = static_cast<double>(i) / (kEnvelopeGrid - 1);
    const double p = pbsdm::true_prob(kind, x);
    if (!(p >= 0.0 && p <= 1.0))
      throw DomainError(std::string("scenario ") + std::string(to_string(kind)) +
                        " leaves [0,1] at x=" + std::to_string(x));
    sup = std::max(sup, p);
  }
  envelope_ = sup * (1.0 + 1e-12);
}

DesignSpec Scenario::fitting_design() const {
  if (kind_ == ScenarioKind::Quadratic || kind_ == ScenarioKind::Gaussian)
    return DesignSpec::quadratic();
  return DesignSpec::linear();
}

void SimConfig::validate() const {
  if (n_presence < 1 || n_background < 1 || replications < 1)
    throw ConfigError("simulation counts must be at least 1");
}

Matrix sample_presence(const Scenario& scenario, std::int64_t n, SplitMix64& rng) {
  if (!(scenario.envelope() > 0.0)) throw DomainError("scenario has no presence mass");
  if (scenario.prevalence() / scenario.envelope() < kMinAcceptance)
    throw DomainError("rejection sampler acceptance rate below 1e-4");
  Matrix out(n, 1);
  std::int64_t accepted = 0;
  std::int64_t tries = 0;
  while (accepted < n) {
    const double x = rng.uniform();
    ++tries;
    if (rng.uniform() * scenario.envelope() < scenario.true_prob(x)) out(accepted++, 0) = x;
    if (tries >= 1'000'000 && static_cast<double>(accepted) / static_cast<double>(tries) < kMinAcceptance)
      throw DomainError("rejection sampler acceptance rate below 1e-4");
  }
  return out;
}

Matrix sample_background(std::int64_t n, SplitMix64& rng) {
  Matrix out(n, 1);
  for (std::int64_t i = 0; i < n; ++i) out(i, 0) = rng.uniform();
  return out;
}

std::uint64_t dataset_seed(std::uint64_t run_seed, ScenarioKind kind, std::int64_t rep) {
  const std::uint64_t scenario_base =
      substream_seed(run_seed, 0x5ce0000000000000ULL + static_cast<std::uint64_t>(kind));
  return substream_seed(scenario_base, static_cast<std::uint64_t>(rep));
}

Dataset simulate_dataset(const Scenario& scenario, const SimConfig& config, std::int64_t rep) {
  config.validate();
  const std::uint64_t base = dataset_seed(config.seed, scenario.kind(), rep);
  SplitMix64 presence_rng(substream_seed(base, 1));
  SplitMix64 background_rng(substream_seed(base, 2));
  Matrix presence = sample_presence(scenario, config.n_presence, presence_rng);
  Matrix background = sample_background(config.n_background, background_rng);
  return Dataset(std::move(presence), std::move(background));
}

void write_covariates_csv(const std::filesystem::path& path, const Matrix& x) {
  CsvWriter csv(path);
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < x.cols(); ++j) header.push_back("x" + std::to_string(j + 1));
  csv.row(header);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::vector<std::string> cells;
    for (Eigen::Index j = 0; j < x.cols(); ++j) cells.push_back(format_double(x(i, j)));
    csv.row(cells);
  }
  csv.commit();
}

Matrix read_covariates_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  if (table.header.empty()) throw DataError(path.string() + ": missing header");
  const auto cols = static_cast<Eigen::Index>(table.header.size());
  Matrix x(static_cast<Eigen::Index>(table.rows.size()), cols);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double v = parse_double(table.rows[i][static_cast<std::size_t>(j)]);
      if (!std::isfinite(v))
        throw DataError(path.string() + ":" + std::to_string(table.line_numbers[i]) +
                        ": non-finite covariate");
      x(static_cast<Eigen::Index>(i), j) = v;
    }
  }
  return x;
}

}  // namespace pbsdm
