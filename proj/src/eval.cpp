#include "pbsdm/eval.hpp"

#include "pbsdm/errors.hpp"

#include <cmath>
#include <limits>

namespace pbsdm {

Vector unit_grid(int grid_size) {
  if (grid_size < 2) throw ConfigError("curve grid needs at least two points");
  return Vector::LinSpaced(grid_size, 0.0, 1.0);
}

Vector fitted_curve(const ModelSpec& model, const Params& beta, const Vector& grid) {
  if (model.design().required_columns() > 1)
    throw ConfigError("curves are defined for one-covariate models");
  Vector out(grid.size());
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double x = grid[g];
    out[g] = site_prob(model, beta, std::span<const double>(&x, 1));
  }
  return out;
}

double rms_error(const Params& beta, const ModelSpec& model, const Scenario& scenario, int grid_size) {
  const Vector grid = unit_grid(grid_size);
  const Vector fitted = fitted_curve(model, beta, grid);
  double ss = 0.0;
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double d = fitted[g] - scenario.true_prob(grid[g]);
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(grid.size()));
}

RatioCurve ratio_curve(const Params& beta, const ModelSpec& model, const Dataset& data, int grid_size) {
  RatioCurve out;
  out.pi_hat = background_mean_prob(DesignedData(model, data), beta);
  if (!(out.pi_hat > 0.0)) throw EvaluationError("ratio curve needs a positive background mean");
  out.x = unit_grid(grid_size);
  out.ratio = fitted_curve(model, beta, out.x) / out.pi_hat;
  return out;
}

bool identifiable_screen(const FitResult& fit) { return fit.identifiable; }

Screen screen_for(LikelihoodKind kind, const ModelSpec& model) {
  if (model.link() == LinkKind::log && kind != LikelihoodKind::CLK && kind != LikelihoodKind::EMSB) {
    const DesignSpec design = model.design();
    return [design](const FitResult& fit) { return slope_identifiability(fit, design).identifiable; };
  }
  return identifiable_screen;
}

std::vector<std::string> coefficient_names(const DesignSpec& design, bool with_pi) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < design.width(); ++k) names.push_back("beta" + std::to_string(k));
  if (with_pi) names.emplace_back("pi");
  return names;
}

Summary summarize(const std::vector<FitResult>& fits, const std::vector<std::string>& names,
                  const Screen& screen) {
  const std::size_t k = names.size();
  std::vector<Vector> kept;
  Summary out;
  for (const FitResult& fit : fits) {
    if (!screen(fit)) {
      ++out.removed;
      continue;
    }
    Vector v(fit.beta_hat.size() + (fit.pi_hat ? 1 : 0));
    v.head(fit.beta_hat.size()) = fit.beta_hat;
    if (fit.pi_hat) v[fit.beta_hat.size()] = *fit.pi_hat;
    if (static_cast<std::size_t>(v.size()) != k)
      throw ConfigError("fit has " + std::to_string(v.size()) + " parameters but " + std::to_string(k) +
                        " coefficient names");
    kept.push_back(std::move(v));
  }
  out.retained = static_cast<int>(kept.size());
  if (kept.empty()) throw EvaluationError("every replication was removed as unidentifiable");

  for (std::size_t c = 0; c < k; ++c) {
    // two-pass mean and variance
    double mean = 0.0;
    for (const Vector& v : kept) mean += v[static_cast<Eigen::Index>(c)];
    mean /= static_cast<double>(kept.size());
    double ss = 0.0;
    for (const Vector& v : kept) {
      const double d = v[static_cast<Eigen::Index>(c)] - mean;
      ss += d * d;
    }
    const double se = kept.size() > 1 ? std::sqrt(ss / static_cast<double>(kept.size() - 1))
                                      : std::numeric_limits<double>::quiet_NaN();
    out.coefs.push_back({names[c], mean, se});
  }
  return out;
}

RspfScreen rspf_screen(const Scenario& scenario, double threshold, int grid_size) {
  const Vector grid = unit_grid(grid_size);
  const double p0 = scenario.true_prob(0.0);
  const double p1 = scenario.true_prob(1.0);
  RspfScreen out;
  if (!(p0 > 0.0) || !(p1 > 0.0)) return out;
  const double l0 = std::log(p0), l1 = std::log(p1);
  double worst = 0.0;
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double p = scenario.true_prob(grid[g]);
    if (!(p > 0.0)) return out;
    const double secant = l0 + (l1 - l0) * grid[g];
    worst = std::max(worst, std::abs(std::log(p) - secant));
  }
  out.deviation = worst;
  out.log_nonlinear = worst > threshold;
  return out;
}

}  // namespace pbsdm
