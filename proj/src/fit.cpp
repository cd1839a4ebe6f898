#include "pbsdm/fit.hpp"

#include "pbsdm/errors.hpp"

#include <cmath>

namespace pbsdm {

namespace {

double logistic(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// pi = logistic(psi) with an evaluation error where it rounds to 0 or 1.
double prevalence_from_logit(double psi) {
  const double pi = logistic(psi);
  if (!(pi > 0.0 && pi < 1.0)) throw EvaluationError("prevalence parameter left (0,1)");
  return pi;
}

ValueGrad free_prevalence_value_grad(LikelihoodKind kind, const DesignedData& dd,
                                     const Vector& theta) {
  const Eigen::Index w = dd.width();
  const double pi = prevalence_from_logit(theta[w]);
  const Params beta = theta.head(w);
  ValueGrad v = kind == LikelihoodKind::LI ? li_value_grad(dd, beta, pi) : lele_value_grad(dd, beta, pi);
  v.grad[w] *= pi * (1.0 - pi);
  return v;
}

ValueGrad unconstrained_value_grad(LikelihoodKind kind, const DesignedData& dd, const Vector& theta) {
  switch (kind) {
    case LikelihoodKind::LK: return lk_value_grad(dd, theta);
    case LikelihoodKind::PPMcond: return ppm_cond_value_grad(dd, theta);
    case LikelihoodKind::EMSB: return emsb_value_grad(dd, theta, *dd.model().constraint());
    case LikelihoodKind::LI:
    case LikelihoodKind::Lele: return free_prevalence_value_grad(kind, dd, theta);
    case LikelihoodKind::CLK: break;
  }
  throw ConfigError("CLK is a constrained fit");
}

}  // namespace

double method_objective(LikelihoodKind kind, const DesignedData& dd, const Vector& theta) {
  if (kind == LikelihoodKind::CLK) return loglik_lk(dd, theta);
  return unconstrained_value_grad(kind, dd, theta).value;
}

FitResult fit_method(LikelihoodKind kind, const DesignedData& dd, const OptimSettings& settings) {
  validate_combination(kind, dd.model());
  const Eigen::Index w = dd.width();
  const bool free_pi = has_free_prevalence(kind);
  const Vector start = Vector::Zero(free_pi ? w + 1 : w);

  FitResult fit;
  if (kind == LikelihoodKind::CLK) {
    const ConstrainedFn fn = [&dd](const Vector& beta) {
      ClkValueGrad v = clk_value_grad(dd, beta);
      return ConstrainedEval{v.value, std::move(v.grad), v.residual, std::move(v.residual_grad), v.magnitude};
    };
    fit = maximize_constrained(fn, start, settings);
  } else {
    UnconstrainedProblem problem;
    problem.value_grad = [kind, &dd](const Vector& theta) {
      return unconstrained_value_grad(kind, dd, theta);
    };
    fit = maximize(problem, start, settings);
  }

  if (free_pi) {
    fit.pi_hat = logistic(fit.beta_hat[w]);
    fit.beta_hat = Params(fit.beta_hat.head(w));
  }
  const EvalFlags flags = scan_flags(dd, fit.beta_hat);
  fit.saturated = flags.saturated;
  fit.prob_overflow = flags.overflow;
  return fit;
}

FitResult fit_method(LikelihoodKind kind, const ModelSpec& model, const Dataset& data,
                     const OptimSettings& settings) {
  validate_combination(kind, model);
  return fit_method(kind, DesignedData(model, data), settings);
}

Identifiability slope_identifiability(const FitResult& fit, const DesignSpec& design) {
  const auto w = static_cast<Eigen::Index>(design.width());
  const auto skip = static_cast<Eigen::Index>(design.intercept_index());
  if (fit.hessian.rows() < w) return {0.0, false};
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < w; ++k)
    if (k != skip) keep.push_back(k);
  Matrix block(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i)
    for (std::size_t j = 0; j < keep.size(); ++j)
      block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = fit.hessian(keep[i], keep[j]);
  return identifiability(block, fit.hessian_noise);
}

}  // namespace pbsdm
