#pragma once

// Fitting a presence-background method: wires a likelihood to the optimiser.

#include "pbsdm/likelihood.hpp"
#include "pbsdm/optim.hpp"

namespace pbsdm {

// Fits `kind` under `model` (whose constraint supplies pi0 for CLK and EMSB).
// LI and Lele optimise pi on the logistic scale; the returned beta_hat holds the
// link coefficients only, pi_hat the prevalence, and hessian covers every free
// parameter (beta then the logit of pi).
FitResult fit_method(LikelihoodKind kind, const ModelSpec& model, const Dataset& data,
                     const OptimSettings& settings);
FitResult fit_method(LikelihoodKind kind, const DesignedData& dd, const OptimSettings& settings);

// Objective of `kind` at the full parameter vector used by the optimiser.
double method_objective(LikelihoodKind kind, const DesignedData& dd, const Vector& theta);

// recip_cond of the Hessian with the intercept (and any prevalence parameter)
// removed. For log-link unconstrained fits the intercept direction is exactly
// flat, so only this block carries identifiability information.
Identifiability slope_identifiability(const FitResult& fit, const DesignSpec& design);

}  // namespace pbsdm
