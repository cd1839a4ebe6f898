#pragma once

// Quasi-Newton maximisation, augmented-Lagrangian equality-constrained
// maximisation, and Hessian-based identifiability diagnostics.

#include "pbsdm/likelihood.hpp"

#include <cstdint>
#include <functional>
#include <optional>

namespace pbsdm {

struct OptimSettings {
  double tol_grad = 1e-8;        // on the max-abs (projected) gradient
  double tol_constraint = 1e-8;  // on |constraint residual|
  int max_iter = 500;            // per BFGS run
  int n_starts = 5;
  double penalty_growth = 10.0;
  int max_outer = 12;
  double start_range = 2.0;  // restarts are uniform in [-range, range]^d
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

inline constexpr double kIdentifiabilityThreshold = 1e-3;

struct FitResult {
  Params beta_hat;                 // all free parameters as optimised
  std::optional<double> pi_hat;    // LI / Lele prevalence estimate
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;  // projected gradient for constrained fits
  std::optional<double> constraint_residual;
  std::optional<double> multiplier;
  double recip_cond = 0.0;
  bool identifiable = false;
  Matrix hessian;  // Hessian (of the Lagrangian, for constrained fits) at the solution
  double hessian_noise = 0.0;  // rounding floor of the finite-difference entries
  int start_index = 0;
  bool saturated = false;
  bool prob_overflow = false;
};

using ObjectiveFn = std::function<double(const Vector&)>;
using GradientFn = std::function<Vector(const Vector&)>;
using ValueGradFn = std::function<ValueGrad(const Vector&)>;

struct ConstrainedEval {
  double value = 0.0;
  Vector grad;
  double residual = 0.0;
  Vector residual_grad;
  double magnitude = 0.0;  // as ValueGrad::magnitude, for value
};
using ConstrainedFn = std::function<ConstrainedEval(const Vector&)>;

struct UnconstrainedProblem {
  ValueGradFn value_grad;
  ObjectiveFn value;  // optional cheaper value-only evaluation
};

// Multi-start BFGS. Start 0 is `start`; the others are drawn from settings.seed.
// Throws OptimizationError when the objective is non-finite at every start.
FitResult maximize(const UnconstrainedProblem& problem, const Params& start,
                   const OptimSettings& settings);
FitResult maximize(const ObjectiveFn& objective, const GradientFn& gradient, const Params& start,
                   const OptimSettings& settings);

// Augmented-Lagrangian maximisation of f subject to c(x) = 0.
FitResult maximize_constrained(const ConstrainedFn& problem, const Params& start,
                               const OptimSettings& settings);
FitResult maximize_constrained(const ObjectiveFn& objective, const GradientFn& gradient,
                               const ObjectiveFn& constraint, const GradientFn& constraint_gradient,
                               const Params& start, const OptimSettings& settings);

// Central-difference Hessian, step 1e-4*max(1,|x_k|), symmetrised.
Matrix hessian_fd(const ObjectiveFn& objective, const Params& at);
// Magnitude below which a hessian_fd eigenvalue is indistinguishable from
// rounding in an objective of size `scale`.
double hessian_fd_noise(double scale, const Params& at);

struct Identifiability {
  double recip_cond = 0.0;
  bool identifiable = false;
};

// |lambda|_min / |lambda|_max of a symmetric matrix. A 0x0 matrix (nothing left
// free) is identifiable by definition. Eigenvalues at or below noise_floor count
// as zero, so a flat one-parameter objective reports 0 rather than 1.
Identifiability identifiability(const Matrix& hessian, double noise_floor = 0.0);

// Orthonormal basis of the null space of a^T (d x d-1).
Matrix null_space_basis(const Vector& a);

}  // namespace pbsdm
