#pragma once

// Presence-background log-likelihoods and their analytic gradients.
//
// All objectives are evaluated on a DesignedData: the raw dataset expanded
// once through the model's design. Background averages are accumulated in log
// space (log-sum-exp), in a fixed summation order.

#include "pbsdm/model.hpp"

#include <string_view>

namespace pbsdm {

class Dataset {
 public:
  // Throws DataError unless n1 >= 1, n0 >= 2, the column counts agree, every
  // entry is finite and area > 0.
  Dataset(Matrix presence_x, Matrix background_x, double area = 1.0);

  const Matrix& presence_x() const noexcept { return presence_; }
  const Matrix& background_x() const noexcept { return background_; }
  double area() const noexcept { return area_; }

  Eigen::Index n_presence() const noexcept { return presence_.rows(); }
  Eigen::Index n_background() const noexcept { return background_.rows(); }
  Eigen::Index dim() const noexcept { return presence_.cols(); }
  // Sampling fraction n1/(n1+n0).
  double sampling_fraction() const noexcept {
    return static_cast<double>(n_presence()) / static_cast<double>(n_presence() + n_background());
  }

 private:
  Matrix presence_;
  Matrix background_;
  double area_;
};

class DesignedData {
 public:
  DesignedData(ModelSpec model, const Dataset& data);

  const ModelSpec& model() const noexcept { return model_; }
  LinkKind link() const noexcept { return model_.link(); }
  const Matrix& presence() const noexcept { return presence_; }
  const Matrix& background() const noexcept { return background_; }
  double area() const noexcept { return area_; }
  Eigen::Index n1() const noexcept { return presence_.rows(); }
  Eigen::Index n0() const noexcept { return background_.rows(); }
  Eigen::Index width() const noexcept { return presence_.cols(); }
  double h() const noexcept {
    return static_cast<double>(n1()) / static_cast<double>(n1() + n0());
  }

 private:
  ModelSpec model_;
  Matrix presence_;
  Matrix background_;
  double area_;
};

enum class LikelihoodKind { LK, LI, Lele, EMSB, PPMcond, CLK };

std::string_view to_string(LikelihoodKind kind);
LikelihoodKind parse_likelihood(std::string_view name);  // throws ConfigError
// Does the likelihood carry a free prevalence parameter (LI, Lele)?
bool has_free_prevalence(LikelihoodKind kind);
// Throws ConfigError for CLK without a constraint, or PPMcond with a non-log link.
void validate_combination(LikelihoodKind kind, const ModelSpec& model);

struct ValueGrad {
  double value = 0.0;
  Vector grad;
  // Sum of the absolute sizes of the terms accumulated into value; value is
  // only resolved to about eps * magnitude.
  double magnitude = 0.0;
};

// LK: sum_i log p_i - n1 log(mean_j p_j).
double loglik_lk(const DesignedData& dd, const Params& beta);
Vector grad_lk(const DesignedData& dd, const Params& beta);
ValueGrad lk_value_grad(const DesignedData& dd, const Params& beta);

// Contaminated case-control kernels. All take pi in (0,1); h = n1/(n1+n0).
double r1n(double p, double pi, long n1, long n0);
double p_em(double eta, double pi, long n1, long n0);
double p_sb(double eta, double r);

// LI observed-data likelihood with h fixed at n1/n. The gradient has
// width()+1 entries: d/dbeta followed by d/dpi.
double loglik_li(const DesignedData& dd, const Params& beta, double pi);
ValueGrad li_value_grad(const DesignedData& dd, const Params& beta, double pi);

// Lele partial likelihood, built from its own product form. Same gradient
// layout as LI.
double loglik_lele(const DesignedData& dd, const Params& beta, double pi);
ValueGrad lele_value_grad(const DesignedData& dd, const Params& beta, double pi);

// EM / scaled-binomial likelihood: LI with pi fixed at a supplied pi0.
double loglik_emsb(const DesignedData& dd, const Params& beta, double pi0);
ValueGrad emsb_value_grad(const DesignedData& dd, const Params& beta, double pi0);

// Conditional Poisson point-process likelihood with equal quadrature weights
// |D|/n0. Requires the log link.
double loglik_ppm_cond(const DesignedData& dd, const Params& beta);
ValueGrad ppm_cond_value_grad(const DesignedData& dd, const Params& beta);

// Full Poisson point-process likelihood, -Lambda(D) + sum log lambda_i - log n1!,
// with Lambda(D) approximated by the same quadrature. Diagnostic only.
double loglik_ppm_full(const DesignedData& dd, const Params& beta);
ValueGrad ppm_full_value_grad(const DesignedData& dd, const Params& beta);
double cumulative_intensity(const DesignedData& dd, const Params& beta);

// Background average of p(y=1|x,beta) and its gradient.
double background_mean_prob(const DesignedData& dd, const Params& beta);
Vector grad_background_mean_prob(const DesignedData& dd, const Params& beta);

struct ClkEvaluation {
  double objective = 0.0;
  double residual = 0.0;  // mean background p - pi0
};

// Requires a constrained model.
ClkEvaluation clk_objective_and_constraint(const DesignedData& dd, const Params& beta);

// Objective, residual and both gradients from one pass over the data.
struct ClkValueGrad {
  double value = 0.0;
  Vector grad;
  double magnitude = 0.0;
  double residual = 0.0;
  Vector residual_grad;
};
ClkValueGrad clk_value_grad(const DesignedData& dd, const Params& beta);

struct EvalFlags {
  bool saturated = false;  // some |eta| exceeded the clamp limit
  bool overflow = false;   // log link produced p > 1 somewhere
};

EvalFlags scan_flags(const DesignedData& dd, const Params& beta);

// Convenience overloads on raw data; each call expands the design.
double loglik_lk(const ModelSpec& model, const Dataset& data, const Params& beta);
Vector grad_lk(const ModelSpec& model, const Dataset& data, const Params& beta);
double loglik_li(const ModelSpec& model, const Dataset& data, const Params& beta, double pi);
double loglik_lele(const Params& beta, double pi, const Dataset& data, const ModelSpec& model);
double loglik_ppm_cond(const ModelSpec& model, const Dataset& data, const Params& beta);
ClkEvaluation clk_objective_and_constraint(const ModelSpec& model, const Dataset& data,
                                           const Params& beta);

}  // namespace pbsdm
