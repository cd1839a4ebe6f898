#pragma once

// Link functions and covariate designs for the site probability of presence
// p(y=1|x,beta) = g^{-1}(eta), eta = sum_k beta_k * t_k(x).

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pbsdm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Coefficient vector, ordered as the design terms.
using Params = Eigen::VectorXd;

enum class LinkKind { logit, log, cloglog };

std::string_view to_string(LinkKind link);
LinkKind parse_link(std::string_view name);  // throws ConfigError

// Linear predictors are clamped to this range before exponentiation.
inline constexpr double kEtaLimit = 700.0;

struct LinkValue {
  double p = 0.0;
  bool saturated = false;  // eta was clamped
  bool overflow = false;   // log link produced p > 1
};

LinkValue prob_checked(LinkKind link, double eta);
double prob(LinkKind link, double eta);
double dprob_deta(LinkKind link, double eta);

// log p and d(log p)/d(eta), evaluated without forming p where that would
// lose precision.
double log_prob(LinkKind link, double eta);
double dlogprob_deta(LinkKind link, double eta);

struct LogProbDeriv {
  double logp = 0.0;
  double dlogp = 0.0;
};
// Both at once, sharing the exponentials.
LogProbDeriv log_prob_deriv(LinkKind link, double eta);

// Inverse of prob: the eta at which prob(link, eta) == p.
double link_eta(LinkKind link, double p);

struct Term {
  enum class Kind { intercept, linear, square };
  Kind kind = Kind::intercept;
  std::size_t column = 0;

  static Term intercept() { return {Kind::intercept, 0}; }
  static Term linear(std::size_t j) { return {Kind::linear, j}; }
  static Term square(std::size_t j) { return {Kind::square, j}; }

  bool operator==(const Term&) const = default;
};

std::string to_string(const Term& term);

class DesignSpec {
 public:
  // Throws ConfigError unless there is exactly one intercept term.
  explicit DesignSpec(std::vector<Term> terms);

  static DesignSpec intercept_only();
  static DesignSpec linear(std::size_t n_covariates = 1);
  static DesignSpec quadratic(std::size_t n_covariates = 1);

  // "linear", "quadratic", "intercept", or a comma list such as "1,x1,x1^2".
  static DesignSpec parse(std::string_view text);

  const std::vector<Term>& terms() const noexcept { return terms_; }
  std::size_t width() const noexcept { return terms_.size(); }
  std::size_t intercept_index() const noexcept { return intercept_; }
  std::size_t required_columns() const noexcept;
  std::string describe() const;

 private:
  std::vector<Term> terms_;
  std::size_t intercept_ = 0;
};

Vector expand_design(const DesignSpec& design, std::span<const double> x_raw);
// Row-wise expansion of a raw covariate matrix (rows = sites).
Matrix expand_design(const DesignSpec& design, const Matrix& x_raw);

class ModelSpec {
 public:
  ModelSpec(LinkKind link, DesignSpec design, std::optional<double> prevalence = std::nullopt);

  LinkKind link() const noexcept { return link_; }
  const DesignSpec& design() const noexcept { return design_; }
  // Prevalence pi0 of a constrained (CLK) model.
  const std::optional<double>& constraint() const noexcept { return constraint_; }
  bool constrained() const noexcept { return constraint_.has_value(); }

  ModelSpec with_constraint(std::optional<double> prevalence) const;

 private:
  LinkKind link_;
  DesignSpec design_;
  std::optional<double> constraint_;
};

// Probability of presence at a raw covariate row.
double site_prob(const ModelSpec& model, const Params& beta, std::span<const double> x_raw);

}  // namespace pbsdm
