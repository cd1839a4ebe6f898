#include "pbsdm/likelihood.hpp"

#include "pbsdm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pbsdm {

namespace {

double logaddexp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Per-site log p and d(log p)/d(eta) for one block of rows.
struct LogProbs {
  Vector logp;
  Vector dlogp;
};

LogProbs log_probs(LinkKind link, const Matrix& x, const Params& beta, const char* block) {
  const Vector eta = x * beta;
  LogProbs out{Vector(eta.size()), Vector(eta.size())};
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const LogProbDeriv v = log_prob_deriv(link, eta[i]);
    if (!std::isfinite(v.logp))
      throw EvaluationError(std::string("non-finite log probability in ") + block + " block", i);
    out.logp[i] = v.logp;
    out.dlogp[i] = v.dlogp;
  }
  return out;
}

// log(mean(exp(v))) as max + log(sum(exp(v - max)) / n), so that equal entries
// reproduce themselves exactly. Also returns the normaliser for weights.
struct LogMeanExp {
  double value;
  double shift;
  double sum;
  Vector scaled;  // exp(v - shift)
  double weight(Eigen::Index j) const { return scaled[j] / sum; }
};

LogMeanExp log_mean_exp(const Vector& v) {
  const double m = v.maxCoeff();
  double s = 0.0;
  Vector scaled(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    scaled[i] = std::exp(v[i] - m);
    s += scaled[i];
  }
  return {m + std::log(s / static_cast<double>(v.size())), m, s, std::move(scaled)};
}

// The n1 * log(mean) term carries the summation error of all n0 background
// terms, amplified by n1.
double lk_magnitude(const Vector& pres_logp, const LogMeanExp& lme, double n1, Eigen::Index n0) {
  return pres_logp.cwiseAbs().sum() + n1 * (std::abs(lme.value) + std::sqrt(static_cast<double>(n0)));
}

void check_beta(const DesignedData& dd, const Params& beta) {
  if (beta.size() != dd.width())
    throw ConfigError("coefficient vector has " + std::to_string(beta.size()) +
                      " entries, design has " + std::to_string(dd.width()));
  if (!beta.allFinite()) throw EvaluationError("non-finite coefficient vector");
}

void check_pi(double pi, const char* who) {
  if (!(pi > 0.0 && pi < 1.0)) throw DomainError(std::string(who) + ": pi must lie in (0,1)");
}

void check_finite(double v, const char* who) {
  if (!std::isfinite(v)) throw EvaluationError(std::string(who) + " evaluated to a non-finite value");
}

// Shared core of LI and EM/SB. Gradient is d/dbeta followed by d/dpi.
ValueGrad r1n_value_grad(const DesignedData& dd, const Params& beta, double pi) {
  check_beta(dd, beta);
  check_pi(pi, "loglik_li");
  const double h = dd.h();
  const double log_a = std::log(h) - std::log(pi);
  const double log_1mh = std::log1p(-h);
  const LogProbs pres = log_probs(dd.link(), dd.presence(), beta, "presence");
  const LogProbs bg = log_probs(dd.link(), dd.background(), beta, "background");

  double value = 0.0;
  double magnitude = 0.0;
  double dpi = 0.0;
  Vector wp(pres.logp.size());
  for (Eigen::Index i = 0; i < pres.logp.size(); ++i) {
    const double u = log_a + pres.logp[i];
    const double log_r = u - logaddexp(u, log_1mh);
    const double one_minus_r = -std::expm1(log_r);
    value += log_r;
    magnitude += std::abs(log_r);
    wp[i] = one_minus_r * pres.dlogp[i];
    dpi -= one_minus_r / pi;
  }
  Vector wb(bg.logp.size());
  for (Eigen::Index j = 0; j < bg.logp.size(); ++j) {
    const double u = log_a + bg.logp[j];
    const double l = logaddexp(u, log_1mh);
    const double r = std::exp(u - l);
    value += log_1mh - l;
    magnitude += std::abs(log_1mh - l);
    wb[j] = -r * bg.dlogp[j];
    dpi += r / pi;
  }
  check_finite(value, "LI likelihood");
  ValueGrad out{value, Vector(dd.width() + 1), magnitude};
  out.grad.head(dd.width()) = dd.presence().transpose() * wp + dd.background().transpose() * wb;
  out.grad[dd.width()] = dpi;
  return out;
}

}  // namespace

Dataset::Dataset(Matrix presence_x, Matrix background_x, double area)
    : presence_(std::move(presence_x)), background_(std::move(background_x)), area_(area) {
  if (presence_.rows() < 1) throw DataError("dataset needs at least one presence row");
  if (background_.rows() < 2) throw DataError("dataset needs at least two background rows");
  if (presence_.cols() != background_.cols())
    throw DataError("presence and background covariate counts differ (" +
                    std::to_string(presence_.cols()) + " vs " + std::to_string(background_.cols()) +
                    ")");
  if (presence_.cols() < 1) throw DataError("dataset has no covariate columns");
  if (!presence_.allFinite()) throw DataError("non-finite presence covariate");
  if (!background_.allFinite()) throw DataError("non-finite background covariate");
  if (!(area_ > 0.0) || !std::isfinite(area_)) throw DataError("area must be positive");
}

DesignedData::DesignedData(ModelSpec model, const Dataset& data)
    : model_(std::move(model)),
      presence_(expand_design(model_.design(), data.presence_x())),
      background_(expand_design(model_.design(), data.background_x())),
      area_(data.area()) {}

std::string_view to_string(LikelihoodKind kind) {
  switch (kind) {
    case LikelihoodKind::LK: return "LK";
    case LikelihoodKind::LI: return "LI";
    case LikelihoodKind::Lele: return "Lele";
    case LikelihoodKind::EMSB: return "EMSB";
    case LikelihoodKind::PPMcond: return "PPMcond";
    case LikelihoodKind::CLK: return "CLK";
  }
  return "?";
}

LikelihoodKind parse_likelihood(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "lk") return LikelihoodKind::LK;
  if (s == "li") return LikelihoodKind::LI;
  if (s == "lele") return LikelihoodKind::Lele;
  if (s == "emsb" || s == "em" || s == "sb") return LikelihoodKind::EMSB;
  if (s == "ppmcond" || s == "ppm" || s == "maxent") return LikelihoodKind::PPMcond;
  if (s == "clk") return LikelihoodKind::CLK;
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (valid: LK, LI, Lele, EMSB, PPMcond, CLK)");
}

bool has_free_prevalence(LikelihoodKind kind) {
  return kind == LikelihoodKind::LI || kind == LikelihoodKind::Lele;
}

void validate_combination(LikelihoodKind kind, const ModelSpec& model) {
  if (kind == LikelihoodKind::PPMcond && model.link() != LinkKind::log)
    throw ConfigError("PPMcond requires the log link");
  if ((kind == LikelihoodKind::CLK || kind == LikelihoodKind::EMSB) && !model.constrained())
    throw ConfigError(std::string(to_string(kind)) + " requires a prevalence value");
}

ValueGrad lk_value_grad(const DesignedData& dd, const Params& beta) {
  check_beta(dd, beta);
  const LogProbs pres = log_probs(dd.link(), dd.presence(), beta, "presence");
  const LogProbs bg = log_probs(dd.link(), dd.background(), beta, "background");
  const double n1 = static_cast<double>(dd.n1());
  const LogMeanExp lme = log_mean_exp(bg.logp);
  const double value = pres.logp.sum() - n1 * lme.value;
  check_finite(value, "LK likelihood");
  Vector wb(bg.logp.size());
  for (Eigen::Index j = 0; j < wb.size(); ++j) wb[j] = lme.weight(j) * bg.dlogp[j];
  Vector grad = dd.presence().transpose() * pres.dlogp - n1 * (dd.background().transpose() * wb);
  return {value, std::move(grad), lk_magnitude(pres.logp, lme, n1, bg.logp.size())};
}

double loglik_lk(const DesignedData& dd, const Params& beta) { return lk_value_grad(dd, beta).value; }
Vector grad_lk(const DesignedData& dd, const Params& beta) { return lk_value_grad(dd, beta).grad; }

double r1n(double p, double pi, long n1, long n0) {
  check_pi(pi, "r1n");
  if (!(p > 0.0)) throw DomainError("r1n: p must be positive");
  if (n1 < 1 || n0 < 1) throw DomainError("r1n: counts must be positive");
  const double h = static_cast<double>(n1) / static_cast<double>(n1 + n0);
  const double a = (h / pi) * p;
  return a / (a + 1.0 - h);
}

double p_em(double eta, double pi, long n1, long n0) {
  check_pi(pi, "p_em");
  if (n1 < 1 || n0 < 1) throw DomainError("p_em: counts must be positive");
  const double k = static_cast<double>(n1) / (pi * static_cast<double>(n0));
  if (eta > 0.0) return k / (std::exp(-eta) + 1.0 + k);
  const double e = std::exp(eta);
  return k * e / (1.0 + (1.0 + k) * e);
}

double p_sb(double eta, double r) {
  if (!(r > 0.0)) throw DomainError("p_sb: r must be positive");
  return 1.0 / (1.0 + r + std::exp(-eta + std::log(r)));
}

ValueGrad li_value_grad(const DesignedData& dd, const Params& beta, double pi) {
  return r1n_value_grad(dd, beta, pi);
}

double loglik_li(const DesignedData& dd, const Params& beta, double pi) {
  return r1n_value_grad(dd, beta, pi).value;
}

ValueGrad lele_value_grad(const DesignedData& dd, const Params& beta, double pi) {
  check_beta(dd, beta);
  check_pi(pi, "loglik_lele");
  const double w = dd.h();
  const double log_w = std::log(w);
  const double log_bg_mass = std::log1p(-w) + std::log(pi);  // log((1-w) P(beta))
  const LogProbs pres = log_probs(dd.link(), dd.presence(), beta, "presence");
  const LogProbs bg = log_probs(dd.link(), dd.background(), beta, "background");

  double value = 0.0;
  double magnitude = 0.0;
  double dpi = 0.0;
  Vector wp(pres.logp.size());
  for (Eigen::Index i = 0; i < pres.logp.size(); ++i) {
    const double log_num = log_w + pres.logp[i];
    const double log_den = logaddexp(log_num, log_bg_mass);
    const double bg_share = std::exp(log_bg_mass - log_den);
    value += log_num - log_den;
    magnitude += std::abs(log_num - log_den);
    wp[i] = bg_share * pres.dlogp[i];
    dpi -= bg_share / pi;
  }
  Vector wb(bg.logp.size());
  for (Eigen::Index j = 0; j < bg.logp.size(); ++j) {
    const double log_pres_mass = log_w + bg.logp[j];
    const double log_den = logaddexp(log_pres_mass, log_bg_mass);
    const double pres_share = std::exp(log_pres_mass - log_den);
    value += log_bg_mass - log_den;
    magnitude += std::abs(log_bg_mass - log_den);
    wb[j] = -pres_share * bg.dlogp[j];
    dpi += (1.0 - std::exp(log_bg_mass - log_den)) / pi;
  }
  check_finite(value, "Lele likelihood");
  ValueGrad out{value, Vector(dd.width() + 1), magnitude};
  out.grad.head(dd.width()) = dd.presence().transpose() * wp + dd.background().transpose() * wb;
  out.grad[dd.width()] = dpi;
  return out;
}

double loglik_lele(const DesignedData& dd, const Params& beta, double pi) {
  return lele_value_grad(dd, beta, pi).value;
}

ValueGrad emsb_value_grad(const DesignedData& dd, const Params& beta, double pi0) {
  ValueGrad full = r1n_value_grad(dd, beta, pi0);
  return {full.value, full.grad.head(dd.width()), full.magnitude};
}

double loglik_emsb(const DesignedData& dd, const Params& beta, double pi0) {
  return r1n_value_grad(dd, beta, pi0).value;
}

ValueGrad ppm_cond_value_grad(const DesignedData& dd, const Params& beta) {
  if (dd.link() != LinkKind::log) throw ConfigError("PPMcond requires the log link");
  check_beta(dd, beta);
  const Vector eta1 = dd.presence() * beta;
  const Vector eta0 = dd.background() * beta;
  if (!eta1.allFinite() || !eta0.allFinite()) throw EvaluationError("non-finite intensity");
  const double n1 = static_cast<double>(dd.n1());
  const Vector clamped0 = eta0.array().min(kEtaLimit).max(-kEtaLimit).matrix();
  const LogMeanExp lme = log_mean_exp(clamped0);
  const double log_lambda_total = std::log(dd.area()) + lme.value;
  const Vector clamped1 = eta1.array().min(kEtaLimit).max(-kEtaLimit).matrix();
  const double value = clamped1.sum() - n1 * log_lambda_total;
  check_finite(value, "PPM conditional likelihood");
  Vector weights(eta0.size());
  for (Eigen::Index j = 0; j < eta0.size(); ++j) weights[j] = lme.weight(j);
  Vector grad = dd.presence().colwise().sum().transpose() - n1 * (dd.background().transpose() * weights);
  const double magnitude = clamped1.cwiseAbs().sum() +
                           n1 * (std::abs(log_lambda_total) + std::sqrt(static_cast<double>(eta0.size())));
  return {value, std::move(grad), magnitude};
}

double loglik_ppm_cond(const DesignedData& dd, const Params& beta) {
  return ppm_cond_value_grad(dd, beta).value;
}

ValueGrad ppm_full_value_grad(const DesignedData& dd, const Params& beta) {
  if (dd.link() != LinkKind::log) throw ConfigError("PPM likelihood requires the log link");
  check_beta(dd, beta);
  const Vector eta1 = (dd.presence() * beta).array().min(kEtaLimit).max(-kEtaLimit).matrix();
  const Vector eta0 = (dd.background() * beta).array().min(kEtaLimit).max(-kEtaLimit).matrix();
  const double weight = dd.area() / static_cast<double>(dd.n0());
  const Vector lambda0 = eta0.array().exp().matrix();
  const double total = weight * lambda0.sum();
  const double value = -total + eta1.sum() - std::lgamma(static_cast<double>(dd.n1()) + 1.0);
  check_finite(value, "PPM full likelihood");
  Vector grad = dd.presence().colwise().sum().transpose() - weight * (dd.background().transpose() * lambda0);
  return {value, std::move(grad), total + eta1.cwiseAbs().sum() + std::abs(value)};
}

double loglik_ppm_full(const DesignedData& dd, const Params& beta) {
  return ppm_full_value_grad(dd, beta).value;
}

double cumulative_intensity(const DesignedData& dd, const Params& beta) {
  if (dd.link() != LinkKind::log) throw ConfigError("cumulative intensity requires the log link");
  check_beta(dd, beta);
  const Vector eta0 = (dd.background() * beta).array().min(kEtaLimit).max(-kEtaLimit).matrix();
  return dd.area() / static_cast<double>(dd.n0()) * eta0.array().exp().sum();
}

double background_mean_prob(const DesignedData& dd, const Params& beta) {
  check_beta(dd, beta);
  const LogProbs bg = log_probs(dd.link(), dd.background(), beta, "background");
  return std::exp(log_mean_exp(bg.logp).value);
}

Vector grad_background_mean_prob(const DesignedData& dd, const Params& beta) {
  check_beta(dd, beta);
  const Vector eta = dd.background() * beta;
  Vector d(eta.size());
  for (Eigen::Index j = 0; j < eta.size(); ++j) d[j] = dprob_deta(dd.link(), eta[j]);
  return dd.background().transpose() * d / static_cast<double>(dd.n0());
}

ClkEvaluation clk_objective_and_constraint(const DesignedData& dd, const Params& beta) {
  if (!dd.model().constrained()) throw ConfigError("CLK requires a prevalence constraint");
  return {loglik_lk(dd, beta), background_mean_prob(dd, beta) - *dd.model().constraint()};
}

ClkValueGrad clk_value_grad(const DesignedData& dd, const Params& beta) {
  if (!dd.model().constrained()) throw ConfigError("CLK requires a prevalence constraint");
  check_beta(dd, beta);
  const LogProbs pres = log_probs(dd.link(), dd.presence(), beta, "presence");
  const LogProbs bg = log_probs(dd.link(), dd.background(), beta, "background");
  const double n1 = static_cast<double>(dd.n1());
  const LogMeanExp lme = log_mean_exp(bg.logp);
  const double value = pres.logp.sum() - n1 * lme.value;
  check_finite(value, "LK likelihood");
  Vector wb(bg.logp.size());
  for (Eigen::Index j = 0; j < wb.size(); ++j) wb[j] = lme.weight(j) * bg.dlogp[j];
  const Vector bg_term = dd.background().transpose() * wb;
  const double mean_p = std::exp(lme.value);
  ClkValueGrad out;
  out.value = value;
  out.magnitude = lk_magnitude(pres.logp, lme, n1, bg.logp.size());
  out.grad = dd.presence().transpose() * pres.dlogp - n1 * bg_term;
  out.residual = mean_p - *dd.model().constraint();
  out.residual_grad = mean_p * bg_term;
  return out;
}

EvalFlags scan_flags(const DesignedData& dd, const Params& beta) {
  check_beta(dd, beta);
  EvalFlags flags;
  for (const Matrix* block : {&dd.presence(), &dd.background()}) {
    const Vector eta = *block * beta;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const LinkValue v = prob_checked(dd.link(), eta[i]);
      flags.saturated = flags.saturated || v.saturated;
      flags.overflow = flags.overflow || v.overflow;
    }
  }
  return flags;
}

double loglik_lk(const ModelSpec& model, const Dataset& data, const Params& beta) {
  return loglik_lk(DesignedData(model, data), beta);
}

Vector grad_lk(const ModelSpec& model, const Dataset& data, const Params& beta) {
  return grad_lk(DesignedData(model, data), beta);
}

double loglik_li(const ModelSpec& model, const Dataset& data, const Params& beta, double pi) {
  return loglik_li(DesignedData(model, data), beta, pi);
}

double loglik_lele(const Params& beta, double pi, const Dataset& data, const ModelSpec& model) {
  return loglik_lele(DesignedData(model, data), beta, pi);
}

double loglik_ppm_cond(const ModelSpec& model, const Dataset& data, const Params& beta) {
  return loglik_ppm_cond(DesignedData(model, data), beta);
}

ClkEvaluation clk_objective_and_constraint(const ModelSpec& model, const Dataset& data,
                                           const Params& beta) {
  return clk_objective_and_constraint(DesignedData(model, data), beta);
}

}  // namespace pbsdm
