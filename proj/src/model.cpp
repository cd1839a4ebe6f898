#include "pbsdm/model.hpp"

#include "pbsdm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pbsdm {

namespace {

double clamp_eta(double eta, bool* saturated = nullptr) {
  const double c = std::clamp(eta, -kEtaLimit, kEtaLimit);
  if (saturated) *saturated = (c != eta);
  return c;
}

double logistic(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string_view to_string(LinkKind link) {
  switch (link) {
    case LinkKind::logit: return "logit";
    case LinkKind::log: return "log";
    case LinkKind::cloglog: return "cloglog";
  }
  return "?";
}

LinkKind parse_link(std::string_view name) {
  if (name == "logit") return LinkKind::logit;
  if (name == "log") return LinkKind::log;
  if (name == "cloglog" || name == "clog") return LinkKind::cloglog;
  throw ConfigError("unknown link '" + std::string(name) + "' (valid: logit, log, cloglog)");
}

LinkValue prob_checked(LinkKind link, double eta) {
  LinkValue v;
  const double e = clamp_eta(eta, &v.saturated);
  switch (link) {
    case LinkKind::logit: v.p = logistic(e); break;
    case LinkKind::log:
      v.p = std::exp(e);
      v.overflow = v.p > 1.0;
      break;
    case LinkKind::cloglog: v.p = -std::expm1(-std::exp(e)); break;
  }
  return v;
}

double prob(LinkKind link, double eta) { return prob_checked(link, eta).p; }

double dprob_deta(LinkKind link, double eta) {
  const double e = clamp_eta(eta);
  switch (link) {
    case LinkKind::logit: {
      const double p = logistic(e);
      return p * (1.0 - p);
    }
    case LinkKind::log: return std::exp(e);
    case LinkKind::cloglog: return std::exp(e - std::exp(e));
  }
  return 0.0;
}

double log_prob(LinkKind link, double eta) {
  const double e = clamp_eta(eta);
  switch (link) {
    case LinkKind::logit: return -softplus(-e);
    case LinkKind::log: return e;
    case LinkKind::cloglog: {
      const double t = std::exp(e);
      return t < std::log(2.0) ? std::log(-std::expm1(-t)) : std::log1p(-std::exp(-t));
    }
  }
  return 0.0;
}

double dlogprob_deta(LinkKind link, double eta) {
  const double e = clamp_eta(eta);
  switch (link) {
    case LinkKind::logit: return logistic(-e);
    case LinkKind::log: return 1.0;
    case LinkKind::cloglog: {
      const double t = std::exp(e);
      return t < 1e-300 ? 1.0 : t / std::expm1(t);
    }
  }
  return 0.0;
}

LogProbDeriv log_prob_deriv(LinkKind link, double eta) {
  const double e = clamp_eta(eta);
  switch (link) {
    case LinkKind::logit: {
      const double z = std::exp(-std::abs(e));
      if (e >= 0.0) return {-std::log1p(z), z / (1.0 + z)};
      return {e - std::log1p(z), 1.0 / (1.0 + z)};
    }
    case LinkKind::log: return {e, 1.0};
    case LinkKind::cloglog: {
      const double t = std::exp(e);
      if (t < 1e-300) return {e, 1.0};
      // u = 1 - exp(-t) = p, w = exp(-t), so expm1(t) = u / w.
      const double w = std::exp(-t);
      const double u = -std::expm1(-t);
      const double logp = t < std::log(2.0) ? std::log(u) : std::log1p(-w);
      return {logp, w > 0.0 ? t * w / u : 0.0};
    }
  }
  return {};
}

double link_eta(LinkKind link, double p) {
  if (!(p > 0.0)) throw DomainError("link_eta: p must be positive");
  switch (link) {
    case LinkKind::logit:
      if (!(p < 1.0)) throw DomainError("link_eta: logit requires p < 1");
      return std::log(p) - std::log1p(-p);
    case LinkKind::log: return std::log(p);
    case LinkKind::cloglog:
      if (!(p < 1.0)) throw DomainError("link_eta: cloglog requires p < 1");
      return std::log(-std::log1p(-p));
  }
  return 0.0;
}

std::string to_string(const Term& term) {
  switch (term.kind) {
    case Term::Kind::intercept: return "1";
    case Term::Kind::linear: return "x" + std::to_string(term.column + 1);
    case Term::Kind::square: return "x" + std::to_string(term.column + 1) + "^2";
  }
  return "?";
}

DesignSpec::DesignSpec(std::vector<Term> terms) : terms_(std::move(terms)) {
  std::size_t n_intercept = 0;
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    if (terms_[k].kind == Term::Kind::intercept) {
      ++n_intercept;
      intercept_ = k;
    }
  }
  if (n_intercept != 1) throw ConfigError("design must contain exactly one intercept term");
}

DesignSpec DesignSpec::intercept_only() { return DesignSpec({Term::intercept()}); }

DesignSpec DesignSpec::linear(std::size_t n_covariates) {
  std::vector<Term> t{Term::intercept()};
  for (std::size_t j = 0; j < n_covariates; ++j) t.push_back(Term::linear(j));
  return DesignSpec(std::move(t));
}

DesignSpec DesignSpec::quadratic(std::size_t n_covariates) {
  std::vector<Term> t{Term::intercept()};
  for (std::size_t j = 0; j < n_covariates; ++j) t.push_back(Term::linear(j));
  for (std::size_t j = 0; j < n_covariates; ++j) t.push_back(Term::square(j));
  return DesignSpec(std::move(t));
}

DesignSpec DesignSpec::parse(std::string_view text) {
  const std::string s = trim(text);
  if (s == "linear") return linear();
  if (s == "quadratic") return quadratic();
  if (s == "intercept") return intercept_only();
  std::vector<Term> terms;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item == "1") {
      terms.push_back(Term::intercept());
      continue;
    }
    bool squared = false;
    if (item.size() > 2 && item.compare(item.size() - 2, 2, "^2") == 0) {
      squared = true;
      item.resize(item.size() - 2);
    }
    std::size_t col = 0;
    if (item.size() < 2 || item[0] != 'x') throw ConfigError("bad design term '" + item + "'");
    try {
      std::size_t used = 0;
      col = std::stoul(item.substr(1), &used);
      if (used != item.size() - 1 || col == 0) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ConfigError("bad design term '" + item + "'");
    }
    terms.push_back(squared ? Term::square(col - 1) : Term::linear(col - 1));
  }
  return DesignSpec(std::move(terms));
}

std::size_t DesignSpec::required_columns() const noexcept {
  std::size_t n = 0;
  for (const auto& t : terms_)
    if (t.kind != Term::Kind::intercept) n = std::max(n, t.column + 1);
  return n;
}

std::string DesignSpec::describe() const {
  std::string out;
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    if (k) out += ",";
    out += to_string(terms_[k]);
  }
  return out;
}

Vector expand_design(const DesignSpec& design, std::span<const double> x_raw) {
  Vector row(static_cast<Eigen::Index>(design.width()));
  for (std::size_t k = 0; k < design.width(); ++k) {
    const Term& t = design.terms()[k];
    if (t.kind != Term::Kind::intercept && t.column >= x_raw.size())
      throw ConfigError("design term " + to_string(t) + " needs covariate column " +
                        std::to_string(t.column + 1) + " but the row has " +
                        std::to_string(x_raw.size()));
    switch (t.kind) {
      case Term::Kind::intercept: row[k] = 1.0; break;
      case Term::Kind::linear: row[k] = x_raw[t.column]; break;
      case Term::Kind::square: row[k] = x_raw[t.column] * x_raw[t.column]; break;
    }
  }
  return row;
}

Matrix expand_design(const DesignSpec& design, const Matrix& x_raw) {
  if (design.required_columns() > static_cast<std::size_t>(x_raw.cols()))
    throw ConfigError("design '" + design.describe() + "' needs " +
                      std::to_string(design.required_columns()) + " covariate columns, data has " +
                      std::to_string(x_raw.cols()));
  Matrix out(x_raw.rows(), static_cast<Eigen::Index>(design.width()));
  for (std::size_t k = 0; k < design.width(); ++k) {
    const Term& t = design.terms()[k];
    const auto kk = static_cast<Eigen::Index>(k);
    const auto j = static_cast<Eigen::Index>(t.column);
    switch (t.kind) {
      case Term::Kind::intercept: out.col(kk).setOnes(); break;
      case Term::Kind::linear: out.col(kk) = x_raw.col(j); break;
      case Term::Kind::square: out.col(kk) = x_raw.col(j).array().square().matrix(); break;
    }
  }
  return out;
}

ModelSpec::ModelSpec(LinkKind link, DesignSpec design, std::optional<double> prevalence)
    : link_(link), design_(std::move(design)), constraint_(prevalence) {
  if (constraint_ && !(*constraint_ > 0.0 && *constraint_ < 1.0))
    throw DomainError("prevalence constraint must lie in (0,1)");
}

ModelSpec ModelSpec::with_constraint(std::optional<double> prevalence) const {
  return ModelSpec(link_, design_, prevalence);
}

double site_prob(const ModelSpec& model, const Params& beta, std::span<const double> x_raw) {
  return prob(model.link(), expand_design(model.design(), x_raw).dot(beta));
}

}  // namespace pbsdm
