#include <doctest.h>

#include "pbsdm/errors.hpp"
#include "pbsdm/model.hpp"
#include "pbsdm/rng.hpp"

#include <cmath>
#include <vector>

using namespace pbsdm;

namespace {

constexpr LinkKind kLinks[] = {LinkKind::logit, LinkKind::log, LinkKind::cloglog};

// Range of eta over which a central difference of p itself is accurate to
// better than 1e-6 (beyond it p saturates and the difference cancels).
std::pair<double, double> direct_range(LinkKind link) {
  switch (link) {
    case LinkKind::logit: return {-15.0, 8.0};
    case LinkKind::log: return {-30.0, 30.0};
    case LinkKind::cloglog: return {-15.0, 1.5};
  }
  return {0, 0};
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("expand_design examples") {
  CHECK(expand_design(DesignSpec::linear(), std::vector<double>{0.4}) == Vector{{1.0, 0.4}});
  CHECK(expand_design(DesignSpec::quadratic(), std::vector<double>{0.5}) == Vector{{1.0, 0.5, 0.25}});
  const DesignSpec second({Term::intercept(), Term::linear(1)});
  CHECK(expand_design(second, std::vector<double>{0.1, 0.9}) == Vector{{1.0, 0.9}});
}

TEST_CASE("expand_design rejects out-of-range columns") {
  const DesignSpec second({Term::intercept(), Term::linear(1)});
  CHECK_THROWS_AS(expand_design(second, std::vector<double>{0.1}), ConfigError);
  CHECK_THROWS_AS(expand_design(second, Matrix::Zero(3, 1)), ConfigError);
}

TEST_CASE("design needs exactly one intercept") {
  CHECK_THROWS_AS(DesignSpec({Term::linear(0)}), ConfigError);
  CHECK_THROWS_AS(DesignSpec({Term::intercept(), Term::intercept()}), ConfigError);
  CHECK(DesignSpec::quadratic().width() == 3);
  CHECK(DesignSpec::parse("1,x1,x1^2").terms() == DesignSpec::quadratic().terms());
  CHECK(DesignSpec::parse("x2,1").intercept_index() == 1);
  CHECK_THROWS_AS(DesignSpec::parse("1,z"), ConfigError);
}

TEST_CASE("matrix expansion matches row expansion") {
  Matrix raw(3, 2);
  raw << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  const DesignSpec d({Term::intercept(), Term::square(1), Term::linear(0)});
  const Matrix x = expand_design(d, raw);
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const std::vector<double> row{raw(i, 0), raw(i, 1)};
    CHECK(x.row(i).transpose() == expand_design(d, row));
  }
}

TEST_CASE("prob and dprob_deta at zero") {
  CHECK(prob(LinkKind::logit, 0.0) == 0.5);
  CHECK(prob(LinkKind::log, 0.0) == 1.0);
  CHECK(prob(LinkKind::cloglog, 0.0) == doctest::Approx(0.632120558828557678).epsilon(1e-15));
  CHECK(dprob_deta(LinkKind::logit, 0.0) == 0.25);
  CHECK(dprob_deta(LinkKind::log, 0.0) == 1.0);
  CHECK(dprob_deta(LinkKind::cloglog, 0.0) == doctest::Approx(0.367879441171442321).epsilon(1e-15));
}

TEST_CASE("log link flags p > 1 and saturation is clamped") {
  CHECK(prob_checked(LinkKind::log, 0.5).overflow);
  CHECK_FALSE(prob_checked(LinkKind::log, -0.5).overflow);
  const LinkValue big = prob_checked(LinkKind::log, 1e6);
  CHECK(big.saturated);
  CHECK(std::isfinite(big.p));
  CHECK(prob_checked(LinkKind::logit, -800).saturated);
  CHECK(prob(LinkKind::logit, -800) > 0.0);
}

TEST_CASE("dprob_deta matches central differences") {
  SplitMix64 rng(11);
  for (LinkKind link : kLinks) {
    const auto [lo, hi] = direct_range(link);
    for (int i = 0; i < 500; ++i) {
      const double eta = rng.uniform(lo, hi);
      const double h = 1e-6 * std::max(1.0, std::abs(eta));
      const double fd = (prob(link, eta + h) - prob(link, eta - h)) / (2 * h);
      INFO(to_string(link), " eta=", eta);
      CHECK(rel_err(dprob_deta(link, eta), fd) < 1e-6);
    }
  }
}

TEST_CASE("log-space derivative matches central differences over the full range") {
  SplitMix64 rng(12);
  for (LinkKind link : kLinks) {
    const double hi = link == LinkKind::cloglog ? 3.5 : 30.0;
    for (int i = 0; i < 500; ++i) {
      const double eta = rng.uniform(-30.0, hi);
      const double h = 1e-6 * std::max(1.0, std::abs(eta));
      const double fd = (log_prob(link, eta + h) - log_prob(link, eta - h)) / (2 * h);
      INFO(to_string(link), " eta=", eta);
      CHECK(rel_err(dlogprob_deta(link, eta), fd) < 1e-6);
      CHECK(log_prob(link, eta) == doctest::Approx(std::log(prob(link, eta))).epsilon(1e-12));
    }
  }
}

TEST_CASE("ranges and monotonicity") {
  SplitMix64 rng(13);
  for (LinkKind link : kLinks) {
    std::vector<double> etas;
    for (int i = 0; i < 400; ++i) etas.push_back(rng.uniform(-30.0, 30.0));
    std::sort(etas.begin(), etas.end());
    double prev = -1.0;
    for (double eta : etas) {
      const double p = prob(link, eta);
      CHECK(p > 0.0);
      if (link != LinkKind::log) CHECK(p <= 1.0);
      CHECK(p >= prev);
      prev = p;
    }
    // strict increase where p is representable away from 1
    for (double eta = -20; eta < 2; eta += 0.5) CHECK(prob(link, eta + 0.25) > prob(link, eta));
  }
  CHECK(prob(LinkKind::logit, 5.0) < 1.0);
  CHECK(prob(LinkKind::cloglog, 1.0) < 1.0);
}

TEST_CASE("link_eta inverts prob") {
  for (LinkKind link : kLinks)
    for (double p : {0.01, 0.3, 0.5, 0.9}) CHECK(prob(link, link_eta(link, p)) == doctest::Approx(p).epsilon(1e-14));
  CHECK(link_eta(LinkKind::logit, 0.3) == doctest::Approx(-0.847297860387203614).epsilon(1e-15));
  CHECK_THROWS_AS(link_eta(LinkKind::logit, 1.0), DomainError);
}

TEST_CASE("model constraint domain") {
  CHECK_THROWS_AS(ModelSpec(LinkKind::logit, DesignSpec::linear(), 1.0), DomainError);
  CHECK_THROWS_AS(ModelSpec(LinkKind::logit, DesignSpec::linear(), 0.0), DomainError);
  const ModelSpec clk(LinkKind::logit, DesignSpec::linear(), 0.3);
  CHECK(clk.constrained());
  CHECK_FALSE(clk.with_constraint(std::nullopt).constrained());
  CHECK(parse_link("clog") == LinkKind::cloglog);
  CHECK_THROWS_AS(parse_link("probit"), ConfigError);
}

TEST_CASE("fused log probability agrees with the separate functions") {
  SplitMix64 rng(13);
  for (LinkKind link : kLinks)
    for (int i = 0; i < 2000; ++i) {
      const double eta = rng.uniform(-800.0, 800.0) * (i % 2 ? 1.0 : 0.01);
      const LogProbDeriv v = log_prob_deriv(link, eta);
      INFO(to_string(link), " eta=", eta);
      CHECK(rel_err(v.logp, log_prob(link, eta)) < 1e-14);
      CHECK(rel_err(v.dlogp, dlogprob_deta(link, eta)) < 1e-13);
    }
}
