#include "pbsdm/verify.hpp"

#include "pbsdm/fit.hpp"
#include "pbsdm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pbsdm {

namespace {

constexpr LinkKind kLinks[] = {LinkKind::logit, LinkKind::log, LinkKind::cloglog};

Dataset random_data(SplitMix64& rng, int n1, int n0, double area = 1.0) {
  Matrix p(n1, 1), b(n0, 1);
  for (Eigen::Index i = 0; i < n1; ++i) p(i, 0) = rng.uniform();
  for (Eigen::Index i = 0; i < n0; ++i) b(i, 0) = rng.uniform();
  return Dataset(std::move(p), std::move(b), area);
}

Vector random_beta(SplitMix64& rng, Eigen::Index n, double range) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(-range, range);
  return v;
}

VerifyCheck make_check(std::string name, double err, double tol, std::string detail = {}) {
  return {std::move(name), err, tol, err < tol, std::move(detail)};
}

VerifyCheck kernel_identity(const VerifyOptions& opt, SplitMix64& rng) {
  double worst_em = 0.0, worst_sb = 0.0;
  for (int i = 0; i < opt.kernel_draws; ++i) {
    const double eta = rng.uniform(-10, 10);
    const double pi = rng.uniform(0.05, 0.95);
    const auto n1 = static_cast<std::int64_t>(1 + rng.uniform() * 5000);
    const auto n0 = static_cast<std::int64_t>(2 + rng.uniform() * 50000);
    const double p = prob(LinkKind::logit, eta);
    const double a = opt.r1n_override ? opt.r1n_override(p, pi, n1, n0) : r1n(p, pi, n1, n0);
    const double em = p_em(eta, pi, n1, n0);
    const double sb = p_sb(eta, static_cast<double>(n0) / static_cast<double>(n1) * pi);
    worst_em = std::max(worst_em, std::abs(a - em));
    worst_sb = std::max(worst_sb, std::abs(em - sb));
  }
  std::ostringstream d;
  d << "max|r1n-p_em| " << worst_em << ", max|p_em-p_sb| " << worst_sb;
  return make_check("kernel identity R1n = EM = SB", std::max(worst_em, worst_sb), 1e-12, d.str());
}

VerifyCheck lele_identity(const VerifyOptions& opt, SplitMix64& rng) {
  double worst = 0.0;
  for (int i = 0; i < opt.lele_instances; ++i) {
    const ModelSpec m(kLinks[i % 3], i % 2 ? DesignSpec::quadratic() : DesignSpec::linear());
    const int n1 = 1 + static_cast<int>(rng.uniform() * 20);
    const int n0 = 2 + static_cast<int>(rng.uniform() * 40);
    const DesignedData dd(m, random_data(rng, n1, n0));
    const Vector beta = random_beta(rng, static_cast<Eigen::Index>(m.design().width()), 2.0);
    const double pi = rng.uniform(0.02, 0.98);
    worst = std::max(worst, std::abs(loglik_li(dd, beta, pi) - loglik_lele(dd, beta, pi)));
  }
  return make_check("Lele partial likelihood = LI", worst, 1e-10);
}

VerifyCheck ppm_offset(const VerifyOptions& opt, SplitMix64& rng) {
  double worst = 0.0;
  const ModelSpec m(LinkKind::log, DesignSpec::quadratic());
  for (double area : {1.0, 2.5}) {
    const DesignedData dd(m, random_data(rng, 30, 80, area));
    for (int k = 0; k < opt.offset_points; ++k) {
      const Vector beta = random_beta(rng, 3, 4.0);
      const double gap = loglik_ppm_cond(dd, beta) - loglik_lk(dd, beta) + 30.0 * std::log(area);
      worst = std::max(worst, std::abs(gap));
    }
  }
  return make_check("PPMcond = LK - n1 log|D|", worst, 1e-10);
}

VerifyCheck clk_anchor(SplitMix64& rng) {
  const Dataset d = random_data(rng, 100, 400);
  double worst = 0.0;
  std::ostringstream detail;
  OptimSettings s;
  s.n_starts = 2;
  for (LinkKind link : kLinks) {
    for (double pi0 : {0.1, 0.3, 0.5}) {
      const ModelSpec m(link, DesignSpec::intercept_only(), pi0);
      const FitResult r = fit_method(LikelihoodKind::CLK, m, d, s);
      const double err = r.converged ? std::abs(prob(link, r.beta_hat[0]) - pi0) : INFINITY;
      worst = std::max(worst, err);
    }
  }
  detail << "links logit/log/cloglog, pi0 in {0.1, 0.3, 0.5}";
  return make_check("CLK intercept-only p_hat = pi0", worst, 1e-10, detail.str());
}

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double rel) {
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = rel * std::max(1.0, std::abs(x[k]));
    Vector xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    g[k] = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

double rel_error(const Vector& g, const Vector& fd) {
  return (g - fd).cwiseAbs().maxCoeff() / std::max(1.0, fd.cwiseAbs().maxCoeff());
}

std::vector<VerifyCheck> gradient_checks(const VerifyOptions& opt, SplitMix64& rng) {
  // LK, LI, Lele, EMSB, PPMcond, CLK (objective and constraint)
  std::vector<double> worst(7, 0.0);
  const double pi0 = 0.35;
  for (int point = 0; point < opt.gradient_points; ++point) {
    const LinkKind link = kLinks[point % 3];
    const ModelSpec m(link, DesignSpec::quadratic(), pi0);
    const Dataset data = random_data(rng, 20, 60);
    const DesignedData dd(m, data);
    const Vector beta = random_beta(rng, 3, 1.5);
    const double pi = rng.uniform(0.1, 0.9);
    Vector theta(4);
    theta << beta, pi;

    worst[0] = std::max(worst[0], rel_error(grad_lk(dd, beta),
                                            central_difference([&](const Vector& b) { return loglik_lk(dd, b); },
                                                               beta, 1e-5)));
    worst[1] = std::max(worst[1], rel_error(li_value_grad(dd, beta, pi).grad,
                                            central_difference([&](const Vector& t) {
                                              return loglik_li(dd, t.head(3), t[3]);
                                            }, theta, 1e-6)));
    worst[2] = std::max(worst[2], rel_error(lele_value_grad(dd, beta, pi).grad,
                                            central_difference([&](const Vector& t) {
                                              return loglik_lele(dd, t.head(3), t[3]);
                                            }, theta, 1e-6)));
    worst[3] = std::max(worst[3], rel_error(emsb_value_grad(dd, beta, pi0).grad,
                                            central_difference([&](const Vector& b) {
                                              return loglik_emsb(dd, b, pi0);
                                            }, beta, 1e-5)));
    // PPMcond is log-link only: evaluate it on the same data under the log link.
    const DesignedData dlog(ModelSpec(LinkKind::log, DesignSpec::quadratic()), data);
    worst[4] = std::max(worst[4], rel_error(ppm_cond_value_grad(dlog, beta).grad,
                                            central_difference([&](const Vector& b) {
                                              return loglik_ppm_cond(dlog, b);
                                            }, beta, 1e-5)));
    const ClkValueGrad clk = clk_value_grad(dd, beta);
    worst[5] = std::max(worst[5], rel_error(clk.grad, central_difference([&](const Vector& b) {
                                              return clk_value_grad(dd, b).value;
                                            }, beta, 1e-5)));
    worst[6] = std::max(worst[6], rel_error(clk.residual_grad, central_difference([&](const Vector& b) {
                                              return clk_value_grad(dd, b).residual;
                                            }, beta, 1e-5)));
  }
  const char* names[] = {"gradient LK", "gradient LI", "gradient Lele", "gradient EMSB",
                         "gradient PPMcond", "gradient CLK objective", "gradient CLK constraint"};
  std::vector<VerifyCheck> out;
  for (std::size_t k = 0; k < worst.size(); ++k)
    out.push_back(make_check(names[k], worst[k], 1e-6,
                             std::to_string(opt.gradient_points) + " random points"));
  return out;
}

}  // namespace

std::vector<VerifyCheck> run_verify(const VerifyOptions& options) {
  std::vector<VerifyCheck> out;
  SplitMix64 kernel_rng(substream_seed(options.seed, 1));
  out.push_back(kernel_identity(options, kernel_rng));
  SplitMix64 lele_rng(substream_seed(options.seed, 2));
  out.push_back(lele_identity(options, lele_rng));
  SplitMix64 offset_rng(substream_seed(options.seed, 3));
  out.push_back(ppm_offset(options, offset_rng));
  SplitMix64 clk_rng(substream_seed(options.seed, 4));
  out.push_back(clk_anchor(clk_rng));
  SplitMix64 grad_rng(substream_seed(options.seed, 5));
  for (VerifyCheck& c : gradient_checks(options, grad_rng)) out.push_back(std::move(c));
  return out;
}

bool all_passed(const std::vector<VerifyCheck>& checks) {
  return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.passed; });
}

}  // namespace pbsdm
