#pragma once

// Test-only helpers: random datasets and plain-loop reference likelihoods
// written directly from the defining products, without the library's
// log-space machinery.

#include "pbsdm/likelihood.hpp"
#include "pbsdm/rng.hpp"

#include <cmath>
#include <functional>

namespace pbsdm::testing {

inline Dataset random_dataset(SplitMix64& rng, int n1, int n0, int dim = 1, double area = 1.0) {
  Matrix p(n1, dim), b(n0, dim);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform();
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.uniform();
  return Dataset(p, b, area);
}

inline Vector random_vector(SplitMix64& rng, Eigen::Index n, double lo, double hi) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
  return v;
}

inline double site_p(const DesignedData& dd, const Matrix& x, Eigen::Index i, const Params& beta) {
  return prob(dd.link(), x.row(i).dot(beta));
}

inline double ref_lk(const DesignedData& dd, const Params& beta) {
  double mean = 0.0;
  for (Eigen::Index j = 0; j < dd.n0(); ++j) mean += site_p(dd, dd.background(), j, beta);
  mean /= static_cast<double>(dd.n0());
  double ll = 0.0;
  for (Eigen::Index i = 0; i < dd.n1(); ++i) ll += std::log(site_p(dd, dd.presence(), i, beta) / mean);
  return ll;
}

inline double ref_li(const DesignedData& dd, const Params& beta, double pi) {
  const double h = static_cast<double>(dd.n1()) / static_cast<double>(dd.n1() + dd.n0());
  auto r = [&](double p) { return (h / pi) * p / ((h / pi) * p + 1.0 - h); };
  double ll = 0.0;
  for (Eigen::Index i = 0; i < dd.n1(); ++i) ll += std::log(r(site_p(dd, dd.presence(), i, beta)));
  for (Eigen::Index j = 0; j < dd.n0(); ++j) ll += std::log(1.0 - r(site_p(dd, dd.background(), j, beta)));
  return ll;
}

inline double ref_ppm_cond(const DesignedData& dd, const Params& beta) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < dd.n0(); ++j) total += std::exp(dd.background().row(j).dot(beta));
  total *= dd.area() / static_cast<double>(dd.n0());
  double ll = 0.0;
  for (Eigen::Index i = 0; i < dd.n1(); ++i) ll += dd.presence().row(i).dot(beta) - std::log(total);
  return ll;
}

// Central-difference gradient.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                          double rel_step = 1e-5) {
  Vector g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = rel_step * std::max(1.0, std::abs(x[k]));
    Vector xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    g[k] = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

// max_k |a_k - b_k| / max(1, max_k |b_k|)
inline double gradient_rel_error(const Vector& analytic, const Vector& numeric) {
  return (analytic - numeric).cwiseAbs().maxCoeff() / std::max(1.0, numeric.cwiseAbs().maxCoeff());
}

}  // namespace pbsdm::testing
