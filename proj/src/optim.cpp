#include "pbsdm/optim.hpp"

#include "pbsdm/errors.hpp"
#include "pbsdm/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace pbsdm {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;
constexpr double kTieTolerance = 1e-10;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Evaluation that maps evaluation failures to a non-finite value, so line
// searches can step back from bad regions.
ValueGrad safe_eval(const ValueGradFn& fn, const Vector& x) {
  try {
    ValueGrad v = fn(x);
    if (!std::isfinite(v.value) || !v.grad.allFinite()) return {-kInf, Vector()};
    return v;
  } catch (const EvaluationError&) {
    return {-kInf, Vector()};
  }
}

struct LocalResult {
  Vector x;
  double value = -kInf;
  Vector grad;
  bool converged = false;
  int iterations = 0;
  Matrix hinv;  // final inverse-Hessian approximation of -f
};

// BFGS on -f with backtracking Armijo line search (halving).
LocalResult bfgs_maximize(const ValueGradFn& fn, Vector x, double tol_grad, int max_iter,
                          const Matrix* warm = nullptr) {
  ValueGrad ev = safe_eval(fn, x);
  LocalResult out;
  out.x = x;
  if (!std::isfinite(ev.value)) return out;

  const Eigen::Index d = x.size();
  double f = -ev.value;
  double ev_mag = ev.magnitude;
  Vector g = -ev.grad;
  const bool use_warm = warm && warm->rows() == d && warm->allFinite();
  Matrix hinv = use_warm ? *warm : Matrix::Identity(d, d);
  bool fresh = !use_warm;  // hinv is the identity
  bool scaled = use_warm;

  int it = 0;
  for (; it < max_iter; ++it) {
    if (max_abs(g) <= tol_grad) {
      out.converged = true;
      break;
    }
    Vector dir = -hinv * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      fresh = true;
      dir = -g;
      slope = -g.squaredNorm();
    }
    double alpha = fresh ? std::min(1.0, 1.0 / std::max(max_abs(dir), 1e-300)) : 1.0;

    bool accepted = false;
    Vector xn;
    ValueGrad en;
    const double min_step = 1e-12 * (1.0 + max_abs(x));
    for (int k = 0; k < kMaxBacktracks && alpha * max_abs(dir) > min_step; ++k, alpha *= 0.5) {
      xn = x + alpha * dir;
      en = safe_eval(fn, xn);
      if (!std::isfinite(en.value)) continue;
      const double fn_val = -en.value;
      if (fn_val <= f + kArmijo * alpha * slope) {
        accepted = true;
        break;
      }
      // Inside the rounding floor of f, accept steps that reduce the gradient.
      const double floor = std::max(1e-14 * (1.0 + std::abs(f)), 64.0 * kEps * std::max(ev_mag, en.magnitude));
      if (std::abs(fn_val - f) <= floor &&
          max_abs(en.grad) < max_abs(g)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (fresh) break;  // stalled on a steepest-descent step
      hinv.setIdentity();
      fresh = true;
      continue;
    }

    const Vector s = xn - x;
    const Vector gn = -en.grad;
    const Vector y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        hinv *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Vector hy = hinv * y;
      hinv += (rho * rho * y.dot(hy) + rho) * (s * s.transpose()) -
              rho * (hy * s.transpose() + s * hy.transpose());
      fresh = false;
    }
    x = xn;
    f = -en.value;
    ev_mag = en.magnitude;
    g = gn;
  }
  out.x = x;
  out.value = -f;
  out.grad = -g;
  out.iterations = it;
  out.hinv = hinv;
  if (!out.converged && max_abs(g) <= tol_grad) out.converged = true;
  return out;
}

std::vector<Vector> make_starts(const Params& start, const OptimSettings& settings) {
  std::vector<Vector> starts{start};
  SplitMix64 rng(settings.seed);
  for (int k = 1; k < settings.n_starts; ++k) {
    Vector s(start.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
      s[i] = rng.uniform(-settings.start_range, settings.start_range);
    starts.push_back(std::move(s));
  }
  return starts;
}

// Higher objective wins; near-ties go to the smaller coefficient norm.
bool better(double value, const Vector& x, double best_value, const Vector& best_x) {
  if (!std::isfinite(best_value)) return std::isfinite(value);
  if (value > best_value + kTieTolerance) return true;
  if (value < best_value - kTieTolerance) return false;
  return x.norm() < best_x.norm();
}

double projected_norm(const Vector& g, const Vector& a) {
  const double aa = a.squaredNorm();
  if (aa == 0.0) return max_abs(g);
  return max_abs(g - (g.dot(a) / aa) * a);
}

struct ConstrainedLocal {
  Vector x;
  ConstrainedEval eval;
  double multiplier = 0.0;
  bool converged = false;
  bool monotone = true;
  int iterations = 0;
  bool ok = false;
};

bool finite_eval(const ConstrainedEval& e) {
  return std::isfinite(e.value) && std::isfinite(e.residual) && e.grad.allFinite() &&
         e.residual_grad.allFinite();
}

std::optional<ConstrainedEval> safe_constrained(const ConstrainedFn& fn, const Vector& x) {
  try {
    ConstrainedEval e = fn(x);
    if (!finite_eval(e)) return std::nullopt;
    return e;
  } catch (const EvaluationError&) {
    return std::nullopt;
  }
}

// Newton steps on the KKT system of max f s.t. c = 0, using a finite-difference
// Hessian of the Lagrangian built from analytic gradients. Drives the residual
// to rounding level once the augmented Lagrangian is close.
void polish_kkt(const ConstrainedFn& fn, ConstrainedLocal& run, double tol_grad) {
  const Eigen::Index d = run.x.size();
  for (int it = 0; it < 10; ++it) {
    const ConstrainedEval& e = run.eval;
    const double aa = e.residual_grad.squaredNorm();
    if (aa == 0.0) return;
    const double nu = e.grad.dot(e.residual_grad) / aa;
    const double pg = projected_norm(e.grad, e.residual_grad);
    const double c = std::abs(e.residual);
    if (c <= 1e-15 && pg <= 0.01 * tol_grad) return;

    Matrix hl(d, d);
    for (Eigen::Index k = 0; k < d; ++k) {
      const double step = 1e-5 * std::max(1.0, std::abs(run.x[k]));
      Vector xp = run.x, xm = run.x;
      xp[k] += step;
      xm[k] -= step;
      const auto ep = safe_constrained(fn, xp);
      const auto em = safe_constrained(fn, xm);
      if (!ep || !em) return;
      hl.col(k) = ((ep->grad - nu * ep->residual_grad) - (em->grad - nu * em->residual_grad)) /
                  (2.0 * step);
    }
    hl = 0.5 * (hl + hl.transpose()).eval();

    Matrix kkt = Matrix::Zero(d + 1, d + 1);
    kkt.topLeftCorner(d, d) = hl;
    kkt.topRightCorner(d, 1) = -e.residual_grad;
    kkt.bottomLeftCorner(1, d) = e.residual_grad.transpose();
    Vector rhs(d + 1);
    rhs.head(d) = -(e.grad - nu * e.residual_grad);
    rhs[d] = -e.residual;
    const Vector step = kkt.colPivHouseholderQr().solve(rhs);
    if (!step.allFinite()) return;

    const Vector xn = run.x + step.head(d);
    const auto en = safe_constrained(fn, xn);
    if (!en) return;
    const double pg_new = projected_norm(en->grad, en->residual_grad);
    const double c_new = std::abs(en->residual);
    const bool c_ok = c_new <= c || c_new <= 1e-15;
    const bool g_ok = pg_new <= std::max(pg, 0.1 * tol_grad);
    if (!(c_ok && g_ok) || (c_new >= c && pg_new >= pg)) return;
    run.x = xn;
    run.eval = *en;
    run.multiplier = nu + step[d];
  }
}

ConstrainedLocal augmented_lagrangian(const ConstrainedFn& fn, const Vector& x0,
                                      const OptimSettings& settings) {
  ConstrainedLocal run;
  const auto first = safe_constrained(fn, x0);
  if (!first) return run;
  run.x = x0;
  run.eval = *first;
  run.ok = true;

  double lambda = 0.0;
  double mu = 10.0 * std::max(1.0, max_abs(first->grad));
  std::vector<double> history;
  Matrix warm;  // carried across outer iterations
  for (int outer = 0; outer < settings.max_outer; ++outer) {
    const ValueGradFn merit = [&fn, lambda, mu](const Vector& x) -> ValueGrad {
      const ConstrainedEval e = fn(x);
      const double c = e.residual;
      return {e.value - lambda * c - 0.5 * mu * c * c,
              e.grad - (lambda + mu * c) * e.residual_grad,
              e.magnitude + std::abs(lambda * c) + std::abs(0.5 * mu * c * c)};
    };
    LocalResult inner = bfgs_maximize(merit, run.x, settings.tol_grad, settings.max_iter,
                                      warm.size() ? &warm : nullptr);
    warm = inner.hinv;
    run.iterations += inner.iterations;
    const auto e = safe_constrained(fn, inner.x);
    if (!e) throw OptimizationError("augmented Lagrangian produced a non-finite iterate");
    run.x = inner.x;
    run.eval = *e;
    const double c = e->residual;
    history.push_back(std::abs(c));
    run.multiplier = lambda + mu * c;
    if (std::abs(c) <= settings.tol_constraint &&
        projected_norm(e->grad, e->residual_grad) <= settings.tol_grad)
      break;
    lambda += mu * c;
    mu *= settings.penalty_growth;
    if (!std::isfinite(lambda) || !std::isfinite(mu))
      throw OptimizationError("augmented Lagrangian penalty diverged");
  }
  for (std::size_t k = 2; k < history.size(); ++k)
    if (history[k] > history[k - 1] && history[k] > settings.tol_constraint) run.monotone = false;

  polish_kkt(fn, run, settings.tol_grad);
  run.converged = run.monotone && std::abs(run.eval.residual) <= settings.tol_constraint &&
                  projected_norm(run.eval.grad, run.eval.residual_grad) <= settings.tol_grad;
  return run;
}

}  // namespace

void OptimSettings::validate() const {
  if (!(tol_grad > 0.0) || !(tol_constraint > 0.0) || max_iter <= 0 || n_starts <= 0 ||
      !(penalty_growth > 1.0) || max_outer <= 0 || !(start_range > 0.0))
    throw ConfigError("optimizer settings must be positive (penalty_growth > 1)");
}

Matrix hessian_fd(const ObjectiveFn& objective, const Params& at) {
  const Eigen::Index d = at.size();
  Vector step(d);
  for (Eigen::Index k = 0; k < d; ++k) step[k] = 1e-4 * std::max(1.0, std::abs(at[k]));
  const double f0 = objective(at);
  Matrix h(d, d);
  auto shifted = [&](Eigen::Index i, double si, Eigen::Index j, double sj) {
    Vector x = at;
    x[i] += si * step[i];
    x[j] += sj * step[j];
    return objective(x);
  };
  for (Eigen::Index i = 0; i < d; ++i) {
    h(i, i) = (shifted(i, 1, i, 0) - 2.0 * f0 + shifted(i, -1, i, 0)) / (step[i] * step[i]);
    for (Eigen::Index j = i + 1; j < d; ++j) {
      h(i, j) = (shifted(i, 1, j, 1) - shifted(i, 1, j, -1) - shifted(i, -1, j, 1) +
                 shifted(i, -1, j, -1)) /
                (4.0 * step[i] * step[j]);
      h(j, i) = h(i, j);
    }
  }
  h = 0.5 * (h + h.transpose()).eval();
  if (!h.allFinite()) throw EvaluationError("finite-difference Hessian has non-finite entries");
  return h;
}

double hessian_fd_noise(double scale, const Params& at) {
  double step = 1e-4;
  for (Eigen::Index k = 0; k < at.size(); ++k) step = std::min(step, 1e-4 * std::max(1.0, std::abs(at[k])));
  return 1000.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(scale)) / (step * step);
}

Identifiability identifiability(const Matrix& hessian, double noise_floor) {
  if (hessian.rows() != hessian.cols()) throw ConfigError("identifiability needs a square matrix");
  if (hessian.rows() == 0) return {1.0, true};
  if (!hessian.allFinite()) return {0.0, false};
  Eigen::SelfAdjointEigenSolver<Matrix> eig(hessian, Eigen::EigenvaluesOnly);
  const Vector mags = eig.eigenvalues().cwiseAbs();
  const double hi = mags.maxCoeff();
  if (!(hi > noise_floor) || !(hi > 0.0)) return {0.0, false};
  const double lo = mags.minCoeff();
  const double rc = lo <= noise_floor ? 0.0 : lo / hi;
  return {rc, rc >= kIdentifiabilityThreshold};
}

Matrix null_space_basis(const Vector& a) {
  const Eigen::Index d = a.size();
  if (d == 0) return Matrix(0, 0);
  const Matrix am = a;
  Eigen::HouseholderQR<Matrix> qr(am);
  const Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  return q.rightCols(d - 1);
}

FitResult maximize(const UnconstrainedProblem& problem, const Params& start,
                   const OptimSettings& settings) {
  settings.validate();
  LocalResult best;
  int best_index = -1;
  int total_iterations = 0;
  const auto starts = make_starts(start, settings);
  for (std::size_t k = 0; k < starts.size(); ++k) {
    LocalResult run = bfgs_maximize(problem.value_grad, starts[k], settings.tol_grad, settings.max_iter);
    total_iterations += run.iterations;
    if (!std::isfinite(run.value)) continue;
    if (best_index < 0 || better(run.value, run.x, best.value, best.x)) {
      best = std::move(run);
      best_index = static_cast<int>(k);
    }
  }
  if (best_index < 0) throw OptimizationError("objective is non-finite at every start");

  FitResult out;
  out.beta_hat = best.x;
  out.loglik = best.value;
  out.converged = best.converged;
  out.iterations = total_iterations;
  out.grad_norm = max_abs(best.grad);
  out.start_index = best_index;
  const ObjectiveFn value = problem.value ? problem.value : ObjectiveFn([&](const Vector& x) {
    return problem.value_grad(x).value;
  });
  try {
    out.hessian = hessian_fd(value, best.x);
    out.hessian_noise = hessian_fd_noise(best.value, best.x);
    const Identifiability id = identifiability(out.hessian, out.hessian_noise);
    out.recip_cond = id.recip_cond;
    out.identifiable = id.identifiable;
  } catch (const EvaluationError&) {
    out.recip_cond = 0.0;
    out.identifiable = false;
  }
  return out;
}

FitResult maximize(const ObjectiveFn& objective, const GradientFn& gradient, const Params& start,
                   const OptimSettings& settings) {
  UnconstrainedProblem problem{[&](const Vector& x) { return ValueGrad{objective(x), gradient(x)}; },
                               objective};
  return maximize(problem, start, settings);
}

FitResult maximize_constrained(const ConstrainedFn& problem, const Params& start,
                               const OptimSettings& settings) {
  settings.validate();
  if (!safe_constrained(problem, start))
    throw OptimizationError("objective or constraint is non-finite at the start point");

  ConstrainedLocal best;
  int best_index = -1;
  int total_iterations = 0;
  const auto starts = make_starts(start, settings);
  for (std::size_t k = 0; k < starts.size(); ++k) {
    ConstrainedLocal run;
    try {
      run = augmented_lagrangian(problem, starts[k], settings);
    } catch (const OptimizationError&) {
      continue;
    }
    total_iterations += run.iterations;
    if (!run.ok) continue;
    bool take = best_index < 0;
    if (!take) {
      const bool feas = std::abs(run.eval.residual) <= settings.tol_constraint;
      const bool best_feas = std::abs(best.eval.residual) <= settings.tol_constraint;
      if (feas != best_feas)
        take = feas;
      else if (feas)
        take = better(run.eval.value, run.x, best.eval.value, best.x);
      else
        take = std::abs(run.eval.residual) < std::abs(best.eval.residual);
    }
    if (take) {
      best = std::move(run);
      best_index = static_cast<int>(k);
    }
  }
  if (best_index < 0) throw OptimizationError("augmented Lagrangian diverged from every start");

  FitResult out;
  out.beta_hat = best.x;
  out.loglik = best.eval.value;
  out.converged = best.converged;
  out.iterations = total_iterations;
  out.grad_norm = projected_norm(best.eval.grad, best.eval.residual_grad);
  out.constraint_residual = best.eval.residual;
  out.multiplier = best.multiplier;
  out.start_index = best_index;

  // Identifiability on the Hessian of the Lagrangian restricted to the
  // constraint's tangent space.
  try {
    const ObjectiveFn f = [&](const Vector& x) { return problem(x).value; };
    const ObjectiveFn c = [&](const Vector& x) { return problem(x).residual; };
    out.hessian = hessian_fd(f, best.x) - best.multiplier * hessian_fd(c, best.x);
    const Matrix z = null_space_basis(best.eval.residual_grad);
    out.hessian_noise = hessian_fd_noise(std::abs(best.eval.value) + std::abs(best.multiplier), best.x);
    const Identifiability id = identifiability(z.transpose() * out.hessian * z, out.hessian_noise);
    out.recip_cond = id.recip_cond;
    out.identifiable = id.identifiable;
  } catch (const EvaluationError&) {
    out.recip_cond = 0.0;
    out.identifiable = false;
  }
  return out;
}

FitResult maximize_constrained(const ObjectiveFn& objective, const GradientFn& gradient,
                               const ObjectiveFn& constraint, const GradientFn& constraint_gradient,
                               const Params& start, const OptimSettings& settings) {
  const ConstrainedFn fn = [&](const Vector& x) {
    return ConstrainedEval{objective(x), gradient(x), constraint(x), constraint_gradient(x)};
  };
  return maximize_constrained(fn, start, settings);
}

}  // namespace pbsdm
