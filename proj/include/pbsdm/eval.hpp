#pragma once

// Replication-study statistics: coefficient summaries over retained fits,
// RMS error against the true curve, relative-probability (ratio) curves and
// the log-curvature screen behind the RSPF conditions.

#include "pbsdm/fit.hpp"
#include "pbsdm/simulate.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pbsdm {

inline constexpr int kCurveGridSize = 1001;

// grid_size equally spaced points on [0,1], endpoints included. Needs >= 2.
Vector unit_grid(int grid_size);

// p(y=1|x, beta) at each grid point of a one-covariate model. Log-link values
// above 1 are returned as computed.
Vector fitted_curve(const ModelSpec& model, const Params& beta, const Vector& grid);

double rms_error(const Params& beta, const ModelSpec& model, const Scenario& scenario,
                 int grid_size = kCurveGridSize);

struct RatioCurve {
  Vector x;
  Vector ratio;  // p_hat(x) / pi_hat
  double pi_hat = 0.0;
};

// pi_hat is the background mean of p_hat. Throws EvaluationError if pi_hat <= 0.
RatioCurve ratio_curve(const Params& beta, const ModelSpec& model, const Dataset& data,
                       int grid_size = kCurveGridSize);

// Which fits enter a summary.
using Screen = std::function<bool(const FitResult&)>;
bool identifiable_screen(const FitResult& fit);

// Unconstrained log-link fits have an exactly flat intercept, so they are
// screened on the slope block; everything else on the full Hessian.
Screen screen_for(LikelihoodKind kind, const ModelSpec& model);

// "beta0", "beta1", ... in design order, then "pi" for LI / Lele.
std::vector<std::string> coefficient_names(const DesignSpec& design, bool with_pi);

struct CoefStat {
  std::string name;
  double mean = 0.0;
  double se = 0.0;  // sample SD of the retained estimates; NaN with one retained
};

struct Summary {
  std::vector<CoefStat> coefs;
  int retained = 0;
  int removed = 0;
};

// Mean and SD of each coefficient over the fits passing `screen`. Throws
// EvaluationError when every fit is removed.
Summary summarize(const std::vector<FitResult>& fits, const std::vector<std::string>& names,
                  const Screen& screen = identifiable_screen);

struct RspfScreen {
  std::optional<double> deviation;  // unset when true_prob hits 0 on the grid
  bool log_nonlinear = false;
};

inline constexpr double kRspfThreshold = 0.5;

// Max distance of log true_prob from its secant through x=0 and x=1.
RspfScreen rspf_screen(const Scenario& scenario, double threshold = kRspfThreshold,
                       int grid_size = kCurveGridSize);

}  // namespace pbsdm
