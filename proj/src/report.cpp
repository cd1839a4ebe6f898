#include "cell_io.hpp"
#include "pbsdm/csv.hpp"
#include "pbsdm/errors.hpp"
#include "pbsdm/experiment.hpp"
#include "pbsdm/svg.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace pbsdm {

namespace {

using detail::CellPlan;
using detail::RepRecord;
using detail::SensitivityRecord;

const std::string kNan = "nan";

struct LoadedCell {
  CellPlan plan;
  std::string status;
  std::vector<RepRecord> reps;
  std::vector<SensitivityRecord> sens;
};

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::nan("");
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string num(double v) { return std::isnan(v) ? kNan : format_double(v); }

void write_text(const std::filesystem::path& path, const std::string& text) { write_file_atomic(path, text); }

// Pointwise mean and 5%/95% quantiles of a set of curves.
struct Band {
  std::vector<double> mean, lo, hi;
};

Band band_of(const std::vector<Vector>& curves, std::size_t n) {
  Band b;
  b.mean.assign(n, std::nan(""));
  b.lo = b.hi = b.mean;
  if (curves.empty()) return b;
  std::vector<double> col(curves.size());
  for (std::size_t g = 0; g < n; ++g) {
    for (std::size_t i = 0; i < curves.size(); ++i) col[i] = curves[i][static_cast<Eigen::Index>(g)];
    b.mean[g] = mean_of(col);
    std::sort(col.begin(), col.end());
    auto q = [&](double p) {
      const double pos = p * static_cast<double>(col.size() - 1);
      const auto k = static_cast<std::size_t>(std::floor(pos));
      const double f = pos - static_cast<double>(k);
      return k + 1 < col.size() ? col[k] * (1 - f) + col[k + 1] * f : col[k];
    };
    b.lo[g] = q(0.05);
    b.hi[g] = q(0.95);
  }
  return b;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void write_reports(const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const auto manifest = read_manifest(out_dir / "manifest.txt");
  const std::vector<CellPlan> plans = detail::cells_from_manifest(manifest);
  int grid_size = kCurveGridSize;
  if (const auto it = manifest.find("config.grid_size"); it != manifest.end())
    grid_size = static_cast<int>(parse_double(it->second));
  const Vector grid = unit_grid(grid_size);
  const auto n_grid = static_cast<std::size_t>(grid.size());

  std::vector<LoadedCell> cells;
  std::vector<ScenarioKind> scenarios;
  std::size_t max_width = 1;
  for (const CellPlan& p : plans) {
    LoadedCell c;
    c.plan = p;
    const auto st = manifest.find("cell." + p.id + ".status");
    c.status = st == manifest.end() ? "pending" : st->second;
    const fs::path file = out_dir / "cells" / p.file_name();
    if (c.status == "pending" || !fs::exists(file)) continue;
    if (p.sensitivity) c.sens = detail::read_sensitivity_cell(file);
    else c.reps = detail::read_rep_cell(file);
    max_width = std::max(max_width, p.design.width());
    if (std::find(scenarios.begin(), scenarios.end(), p.scenario) == scenarios.end())
      scenarios.push_back(p.scenario);
    cells.push_back(std::move(c));
  }

  // summary.csv
  {
    CsvWriter w(out_dir / "summary.csv");
    w.row({"scenario", "method", "link", "coef", "mean", "se", "n_removed"});
    for (const LoadedCell& c : cells) {
      if (c.plan.sensitivity) continue;
      const bool with_pi = c.plan.method.kind == LikelihoodKind::LI || c.plan.method.kind == LikelihoodKind::Lele;
      const auto names = coefficient_names(c.plan.design, with_pi);
      std::vector<FitResult> fits;
      for (const RepRecord& r : c.reps) {
        FitResult f;
        // Failed replications count as removed.
        f.identifiable = !r.failed && r.retained;
        f.beta_hat = r.failed ? Params::Zero(static_cast<Eigen::Index>(c.plan.design.width())) : r.beta;
        if (with_pi) f.pi_hat = r.failed ? 0.0 : r.pi_hat;
        fits.push_back(std::move(f));
      }
      const std::string scen(to_string(c.plan.scenario)), kind(to_string(c.plan.method.kind)),
          link(to_string(c.plan.method.link));
      try {
        const Summary s = summarize(fits, names);
        for (const CoefStat& cs : s.coefs)
          w.row({scen, kind, link, cs.name, num(cs.mean), num(cs.se), std::to_string(s.removed)});
      } catch (const EvaluationError&) {
        for (const std::string& n : names)
          w.row({scen, kind, link, n, kNan, kNan, std::to_string(fits.size())});
      }
    }
    w.commit();
  }

  // rms.csv and fits.csv
  {
    CsvWriter w(out_dir / "rms.csv");
    w.row({"scenario", "method", "link", "n_fits", "mean_rms", "sd_rms", "n_retained", "mean_rms_retained"});
    CsvWriter f(out_dir / "fits.csv");
    std::vector<std::string> fh = {"scenario", "method", "link", "rep", "status", "converged", "identifiable",
                                   "retained", "recip_cond", "slope_recip_cond", "loglik", "grad_norm",
                                   "constraint_residual", "pi_hat", "background_mean", "rms"};
    for (std::size_t k = 0; k < max_width; ++k) fh.push_back("beta" + std::to_string(k));
    fh.emplace_back("error");
    f.row(fh);
    for (const LoadedCell& c : cells) {
      if (c.plan.sensitivity) continue;
      const std::string scen(to_string(c.plan.scenario)), kind(to_string(c.plan.method.kind)),
          link(to_string(c.plan.method.link));
      std::vector<double> all, kept;
      for (const RepRecord& r : c.reps) {
        std::vector<std::string> row = {scen, kind, link, std::to_string(r.rep), r.failed ? "error" : "ok"};
        if (r.failed) {
          row.resize(fh.size() - 1);
        } else {
          all.push_back(r.rms);
          if (r.retained) kept.push_back(r.rms);
          row.push_back(r.converged ? "1" : "0");
          row.push_back(r.identifiable ? "1" : "0");
          row.push_back(r.retained ? "1" : "0");
          for (double v : {r.recip_cond, r.slope_recip_cond, r.loglik, r.grad_norm, r.constraint_residual, r.pi_hat,
                           r.background_mean, r.rms})
            row.push_back(num(v));
          for (std::size_t k = 0; k < max_width; ++k)
            row.push_back(static_cast<Eigen::Index>(k) < r.beta.size() ? num(r.beta[static_cast<Eigen::Index>(k)])
                                                                       : std::string());
        }
        row.push_back(r.error);
        f.row(row);
      }
      w.row({scen, kind, link, std::to_string(all.size()), num(mean_of(all)), num(sd_of(all)),
             std::to_string(kept.size()), num(mean_of(kept))});
    }
    w.commit();
    f.commit();
  }

  // sensitivity.csv
  {
    CsvWriter w(out_dir / "sensitivity.csv");
    std::vector<std::string> h = {"scenario", "method", "link", "shift", "pi0", "status", "converged", "rms",
                                  "background_mean"};
    for (std::size_t k = 0; k < max_width; ++k) h.push_back("beta" + std::to_string(k));
    h.emplace_back("error");
    w.row(h);
    for (const LoadedCell& c : cells)
      for (const SensitivityRecord& r : c.sens) {
        std::vector<std::string> row = {std::string(to_string(c.plan.scenario)), std::string(to_string(r.method.kind)),
                                        std::string(to_string(r.method.link)), num(r.shift), num(r.pi0),
                                        r.failed ? "error" : "ok"};
        if (r.failed) {
          row.resize(h.size() - 1);
        } else {
          row.push_back(r.converged ? "1" : "0");
          row.push_back(num(r.rms));
          row.push_back(num(r.background_mean));
          for (std::size_t k = 0; k < max_width; ++k)
            row.push_back(static_cast<Eigen::Index>(k) < r.beta.size() ? num(r.beta[static_cast<Eigen::Index>(k)])
                                                                       : std::string());
        }
        row.push_back(r.error);
        w.row(row);
      }
    w.commit();
  }

  // rspf.csv
  {
    CsvWriter w(out_dir / "rspf.csv");
    w.row({"scenario", "deviation", "threshold", "log_nonlinear"});
    svg::BarChart chart{"log-nonlinearity of the true probability", "max |log p - secant|", {"deviation"}, {svg::palette(0)}, {}};
    for (ScenarioKind k : kAllScenarios) {
      const RspfScreen s = rspf_screen(Scenario(k), kRspfThreshold, grid_size);
      w.row({std::string(to_string(k)), s.deviation ? num(*s.deviation) : "undefined", num(kRspfThreshold),
             s.log_nonlinear ? "1" : "0"});
      chart.groups.push_back({std::string(to_string(k)), {s.deviation.value_or(std::nan(""))}});
    }
    w.commit();
    write_text(out_dir / "rspf.svg", svg::render(chart));
  }

  // Curves, ratio curves and their plots.
  std::vector<std::string> rh = {"x"}, ch = {"x"};
  std::vector<std::vector<double>> rcols, ccols;
  svg::BarChart rms_chart{"RMS error of the fitted probability", "mean RMS", {}, {}, {}};
  std::vector<std::string> labels;
  for (const LoadedCell& c : cells)
    if (!c.plan.sensitivity && std::find(labels.begin(), labels.end(), c.plan.method.label()) == labels.end())
      labels.push_back(c.plan.method.label());
  rms_chart.bar_labels = labels;
  for (std::size_t i = 0; i < labels.size(); ++i) rms_chart.colors.push_back(svg::palette(i));

  for (ScenarioKind k : scenarios) {
    const Scenario sc(k);
    const std::string scen(to_string(k));
    std::string file_stem = scen;
    for (char& ch : file_stem) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    svg::LinePlot curves{scen + ": fitted probability of presence", "x", "p(y=1|x)", {}, 0.0, 0.0};
    svg::LinePlot ratios{scen + ": relative probability p(x)/pi", "x", "ratio", {}, 0.0, 0.0};
    std::vector<double> truth(n_grid), true_ratio(n_grid);
    for (std::size_t g = 0; g < n_grid; ++g) {
      truth[g] = sc.true_prob(grid[static_cast<Eigen::Index>(g)]);
      true_ratio[g] = truth[g] / sc.prevalence();
    }
    ch.push_back(scen + "__truth");
    ccols.push_back(truth);
    rh.push_back(scen + "__truth");
    rcols.push_back(true_ratio);
    const std::vector<double> xs = to_std(grid);
    curves.series.push_back({"truth", xs, truth, "#000000", 2.5, 1.0, true});
    ratios.series.push_back({"truth", xs, true_ratio, "#000000", 2.5, 1.0, true});

    svg::BarGroup group{scen, std::vector<double>(labels.size(), std::nan(""))};
    for (const LoadedCell& c : cells) {
      if (c.plan.scenario != k || c.plan.sensitivity) continue;
      const ModelSpec model = c.plan.model();
      const std::string label = c.plan.method.label();
      const auto li = static_cast<std::size_t>(std::find(labels.begin(), labels.end(), label) - labels.begin());
      const std::string& color = svg::palette(li);
      std::vector<Vector> ps, rs;
      std::vector<double> rms;
      for (const RepRecord& r : c.reps) {
        if (r.failed) continue;
        rms.push_back(r.rms);
        const Vector p = fitted_curve(model, r.beta, grid);
        ps.push_back(p);
        if (r.background_mean > 0.0) rs.push_back(p / r.background_mean);
      }
      group.values[li] = mean_of(rms);
      const Band pb = band_of(ps, n_grid), rb = band_of(rs, n_grid);
      ch.push_back(scen + "__" + label + "__mean");
      ccols.push_back(pb.mean);
      curves.series.push_back({label, xs, pb.mean, color, 1.8, 1.0, false});
      // Ratio curves: replication 0 and the pointwise band over every replication.
      const bool has_rep0 = !c.reps.empty() && !c.reps[0].failed && c.reps[0].background_mean > 0.0;
      std::vector<double> rep0(n_grid, std::nan(""));
      if (has_rep0) rep0 = to_std(fitted_curve(model, c.reps[0].beta, grid) / c.reps[0].background_mean);
      for (auto& [suffix, col] : std::vector<std::pair<std::string, std::vector<double>>>{
               {"rep0", rep0}, {"mean", rb.mean}, {"q05", rb.lo}, {"q95", rb.hi}}) {
        rh.push_back(scen + "__" + label + "__" + suffix);
        rcols.push_back(col);
      }
      ratios.series.push_back({label, xs, rep0, color, 1.8, 1.0, false});
      ratios.series.push_back({"", xs, rb.lo, color, 0.8, 0.5, true});
      ratios.series.push_back({"", xs, rb.hi, color, 0.8, 0.5, true});
    }
    rms_chart.groups.push_back(group);
    write_text(out_dir / ("curves_" + file_stem + ".svg"), svg::render(curves));
    write_text(out_dir / ("ratio_" + file_stem + ".svg"), svg::render(ratios));
  }
  write_text(out_dir / "rms.svg", svg::render(rms_chart));

  auto write_wide = [&](const fs::path& path, const std::vector<std::string>& header,
                        const std::vector<std::vector<double>>& cols) {
    CsvWriter w(path);
    w.row(header);
    for (std::size_t g = 0; g < n_grid; ++g) {
      std::vector<std::string> row = {format_double(grid[static_cast<Eigen::Index>(g)])};
      for (const auto& col : cols) row.push_back(num(col[g]));
      w.row(row);
    }
    w.commit();
  };
  write_wide(out_dir / "ratio_curves.csv", rh, rcols);
  write_wide(out_dir / "curves.csv", ch, ccols);
}

}  // namespace pbsdm
