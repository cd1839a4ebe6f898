#pragma once

// On-disk form of experiment cells, shared by the runner and the reporter.

#include "pbsdm/experiment.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pbsdm::detail {

struct RepRecord {
  int rep = 0;
  bool failed = false;
  std::string error;
  bool converged = false;
  bool identifiable = false;
  bool retained = false;
  double recip_cond = 0.0;
  double slope_recip_cond = 0.0;
  double loglik = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int start = 0;
  double constraint_residual = 0.0;  // NaN when unconstrained
  double pi_hat = 0.0;               // NaN unless LI / Lele
  double background_mean = 0.0;      // pi_hat of the ratio curve
  double rms = 0.0;
  bool saturated = false;
  bool overflow = false;
  Params beta;
};

struct SensitivityRecord {
  MethodSpec method;
  double shift = 0.0;
  double pi0 = 0.0;
  bool failed = false;
  std::string error;
  bool converged = false;
  double rms = 0.0;
  double background_mean = 0.0;
  Params beta;
};

struct CellPlan {
  std::string id;  // file stem, e.g. "logistic2__LK-logit"
  ScenarioKind scenario = ScenarioKind::Constant;
  MethodSpec method;
  bool sensitivity = false;
  double pi0 = 0.0;  // prevalence used for CLK / EMSB (and as the sensitivity centre)
  DesignSpec design = DesignSpec::linear();

  std::string file_name() const { return id + ".csv"; }
  ModelSpec model() const;
  bool constrained_method() const;
};

void write_rep_cell(const std::filesystem::path& path, const std::vector<RepRecord>& reps, std::size_t width);
std::vector<RepRecord> read_rep_cell(const std::filesystem::path& path);

void write_sensitivity_cell(const std::filesystem::path& path, const std::vector<SensitivityRecord>& rows,
                            std::size_t width);
std::vector<SensitivityRecord> read_sensitivity_cell(const std::filesystem::path& path);

// Cell descriptions as stored in the manifest.
void describe_cell(const CellPlan& cell, std::map<std::string, std::string>& manifest);
std::vector<CellPlan> cells_from_manifest(const std::map<std::string, std::string>& manifest);

void write_manifest(const std::filesystem::path& path, const std::map<std::string, std::string>& manifest);

std::string sanitize(std::string text);  // single line, no commas

}  // namespace pbsdm::detail
