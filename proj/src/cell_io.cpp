#include "cell_io.hpp"

#include "pbsdm/csv.hpp"
#include "pbsdm/errors.hpp"

#include <cmath>
#include <limits>
#include <fstream>
#include <sstream>

namespace pbsdm::detail {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string flag(bool b) { return b ? "1" : "0"; }

bool parse_flag(const std::string& s) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw DataError("expected 0/1 flag, found '" + s + "'");
}

int parse_int(const std::string& s) {
  const double v = parse_double(s);
  if (v != std::floor(v)) throw DataError("expected an integer, found '" + s + "'");
  return static_cast<int>(v);
}

// Index of each named column; throws if one is missing.
std::map<std::string, std::size_t> columns(const CsvTable& t, const std::filesystem::path& path) {
  std::map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out[t.header[i]] = i;
  for (const char* required : {"status", "error"})
    if (!out.count(required)) throw DataError(path.string() + ": missing column " + required);
  return out;
}

Params read_beta(const std::vector<std::string>& row, const std::map<std::string, std::size_t>& cols) {
  std::vector<double> b;
  for (std::size_t k = 0;; ++k) {
    const auto it = cols.find("beta" + std::to_string(k));
    if (it == cols.end()) break;
    const std::string& cell = row.at(it->second);
    if (cell.empty()) break;
    b.push_back(parse_double(cell));
  }
  return Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
}

void beta_cells(std::vector<std::string>& row, const Params& beta, std::size_t width) {
  for (std::size_t k = 0; k < width; ++k)
    row.push_back(static_cast<Eigen::Index>(k) < beta.size() ? format_double(beta[static_cast<Eigen::Index>(k)])
                                                             : std::string());
}

}  // namespace

std::string sanitize(std::string text) {
  for (char& c : text)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return text;
}

ModelSpec CellPlan::model() const {
  std::optional<double> constraint;
  if (constrained_method()) constraint = pi0;
  return ModelSpec(method.link, design, constraint);
}

bool CellPlan::constrained_method() const {
  return method.kind == LikelihoodKind::CLK || method.kind == LikelihoodKind::EMSB;
}

void write_rep_cell(const std::filesystem::path& path, const std::vector<RepRecord>& reps, std::size_t width) {
  CsvWriter w(path);
  std::vector<std::string> header = {"rep",        "status",        "converged", "identifiable", "retained",
                                     "recip_cond", "slope_recip_cond", "loglik", "grad_norm",    "iterations",
                                     "start",      "constraint_residual", "pi_hat", "background_mean", "rms",
                                     "saturated",  "overflow"};
  for (std::size_t k = 0; k < width; ++k) header.push_back("beta" + std::to_string(k));
  header.emplace_back("error");
  w.row(header);
  for (const RepRecord& r : reps) {
    std::vector<std::string> row = {std::to_string(r.rep), r.failed ? "error" : "ok"};
    if (r.failed) {
      row.resize(header.size() - 1);
    } else {
      for (std::string s : {flag(r.converged), flag(r.identifiable), flag(r.retained)}) row.push_back(s);
      for (double v : {r.recip_cond, r.slope_recip_cond, r.loglik, r.grad_norm}) row.push_back(format_double(v));
      row.push_back(std::to_string(r.iterations));
      row.push_back(std::to_string(r.start));
      for (double v : {r.constraint_residual, r.pi_hat, r.background_mean, r.rms}) row.push_back(format_double(v));
      row.push_back(flag(r.saturated));
      row.push_back(flag(r.overflow));
      beta_cells(row, r.beta, width);
    }
    row.push_back(sanitize(r.error));
    w.row(row);
  }
  w.commit();
}

std::vector<RepRecord> read_rep_cell(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto cols = columns(t, path);
  auto get = [&](const std::vector<std::string>& row, const char* name) -> const std::string& {
    const auto it = cols.find(name);
    if (it == cols.end()) throw DataError(path.string() + ": missing column " + name);
    return row.at(it->second);
  };
  std::vector<RepRecord> out;
  for (const auto& row : t.rows) {
    RepRecord r;
    r.rep = parse_int(get(row, "rep"));
    r.failed = get(row, "status") != "ok";
    r.error = get(row, "error");
    if (!r.failed) {
      r.converged = parse_flag(get(row, "converged"));
      r.identifiable = parse_flag(get(row, "identifiable"));
      r.retained = parse_flag(get(row, "retained"));
      r.recip_cond = parse_double(get(row, "recip_cond"));
      r.slope_recip_cond = parse_double(get(row, "slope_recip_cond"));
      r.loglik = parse_double(get(row, "loglik"));
      r.grad_norm = parse_double(get(row, "grad_norm"));
      r.iterations = parse_int(get(row, "iterations"));
      r.start = parse_int(get(row, "start"));
      r.constraint_residual = parse_double(get(row, "constraint_residual"));
      r.pi_hat = parse_double(get(row, "pi_hat"));
      r.background_mean = parse_double(get(row, "background_mean"));
      r.rms = parse_double(get(row, "rms"));
      r.saturated = parse_flag(get(row, "saturated"));
      r.overflow = parse_flag(get(row, "overflow"));
      r.beta = read_beta(row, cols);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_sensitivity_cell(const std::filesystem::path& path, const std::vector<SensitivityRecord>& rows,
                            std::size_t width) {
  CsvWriter w(path);
  std::vector<std::string> header = {"method", "link", "shift", "pi0", "status", "converged", "rms",
                                     "background_mean"};
  for (std::size_t k = 0; k < width; ++k) header.push_back("beta" + std::to_string(k));
  header.emplace_back("error");
  w.row(header);
  for (const SensitivityRecord& r : rows) {
    std::vector<std::string> row = {std::string(to_string(r.method.kind)), std::string(to_string(r.method.link)),
                                    format_double(r.shift), format_double(r.pi0), r.failed ? "error" : "ok"};
    if (r.failed) {
      row.resize(header.size() - 1);
    } else {
      row.push_back(flag(r.converged));
      row.push_back(format_double(r.rms));
      row.push_back(format_double(r.background_mean));
      beta_cells(row, r.beta, width);
    }
    row.push_back(sanitize(r.error));
    w.row(row);
  }
  w.commit();
}

std::vector<SensitivityRecord> read_sensitivity_cell(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto cols = columns(t, path);
  std::vector<SensitivityRecord> out;
  for (const auto& row : t.rows) {
    SensitivityRecord r;
    r.method = {parse_likelihood(row.at(cols.at("method"))), parse_link(row.at(cols.at("link")))};
    r.shift = parse_double(row.at(cols.at("shift")));
    r.pi0 = parse_double(row.at(cols.at("pi0")));
    r.failed = row.at(cols.at("status")) != "ok";
    r.error = row.at(cols.at("error"));
    if (!r.failed) {
      r.converged = parse_flag(row.at(cols.at("converged")));
      r.rms = parse_double(row.at(cols.at("rms")));
      r.background_mean = parse_double(row.at(cols.at("background_mean")));
      r.beta = read_beta(row, cols);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void describe_cell(const CellPlan& cell, std::map<std::string, std::string>& m) {
  const std::string k = "cell." + cell.id + ".";
  m[k + "scenario"] = std::string(to_string(cell.scenario));
  m[k + "kind"] = cell.sensitivity ? "sensitivity" : "fits";
  if (!cell.sensitivity) {
    m[k + "method"] = std::string(to_string(cell.method.kind));
    m[k + "link"] = std::string(to_string(cell.method.link));
  }
  m[k + "pi0"] = format_double(cell.pi0);
  m[k + "design"] = cell.design.describe();
  m[k + "file"] = "cells/" + cell.file_name();
}

std::vector<CellPlan> cells_from_manifest(const std::map<std::string, std::string>& m) {
  const auto list = m.find("cells");
  if (list == m.end()) throw DataError("manifest has no cell list");
  std::vector<CellPlan> out;
  std::stringstream in(list->second);
  std::string id;
  while (std::getline(in, id, ',')) {
    if (id.empty()) continue;
    auto get = [&](const std::string& field) {
      const auto it = m.find("cell." + id + "." + field);
      if (it == m.end()) throw DataError("manifest lacks cell." + id + "." + field);
      return it->second;
    };
    CellPlan c;
    c.id = id;
    c.scenario = parse_scenario(get("scenario"));
    c.sensitivity = get("kind") == "sensitivity";
    if (!c.sensitivity) c.method = {parse_likelihood(get("method")), parse_link(get("link"))};
    c.pi0 = parse_double(get("pi0"));
    c.design = DesignSpec::parse(get("design"));
    out.push_back(std::move(c));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::map<std::string, std::string>& manifest) {
  std::ostringstream out;
  for (const auto& [k, v] : manifest) out << k << " = " << v << '\n';
  write_file_atomic(path, out.str());
}

}  // namespace pbsdm::detail
