#include "pbsdm/experiment.hpp"

#include "cell_io.hpp"
#include "pbsdm/csv.hpp"
#include "pbsdm/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

namespace pbsdm {

using detail::CellPlan;
using detail::RepRecord;
using detail::SensitivityRecord;

std::string MethodSpec::label() const {
  return std::string(to_string(kind)) + "-" + std::string(to_string(link));
}

std::vector<MethodSpec> default_methods() {
  return {{LikelihoodKind::LK, LinkKind::logit},  {LikelihoodKind::LI, LinkKind::logit},
          {LikelihoodKind::LK, LinkKind::log},    {LikelihoodKind::LI, LinkKind::log},
          {LikelihoodKind::CLK, LinkKind::logit}, {LikelihoodKind::CLK, LinkKind::log},
          {LikelihoodKind::CLK, LinkKind::cloglog}};
}

namespace {

void check_method(const MethodSpec& m) {
  if (m.kind == LikelihoodKind::PPMcond && m.link != LinkKind::log)
    throw ConfigError("PPMcond needs the log link (got " + std::string(to_string(m.link)) + ")");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<MethodSpec> cross_methods(const std::vector<LikelihoodKind>& kinds, const std::vector<LinkKind>& links) {
  std::vector<MethodSpec> out;
  for (LikelihoodKind k : kinds)
    for (LinkKind l : links) {
      MethodSpec m{k, l};
      check_method(m);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
  return out;
}

std::vector<MethodSpec> parse_method_list(std::string_view text) {
  std::vector<MethodSpec> out;
  std::stringstream in{std::string(text)};
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("method '" + item + "' should look like lk:logit");
    MethodSpec m{parse_likelihood(item.substr(0, colon)), parse_link(item.substr(colon + 1))};
    check_method(m);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  if (out.empty()) throw ConfigError("empty method list");
  return out;
}

PrevalenceSource PrevalenceSource::parse(std::string_view text) {
  const std::string s = trim(text);
  PrevalenceSource out;
  if (s == "true" || s == "truth") return out;
  if (s.rfind("value:", 0) == 0) {
    out.kind = Kind::value;
    try {
      out.value = parse_double(s.substr(6));
    } catch (const DataError&) {
      throw ConfigError("bad prevalence value '" + s.substr(6) + "'");
    }
    if (!(out.value > 0.0 && out.value < 1.0)) throw ConfigError("prevalence value must lie in (0,1)");
    return out;
  }
  if (s.rfind("file:", 0) == 0) {
    out.kind = Kind::file;
    out.file = s.substr(5);
    const CsvTable t = read_csv(out.file);
    if (t.header.size() != 2 || t.header[0] != "scenario" || t.header[1] != "pi0")
      throw DataError(out.file.string() + ": expected header scenario,pi0");
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const double v = parse_double(t.rows[i][1]);
      if (!(v > 0.0 && v < 1.0))
        throw DataError(out.file.string() + ":" + std::to_string(t.line_numbers[i]) + ": pi0 must lie in (0,1)");
      out.table[parse_scenario(t.rows[i][0])] = v;
    }
    return out;
  }
  throw ConfigError("prevalence source must be 'true', 'value:<p>' or 'file:<path>'");
}

double PrevalenceSource::pi0(const Scenario& scenario) const {
  switch (kind) {
    case Kind::truth: return scenario.prevalence();
    case Kind::value: return value;
    case Kind::file: {
      const auto it = table.find(scenario.kind());
      if (it == table.end())
        throw ConfigError(file.string() + " has no prevalence for " + std::string(scenario.name()));
      return it->second;
    }
  }
  return scenario.prevalence();
}

std::string PrevalenceSource::describe() const {
  switch (kind) {
    case Kind::truth: return "true";
    case Kind::value: return "value:" + format_double(value);
    case Kind::file: {
      std::string s = "file:" + file.string();
      for (const auto& [k, v] : table) s += ";" + std::string(to_string(k)) + "=" + format_double(v);
      return s;
    }
  }
  return "true";
}

void ExperimentConfig::validate() const {
  if (scenarios.empty()) throw ConfigError("no scenarios selected");
  if (methods.empty()) throw ConfigError("no methods selected");
  for (const MethodSpec& m : methods) check_method(m);
  sim.validate();
  optim.validate();
  if (!(sensitivity_shift >= 0.0 && sensitivity_shift < 1.0)) throw ConfigError("sensitivity shift must lie in [0,1)");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (grid_size < 2) throw ConfigError("grid size must be at least 2");
}

std::string ExperimentConfig::canonical() const {
  // Thread count and output directory do not change results and are left out.
  std::ostringstream o;
  o << "scenarios=";
  for (std::size_t i = 0; i < scenarios.size(); ++i) o << (i ? "," : "") << to_string(scenarios[i]);
  o << "\nmethods=";
  for (std::size_t i = 0; i < methods.size(); ++i) o << (i ? "," : "") << methods[i].label();
  o << "\nn1=" << sim.n_presence << "\nn0=" << sim.n_background << "\nreps=" << sim.replications
    << "\nseed=" << sim.seed << "\nprevalence=" << prevalence.describe()
    << "\nsensitivity_shift=" << format_double(sensitivity_shift) << "\ngrid_size=" << grid_size
    << "\ntol_grad=" << format_double(optim.tol_grad) << "\ntol_constraint=" << format_double(optim.tol_constraint)
    << "\nmax_iter=" << optim.max_iter << "\nn_starts=" << optim.n_starts
    << "\npenalty_growth=" << format_double(optim.penalty_growth) << "\nmax_outer=" << optim.max_outer
    << "\nstart_range=" << format_double(optim.start_range) << '\n';
  return o.str();
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double shifted_pi0(double pi0, double shift) { return std::clamp(pi0 + shift, kPi0Min, kPi0Max); }

std::map<std::string, std::string> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << v;
  return o.str();
}

std::uint64_t restart_seed(const ExperimentConfig& cfg, ScenarioKind kind, int rep) {
  return substream_seed(dataset_seed(cfg.sim.seed, kind, rep), 3);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<CellPlan> plan_cells(const ExperimentConfig& cfg) {
  std::vector<CellPlan> out;
  for (ScenarioKind k : cfg.scenarios) {
    const Scenario sc(k);
    const double pi0 = cfg.prevalence.pi0(sc);
    for (const MethodSpec& m : cfg.methods) {
      CellPlan c;
      c.scenario = k;
      c.method = m;
      c.pi0 = pi0;
      c.design = sc.fitting_design();
      c.id = lower(to_string(k)) + "__" + m.label();
      out.push_back(std::move(c));
    }
    const bool any_clk = std::any_of(cfg.methods.begin(), cfg.methods.end(),
                                     [](const MethodSpec& m) { return m.kind == LikelihoodKind::CLK; });
    if (cfg.sensitivity_shift > 0.0 && any_clk) {
      CellPlan c;
      c.scenario = k;
      c.sensitivity = true;
      c.pi0 = pi0;
      c.design = sc.fitting_design();
      c.id = lower(to_string(k)) + "__sensitivity";
      out.push_back(std::move(c));
    }
  }
  return out;
}

RepRecord fit_rep(const CellPlan& cell, const ExperimentConfig& cfg, const Scenario& sc, const Dataset& data,
                  int rep) {
  RepRecord r;
  r.rep = rep;
  try {
    const ModelSpec model = cell.model();
    OptimSettings s = cfg.optim;
    s.seed = restart_seed(cfg, cell.scenario, rep);
    const DesignedData dd(model, data);
    const FitResult f = fit_method(cell.method.kind, dd, s);
    r.converged = f.converged;
    r.identifiable = f.identifiable;
    r.retained = screen_for(cell.method.kind, model)(f);
    r.recip_cond = f.recip_cond;
    r.slope_recip_cond = slope_identifiability(f, model.design()).recip_cond;
    r.loglik = f.loglik;
    r.grad_norm = f.grad_norm;
    r.iterations = f.iterations;
    r.start = f.start_index;
    r.constraint_residual = f.constraint_residual.value_or(std::nan(""));
    r.pi_hat = f.pi_hat.value_or(std::nan(""));
    r.background_mean = background_mean_prob(dd, f.beta_hat);
    r.rms = rms_error(f.beta_hat, model, sc, cfg.grid_size);
    r.saturated = f.saturated;
    r.overflow = f.prob_overflow;
    r.beta = f.beta_hat;
    if (!f.converged) r.error = "did not converge";
  } catch (const std::exception& e) {
    r.failed = true;
    r.error = e.what();
  }
  return r;
}

std::vector<SensitivityRecord> fit_sensitivity(const CellPlan& cell, const ExperimentConfig& cfg) {
  const Scenario sc(cell.scenario);
  const Dataset data = simulate_dataset(sc, cfg.sim, 0);
  std::vector<SensitivityRecord> out;
  for (const MethodSpec& m : cfg.methods) {
    if (m.kind != LikelihoodKind::CLK) continue;
    for (double shift : {-cfg.sensitivity_shift, 0.0, cfg.sensitivity_shift}) {
      SensitivityRecord r;
      r.method = m;
      r.shift = shift;
      r.pi0 = shifted_pi0(cell.pi0, shift);
      try {
        const ModelSpec model(m.link, cell.design, r.pi0);
        OptimSettings s = cfg.optim;
        s.seed = restart_seed(cfg, cell.scenario, 0);
        const DesignedData dd(model, data);
        const FitResult f = fit_method(m.kind, dd, s);
        r.converged = f.converged;
        r.rms = rms_error(f.beta_hat, model, sc, cfg.grid_size);
        r.background_mean = background_mean_prob(dd, f.beta_hat);
        r.beta = f.beta_hat;
        if (!f.converged) r.error = "did not converge";
      } catch (const std::exception& e) {
        r.failed = true;
        r.error = e.what();
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

struct Unit {
  std::size_t cell;
  int rep;  // -1 for a sensitivity cell
};

const char* kStatusOk = "ok";
const char* kStatusNonconverged = "nonconverged";
const char* kStatusFailed = "failed";

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  namespace fs = std::filesystem;
  const fs::path out = config.out_dir;
  const fs::path cells_dir = out / "cells";
  std::error_code ec;
  fs::create_directories(cells_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cells_dir.string() + ": " + ec.message());

  const std::string canonical = config.canonical();
  const std::string hash = hex(fnv1a(canonical));
  const std::vector<CellPlan> cells = plan_cells(config);

  std::map<std::string, std::string> previous;
  if (fs::exists(out / "manifest.txt")) previous = read_manifest(out / "manifest.txt");
  const bool same_config = previous.count("config_hash") && previous["config_hash"] == hash;
  if (!previous.empty() && !same_config && log) *log << "configuration changed; recomputing every cell\n";

  std::map<std::string, std::string> manifest;
  manifest["version"] = kVersion;
  manifest["config_hash"] = hash;
  {
    std::stringstream in(canonical);
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      manifest["config." + line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  manifest["assumption.presence_sampler"] =
      "rejection sampling from p(x|y=1) proportional to p(y=1|x) under uniform F(x) on [0;1]";
  manifest["assumption.background"] = "n0 iid Uniform[0;1] draws; area |D| = 1";
  manifest["assumption.seeds"] =
      "dataset = dataset_seed(seed; scenario; rep); presence substream 1; background substream 2; "
      "optimizer restarts substream 3";
  manifest["assumption.screening"] =
      "full-Hessian recip_cond >= 0.001 (CLK: reduced Hessian of the Lagrangian); unconstrained log-link fits "
      "use the slope block (intercept and prevalence dropped)";
  manifest["assumption.sensitivity"] = "CLK refits on replication 0 at pi0 -/+ shift clamped to [0.001; 0.999]";
  manifest["assumption.rms_grid"] = std::to_string(config.grid_size) + " equally spaced points on [0;1]";
  std::string cell_list;
  for (const CellPlan& c : cells) {
    cell_list += (cell_list.empty() ? "" : ",") + c.id;
    detail::describe_cell(c, manifest);
    std::string seeds;
    const int n_seeds = c.sensitivity ? 1 : static_cast<int>(config.sim.replications);
    for (int rep = 0; rep < n_seeds; ++rep)
      seeds += (rep ? ";" : "") + hex(dataset_seed(config.sim.seed, c.scenario, rep));
    manifest["cell." + c.id + ".dataset_seeds"] = seeds;
  }
  manifest["cells"] = cell_list;

  ExperimentOutcome outcome;
  std::vector<bool> reuse(cells.size(), false);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string key = "cell." + cells[i].id + ".status";
    const auto it = previous.find(key);
    if (same_config && it != previous.end() && it->second != kStatusFailed &&
        fs::exists(cells_dir / cells[i].file_name())) {
      reuse[i] = true;
      manifest[key] = it->second;
      ++outcome.cells_reused;
      if (it->second == kStatusOk) ++outcome.cells_ok;
      else {
        ++outcome.cells_nonconverged;
        outcome.problems.push_back(cells[i].id + ": " + it->second + " (reused)");
      }
    } else {
      manifest[key] = "pending";
    }
  }
  detail::write_manifest(out / "manifest.txt", manifest);

  std::vector<Unit> units;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (reuse[i]) continue;
    if (cells[i].sensitivity) units.push_back({i, -1});
    else
      for (int rep = 0; rep < config.sim.replications; ++rep) units.push_back({i, rep});
  }
  // Replication-major so one simulated dataset serves every method of a scenario.
  std::stable_sort(units.begin(), units.end(), [&](const Unit& a, const Unit& b) {
    if (cells[a.cell].scenario != cells[b.cell].scenario)
      return cells[a.cell].scenario < cells[b.cell].scenario;
    return a.rep < b.rep;
  });

  std::vector<std::vector<RepRecord>> results(cells.size());
  std::vector<std::vector<SensitivityRecord>> sens(cells.size());
  std::vector<std::atomic<int>> remaining(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    results[i].resize(cells[i].sensitivity ? 0 : static_cast<std::size_t>(config.sim.replications));
    remaining[i] = reuse[i] ? 0 : (cells[i].sensitivity ? 1 : static_cast<int>(config.sim.replications));
  }

  std::mutex mu;  // manifest, outcome, log
  std::atomic<std::size_t> next{0};
  std::exception_ptr io_failure;

  auto finish_cell = [&](std::size_t i) {
    const CellPlan& c = cells[i];
    std::string status = kStatusOk;
    std::string problem;
    if (c.sensitivity) {
      for (const SensitivityRecord& r : sens[i]) {
        if (r.failed) status = kStatusFailed, problem = r.error;
        else if (!r.converged && status == kStatusOk) status = kStatusNonconverged;
      }
    } else {
      int failed = 0, nonconv = 0;
      for (const RepRecord& r : results[i]) {
        if (r.failed) ++failed, problem = r.error;
        else if (!r.converged) ++nonconv;
      }
      if (failed) status = kStatusFailed, problem = std::to_string(failed) + " replications failed: " + problem;
      else if (nonconv) status = kStatusNonconverged, problem = std::to_string(nonconv) + " replications did not converge";
    }
    const fs::path file = cells_dir / c.file_name();
    if (c.sensitivity) detail::write_sensitivity_cell(file, sens[i], c.design.width());
    else detail::write_rep_cell(file, results[i], c.design.width());

    std::lock_guard lock(mu);
    manifest["cell." + c.id + ".status"] = status;
    detail::write_manifest(out / "manifest.txt", manifest);
    if (status == kStatusOk) ++outcome.cells_ok;
    else if (status == kStatusNonconverged) ++outcome.cells_nonconverged;
    else ++outcome.cells_failed;
    if (status != kStatusOk) outcome.problems.push_back(c.id + ": " + problem);
    if (log) *log << "cell " << c.id << " " << status << '\n' << std::flush;
  };

  auto worker = [&] {
    // Cache of the last simulated dataset.
    std::optional<std::pair<ScenarioKind, int>> cached_key;
    std::optional<Dataset> cached;
    for (;;) {
      const std::size_t u = next.fetch_add(1);
      if (u >= units.size()) return;
      {
        std::lock_guard lock(mu);
        if (io_failure) return;
      }
      const Unit unit = units[u];
      const CellPlan& c = cells[unit.cell];
      try {
        if (unit.rep < 0) {
          sens[unit.cell] = fit_sensitivity(c, config);
        } else {
          const Scenario sc(c.scenario);
          if (!cached_key || *cached_key != std::pair{c.scenario, unit.rep}) {
            cached.reset();
            try {
              cached.emplace(simulate_dataset(sc, config.sim, unit.rep));
            } catch (const std::exception& e) {
              RepRecord r;
              r.rep = unit.rep;
              r.failed = true;
              r.error = std::string("simulation failed: ") + e.what();
              results[unit.cell][static_cast<std::size_t>(unit.rep)] = r;
              if (--remaining[unit.cell] == 0) finish_cell(unit.cell);
              continue;
            }
            cached_key = std::pair{c.scenario, unit.rep};
          }
          results[unit.cell][static_cast<std::size_t>(unit.rep)] = fit_rep(c, config, sc, *cached, unit.rep);
        }
        if (--remaining[unit.cell] == 0) finish_cell(unit.cell);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!io_failure) io_failure = std::current_exception();
        return;
      }
    }
  };

  const int n_threads = std::max(1, std::min<int>(config.threads, static_cast<int>(units.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (io_failure) std::rethrow_exception(io_failure);

  write_reports(out);
  return outcome;
}

}  // namespace pbsdm
