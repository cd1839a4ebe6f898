#include "pbsdm/cli.hpp"

#include "pbsdm/csv.hpp"
#include "pbsdm/errors.hpp"
#include "pbsdm/experiment.hpp"
#include "pbsdm/fit.hpp"
#include "pbsdm/verify.hpp"

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace pbsdm {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Settings file keys and the flags mirroring them.
struct Key {
  const char* key;   // "section.name" in the config file
  const char* flag;  // long flag
  const char* help;
};

constexpr Key kKeys[] = {
    {"run.seed", "--seed", "run seed"},
    {"run.threads", "--threads", "worker threads"},
    {"run.out", "--out", "output directory (fit: JSON file, default stdout)"},
    {"sim.scenarios", "--scenario", "comma-separated scenarios, or 'all'"},
    {"sim.n1", "--n1", "presence points per replication"},
    {"sim.n0", "--n0", "background points per replication"},
    {"sim.reps", "--reps", "replications"},
    {"fit.methods", "--methods", "methods: lk,li,lele,emsb,ppmcond,clk or kind:link pairs"},
    {"fit.links", "--links", "links crossed with --methods: logit,log,cloglog"},
    {"fit.design", "--design", "design: linear, quadratic, intercept or a term list like 1,x1,x1^2"},
    {"fit.area", "--area", "study-region area |D|"},
    {"prevalence.pi0", "--pi0", "CLK/EMSB prevalence: true, a number, value:<p> or file:<csv>"},
    {"prevalence.shift", "--pi0-shift", "CLK sensitivity shift (0 disables)"},
    {"optim.tol_grad", "--tol-grad", "gradient tolerance (max-abs)"},
    {"optim.tol_constraint", "--tol-constraint", "constraint tolerance"},
    {"optim.max_iter", "--max-iter", "BFGS iterations per start"},
    {"optim.n_starts", "--n-starts", "optimizer starts"},
    {"optim.penalty_growth", "--penalty-growth", "augmented-Lagrangian penalty growth"},
    {"optim.max_outer", "--max-outer", "augmented-Lagrangian outer iterations"},
    {"optim.start_range", "--start-range", "random starts drawn from [-range, range]"},
    {"report.grid_size", "--grid-size", "curve grid points on [0,1]"},
};

using Settings = std::map<std::string, std::string>;

Settings read_config_file(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("config file not found: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  Settings out;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(path.string() + ": key '" + section + "' is outside a section");
    for (const auto& [name, value] : body) {
      const std::string key = section + "." + name;
      bool known = false;
      for (const Key& k : kKeys) known = known || key == k.key;
      if (!known) throw ConfigError(path.string() + ": unknown setting '" + key + "'");
      out[key] = value.data();
    }
  }
  return out;
}

std::int64_t to_int(const Settings& s, const std::string& key, std::int64_t fallback) {
  const auto it = s.find(key);
  if (it == s.end()) return fallback;
  std::int64_t v = 0;
  const std::string& t = it->second;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size()) throw ConfigError(key + ": expected an integer, got '" + t + "'");
  return v;
}

std::uint64_t to_seed(const Settings& s, std::uint64_t fallback) {
  const auto it = s.find("run.seed");
  if (it == s.end()) return fallback;
  std::uint64_t v = 0;
  const std::string& t = it->second;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size()) throw ConfigError("seed: expected a non-negative integer, got '" + t + "'");
  return v;
}

double to_real(const Settings& s, const std::string& key, double fallback) {
  const auto it = s.find(key);
  if (it == s.end()) return fallback;
  try {
    return parse_double(it->second);
  } catch (const DataError&) {
    throw ConfigError(key + ": expected a number, got '" + it->second + "'");
  }
}

std::string to_str(const Settings& s, const std::string& key, const std::string& fallback) {
  const auto it = s.find(key);
  return it == s.end() ? fallback : it->second;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(item.substr(b, item.find_last_not_of(" \t") - b + 1));
  }
  return out;
}

std::vector<ScenarioKind> scenarios_of(const Settings& s) {
  const std::string text = to_str(s, "sim.scenarios", "all");
  if (text == "all") return {kAllScenarios.begin(), kAllScenarios.end()};
  std::vector<ScenarioKind> out;
  for (const std::string& name : split_list(text)) {
    const ScenarioKind k = parse_scenario(name);
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  }
  if (out.empty()) throw ConfigError("no scenarios given");
  return out;
}

std::vector<MethodSpec> methods_of(const Settings& s) {
  const auto m = s.find("fit.methods");
  const auto l = s.find("fit.links");
  std::vector<LinkKind> links;
  if (l != s.end())
    for (const std::string& name : split_list(l->second)) links.push_back(parse_link(name));
  if (m == s.end()) {
    if (links.empty()) return default_methods();
    std::vector<MethodSpec> out;
    for (const MethodSpec& d : default_methods())
      if (std::find(links.begin(), links.end(), d.link) != links.end()) out.push_back(d);
    if (out.empty()) throw ConfigError("no default method uses the requested links");
    return out;
  }
  if (m->second.find(':') != std::string::npos) {
    if (!links.empty()) throw ConfigError("--links cannot be combined with kind:link method pairs");
    return parse_method_list(m->second);
  }
  std::vector<LikelihoodKind> kinds;
  for (const std::string& name : split_list(m->second)) kinds.push_back(parse_likelihood(name));
  if (kinds.empty()) throw ConfigError("empty method list");
  if (links.empty()) links = {LinkKind::logit, LinkKind::log};
  // PPMcond only exists under the log link; crossing drops the other links for it.
  std::vector<MethodSpec> out;
  for (LikelihoodKind k : kinds)
    for (LinkKind link : links) {
      if (k == LikelihoodKind::PPMcond && link != LinkKind::log) continue;
      const MethodSpec spec{k, link};
      if (std::find(out.begin(), out.end(), spec) == out.end()) out.push_back(spec);
    }
  if (out.empty()) throw ConfigError("PPMcond needs the log link");
  return out;
}

OptimSettings optim_of(const Settings& s) {
  OptimSettings o;
  o.tol_grad = to_real(s, "optim.tol_grad", o.tol_grad);
  o.tol_constraint = to_real(s, "optim.tol_constraint", o.tol_constraint);
  o.max_iter = static_cast<int>(to_int(s, "optim.max_iter", o.max_iter));
  o.n_starts = static_cast<int>(to_int(s, "optim.n_starts", o.n_starts));
  o.penalty_growth = to_real(s, "optim.penalty_growth", o.penalty_growth);
  o.max_outer = static_cast<int>(to_int(s, "optim.max_outer", o.max_outer));
  o.start_range = to_real(s, "optim.start_range", o.start_range);
  o.seed = to_seed(s, 0);
  o.validate();
  return o;
}

SimConfig sim_of(const Settings& s) {
  SimConfig c;
  c.n_presence = to_int(s, "sim.n1", c.n_presence);
  c.n_background = to_int(s, "sim.n0", c.n_background);
  c.replications = to_int(s, "sim.reps", c.replications);
  c.seed = to_seed(s, c.seed);
  c.validate();
  return c;
}

PrevalenceSource prevalence_of(const Settings& s) {
  const std::string text = to_str(s, "prevalence.pi0", "true");
  // A bare number means a fixed value.
  try {
    parse_double(text);
    return PrevalenceSource::parse("value:" + text);
  } catch (const DataError&) {
    return PrevalenceSource::parse(text);
  }
}

std::string rep_tag(std::int64_t rep) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rep%03lld", static_cast<long long>(rep));
  return buf;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// ---- subcommands ----

int cmd_simulate(const Settings& s, std::ostream& out) {
  const std::vector<ScenarioKind> scenarios = scenarios_of(s);
  const SimConfig sim = sim_of(s);
  const fs::path dir = to_str(s, "run.out", "simulated");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  std::map<std::string, std::string> manifest;
  manifest["version"] = kVersion;
  manifest["seed"] = std::to_string(sim.seed);
  manifest["n1"] = std::to_string(sim.n_presence);
  manifest["n0"] = std::to_string(sim.n_background);
  manifest["reps"] = std::to_string(sim.replications);
  manifest["assumption.presence_sampler"] =
      "rejection sampling from p(x|y=1) proportional to p(y=1|x) under uniform F(x) on [0;1]";
  std::string names;
  std::size_t files = 0;
  for (ScenarioKind k : scenarios) {
    const Scenario sc(k);
    const std::string stem = lower(sc.name());
    names += (names.empty() ? "" : ",") + stem;
    manifest["scenario." + stem + ".prevalence"] = format_double(sc.prevalence());
    std::string seeds;
    for (std::int64_t rep = 0; rep < sim.replications; ++rep) {
      const Dataset d = simulate_dataset(sc, sim, rep);
      write_covariates_csv(dir / (stem + "_" + rep_tag(rep) + "_presence.csv"), d.presence_x());
      write_covariates_csv(dir / (stem + "_" + rep_tag(rep) + "_background.csv"), d.background_x());
      files += 2;
      char buf[24];
      std::snprintf(buf, sizeof buf, "%016llx",
                    static_cast<unsigned long long>(dataset_seed(sim.seed, k, rep)));
      seeds += (rep ? ";" : "") + std::string(buf);
    }
    manifest["scenario." + stem + ".dataset_seeds"] = seeds;
  }
  manifest["scenarios"] = names;
  manifest["files"] = std::to_string(files);
  std::string text;
  for (const auto& [k, v] : manifest) text += k + " = " + v + "\n";
  write_file_atomic(dir / "manifest.txt", text);
  out << "wrote " << files << " files to " << dir.string() << '\n';
  return kExitOk;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int cmd_fit(const Settings& s, const std::string& presence, const std::string& background, std::ostream& out) {
  const Matrix px = read_covariates_csv(presence);
  const Matrix bx = read_covariates_csv(background);
  if (px.cols() != bx.cols())
    throw DataError("presence has " + std::to_string(px.cols()) + " columns but background has " +
                    std::to_string(bx.cols()));
  const Dataset data(px, bx, to_real(s, "fit.area", 1.0));
  const DesignSpec design = DesignSpec::parse(to_str(s, "fit.design", "linear"));
  if (design.required_columns() > static_cast<std::size_t>(data.dim()))
    throw ConfigError("design " + design.describe() + " needs " + std::to_string(design.required_columns()) +
                      " covariate columns; the data have " + std::to_string(data.dim()));
  const std::vector<MethodSpec> methods = methods_of(s);
  OptimSettings optim = optim_of(s);
  optim.seed = to_seed(s, 0);

  std::optional<double> pi0;
  if (s.count("prevalence.pi0")) {
    const PrevalenceSource src = prevalence_of(s);
    if (src.kind != PrevalenceSource::Kind::value) throw ConfigError("fit needs a numeric --pi0");
    pi0 = src.value;
  }

  json report;
  report["version"] = kVersion;
  report["presence"] = presence;
  report["background"] = background;
  report["n1"] = data.n_presence();
  report["n0"] = data.n_background();
  report["area"] = data.area();
  report["design"] = design.describe();
  report["fits"] = json::array();
  bool all_ok = true;
  for (const MethodSpec& m : methods) {
    json f;
    f["method"] = std::string(to_string(m.kind));
    f["link"] = std::string(to_string(m.link));
    const bool constrained = m.kind == LikelihoodKind::CLK || m.kind == LikelihoodKind::EMSB;
    if (constrained && !pi0) throw ConfigError(m.label() + " needs --pi0");
    const ModelSpec model(m.link, design, constrained ? pi0 : std::nullopt);
    if (constrained) f["pi0"] = *pi0;
    try {
      const DesignedData dd(model, data);
      const FitResult r = fit_method(m.kind, dd, optim);
      const bool with_pi = r.pi_hat.has_value();
      const auto names = coefficient_names(design, false);
      json beta = json::object();
      for (std::size_t i = 0; i < names.size(); ++i) beta[names[i]] = number(r.beta_hat[static_cast<Eigen::Index>(i)]);
      f["status"] = "ok";
      f["beta"] = beta;
      f["pi_hat"] = with_pi ? number(*r.pi_hat) : json(nullptr);
      f["loglik"] = number(r.loglik);
      f["converged"] = r.converged;
      f["iterations"] = r.iterations;
      f["grad_norm"] = number(r.grad_norm);
      f["start"] = r.start_index;
      f["constraint_residual"] = r.constraint_residual ? number(*r.constraint_residual) : json(nullptr);
      f["multiplier"] = r.multiplier ? number(*r.multiplier) : json(nullptr);
      f["recip_cond"] = number(r.recip_cond);
      f["slope_recip_cond"] = number(slope_identifiability(r, design).recip_cond);
      f["identifiable"] = r.identifiable;
      f["retained"] = screen_for(m.kind, model)(r);
      f["background_mean"] = number(background_mean_prob(dd, r.beta_hat));
      f["saturated"] = r.saturated;
      f["prob_overflow"] = r.prob_overflow;
      all_ok = all_ok && r.converged;
    } catch (const EvaluationError& e) {
      f["status"] = "error";
      f["error"] = e.what();
      all_ok = false;
    } catch (const OptimizationError& e) {
      f["status"] = "error";
      f["error"] = e.what();
      all_ok = false;
    }
    report["fits"].push_back(f);
  }
  const std::string text = report.dump(2) + "\n";
  if (s.count("run.out")) write_file_atomic(s.at("run.out"), text);
  else out << text;
  return all_ok ? kExitOk : kExitNumerical;
}

int cmd_experiment(const Settings& s, std::ostream& out, std::ostream& err) {
  ExperimentConfig c;
  c.scenarios = scenarios_of(s);
  c.methods = methods_of(s);
  c.sim = sim_of(s);
  c.optim = optim_of(s);
  c.prevalence = prevalence_of(s);
  c.sensitivity_shift = std::abs(to_real(s, "prevalence.shift", c.sensitivity_shift));
  c.threads = static_cast<int>(to_int(s, "run.threads", c.threads));
  c.grid_size = static_cast<int>(to_int(s, "report.grid_size", c.grid_size));
  c.out_dir = to_str(s, "run.out", "results");
  const ExperimentOutcome o = run_experiment(c, &out);
  out << "cells: " << o.cells_ok << " ok, " << o.cells_nonconverged << " nonconverged, " << o.cells_failed
      << " failed (" << o.cells_reused << " reused)\n";
  for (const std::string& p : o.problems) err << "problem: " << p << '\n';
  return o.ok() ? kExitOk : kExitNumerical;
}

int cmd_verify(const Settings& s, bool as_json, std::ostream& out, std::ostream& err) {
  VerifyOptions opt;
  opt.seed = to_seed(s, opt.seed);
  const auto checks = run_verify(opt);
  if (as_json) {
    json arr = json::array();
    for (const VerifyCheck& c : checks)
      arr.push_back({{"name", c.name},
                     {"max_error", number(c.max_error)},
                     {"tolerance", c.tolerance},
                     {"passed", c.passed},
                     {"detail", c.detail}});
    out << json{{"version", kVersion}, {"passed", all_passed(checks)}, {"checks", arr}}.dump(2) << '\n';
  } else {
    for (const VerifyCheck& c : checks) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "max_error=%.3e tol=%.0e", c.max_error, c.tolerance);
      out << (c.passed ? "PASS " : "FAIL ") << c.name << " " << buf << (c.detail.empty() ? "" : "  " + c.detail)
          << '\n';
    }
  }
  for (const VerifyCheck& c : checks)
    if (!c.passed) err << "verification failed: " << c.name << '\n';
  return all_passed(checks) ? kExitOk : kExitNumerical;
}

int cmd_report(const Settings& s, std::ostream& out) {
  const fs::path dir = to_str(s, "run.out", "results");
  if (!fs::exists(dir / "manifest.txt")) throw IoError("no manifest.txt under " + dir.string());
  write_reports(dir);
  out << "reports written to " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Presence-background species distribution models: simulation study and fitting", "pbsdm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  struct Sub {
    CLI::App* app;
    std::string config;
    std::map<std::string, std::string> flags;
  };
  std::map<std::string, Sub> subs;
  auto add = [&](const std::string& name, const std::string& help, std::initializer_list<const char*> keys) {
    Sub& sub = subs[name];
    sub.app = app.add_subcommand(name, help);
    sub.app->add_option("--config", sub.config, "settings file (INI); flags override it");
    for (const char* key : keys)
      for (const Key& k : kKeys)
        if (std::string(k.key) == key) sub.app->add_option(k.flag, sub.flags[k.key], k.help);
    return sub.app;
  };
  add("simulate", "write simulated presence/background CSVs",
      {"run.seed", "run.out", "sim.scenarios", "sim.n1", "sim.n0", "sim.reps"});
  std::string presence, background;
  CLI::App* fit = add("fit", "fit methods to presence/background CSVs and print a JSON report",
                      {"run.seed", "run.out", "fit.methods", "fit.links", "fit.design", "fit.area", "prevalence.pi0",
                       "optim.tol_grad", "optim.tol_constraint", "optim.max_iter", "optim.n_starts",
                       "optim.penalty_growth", "optim.max_outer", "optim.start_range"});
  fit->add_option("--presence", presence, "presence covariates CSV")->required();
  fit->add_option("--background", background, "background covariates CSV")->required();
  add("experiment", "run (or resume) the replication experiment",
      {"run.seed", "run.threads", "run.out", "sim.scenarios", "sim.n1", "sim.n0", "sim.reps", "fit.methods",
       "fit.links", "prevalence.pi0", "prevalence.shift", "optim.tol_grad", "optim.tol_constraint", "optim.max_iter",
       "optim.n_starts", "optim.penalty_growth", "optim.max_outer", "optim.start_range", "report.grid_size"});
  bool as_json = false;
  CLI::App* verify = add("verify", "check the likelihood identities and gradients", {"run.seed"});
  verify->add_flag("--json", as_json, "machine-readable output");
  add("report", "regenerate tables and plots from a finished experiment directory", {"run.out"});

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (auto& [name, sub] : subs) {
      if (!sub.app->parsed()) continue;
      Settings s;
      if (!sub.config.empty()) s = read_config_file(sub.config);
      for (const Key& k : kKeys) {
        const auto it = sub.flags.find(k.key);
        if (it == sub.flags.end()) continue;
        if (sub.app->get_option(k.flag)->count() > 0) s[k.key] = it->second;
      }
      if (name == "simulate") return cmd_simulate(s, out);
      if (name == "fit") return cmd_fit(s, presence, background, out);
      if (name == "experiment") return cmd_experiment(s, out, err);
      if (name == "verify") return cmd_verify(s, as_json, out, err);
      if (name == "report") return cmd_report(s, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace pbsdm
