// gridlife command-line entry point.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gridlife/config.h"
#include "gridlife/csv.h"
#include "gridlife/degradation_dataset.h"
#include "gridlife/dispatch.h"
#include "gridlife/error.h"
#include "gridlife/lifecycle.h"
#include "gridlife/quantile_gbt.h"
#include "gridlife/reports.h"
#include "gridlife/tuner.h"

namespace fs = std::filesystem;
using namespace gridlife;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string out;
  std::string log_level = "info";
  bool record_timings = false;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path require_out(const Globals& g, const std::string& command) {
  if (g.out.empty()) throw ConfigError(command + ": --out is required");
  return g.out;
}

// Manifest of a single-file command sits beside the file.
fs::path sibling_manifest(const fs::path& file) { return file.string() + ".manifest.json"; }

reports::Manifest start_manifest(const std::string& command, const Globals& g) {
  reports::Manifest m(command);
  m.set_seed(g.seed);
  m.record_timings(g.record_timings);
  return m;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("'" + item + "' is not a number");
    }
  }
  if (values.empty()) throw ConfigError("empty value list");
  return values;
}

gbt::Hyperparams load_hyperparams(const fs::path& path, gbt::QuantileSpec& spec) {
  const auto doc = reports::read_json(path);
  gbt::Hyperparams h;
  try {
    h.rounds = doc.value("rounds", h.rounds);
    h.learning_rate = doc.value("learning_rate", h.learning_rate);
    h.max_depth = doc.value("max_depth", h.max_depth);
    h.min_samples_leaf = doc.value("min_samples_leaf", h.min_samples_leaf);
    h.patience = doc.value("patience", h.patience);
    h.subsample = doc.value("subsample", h.subsample);
    h.early_stopping = doc.value("early_stopping", h.early_stopping);
    h.refit_intercept = doc.value("refit_intercept", h.refit_intercept);
    if (doc.contains("quantiles")) spec.quantiles = doc.at("quantiles").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return h;
}

// Lifecycle inputs shared by simulate, tune, compare and sweep.
struct LifecycleInputs {
  std::string config;
  std::string model_cyclic;
  std::string model_calendar;
  std::string pso;
  std::optional<double> quantile;

  void add_options(CLI::App* cmd, bool with_pso) {
    cmd->add_option("--config", config, "lifecycle.json (defaults apply when omitted)")->check(CLI::ExistingFile);
    cmd->add_option("--model-cyc", model_cyclic, "cyclic rate model")->required()->check(CLI::ExistingFile);
    cmd->add_option("--model-cal", model_calendar, "calendar rate model")->required()->check(CLI::ExistingFile);
    cmd->add_option("--quantile", quantile, "overrides the configured quantile");
    if (with_pso) cmd->add_option("--pso", pso, "pso.json")->check(CLI::ExistingFile);
  }
};

struct LoadedLifecycle {
  lifecycle::Setup setup;
  gbt::QuantileEnsemble cyclic;
  gbt::QuantileEnsemble calendar;
  tuner::PsoConfig pso;

  lifecycle::Models models() const { return {&cyclic, &calendar}; }
};

LoadedLifecycle load_lifecycle(const LifecycleInputs& in, const Globals& g, reports::Manifest& manifest) {
  config::Bundle bundle;
  if (!in.config.empty()) bundle.lifecycle = in.config;
  if (!in.pso.empty()) bundle.pso = in.pso;
  bundle.model_cyclic = in.model_cyclic;
  bundle.model_calendar = in.model_calendar;
  bundle.quantile = in.quantile;
  config::require_valid(bundle);

  LoadedLifecycle out;
  lifecycle::LifecycleConfig cfg;
  fs::path base;
  if (!in.config.empty()) {
    cfg = lifecycle::LifecycleConfig::load(in.config);
    base = fs::path(in.config).parent_path();
    manifest.add_input("config", in.config);
  }
  if (in.quantile) cfg.quantile = *in.quantile;
  out.setup = lifecycle::Setup::from_config(cfg, base);
  out.cyclic = gbt::QuantileEnsemble::load(in.model_cyclic);
  out.calendar = gbt::QuantileEnsemble::load(in.model_calendar);
  manifest.add_input("model_cyclic", in.model_cyclic);
  manifest.add_input("model_calendar", in.model_calendar);
  if (!in.pso.empty()) {
    out.pso = tuner::PsoConfig::load(in.pso);
    manifest.add_input("pso", in.pso);
  }
  out.pso.seed = g.seed;
  manifest.set("lifecycle", out.setup.config.to_json());
  manifest.set("pso", out.pso.to_json());
  return out;
}

void configure_logging(const std::string& level) {
  auto logger = spdlog::stderr_color_mt("gridlife");
  spdlog::set_default_logger(logger);
  const auto parsed = spdlog::level::from_str(level);
  if (parsed == spdlog::level::off && level != "off") throw ConfigError("unknown log level '" + level + "'");
  spdlog::set_level(parsed);
  spdlog::set_pattern("[%l] %v");
}

// ---------------------------------------------------------------------------

void cmd_process_data(const std::string& in_dir, const Globals& g) {
  const fs::path out = require_out(g, "process-data");
  Stopwatch clock;
  const auto samples = data::process_directory(in_dir);
  data::write_samples(out, samples);
  auto m = start_manifest("process-data", g);
  for (const auto& id : data::list_cells(in_dir)) {
    m.add_input("cycles_" + id, fs::path(in_dir) / (id + "_cycles.csv"));
    m.add_input("checkups_" + id, fs::path(in_dir) / (id + "_cu.csv"));
  }
  m.set("samples", samples.size());
  m.add_output(out);
  m.add_timing("total", clock.seconds());
  m.write(sibling_manifest(out));
}

void cmd_synth(const std::string& kind, const std::string& config_path, const Globals& g) {
  const fs::path out = require_out(g, "synth");
  auto m = start_manifest("synth", g);
  m.set("kind", kind);
  if (!config_path.empty()) m.add_input("config", config_path);
  if (kind == "fleet") {
    data::SyntheticConfig cfg;
    if (!config_path.empty()) cfg = data::load_synthetic_config(config_path);
    const auto samples = data::generate_synthetic_fleet(cfg, g.seed);
    data::write_samples(out, samples);
    m.set("samples", samples.size());
    m.add_output(out);
    m.write(sibling_manifest(out));
  } else if (kind == "cells") {
    if (!config_path.empty()) throw ConfigError("synth --kind cells takes no --config");
    const auto cells = data::generate_synthetic_cells({}, g.seed);
    fs::create_directories(out);
    for (const auto& c : cells) data::write_cell(out, c);
    for (const auto& c : cells) {
      m.add_output(out / (c.id + "_cycles.csv"));
      m.add_output(out / (c.id + "_cu.csv"));
    }
    m.write(out / "manifest.json");
  } else if (kind == "seasons") {
    if (!config_path.empty()) throw ConfigError("synth --kind seasons takes no --config");
    fs::create_directories(out);
    lifecycle::LifecycleConfig cfg;
    const auto days = lifecycle::synthetic_seasons(cfg.tau_h);
    for (std::size_t s = 0; s < days.size(); ++s) {
      const std::string name = "season_" + std::to_string(s + 1) + ".csv";
      days[s].write_csv(out / name);
      cfg.scenario_files.push_back(name);
      m.add_output(out / name);
    }
    reports::write_json(out / "lifecycle.json", cfg.to_json());
    m.add_output(out / "lifecycle.json");
    m.write(out / "manifest.json");
  } else {
    throw ConfigError("unknown synth kind '" + kind + "' (expected fleet, cells or seasons)");
  }
}

struct TrainArgs {
  std::string samples;
  std::string validation;
  std::string mode = "cyclic";
  std::string params;
  std::string test_out;
};

void cmd_train(const TrainArgs& a, const Globals& g) {
  const fs::path out = require_out(g, "train");
  Stopwatch clock;
  auto m = start_manifest("train", g);
  const auto mode = data::parse_aging_mode(a.mode);
  gbt::QuantileSpec spec;
  gbt::Hyperparams hp;
  if (!a.params.empty()) {
    hp = load_hyperparams(a.params, spec);
    m.add_input("params", a.params);
  }
  spec.validate();
  const auto samples = data::read_samples(a.samples);
  m.add_input("samples", a.samples);

  std::vector<data::DegradationSample> train_set, val_set;
  if (!a.validation.empty()) {
    if (!a.test_out.empty()) throw ConfigError("train: --test-out applies only when splitting internally");
    train_set = samples;
    val_set = data::read_samples(a.validation);
    m.add_input("validation", a.validation);
  } else {
    auto split = data::split_dataset(samples, {}, g.seed);
    train_set = std::move(split.train);
    val_set = std::move(split.validation);
    m.set("split", {{"train", train_set.size()}, {"validation", val_set.size()}, {"test", split.test.size()}});
    if (!a.test_out.empty()) {
      data::write_samples(fs::path(a.test_out), split.test);
      m.add_output(a.test_out);
    }
  }
  const auto model = gbt::train(train_set, val_set, mode, spec, hp, g.seed);
  model.save(out);
  m.add_output(out);
  m.set("mode", a.mode);
  m.add_timing("total", clock.seconds());
  m.write(sibling_manifest(out));
  spdlog::info("trained {} model with {} quantiles in {:.1f} s", a.mode, model.quantiles().size(), clock.seconds());
}

void cmd_predict(const std::string& model_path, const std::string& features_path, const Globals& g) {
  const auto model = gbt::QuantileEnsemble::load(model_path);
  const auto table = csv::read(features_path);
  const auto& names = gbt::feature_names(model.mode());
  std::vector<std::size_t> cols;
  for (const auto& n : names) cols.push_back(table.column(n));

  std::ostringstream text;
  csv::Writer w(text);
  std::vector<std::string> header = names;
  for (double q : model.quantiles()) header.push_back("q_" + csv::format_number(q));
  w.row(header);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::vector<double> x;
    for (auto c : cols) x.push_back(table.number(r, c));
    auto row = x;
    for (double v : model.predict_quantiles(x)) row.push_back(v);
    w.row(row);
  }
  if (g.out.empty()) {
    std::cout << text.str();
    return;
  }
  const fs::path out = g.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream(out, std::ios::binary) << text.str();
  auto m = start_manifest("predict", g);
  m.add_input("model", model_path);
  m.add_input("features", features_path);
  m.add_output(out);
  m.write(sibling_manifest(out));
}

struct DispatchArgs {
  std::string scenario;
  std::string battery;
  std::string theta = "0,0,0,0";
  double tau = 1.0;
  double capacity = 0.0;
};

void cmd_dispatch(const DispatchArgs& a, const Globals& g) {
  const fs::path out = require_out(g, "dispatch");
  config::Bundle bundle;
  bundle.scenario = a.scenario;
  bundle.battery = a.battery;
  bundle.tau_h = a.tau;
  config::require_valid(bundle);

  const auto day = dispatch::DayScenario::load_csv(a.scenario, a.tau);
  const auto battery = dispatch::BatteryConfig::load(a.battery);
  const auto theta = reports::read_theta(a.theta);
  theta.validate();
  dispatch::DispatchProblem p;
  p.tau_h = a.tau;
  p.pv_kw = day.pv_kw;
  p.load_kw = day.load_kw;
  p.tariff = day.tariff;
  p.theta = theta;
  p.battery = a.capacity > 0.0 ? battery.state_at(a.capacity) : battery.state();
  p.grid_cap_kw = battery.grid_cap_kw;
  const auto solution = dispatch::solve(p);

  auto doc = dispatch::to_json(solution);
  doc["theta"] = theta.as_array();
  doc["max_violation"] = dispatch::max_constraint_violation(p, solution);
  reports::write_json(out, doc);
  auto m = start_manifest("dispatch", g);
  m.add_input("scenario", a.scenario);
  m.add_input("battery", a.battery);
  if (fs::is_regular_file(a.theta)) m.add_input("theta", a.theta);
  m.set("theta", theta.as_array());
  m.set("tau_h", a.tau);
  m.add_output(out);
  m.write(sibling_manifest(out));
}

struct SimulateArgs {
  LifecycleInputs life;
  std::string theta;
  std::string policy;
  int paths = 100;
};

void cmd_simulate(const SimulateArgs& a, const Globals& g) {
  const fs::path out = require_out(g, "simulate");
  Stopwatch clock;
  auto m = start_manifest("simulate", g);
  const auto loaded = load_lifecycle(a.life, g, m);
  if (a.paths < 0) throw ConfigError("--paths must be non-negative");

  lifecycle::Policy policy;
  std::string label;
  if (!a.theta.empty()) {
    if (!a.policy.empty()) throw ConfigError("simulate: give --theta or --policy, not both");
    policy = lifecycle::Policy::mpc(reports::read_theta(a.theta));
    label = "theta";
    if (fs::is_regular_file(a.theta)) m.add_input("theta", a.theta);
  } else {
    const auto kind = tuner::parse_policy(a.policy.empty() ? "benchmark" : a.policy);
    if (kind == tuner::PolicyKind::kRo || kind == tuner::PolicyKind::kSp) {
      throw ConfigError("simulate: policy " + tuner::to_string(kind) + " needs --theta (see the tune command)");
    }
    policy = kind == tuner::PolicyKind::kNoUsage ? lifecycle::Policy::no_usage() : lifecycle::Policy::mpc({});
    label = tuner::to_string(kind);
  }
  const double q = loaded.setup.config.quantile;
  const auto worst =
      lifecycle::simulate_lifecycle(policy, loaded.setup, loaded.models(), q, g.seed, {.log_periods = true});
  const auto mc = lifecycle::monte_carlo_lifecycle(policy, loaded.setup, loaded.models(), a.paths, g.seed);
  spdlog::info("worst-case life {} periods, cost {:.2f}; Monte Carlo mean life {:.1f} days over {} paths",
               worst.life_periods, worst.total_cost, mc.mean_life_days, a.paths);

  const auto file = out / "simulation.json";
  reports::write_json(file, reports::simulation_document(label, policy.theta, loaded.setup.config, q, worst, mc));
  m.set("policy", label);
  m.set("mc_paths", a.paths);
  m.add_output(file);
  m.add_timing("total", clock.seconds());
  m.write(out / "manifest.json");
}

struct TuneArgs {
  LifecycleInputs life;
  std::string policy = "ro";
  int sp_paths = 5;
};

void cmd_tune(const TuneArgs& a, const Globals& g) {
  const fs::path out = require_out(g, "tune");
  auto m = start_manifest("tune", g);
  const auto loaded = load_lifecycle(a.life, g, m);
  const auto kind = tuner::parse_policy(a.policy);
  if (kind != tuner::PolicyKind::kRo && kind != tuner::PolicyKind::kSp) {
    throw ConfigError("tune: --policy must be ro or sp");
  }
  tuner::EvaluationSettings settings;
  settings.seed = g.seed;
  settings.sp_paths = a.sp_paths;
  tuner::PsoResult result;
  const auto timing = tuner::time_tuning(kind, loaded.setup, loaded.models(), loaded.pso, settings, &result);
  spdlog::info("tuned {}: objective {:.2f}, theta ({:.4g}, {:.4g}, {:.4g}, {:.4g}), {} evaluations", a.policy,
               result.best_cost, result.best[0], result.best[1], result.best[2], result.best[3], result.evaluations);
  spdlog::info("runtime: predicted {:.1f} s, measured {:.1f} s", timing.predicted_seconds, timing.measured_seconds);

  reports::write_json(out / "theta.json", reports::theta_document(kind, result));
  reports::write_convergence(out / "convergence.csv", result);
  m.add_output(out / "theta.json");
  m.add_output(out / "convergence.csv");
  if (g.record_timings) {
    reports::write_json(out / "timing.json", timing.to_json());
    m.add_output(out / "timing.json");
    m.add_timing("total", timing.measured_seconds);
  }
  m.set("policy", a.policy);
  m.set("sp_paths", a.sp_paths);
  m.write(out / "manifest.json");
}

struct CompareArgs {
  LifecycleInputs life;
  std::string policies = "benchmark,nousage,sp,ro";
  std::string theta_ro;
  std::string theta_sp;
  int mc_paths = 100;
  int sp_paths = 5;
};

void cmd_compare(const CompareArgs& a, const Globals& g) {
  const fs::path out = require_out(g, "compare");
  Stopwatch clock;
  auto m = start_manifest("compare", g);
  const auto loaded = load_lifecycle(a.life, g, m);
  tuner::EvaluationSettings settings;
  settings.seed = g.seed;
  settings.mc_paths = a.mc_paths;
  settings.sp_paths = a.sp_paths;

  std::vector<reports::Table1Row> rows;
  std::stringstream list(a.policies);
  std::string item;
  while (std::getline(list, item, ',')) {
    const auto kind = tuner::parse_policy(item);
    std::optional<dispatch::ThetaVector> theta;
    const std::string& given = kind == tuner::PolicyKind::kRo ? a.theta_ro
                               : kind == tuner::PolicyKind::kSp ? a.theta_sp
                                                                : std::string();
    if (!given.empty()) {
      theta = reports::read_theta(given);
      if (fs::is_regular_file(given)) m.add_input("theta_" + item, given);
    }
    Stopwatch step;
    const auto result = tuner::evaluate_policy(kind, theta, loaded.setup, loaded.models(), loaded.pso, settings);
    m.add_timing(item, step.seconds());
    spdlog::info("{}: cost_q90 {:.2f}, cost_q95 {:.2f}, mean life {:.1f} days", item, result.cost_q90,
                 result.cost_q95, result.mean_life_days);
    rows.push_back(reports::table1_row(result));

    const auto sim = out / ("simulation_" + tuner::to_string(kind) + ".json");
    reports::write_json(sim, reports::simulation_document(tuner::to_string(kind), result.theta, loaded.setup.config,
                                                          loaded.setup.config.quantile, result.worst_case,
                                                          result.monte_carlo));
    m.add_output(sim);
    if (result.tuning) {
      const auto conv = out / ("convergence_" + tuner::to_string(kind) + ".csv");
      reports::write_convergence(conv, *result.tuning);
      m.add_output(conv);
    }
  }
  reports::write_table1(out / "table1.csv", rows);
  m.add_output(out / "table1.csv");
  m.set("policies", a.policies);
  m.set("mc_paths", a.mc_paths);
  m.set("sp_paths", a.sp_paths);
  m.add_timing("total", clock.seconds());
  m.write(out / "manifest.json");
}

struct SweepArgs {
  LifecycleInputs life;
  std::string axis;
  std::string values;
  int mc_paths = 100;
};

void cmd_sweep(const SweepArgs& a, const Globals& g) {
  const fs::path out = require_out(g, "sweep");
  Stopwatch clock;
  auto m = start_manifest("sweep", g);
  const auto loaded = load_lifecycle(a.life, g, m);
  const auto axis = tuner::parse_axis(a.axis);
  const auto values = parse_list(a.values);
  if (axis == tuner::SweepAxis::kQuantile) {
    config::Bundle bundle;
    bundle.model_cyclic = a.life.model_cyclic;
    bundle.model_calendar = a.life.model_calendar;
    for (double q : values) {
      bundle.quantile = q;
      config::require_valid(bundle);
    }
  }
  tuner::EvaluationSettings settings;
  settings.seed = g.seed;
  settings.mc_paths = a.mc_paths;
  const auto rows = tuner::sensitivity_sweep(axis, values, loaded.setup, loaded.models(), loaded.pso, settings);
  const auto file = out / ("sweep_" + tuner::to_string(axis) + ".csv");
  reports::write_sweep(file, axis, rows);
  m.add_output(file);
  m.set("axis", a.axis);
  m.set("values", values);
  m.set("mc_paths", a.mc_paths);
  m.add_timing("total", clock.seconds());
  m.write(out / "manifest.json");
}

struct ReportArgs {
  std::string samples, model_cyclic, model_calendar, trace, table1;
  int bins = 20;
};

void cmd_report(const ReportArgs& a, const Globals& g) {
  const fs::path out = require_out(g, "report");
  reports::ReportInputs in;
  auto opt = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<fs::path>(s); };
  in.samples = opt(a.samples);
  in.model_cyclic = opt(a.model_cyclic);
  in.model_calendar = opt(a.model_calendar);
  in.trace = opt(a.trace);
  in.table1 = opt(a.table1);
  in.histogram_bins = a.bins;
  for (const auto& p : reports::emit_report(in, out, g.seed)) spdlog::info("wrote {}", p.string());
}

struct ValidateArgs {
  std::string lifecycle, battery, pso, scenario, model_cyclic, model_calendar;
  double tau = 1.0;
  std::optional<double> quantile;
};

void cmd_validate(const ValidateArgs& a, const Globals& g) {
  config::Bundle b;
  auto opt = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<fs::path>(s); };
  b.lifecycle = opt(a.lifecycle);
  b.battery = opt(a.battery);
  b.pso = opt(a.pso);
  b.scenario = opt(a.scenario);
  b.model_cyclic = opt(a.model_cyclic);
  b.model_calendar = opt(a.model_calendar);
  b.tau_h = a.tau;
  b.quantile = a.quantile;
  const auto normalized = config::require_valid(b);
  if (g.out.empty()) {
    std::cout << normalized.dump(2) << '\n';
  } else {
    reports::write_json(g.out, {{"schema_version", "normalized-config-v1"}, {"config", normalized}});
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Life-cycle-aware microgrid dispatch: degradation models, MPC dispatch and penalty tuning"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", reports::kToolVersion);
  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--out", g.out, "output file or directory");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off")->capture_default_str();
  app.add_flag("--record-timings", g.record_timings, "include wall-clock timings in manifests");

  std::string in_dir;
  auto* process = app.add_subcommand("process-data", "raw cell files to samples.csv");
  process->add_option("--in", in_dir, "directory of cell files")->required()->check(CLI::ExistingDirectory);

  std::string synth_kind = "fleet", synth_config;
  auto* synth = app.add_subcommand("synth", "synthetic samples, raw cells or season scenarios");
  synth->add_option("--kind", synth_kind, "fleet, cells or seasons")->capture_default_str();
  synth->add_option("--config", synth_config, "synthetic fleet config")->check(CLI::ExistingFile);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "fit a quantile rate model");
  train_cmd->add_option("--samples", train.samples, "samples.csv")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--validation", train.validation, "early-stopping samples; skips the internal split")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--mode", train.mode, "cyclic or calendar")->capture_default_str();
  train_cmd->add_option("--params", train.params, "hyperparameter JSON")->check(CLI::ExistingFile);
  train_cmd->add_option("--test-out", train.test_out, "write the held-out test split here");

  std::string model_path, features_path;
  auto* predict = app.add_subcommand("predict", "quantile rates for feature rows");
  predict->add_option("--model", model_path, "model.json")->required()->check(CLI::ExistingFile);
  predict->add_option("--features", features_path, "CSV with the model's feature columns")
      ->required()
      ->check(CLI::ExistingFile);

  DispatchArgs disp;
  auto* dispatch_cmd = app.add_subcommand("dispatch", "solve one day");
  dispatch_cmd->add_option("--scenario", disp.scenario, "day.csv")->required()->check(CLI::ExistingFile);
  dispatch_cmd->add_option("--battery", disp.battery, "battery.json")->required()->check(CLI::ExistingFile);
  dispatch_cmd->add_option("--theta", disp.theta, "\"efc,dod,c,d\" or theta.json")->capture_default_str();
  dispatch_cmd->add_option("--tau", disp.tau, "step length in hours")->capture_default_str();
  dispatch_cmd->add_option("--capacity", disp.capacity, "current capacity in kWh (default from battery.json)");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "worst-case and Monte Carlo life cycle of one policy");
  sim.life.add_options(simulate, false);
  simulate->add_option("--theta", sim.theta, "\"efc,dod,c,d\" or theta.json");
  simulate->add_option("--policy", sim.policy, "benchmark or nousage");
  simulate->add_option("--paths", sim.paths, "Monte Carlo paths")->capture_default_str();

  TuneArgs tune;
  auto* tune_cmd = app.add_subcommand("tune", "tune theta by particle swarm");
  tune.life.add_options(tune_cmd, true);
  tune_cmd->add_option("--policy", tune.policy, "ro or sp")->capture_default_str();
  tune_cmd->add_option("--sp-paths", tune.sp_paths, "sampled paths per SP evaluation")->capture_default_str();

  CompareArgs cmp;
  auto* compare = app.add_subcommand("compare", "policy comparison table");
  cmp.life.add_options(compare, true);
  compare->add_option("--policies", cmp.policies, "comma-separated policies")->capture_default_str();
  compare->add_option("--theta-ro", cmp.theta_ro, "use this RO theta instead of tuning");
  compare->add_option("--theta-sp", cmp.theta_sp, "use this SP theta instead of tuning");
  compare->add_option("--mc-paths", cmp.mc_paths, "Monte Carlo paths per policy")->capture_default_str();
  compare->add_option("--sp-paths", cmp.sp_paths, "sampled paths per SP evaluation")->capture_default_str();

  SweepArgs swp;
  auto* sweep = app.add_subcommand("sweep", "sensitivity of the tuned RO policy");
  swp.life.add_options(sweep, true);
  sweep->add_option("--axis", swp.axis, "quantile, temperature or capacity")->required();
  sweep->add_option("--values", swp.values, "comma-separated axis values")->required();
  sweep->add_option("--mc-paths", swp.mc_paths, "Monte Carlo paths per row")->capture_default_str();

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "figure and table data files");
  report->add_option("--samples", rep.samples, "held-out samples.csv");
  report->add_option("--model-cyc", rep.model_cyclic, "cyclic model");
  report->add_option("--model-cal", rep.model_calendar, "calendar model");
  report->add_option("--trace", rep.trace, "simulation.json");
  report->add_option("--table1", rep.table1, "table1.csv");
  report->add_option("--bins", rep.bins, "error histogram bins")->capture_default_str();

  ValidateArgs val;
  auto* validate = app.add_subcommand("validate", "check a configuration bundle");
  validate->add_option("--config", val.lifecycle, "lifecycle.json");
  validate->add_option("--battery", val.battery, "battery.json");
  validate->add_option("--pso", val.pso, "pso.json");
  validate->add_option("--scenario", val.scenario, "day.csv");
  validate->add_option("--model-cyc", val.model_cyclic, "cyclic model");
  validate->add_option("--model-cal", val.model_calendar, "calendar model");
  validate->add_option("--tau", val.tau, "scenario step length in hours")->capture_default_str();
  validate->add_option("--quantile", val.quantile, "quantile to check in the models");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    configure_logging(g.log_level);
    if (*process) cmd_process_data(in_dir, g);
    if (*synth) cmd_synth(synth_kind, synth_config, g);
    if (*train_cmd) cmd_train(train, g);
    if (*predict) cmd_predict(model_path, features_path, g);
    if (*dispatch_cmd) cmd_dispatch(disp, g);
    if (*simulate) cmd_simulate(sim, g);
    if (*tune_cmd) cmd_tune(tune, g);
    if (*compare) cmd_compare(cmp, g);
    if (*sweep) cmd_sweep(swp, g);
    if (*report) cmd_report(rep, g);
    if (*validate) cmd_validate(val, g);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return static_cast<int>(ExitCode::kInternal);
  }
  return 0;
}
