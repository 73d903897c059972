// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.
//
//   gridlife_acceptance --cli <path to gridlife> --work <scratch dir> [--only 1,3,7]

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "fixtures.h"
#include "gridlife/degradation_dataset.h"
#include "gridlife/dispatch.h"
#include "gridlife/lifecycle.h"
#include "gridlife/quantile_gbt.h"
#include "gridlife/reports.h"
#include "gridlife/tuner.h"
#include "oracles.h"

using namespace gridlife;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Context {
  fs::path cli;
  fs::path work;
  std::optional<gbt::QuantileEnsemble> cyclic, calendar;
  double train_seconds = 0.0;
  data::DatasetSplit split;
};

// Synthetic fleet with seed 1, default split and default quantile spec.
void ensure_models(Context& ctx) {
  if (ctx.cyclic) return;
  const auto t0 = Clock::now();
  const auto samples = data::generate_synthetic_fleet(data::SyntheticConfig{}, 1);
  ctx.split = data::split_dataset(samples, data::SplitFractions{}, 1);
  ctx.cyclic = gbt::train(ctx.split.train, ctx.split.validation, data::AgingMode::kCyclic, gbt::QuantileSpec{},
                          gbt::Hyperparams{}, 1);
  ctx.calendar = gbt::train(ctx.split.train, ctx.split.validation, data::AgingMode::kCalendar, gbt::QuantileSpec{},
                            gbt::Hyperparams{}, 1);
  ctx.train_seconds = seconds_since(t0);
}

lifecycle::Models models_of(const Context& ctx) { return {&*ctx.cyclic, &*ctx.calendar}; }

// ---------------------------------------------------------------------------

Outcome c1_calibration(Context& ctx) {
  ensure_models(ctx);
  const auto& s = ctx.split;
  const std::size_t total = s.train.size() + s.validation.size() + s.test.size();
  std::map<double, std::size_t> covered;
  std::size_t n = 0;
  std::vector<double> median_errors;
  for (const auto& sample : s.test) {
    const auto& model = sample.mode == data::AgingMode::kCyclic ? *ctx.cyclic : *ctx.calendar;
    const auto pred = model.predict_quantiles(gbt::features_of(sample));
    for (double q : {0.1, 0.5, 0.9}) {
      if (sample.rate <= pred[model.quantile_index(q)]) ++covered[q];
    }
    if (sample.mode == data::AgingMode::kCyclic) median_errors.push_back(pred[model.quantile_index(0.5)] - sample.rate);
    ++n;
  }
  bool pass = total == 2537 && s.train.size() == 1521 && s.test.size() == 508;
  std::string detail = fmt::format("split {}/{}/{}", s.train.size(), s.validation.size(), s.test.size());
  for (double q : {0.1, 0.5, 0.9}) {
    const double cov = static_cast<double>(covered[q]) / static_cast<double>(n);
    pass = pass && std::abs(cov - q) <= 0.05;
    detail += fmt::format(", coverage q{}={:.3f}", q, cov);
  }
  double mean = 0.0, var = 0.0;
  for (double e : median_errors) mean += e;
  mean /= static_cast<double>(median_errors.size());
  for (double e : median_errors) var += (e - mean) * (e - mean);
  const double sd = std::sqrt(var / static_cast<double>(median_errors.size() - 1));
  pass = pass && std::abs(mean) < 0.2 * sd && ctx.train_seconds < 120.0;
  detail += fmt::format(", median error mean {:.4f} sd {:.4f}, training {:.1f} s", mean, sd, ctx.train_seconds);
  return {pass, detail};
}

Outcome c2_pinball(Context&) {
  bool pass = std::abs(gbt::pinball_loss(1.0, 0.5, 0.9) - 0.45) <= 1e-12 &&
              std::abs(gbt::pinball_loss(0.5, 1.0, 0.9) - 0.05) <= 1e-12;
  double worst = 0.0;
  for (double dev : {1e-3, 0.1, 0.5, 1.0, 7.25, 1e3}) {
    for (double r : {-2.0, 0.0, 3.5}) {
      const double under = gbt::pinball_loss(r, r - dev, 0.9);
      const double over = gbt::pinball_loss(r, r + dev, 0.9);
      worst = std::max(worst, std::abs(under / over - 9.0) / 9.0);
    }
  }
  pass = pass && worst <= 1e-12;
  return {pass, fmt::format("L(1,0.5)=0.45, L(0.5,1)=0.05, max relative deviation of ratio from 9: {:.2e}", worst)};
}

Outcome c3_lp(Context&) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  int exact = 0, checked = 0;
  double worst_gap = 0.0, worst_viol = 0.0;
  bool pass = true;
  for (int rep = 0; rep < 150; ++rep) {
    const std::size_t T = 1 + static_cast<std::size_t>(rep % 3);
    const auto d = oracle::random_dispatch_instance(rng, T);
    const auto expected = oracle::dispatch_optimum(d);
    const auto s = dispatch::solve(fixtures::to_problem(d));
    if (!expected) {
      pass = false;
      continue;
    }
    worst_gap = std::max(worst_gap, std::abs(s.objective - *expected) / std::max(1.0, std::abs(*expected)));
    worst_viol = std::max(worst_viol, fixtures::constraint_violation(d, s));
    ++exact;
  }
  // Longer horizons: the LP must be feasible to 1e-9 and no worse than any
  // point of a grid over net battery power (last step closes the energy loop).
  double worst_excess = -INFINITY;
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t T = 4 + static_cast<std::size_t>(rep % 3);
    const auto d = oracle::random_dispatch_instance(rng, T);
    const auto s = dispatch::solve(fixtures::to_problem(d));
    worst_viol = std::max(worst_viol, fixtures::constraint_violation(d, s));
    const auto grid = oracle::dispatch_grid_bound(d, 6);
    if (grid) worst_excess = std::max(worst_excess, s.objective - *grid);
    ++checked;
  }
  const double secs = seconds_since(t0);
  pass = pass && exact >= 100 && worst_gap <= 1e-6 && worst_viol <= 1e-9 && worst_excess <= 1e-9 && secs < 60.0;
  return {pass, fmt::format("{} exact-oracle instances (T<=3) max rel gap {:.2e}; {} grid-bounded instances (T=4..6) "
                            "max LP-minus-grid {:.2e}; max violation {:.2e}; {:.1f} s",
                            exact, worst_gap, checked, worst_excess, worst_viol, secs)};
}

Outcome c4_mpc(Context&) {
  std::mt19937_64 rng(44);
  const dispatch::BatteryConfig battery;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto day = fixtures::random_day(rng);
    const dispatch::ThetaVector theta{0.01 * (k % 4), 0.02 * (k % 3), 0.01 * (k % 5), 0.005 * (k % 2)};
    const dispatch::PerfectForecaster f(day);
    const auto cap = 600.0 + 15.0 * k;
    const auto rolled = dispatch::rolling_mpc(day, theta, battery.state_at(cap), battery.grid_cap_kw, f);
    const auto single = dispatch::single_shot(day, theta, battery.state_at(cap), battery.grid_cap_kw);
    worst = std::max(worst, std::abs(rolled.objective() - single.objective()) / std::abs(single.objective()));
  }
  return {worst <= 1e-6, fmt::format("20 days, max relative difference {:.2e}", worst)};
}

Outcome c5_capacity_monotone(Context&) {
  std::mt19937_64 rng(55);
  const dispatch::BatteryConfig battery;
  std::vector<dispatch::DayScenario> days;
  for (int k = 0; k < 10; ++k) days.push_back(fixtures::random_day(rng));
  int pairs = 0, bad = 0;
  double worst = 0.0;
  for (const auto& theta : {dispatch::ThetaVector{}, dispatch::ThetaVector{0.087, 0.066, 0.073, 0.056}}) {
    for (const auto& day : days) {
      double prev = INFINITY;
      for (int k = 0; k < 10; ++k) {
        const double cap = battery.c0_kwh * (0.4 + 0.6 * k / 9.0);
        const double g = dispatch::single_shot(day, theta, battery.state_at(cap), battery.grid_cap_kw, false).objective();
        if (k > 0) {
          ++pairs;
          worst = std::max(worst, g - prev);
          if (g > prev + 1e-6) ++bad;
        }
        prev = g;
      }
    }
  }
  return {bad == 0, fmt::format("{} adjacent capacity pairs over 10 days x 2 theta, {} increases, max increase {:.2e}",
                                pairs, bad, worst)};
}

Outcome c6_algorithm(Context&) {
  const auto setup = fixtures::stub_setup();
  const std::vector<double> qs{0.1, 0.5, 0.9};
  const lifecycle::ConstantRateModel cyc(qs, 0.1);
  const lifecycle::ConstantRateModel cal(qs, 0.2);
  const auto trace = lifecycle::simulate_lifecycle(lifecycle::Policy::mpc({}), setup, {&cyc, &cal}, 0.9, 1);
  const auto& cfg = setup.config;
  const double efc = fixtures::kStubThroughput * cfg.day_scale / (2.0 * cfg.c0_kwh);
  const double loss = 0.1 * efc + 0.2 * cfg.gamma_days;
  const int n_expected = std::min(cfg.n0_periods, static_cast<int>(std::floor((cfg.c0_kwh - cfg.c_min()) / loss)) + 1);
  double worst = 0.0;
  for (const auto& r : trace.records) {
    const double closed = cfg.c0_kwh - r.period * loss;
    worst = std::max(worst, std::abs(r.capacity_out - closed) / closed);
  }
  const bool pass = trace.life_periods == n_expected && worst <= 1e-9 &&
                    trace.termination == lifecycle::Termination::kEndOfLife;
  return {pass, fmt::format("N={} (analytic {}), max relative capacity deviation {:.2e}", trace.life_periods,
                            n_expected, worst)};
}

Outcome c7_chain(Context&) {
  const double one = lifecycle::chain_coefficient(40, 40, 0.0079);
  const double hand = (1.0 - 1.0 / 1.21) / (1.0 - 1.0 / 1.1);
  const double got = lifecycle::chain_coefficient(1, 2, 0.1);
  const bool pass = one == 1.0 && std::abs(got - hand) <= 1e-9 && std::abs(got - 1.909090909) <= 1e-9;
  return {pass, fmt::format("N=N0 -> {}, (N=1,N0=2,i=0.1) -> {:.10f}", one, got)};
}

struct Economics {
  std::map<tuner::PolicyKind, tuner::PolicyResult> results;
  double seconds = 0.0;
};

const Economics& economics(Context& ctx) {
  static std::optional<Economics> cached;
  if (cached) return *cached;
  ensure_models(ctx);
  Economics e;
  const auto t0 = Clock::now();
  const auto setup = lifecycle::Setup::from_config(lifecycle::LifecycleConfig{});
  tuner::PsoConfig pso;  // 20 particles x 40 iterations
  tuner::EvaluationSettings settings;
  for (auto kind : {tuner::PolicyKind::kBenchmark, tuner::PolicyKind::kNoUsage, tuner::PolicyKind::kRo,
                    tuner::PolicyKind::kSp}) {
    e.results[kind] = tuner::evaluate_policy(kind, std::nullopt, setup, models_of(ctx), pso, settings);
  }
  e.seconds = seconds_since(t0);
  cached = std::move(e);
  return *cached;
}

Outcome c8_policies(Context& ctx) {
  const auto& e = economics(ctx);
  const auto& ro = e.results.at(tuner::PolicyKind::kRo);
  const auto& sp = e.results.at(tuner::PolicyKind::kSp);
  const auto& bench = e.results.at(tuner::PolicyKind::kBenchmark);
  const auto& idle = e.results.at(tuner::PolicyKind::kNoUsage);
  const auto th = ro.theta.as_array();
  bool theta_ok = true, any_positive = false;
  for (double v : th) {
    theta_ok = theta_ok && v >= 0.0;
    any_positive = any_positive || v > 0.0;
  }
  const bool life = ro.mean_life_days >= sp.mean_life_days && sp.mean_life_days >= bench.mean_life_days;
  const bool cost = ro.cost_q90 <= bench.cost_q90 && ro.cost_q90 <= idle.cost_q90;
  const bool pass = life && cost && theta_ok && any_positive && e.seconds < 1800.0;
  return {pass, fmt::format("life RO {:.0f} / SP {:.0f} / Benchmark {:.0f} / NoUsage {:.0f} days; "
                            "q90 cost RO {:.0f} / SP {:.0f} / Benchmark {:.0f} / NoUsage {:.0f} $; "
                            "theta_RO=({:.4f},{:.4f},{:.4f},{:.4f}); {:.0f} s",
                            ro.mean_life_days, sp.mean_life_days, bench.mean_life_days, idle.mean_life_days,
                            ro.cost_q90, sp.cost_q90, bench.cost_q90, idle.cost_q90, th[0], th[1], th[2], th[3],
                            e.seconds)};
}

Outcome c9_dominance(Context& ctx) {
  const auto& mc = economics(ctx).results.at(tuner::PolicyKind::kRo).monte_carlo;
  const bool pass = mc.transitions >= 1000 && mc.dominance_rate() >= 0.85;
  return {pass, fmt::format("{} of {} RO transitions dominated ({:.3f})", mc.dominated, mc.transitions,
                            mc.dominance_rate())};
}

Outcome c10_sweeps(Context& ctx) {
  ensure_models(ctx);
  const auto t0 = Clock::now();
  const auto setup = lifecycle::Setup::from_config(lifecycle::LifecycleConfig{});
  tuner::PsoConfig pso;
  pso.n_particles = 10;
  pso.n_iterations = 10;
  tuner::EvaluationSettings settings;
  settings.mc_paths = 10;
  auto objectives = [&](tuner::SweepAxis axis, const std::vector<double>& values) {
    std::vector<double> out;
    for (const auto& row : tuner::sensitivity_sweep(axis, values, setup, models_of(ctx), pso, settings)) {
      out.push_back(row.objective);
    }
    return out;
  };
  const auto q = objectives(tuner::SweepAxis::kQuantile, {0.80, 0.85, 0.90, 0.95});
  const auto temp = objectives(tuner::SweepAxis::kTemperature, {5.0, 35.0, 50.0});
  const auto cap = objectives(tuner::SweepAxis::kCapacity, {700.0, 800.0, 910.8, 1000.0});
  bool q_ok = true, cap_ok = true;
  for (std::size_t k = 1; k < q.size(); ++k) q_ok = q_ok && q[k] >= q[k - 1];
  for (std::size_t k = 1; k < cap.size(); ++k) cap_ok = cap_ok && cap[k] <= cap[k - 1];
  const bool temp_ok = temp[1] <= temp[0] && temp[1] <= temp[2];
  return {q_ok && temp_ok && cap_ok,
          fmt::format("quantile {:.0f} {:.0f} {:.0f} {:.0f}; temperature 5/35/50 C {:.0f} {:.0f} {:.0f}; "
                      "capacity 700/800/910.8/1000 {:.0f} {:.0f} {:.0f} {:.0f}; {:.0f} s",
                      q[0], q[1], q[2], q[3], temp[0], temp[1], temp[2], cap[0], cap[1], cap[2], cap[3],
                      seconds_since(t0))};
}

// ---------------------------------------------------------------------------
// Determinism: the CLI pipeline twice in separate directories.

int run_in(const fs::path& dir, const fs::path& cli, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" + cli.string() + "' --log-level off --seed 1 " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files[fs::relative(entry.path(), dir).string()] = slurp(entry.path());
  }
  return files;
}

Outcome c11_determinism(Context& ctx) {
  const std::vector<std::string> pipeline{
      "synth --kind fleet --out samples.csv",
      "synth --kind cells --out cells",
      "process-data --in cells --out processed.csv",
      "synth --kind seasons --out seasons",
      "train --samples samples.csv --mode cyclic --params params.json --test-out test.csv --out cyc.json",
      "train --samples samples.csv --mode calendar --params params.json --out cal.json",
      "predict --model cyc.json --features features.csv --out predictions.csv",
      "dispatch --scenario seasons/season_3.csv --battery battery.json --theta 0.01,0.005,0.002,0.002 --out "
      "dispatch.json",
      "simulate --config seasons/lifecycle.json --model-cyc cyc.json --model-cal cal.json --theta "
      "0.02,0.01,0.01,0.01 --paths 4 --out sim",
      "tune --config seasons/lifecycle.json --model-cyc cyc.json --model-cal cal.json --pso pso.json --policy ro "
      "--out tune",
      "compare --config seasons/lifecycle.json --model-cyc cyc.json --model-cal cal.json --pso pso.json "
      "--policies benchmark,nousage,ro,sp --sp-paths 2 --mc-paths 3 --out cmp",
      "sweep --config seasons/lifecycle.json --model-cyc cyc.json --model-cal cal.json --pso pso.json --axis "
      "quantile --values 0.85,0.9 --mc-paths 2 --out sweep",
      "report --samples test.csv --model-cyc cyc.json --model-cal cal.json --trace sim/simulation.json --table1 "
      "cmp/table1.csv --out report",
      "validate --config seasons/lifecycle.json --battery battery.json --pso pso.json --scenario "
      "seasons/season_1.csv --model-cyc cyc.json --model-cal cal.json --out validated.json",
  };
  const auto t0 = Clock::now();
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* name : {"run_a", "run_b"}) {
    const auto dir = ctx.work / "determinism" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    reports::write_json(dir / "params.json", {{"rounds", 30}, {"patience", 5}});
    reports::write_json(dir / "pso.json", {{"n_particles", 4}, {"n_iterations", 2}});
    reports::write_json(dir / "battery.json", dispatch::BatteryConfig{}.to_json());
    {
      std::ofstream f(dir / "features.csv");
      f << "capacity_kwh,temp_c,dod,p_chg_kw,p_dis_kw\n900,25,0.5,300,400\n700,40,0.9,1200,1500\n500,5,0.1,60,80\n";
    }
    for (const auto& step : pipeline) {
      const int rc = run_in(dir, ctx.cli, step);
      if (rc != 0) return {false, fmt::format("'{}' exited with {}", step, rc)};
    }
    runs.push_back(snapshot(dir));
  }
  std::vector<std::string> differing;
  for (const auto& [path, bytes] : runs[0]) {
    const auto it = runs[1].find(path);
    if (it == runs[1].end() || it->second != bytes) differing.push_back(path);
  }
  for (const auto& [path, bytes] : runs[1]) {
    if (!runs[0].count(path)) differing.push_back(path);
  }
  std::string detail = fmt::format("{} commands, {} files compared, {:.0f} s", pipeline.size(), runs[0].size(),
                                   seconds_since(t0));
  if (!differing.empty()) {
    detail += "; differing:";
    for (const auto& p : differing) detail += " " + p;
  }
  return {differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  std::set<int> only;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string key = argv[i];
    if (key == "--cli") {
      ctx.cli = fs::absolute(argv[i + 1]);
    } else if (key == "--work") {
      ctx.work = fs::absolute(argv[i + 1]);
    } else if (key == "--only") {
      std::stringstream ss(argv[i + 1]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    } else {
      std::cerr << "unknown argument " << key << "\n";
      return 2;
    }
  }
  if (ctx.cli.empty() || ctx.work.empty()) {
    std::cerr << "usage: gridlife_acceptance --cli <gridlife> --work <dir> [--only 1,2,...]\n";
    return 2;
  }
  fs::create_directories(ctx.work);
  if (!std::getenv("GRIDLIFE_LOG")) spdlog::set_level(spdlog::level::warn);

  const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria{
      {"quantile calibration", c1_calibration},
      {"pinball asymmetry", c2_pinball},
      {"LP correctness", c3_lp},
      {"MPC consistency", c4_mpc},
      {"cost non-increasing in capacity", c5_capacity_monotone},
      {"lifecycle loop fidelity", c6_algorithm},
      {"replacement-chain coefficient", c7_chain},
      {"policy ordering", c8_policies},
      {"worst-case dominance", c9_dominance},
      {"sensitivity sweeps", c10_sweeps},
      {"CLI determinism", c11_determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << "C" << id << " " << criteria[k].first << ": " << o.detail
              << std::endl;
  }
  std::cout << (failed ? fmt::format("{} criteria failed", failed) : std::string("all criteria passed")) << std::endl;
  return failed ? 1 : 0;
}
