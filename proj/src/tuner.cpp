#include "gridlife/tuner.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <thread>

#include <spdlog/spdlog.h>

#include "gridlife/error.h"
#include "gridlife/random.h"

namespace gridlife::tuner {
namespace {

constexpr int kMaxResamples = 10;
constexpr double kInitialVelocityFraction = 0.1;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs f(i) for i in [0, n) on up to `threads` workers.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& f) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n && !failed; i = next++) {
        try {
          f(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

void PsoConfig::validate() const {
  std::vector<std::string> problems;
  if (n_particles < 2) problems.push_back("n_particles must be at least 2");
  if (n_iterations < 0) problems.push_back("n_iterations must be non-negative");
  if (inertia < 0.0 || c1 < 0.0 || c2 < 0.0) problems.push_back("inertia, c1 and c2 must be non-negative");
  for (std::size_t d = 0; d < 4; ++d) {
    if (lower[d] != 0.0) problems.push_back("lower bound " + std::to_string(d) + " must be 0");
    if (!(upper[d] > lower[d]) || !std::isfinite(upper[d])) {
      problems.push_back("upper bound " + std::to_string(d) + " must be finite and above the lower bound");
    }
  }
  if (threads < 0) problems.push_back("threads must be non-negative");
  if (!problems.empty()) {
    std::string text = "pso config:";
    for (const auto& p : problems) text += "\n  " + p;
    throw ConfigError(text);
  }
}

PsoConfig PsoConfig::from_json(const nlohmann::json& doc) {
  PsoConfig c;
  try {
    if (doc.contains("n_particles")) c.n_particles = doc.at("n_particles").get<int>();
    if (doc.contains("n_iterations")) c.n_iterations = doc.at("n_iterations").get<int>();
    if (doc.contains("inertia")) c.inertia = doc.at("inertia").get<double>();
    if (doc.contains("c1")) c.c1 = doc.at("c1").get<double>();
    if (doc.contains("c2")) c.c2 = doc.at("c2").get<double>();
    if (doc.contains("upper")) {
      c.upper = doc.at("upper").get<Point>();
      c.bounds_given = true;
    }
    if (doc.contains("seed")) c.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("threads")) c.threads = doc.at("threads").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("pso config: ") + e.what());
  }
  c.validate();
  return c;
}

PsoConfig PsoConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

nlohmann::json PsoConfig::to_json() const {
  nlohmann::json j{{"n_particles", n_particles}, {"n_iterations", n_iterations}, {"inertia", inertia},
                   {"c1", c1},                   {"c2", c2},                     {"seed", seed}};
  if (bounds_given) j["upper"] = upper;
  return j;
}

Point theta_upper_bounds(std::span<const dispatch::DayScenario> days) {
  if (days.empty()) throw ConfigError("theta bounds need at least one scenario day");
  double max_buy = 0.0, span_h = 0.0;
  for (const auto& d : days) {
    max_buy = std::max(max_buy, d.tariff.max_buy());
    span_h = std::max(span_h, d.tau_h * static_cast<double>(d.steps()));
  }
  if (max_buy <= 0.0) throw ConfigError("theta bounds need a positive buy price");
  return {max_buy, max_buy, max_buy * span_h, max_buy * span_h};
}

int thread_budget(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("GRIDLIFE_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1) throw ConfigError("GRIDLIFE_THREADS must be a positive integer");
    n = std::min<int>(n, static_cast<int>(cap));
  }
  return std::max(n, 1);
}

PsoResult pso_optimize(const Objective& objective, const PsoConfig& config, std::span<const Point> seeds) {
  config.validate();
  const int threads = thread_budget(config.threads);
  const std::size_t n = static_cast<std::size_t>(config.n_particles);
  Rng rng(config.seed);
  PsoResult result;
  std::map<Point, double> cache;

  auto clamp = [&](Point& x) {
    for (std::size_t d = 0; d < 4; ++d) x[d] = std::clamp(x[d], config.lower[d], config.upper[d]);
  };
  auto random_point = [&] {
    Point x;
    for (std::size_t d = 0; d < 4; ++d) x[d] = uniform(rng, config.lower[d], config.upper[d]);
    return x;
  };

  std::vector<Point> x(n), v(n), pbest(n);
  std::vector<double> cost(n), pbest_cost(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      x[i] = config.lower;
    } else if (i == 1) {
      for (std::size_t d = 0; d < 4; ++d) x[i][d] = 0.5 * (config.lower[d] + config.upper[d]);
    } else if (i - 2 < seeds.size()) {
      x[i] = seeds[i - 2];
      clamp(x[i]);
    } else {
      x[i] = random_point();
    }
    for (std::size_t d = 0; d < 4; ++d) {
      const double range = kInitialVelocityFraction * (config.upper[d] - config.lower[d]);
      v[i][d] = uniform(rng, -range, range);
    }
  }

  // Evaluates the listed particles, reusing cached points.
  auto evaluate = [&](const std::vector<std::size_t>& which) {
    std::vector<std::size_t> todo;
    for (std::size_t i : which) {
      if (auto it = cache.find(x[i]); it != cache.end()) {
        cost[i] = it->second;
        ++result.cache_hits;
      } else {
        todo.push_back(i);
      }
    }
    // Points repeated within the batch are computed once.
    std::vector<std::size_t> unique;
    std::map<Point, std::size_t> first;
    for (std::size_t i : todo) {
      if (first.emplace(x[i], i).second) unique.push_back(i);
    }
    std::vector<double> values(unique.size());
    parallel_for(unique.size(), threads, [&](std::size_t k) { values[k] = objective(x[unique[k]]); });
    result.evaluations += unique.size();
    for (std::size_t k = 0; k < unique.size(); ++k) cache.emplace(x[unique[k]], values[k]);
    for (std::size_t i : todo) cost[i] = cache.at(x[i]);
  };

  // Evaluates everyone; invalid particles are resampled within bounds.
  auto evaluate_all = [&]() {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    evaluate(all);
    int invalid = 0;
    for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
      std::vector<std::size_t> bad;
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(cost[i])) bad.push_back(i);
      }
      if (attempt == 0) invalid = static_cast<int>(bad.size());
      if (bad.empty()) break;
      for (std::size_t i : bad) {
        x[i] = random_point();
        v[i] = Point{};
      }
      evaluate(bad);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(cost[i])) cost[i] = std::numeric_limits<double>::infinity();
    }
    return invalid;
  };

  auto record = [&](int iteration, int invalid) {
    double sum = 0.0;
    int valid = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isfinite(cost[i]) && cost[i] < pbest_cost[i]) {
        pbest_cost[i] = cost[i];
        pbest[i] = x[i];
      }
      if (std::isfinite(cost[i])) {
        sum += cost[i];
        ++valid;
      }
      if (pbest_cost[i] < result.best_cost) {
        result.best_cost = pbest_cost[i];
        result.best = pbest[i];
      }
    }
    result.log.push_back({iteration, result.best_cost, result.best, valid ? sum / valid : 0.0, invalid});
    spdlog::debug("pso iteration {} best {:.6g} invalid {}", iteration, result.best_cost, invalid);
  };

  result.best_cost = std::numeric_limits<double>::infinity();
  result.best = config.lower;
  record(0, evaluate_all());

  for (int it = 1; it <= config.n_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < 4; ++d) {
        const double r1 = uniform01(rng);
        const double r2 = uniform01(rng);
        const Point& own = std::isfinite(pbest_cost[i]) ? pbest[i] : x[i];
        v[i][d] = config.inertia * v[i][d] + config.c1 * r1 * (own[d] - x[i][d]) +
                  config.c2 * r2 * (result.best[d] - x[i][d]);
        x[i][d] += v[i][d];
        if (x[i][d] < config.lower[d] || x[i][d] > config.upper[d]) {
          x[i][d] = std::clamp(x[i][d], config.lower[d], config.upper[d]);
          v[i][d] = 0.0;
        }
      }
    }
    record(it, evaluate_all());
  }
  if (!std::isfinite(result.best_cost)) throw std::runtime_error("every particle evaluation was non-finite");
  return result;
}

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kBenchmark: return "benchmark";
    case PolicyKind::kSp: return "sp";
    case PolicyKind::kRo: return "ro";
    case PolicyKind::kNoUsage: return "nousage";
  }
  return "unknown";
}

PolicyKind parse_policy(const std::string& text) {
  for (auto kind : {PolicyKind::kBenchmark, PolicyKind::kSp, PolicyKind::kRo, PolicyKind::kNoUsage}) {
    if (text == to_string(kind)) return kind;
  }
  throw ConfigError("unknown policy '" + text + "' (expected benchmark, sp, ro or nousage)");
}

double ro_objective(const dispatch::ThetaVector& theta, const lifecycle::Setup& setup, const lifecycle::Models& models,
                    std::uint64_t seed) {
  return lifecycle::simulate_lifecycle(lifecycle::Policy::mpc(theta), setup, models, setup.config.quantile, seed)
      .total_cost;
}

double sp_objective(const dispatch::ThetaVector& theta, const lifecycle::Setup& setup, const lifecycle::Models& models,
                    int paths, std::uint64_t seed) {
  if (paths < 1) throw ConfigError("SP needs at least one sampled path");
  double total = 0.0;
  for (int k = 0; k < paths; ++k) {
    total += lifecycle::simulate_sampled_path(lifecycle::Policy::mpc(theta), setup, models, seed,
                                              derive_seed(seed, static_cast<std::uint64_t>(k)))
                 .total_cost;
  }
  return total / paths;
}

namespace {

Objective make_objective(PolicyKind kind, const lifecycle::Setup& setup, const lifecycle::Models& models,
                         const EvaluationSettings& settings, std::atomic<std::size_t>* periods = nullptr) {
  if (kind != PolicyKind::kRo && kind != PolicyKind::kSp) {
    throw ConfigError("only the RO and SP policies are tuned");
  }
  return [kind, &setup, &models, settings, periods](const Point& p) {
    const auto theta = dispatch::ThetaVector::from_array(p);
    const auto policy = lifecycle::Policy::mpc(theta);
    if (kind == PolicyKind::kRo) {
      const auto trace = lifecycle::simulate_lifecycle(policy, setup, models, setup.config.quantile, settings.seed);
      if (periods) *periods += static_cast<std::size_t>(trace.life_periods);
      return trace.total_cost;
    }
    double total = 0.0;
    for (int k = 0; k < settings.sp_paths; ++k) {
      const auto trace = lifecycle::simulate_sampled_path(policy, setup, models, settings.seed,
                                                          derive_seed(settings.seed, static_cast<std::uint64_t>(k)));
      if (periods) *periods += static_cast<std::size_t>(trace.life_periods);
      total += trace.total_cost;
    }
    return total / settings.sp_paths;
  };
}

PsoConfig with_bounds(PsoConfig pso, const lifecycle::Setup& setup) {
  if (!pso.bounds_given) pso.upper = theta_upper_bounds(setup.seasons);
  return pso;
}

}  // namespace

PsoResult tune(PolicyKind kind, const lifecycle::Setup& setup, const lifecycle::Models& models, PsoConfig pso,
               const EvaluationSettings& settings, std::span<const Point> seeds) {
  if (kind == PolicyKind::kSp && settings.sp_paths < 1) throw ConfigError("SP needs at least one sampled path");
  return pso_optimize(make_objective(kind, setup, models, settings), with_bounds(pso, setup), seeds);
}

PolicyResult evaluate_policy(PolicyKind kind, std::optional<dispatch::ThetaVector> theta,
                             const lifecycle::Setup& setup, const lifecycle::Models& models, const PsoConfig& pso,
                             const EvaluationSettings& settings) {
  PolicyResult out;
  out.kind = kind;
  lifecycle::Policy policy;
  switch (kind) {
    case PolicyKind::kBenchmark:
      policy = lifecycle::Policy::mpc({});
      break;
    case PolicyKind::kNoUsage:
      policy = lifecycle::Policy::no_usage();
      break;
    case PolicyKind::kRo:
    case PolicyKind::kSp:
      if (!theta) {
        out.tuning = tune(kind, setup, models, pso, settings);
        theta = dispatch::ThetaVector::from_array(out.tuning->best);
      }
      policy = lifecycle::Policy::mpc(*theta);
      break;
  }
  out.theta = policy.theta;
  out.cost_q90 = lifecycle::simulate_lifecycle(policy, setup, models, 0.90, settings.seed).total_cost;
  out.cost_q95 = lifecycle::simulate_lifecycle(policy, setup, models, 0.95, settings.seed).total_cost;
  out.worst_case = lifecycle::simulate_lifecycle(policy, setup, models, setup.config.quantile, settings.seed,
                                                 {.log_periods = true});
  out.monte_carlo = lifecycle::monte_carlo_lifecycle(policy, setup, models, settings.mc_paths, settings.seed);
  out.mean_life_days = out.monte_carlo.mean_life_days;
  return out;
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kQuantile: return "quantile";
    case SweepAxis::kTemperature: return "temperature";
    case SweepAxis::kCapacity: return "capacity";
  }
  return "unknown";
}

SweepAxis parse_axis(const std::string& text) {
  for (auto axis : {SweepAxis::kQuantile, SweepAxis::kTemperature, SweepAxis::kCapacity}) {
    if (text == to_string(axis)) return axis;
  }
  throw ConfigError("unknown sweep axis '" + text + "' (expected quantile, temperature or capacity)");
}

lifecycle::Setup apply_axis(const lifecycle::Setup& base, SweepAxis axis, double value) {
  lifecycle::Setup s = base;
  switch (axis) {
    case SweepAxis::kQuantile:
      s.config.quantile = value;
      break;
    case SweepAxis::kTemperature:
      s.config.ambient_c_per_season.fill(value);
      break;
    case SweepAxis::kCapacity:
      s.config.c0_kwh = value;
      s.config.battery.c0_kwh = value;
      s.config.battery.c_now_kwh = value;
      break;
  }
  s.validate();
  return s;
}

std::vector<SweepRow> sensitivity_sweep(SweepAxis axis, std::span<const double> values, const lifecycle::Setup& setup,
                                        const lifecycle::Models& models, const PsoConfig& pso,
                                        const EvaluationSettings& settings) {
  std::vector<lifecycle::Setup> setups;
  std::vector<Point> candidates;
  for (double value : values) {
    setups.push_back(apply_axis(setup, axis, value));
    const auto tuned = tune(PolicyKind::kRo, setups.back(), models, pso, settings);
    candidates.push_back(tuned.best);
    spdlog::info("sweep {}={} tuned cost {:.2f}", to_string(axis), value, tuned.best_cost);
  }
  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < values.size(); ++k) {
    SweepRow row;
    row.value = values[k];
    row.objective = std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) {
      const auto theta = dispatch::ThetaVector::from_array(c);
      const double cost = ro_objective(theta, setups[k], models, settings.seed);
      if (cost < row.objective) {
        row.objective = cost;
        row.theta = theta;
      }
    }
    row.mean_life_days =
        lifecycle::monte_carlo_lifecycle(lifecycle::Policy::mpc(row.theta), setups[k], models, settings.mc_paths,
                                         settings.seed)
            .mean_life_days;
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json TimingReport::to_json() const {
  return {{"particles", particles},
          {"iterations", iterations},
          {"mean_life_periods", mean_life_periods},
          {"solves_per_period", solves_per_period},
          {"seconds_per_solve", seconds_per_solve},
          {"predicted_seconds", predicted_seconds},
          {"measured_seconds", measured_seconds}};
}

TimingReport time_tuning(PolicyKind kind, const lifecycle::Setup& setup, const lifecycle::Models& models,
                         const PsoConfig& pso, const EvaluationSettings& settings, PsoResult* result) {
  TimingReport report;
  report.particles = pso.n_particles;
  report.iterations = pso.n_iterations + 1;  // the initial swarm counts as one round

  // Time of one horizon solve, averaged over the season days.
  const auto battery = setup.battery_at(setup.config.c0_kwh);
  const auto start_lp = Clock::now();
  std::size_t solves = 0;
  for (const auto& day : setup.seasons) {
    dispatch::single_shot(day, {}, battery, setup.config.battery.grid_cap_kw);
    ++solves;
  }
  report.seconds_per_solve = seconds_since(start_lp) / static_cast<double>(solves);
  const double steps = static_cast<double>(setup.seasons.front().steps());
  const double solves_per_day = setup.config.forecast_sigma == 0.0 ? 1.0 : steps;
  report.solves_per_period = solves_per_day * (kind == PolicyKind::kSp ? settings.sp_paths : 1);

  std::atomic<std::size_t> periods{0};
  const auto start = Clock::now();
  auto tuned = pso_optimize(make_objective(kind, setup, models, settings, &periods), with_bounds(pso, setup));
  report.measured_seconds = seconds_since(start);
  const double paths = kind == PolicyKind::kSp ? settings.sp_paths : 1.0;
  report.mean_life_periods =
      tuned.evaluations ? static_cast<double>(periods.load()) / (static_cast<double>(tuned.evaluations) * paths) : 0.0;
  // Cached points cost nothing, so the prediction counts fresh evaluations.
  report.predicted_seconds = static_cast<double>(tuned.evaluations) * report.mean_life_periods *
                             report.solves_per_period * report.seconds_per_solve;
  spdlog::info("tuning {}: {} particles x {} rounds, mean life {:.2f} periods, {:.0f} solves/period at {:.4f} s: "
               "predicted {:.1f} s, measured {:.1f} s",
               to_string(kind), report.particles, report.iterations, report.mean_life_periods,
               report.solves_per_period, report.seconds_per_solve, report.predicted_seconds,
               report.measured_seconds);
  if (result) *result = std::move(tuned);
  return report;
}

}  // namespace gridlife::tuner
