#ifndef GRIDLIFE_TUNER_H
#define GRIDLIFE_TUNER_H

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridlife/dispatch.h"
#include "gridlife/lifecycle.h"

namespace gridlife::tuner {

using Point = std::array<double, 4>;

// pso.json
struct PsoConfig {
  int n_particles = 20;
  int n_iterations = 40;
  double inertia = 0.7;
  double c1 = 1.5;
  double c2 = 1.5;
  Point lower{0.0, 0.0, 0.0, 0.0};
  Point upper{1.0, 1.0, 1.0, 1.0};
  bool bounds_given = false;  // otherwise tune() derives them from the tariff
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency; always capped by GRIDLIFE_THREADS

  void validate() const;
  static PsoConfig from_json(const nlohmann::json& doc);
  static PsoConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// Box that contains every useful theta: efc and dod weights up to the
/// highest buy price, peak weights up to that price times tau * T.
Point theta_upper_bounds(std::span<const dispatch::DayScenario> days);

/// Worker count: `requested` (0 means hardware concurrency) capped by
/// GRIDLIFE_THREADS, at least 1.
int thread_budget(int requested);

struct PsoIteration {
  int iteration = 0;
  double best_cost = 0.0;
  Point best{};
  double mean_cost = 0.0;  // over valid particles this iteration
  int invalid = 0;
};

struct PsoResult {
  Point best{};
  double best_cost = 0.0;
  std::vector<PsoIteration> log;  // entry 0 is the initial swarm
  std::size_t evaluations = 0;
  std::size_t cache_hits = 0;
};

using Objective = std::function<double(const Point&)>;

/// Particle swarm minimization. Particle 0 starts at `lower`, particle 1 at
/// the box centre, then any `seeds` in order, the rest uniformly. A
/// non-finite objective marks the particle invalid and resamples it.
/// The objective must be a pure function; it may run on several threads.
PsoResult pso_optimize(const Objective& objective, const PsoConfig& config, std::span<const Point> seeds = {});

enum class PolicyKind { kBenchmark, kSp, kRo, kNoUsage };
std::string to_string(PolicyKind kind);
PolicyKind parse_policy(const std::string& text);

struct EvaluationSettings {
  int sp_paths = 5;     // sampled paths per SP objective evaluation
  int mc_paths = 100;   // paths behind mean life
  std::uint64_t seed = 1;
};

/// Worst-case total cost at the setup's quantile.
double ro_objective(const dispatch::ThetaVector& theta, const lifecycle::Setup& setup, const lifecycle::Models& models,
                    std::uint64_t seed);

/// Mean total cost over `paths` sampled paths with common random numbers.
double sp_objective(const dispatch::ThetaVector& theta, const lifecycle::Setup& setup, const lifecycle::Models& models,
                    int paths, std::uint64_t seed);

PsoResult tune(PolicyKind kind, const lifecycle::Setup& setup, const lifecycle::Models& models, PsoConfig pso,
               const EvaluationSettings& settings, std::span<const Point> seeds = {});

struct PolicyResult {
  PolicyKind kind = PolicyKind::kBenchmark;
  dispatch::ThetaVector theta;
  double cost_q90 = 0.0;  // worst-case total cost at q = 0.90
  double cost_q95 = 0.0;  // worst-case total cost at q = 0.95
  double mean_life_days = 0.0;
  lifecycle::LifecycleTrace worst_case;  // at the setup's quantile
  lifecycle::MonteCarloSummary monte_carlo;
  std::optional<PsoResult> tuning;
};

/// Benchmark uses theta = 0, NoUsage never dispatches the battery, RO and SP
/// use `theta` when given and tune it otherwise.
PolicyResult evaluate_policy(PolicyKind kind, std::optional<dispatch::ThetaVector> theta,
                             const lifecycle::Setup& setup, const lifecycle::Models& models, const PsoConfig& pso,
                             const EvaluationSettings& settings);

enum class SweepAxis { kQuantile, kTemperature, kCapacity };
std::string to_string(SweepAxis axis);
SweepAxis parse_axis(const std::string& text);

struct SweepRow {
  double value = 0.0;
  dispatch::ThetaVector theta;
  double objective = 0.0;  // RO worst-case total cost
  double mean_life_days = 0.0;
};

/// Setup with one axis value applied: the quantile, a constant ambient
/// temperature, or the installed capacity (power limits and I0 fixed).
lifecycle::Setup apply_axis(const lifecycle::Setup& base, SweepAxis axis, double value);

/// Re-tunes RO theta per value. Every tuned theta is then scored at every
/// value and each row keeps its cheapest candidate.
std::vector<SweepRow> sensitivity_sweep(SweepAxis axis, std::span<const double> values, const lifecycle::Setup& setup,
                                        const lifecycle::Models& models, const PsoConfig& pso,
                                        const EvaluationSettings& settings);

// Runtime accounting: particles x iterations x mean life x dispatches per
// period x time per dispatch, against the measured total.
struct TimingReport {
  int particles = 0;
  int iterations = 0;
  double mean_life_periods = 0.0;   // per objective evaluation
  double solves_per_period = 1.0;   // LP solves per simulated period (all paths)
  double seconds_per_solve = 0.0;
  double predicted_seconds = 0.0;
  double measured_seconds = 0.0;

  nlohmann::json to_json() const;
};

TimingReport time_tuning(PolicyKind kind, const lifecycle::Setup& setup, const lifecycle::Models& models,
                         const PsoConfig& pso, const EvaluationSettings& settings, PsoResult* result = nullptr);

}  // namespace gridlife::tuner

#endif  // GRIDLIFE_TUNER_H
