#ifndef GRIDLIFE_LIFECYCLE_H
#define GRIDLIFE_LIFECYCLE_H

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridlife/dispatch.h"
#include "gridlife/quantile_gbt.h"

namespace gridlife::lifecycle {

/// Per-season interest from an annual rate: (1 + annual)^(1/4) - 1.
double seasonal_interest(double annual_rate);

// lifecycle.json
struct LifecycleConfig {
  double c0_kwh = 910.8;
  double c_min_frac = 0.40;
  int n0_periods = 40;
  double interest_per_period = seasonal_interest(0.032);
  double invest_usd = 2e5;
  double gamma_days = 91.0;
  double day_scale = 91.0;  // dispatched days represented by one typical day
  double quantile = 0.9;
  std::array<double, 4> ambient_c_per_season{8.0, 20.0, 32.0, 20.0};
  double forecast_sigma = 0.0;
  double tau_h = 1.0;
  dispatch::BatteryConfig battery;
  std::vector<std::string> scenario_files;  // one day.csv per season, relative to the config file

  double c_min() const { return c_min_frac * c0_kwh; }
  /// Throws ConfigError listing every violated field.
  void validate() const;
  static LifecycleConfig from_json(const nlohmann::json& doc);
  static LifecycleConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// Four typical days (winter, spring, summer, autumn) with a time-of-use
/// tariff, a PV bell curve and an evening load peak.
std::vector<dispatch::DayScenario> synthetic_seasons(double tau_h = 1.0, std::size_t steps = 24);

// Everything one lifecycle run needs besides the models.
struct Setup {
  LifecycleConfig config;
  std::vector<dispatch::DayScenario> seasons;

  /// Loads the season scenarios named in the config, or the synthetic ones.
  static Setup from_config(const LifecycleConfig& config, const std::filesystem::path& base_dir = {});
  const dispatch::DayScenario& season(int period) const;
  double ambient(int period) const;
  dispatch::BatteryState battery_at(double capacity_kwh) const;
  void validate() const;
};

struct Models {
  const gbt::RateModel* cyclic = nullptr;
  const gbt::RateModel* calendar = nullptr;
};

// Returns the same rate for every quantile (or one rate per quantile).
class ConstantRateModel final : public gbt::RateModel {
 public:
  ConstantRateModel(std::vector<double> quantiles, std::vector<double> rates);
  ConstantRateModel(std::vector<double> quantiles, double rate);
  const std::vector<double>& quantiles() const override { return quantiles_; }
  std::vector<double> predict_quantiles(std::span<const double> x) const override;

 private:
  std::vector<double> quantiles_;
  std::vector<double> rates_;
};

/// Throughput * day_scale / (2 C0).
double period_efc(const dispatch::DayAggregates& aggregates, double c0_kwh, double day_scale);

struct PeriodRates {
  double cyclic = 0.0;    // kWh/EFC
  double calendar = 0.0;  // kWh/day
};

/// Rates at quantile q. Negative predictions clamp to 0 with a warning.
PeriodRates rates_at_quantile(const Models& models, std::span<const double> cyclic_features,
                              std::span<const double> calendar_features, double q);

/// Rates drawn through the inverse CDF with one uniform shared by both aging modes.
PeriodRates sampled_rates(const Models& models, std::span<const double> cyclic_features,
                          std::span<const double> calendar_features, double u);

/// C - r_cyc * EFC - r_cal * gamma.
double capacity_transition(double capacity, double efc, const PeriodRates& rates, double gamma_days);

/// Worst-case next capacity of a dispatched period at quantile q.
double worst_case_capacity(const dispatch::DayAggregates& aggregates, double capacity, double ambient_c,
                           const Setup& setup, const Models& models, double q);

/// Investment plus discounted costs, normalized to the project horizon:
/// (1 - (1+i)^-N0) / (1 - (1+i)^-N) * (I0 + sum_n g_n / (1+i)^n).
double replacement_chain_cost(std::span<const double> period_costs, int n_life, int n0, double interest,
                              double invest);
double chain_coefficient(int n_life, int n0, double interest);

struct Policy {
  dispatch::ThetaVector theta;
  bool idle = false;  // no battery use at all

  static Policy mpc(const dispatch::ThetaVector& theta) { return {theta, false}; }
  static Policy no_usage() { return {{}, true}; }
};

enum class Termination { kEndOfLife, kProjectHorizon };
std::string to_string(Termination t);
Termination parse_termination(const std::string& text);

struct PeriodRecord {
  int period = 0;
  int season = 0;
  double capacity_in = 0.0;
  dispatch::DayAggregates aggregates;
  double efc = 0.0;
  double dod = 0.0;
  PeriodRates rates;
  double capacity_out = 0.0;
  double capacity_worst = 0.0;  // worst case from capacity_in at the configured quantile
  double op_cost = 0.0;         // day cost * day_scale
  double discounted_cost = 0.0;
};

struct LifecycleTrace {
  std::vector<PeriodRecord> records;
  int life_periods = 0;
  double total_cost = 0.0;
  Termination termination = Termination::kProjectHorizon;

  double life_days(double gamma_days) const { return life_periods * gamma_days; }
  nlohmann::json to_json() const;
  static LifecycleTrace from_json(const nlohmann::json& doc);
};

struct SimulationOptions {
  bool log_periods = false;  // one info line per period
};

/// Lifecycle run with worst-case transitions at quantile q.
LifecycleTrace simulate_lifecycle(const Policy& policy, const Setup& setup, const Models& models, double q,
                                  std::uint64_t seed, const SimulationOptions& options = {});

/// One path whose transitions use sampled rates drawn from `path_seed`.
LifecycleTrace simulate_sampled_path(const Policy& policy, const Setup& setup, const Models& models,
                                     std::uint64_t seed, std::uint64_t path_seed,
                                     const SimulationOptions& options = {});

struct MonteCarloSummary {
  std::vector<LifecycleTrace> paths;
  double mean_life_days = 0.0;
  double mean_cost = 0.0;
  double cost_q90 = 0.0;  // 90% empirical quantile of path costs
  double cost_q95 = 0.0;
  std::size_t transitions = 0;
  std::size_t dominated = 0;  // transitions with sampled capacity >= worst case

  double dominance_rate() const { return transitions ? static_cast<double>(dominated) / transitions : 1.0; }
};

/// Path k uses rate seed derive_seed(seed, k); scenario noise uses `seed` so
/// all paths and policies see the same days.
MonteCarloSummary monte_carlo_lifecycle(const Policy& policy, const Setup& setup, const Models& models,
                                        int n_paths, std::uint64_t seed);

}  // namespace gridlife::lifecycle

#endif  // GRIDLIFE_LIFECYCLE_H
