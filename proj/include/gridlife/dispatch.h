#ifndef GRIDLIFE_DISPATCH_H
#define GRIDLIFE_DISPATCH_H

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridlife/quantile_gbt.h"
#include "gridlife/random.h"
#include "gridlife/simplex.h"

namespace gridlife::dispatch {

struct Tariff {
  std::vector<double> buy;   // $/kWh per step
  std::vector<double> sell;  // $/kWh per step

  /// Non-negative prices with sell <= buy at every step; ConfigError names the step.
  void validate() const;
  double max_buy() const;
};

struct ThetaVector {
  double efc = 0.0;  // $/kWh of throughput
  double dod = 0.0;  // $/kWh of energy band
  double c = 0.0;    // $/kW of peak charge power
  double d = 0.0;    // $/kW of peak discharge power

  std::array<double, 4> as_array() const { return {efc, dod, c, d}; }
  static ThetaVector from_array(std::span<const double> v);
  /// Parses "efc,dod,c,d".
  static ThetaVector parse(const std::string& text);
  void validate() const;
  bool is_zero() const { return efc == 0.0 && dod == 0.0 && c == 0.0 && d == 0.0; }
  bool operator==(const ThetaVector&) const = default;
};

// Battery limits as seen by one dispatch horizon. The usable energy window
// [e_lower, e_upper] is centred in the rated window and shrinks with fade.
struct BatteryState {
  double capacity_now = 0.0;    // kWh
  double rated_capacity = 0.0;  // kWh
  double e_lower = 0.0;         // kWh
  double e_upper = 0.0;         // kWh
  double p_chg_cap = 0.0;       // kW
  double p_dis_cap = 0.0;       // kW
  double eta_c = 1.0;
  double eta_d = 1.0;
  double e0 = 0.0;  // kWh, initial and terminal energy

  /// Window (C0 - C)/2 .. (C0 + C)/2; e0 defaults to the midpoint C0/2.
  static BatteryState from_capacity(double rated, double now, double p_chg_cap, double p_dis_cap, double eta_c,
                                    double eta_d, std::optional<double> e0 = std::nullopt);
  void validate() const;
};

// battery.json
struct BatteryConfig {
  double c0_kwh = 910.8;
  double c_now_kwh = 910.8;
  double p_chg_cap_kw = 500.0;
  double p_dis_cap_kw = 500.0;
  double eta_c = 0.95;
  double eta_d = 0.95;
  double grid_cap_kw = 1500.0;

  BatteryState state() const { return state_at(c_now_kwh); }
  BatteryState state_at(double capacity_kwh) const;
  static BatteryConfig from_json(const nlohmann::json& doc);
  static BatteryConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

// Band and peaks already realized earlier in the day; the horizon's band and
// peak variables must cover them.
struct History {
  double e_min = 0.0;
  double e_max = 0.0;
  double p_chg_peak = 0.0;
  double p_dis_peak = 0.0;
};

struct DispatchProblem {
  double tau_h = 1.0;
  std::vector<double> pv_kw;    // forecast, one per step
  std::vector<double> load_kw;  // forecast, one per step
  Tariff tariff;
  ThetaVector theta;
  BatteryState battery;
  double grid_cap_kw = 0.0;
  std::optional<double> e_initial;   // defaults to battery.e0
  std::optional<double> e_terminal;  // defaults to battery.e0
  std::optional<History> history;
  // Adds a 1e-7 cost on a peak or band variable whose theta component is zero.
  bool tie_break = true;

  std::size_t horizon() const { return pv_kw.size(); }
  double initial_energy() const { return e_initial.value_or(battery.e0); }
  double terminal_energy() const { return e_terminal.value_or(battery.e0); }
  void validate() const;
};

inline constexpr double kTieBreakCost = 1e-7;

// Column layout of the dispatch LP: five columns per step followed by the
// band and peak variables.
struct LpLayout {
  std::size_t steps = 0;
  std::size_t buy(std::size_t t) const { return 5 * t; }
  std::size_t sell(std::size_t t) const { return 5 * t + 1; }
  std::size_t charge(std::size_t t) const { return 5 * t + 2; }
  std::size_t discharge(std::size_t t) const { return 5 * t + 3; }
  std::size_t energy(std::size_t t) const { return 5 * t + 4; }
  std::size_t band_low() const { return 5 * steps; }
  std::size_t band_high() const { return 5 * steps + 1; }
  std::size_t peak_charge() const { return 5 * steps + 2; }
  std::size_t peak_discharge() const { return 5 * steps + 3; }
  std::size_t num_columns() const { return 5 * steps + 4; }
};

/// Builds the dispatch LP. Throws ConfigError when the energy window is empty.
lp::LinearProgram build_lp(const DispatchProblem& problem);

struct DispatchSolution {
  std::vector<double> p_buy, p_sell, p_charge, p_discharge, energy;
  double band_low = 0.0, band_high = 0.0;
  double peak_charge = 0.0, peak_discharge = 0.0;
  double operational_cost = 0.0;  // grid purchases minus sales
  double penalty_cost = 0.0;      // theta-weighted degradation terms
  double tie_break_cost = 0.0;
  double objective = 0.0;  // sum of the three parts above
  std::size_t iterations = 0;
};

/// Solves one horizon. Throws InfeasibleError when no dispatch exists.
DispatchSolution solve(const DispatchProblem& problem, const lp::SimplexOptions& options = {});

/// Largest violation of any dispatch constraint, re-evaluated directly from
/// the solution vectors.
double max_constraint_violation(const DispatchProblem& problem, const DispatchSolution& solution);

// ---------------------------------------------------------------------------
// Rolling horizon

struct DayScenario {
  double tau_h = 1.0;
  std::vector<double> pv_kw;
  std::vector<double> load_kw;
  Tariff tariff;

  std::size_t steps() const { return pv_kw.size(); }
  void validate() const;
  static DayScenario load_csv(const std::filesystem::path& path, double tau_h);
  void write_csv(const std::filesystem::path& path) const;
};

// Source of PV/load forecasts and of the values that actually occur.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  /// Forecast issued at `step` for steps step..T-1.
  virtual void forecast(std::size_t step, std::vector<double>& pv, std::vector<double>& load) const = 0;
  virtual double realized_pv(std::size_t step) const = 0;
  virtual double realized_load(std::size_t step) const = 0;
};

class PerfectForecaster final : public Forecaster {
 public:
  explicit PerfectForecaster(const DayScenario& scenario) : scenario_(scenario) {}
  void forecast(std::size_t step, std::vector<double>& pv, std::vector<double>& load) const override;
  double realized_pv(std::size_t step) const override { return scenario_.pv_kw[step]; }
  double realized_load(std::size_t step) const override { return scenario_.load_kw[step]; }

 private:
  const DayScenario& scenario_;
};

// The scenario profile is the day-ahead forecast; realized values are
// forecast * (1 + eps) with eps ~ N(0, sigma^2) truncated at +-3 sigma. At
// each step the current step's value is observed before dispatching, later
// steps keep the day-ahead profile.
class NoisyForecaster final : public Forecaster {
 public:
  NoisyForecaster(const DayScenario& scenario, double sigma, std::uint64_t seed);
  void forecast(std::size_t step, std::vector<double>& pv, std::vector<double>& load) const override;
  double realized_pv(std::size_t step) const override { return pv_[step]; }
  double realized_load(std::size_t step) const override { return load_[step]; }
  /// Scenario carrying the realized series.
  DayScenario realized() const;

 private:
  const DayScenario& scenario_;
  std::vector<double> pv_, load_;
};

struct DayAggregates {
  double throughput_kwh = 0.0;  // sum (p_c + p_d) tau
  double e_min = 0.0;
  double e_max = 0.0;
  double p_chg_peak = 0.0;
  double p_dis_peak = 0.0;
  double operational_cost = 0.0;

  double band() const { return e_max - e_min; }
};

struct DayResult {
  std::vector<double> p_buy, p_sell, p_charge, p_discharge;
  std::vector<double> energy;  // after each step
  DayAggregates aggregates;
  double penalty_cost = 0.0;
  std::size_t lp_iterations = 0;

  double objective() const { return aggregates.operational_cost + penalty_cost; }
};

/// Theta-weighted degradation terms evaluated on realized aggregates.
double penalty_of(const ThetaVector& theta, const DayAggregates& aggregates);

/// Shrinking-horizon MPC over one day: re-solve on the remaining steps with
/// the latest forecast, commit the first step, settle the grid exchange on
/// realized PV/load. Throws InfeasibleError naming the failing step.
DayResult rolling_mpc(const DayScenario& scenario, const ThetaVector& theta, const BatteryState& battery,
                      double grid_cap_kw, const Forecaster& forecaster, bool tie_break = true);

/// One solve over the whole day with the scenario values taken as exact.
DayResult single_shot(const DayScenario& scenario, const ThetaVector& theta, const BatteryState& battery,
                      double grid_cap_kw, bool tie_break = true);

/// The battery is never used; the grid covers the net load.
DayResult idle_day(const DayScenario& scenario, const BatteryState& battery);

/// Cyclic-model features of a dispatched day: (C, T, DOD, p_chg peak,
/// p_dis peak), DOD = band / C0, clamped into the model's training range.
std::vector<double> aggregates_to_features(const DayAggregates& aggregates, const BatteryState& battery,
                                           double ambient_c, const gbt::RateModel* model = nullptr);

nlohmann::json to_json(const DispatchSolution& solution);

}  // namespace gridlife::dispatch

#endif  // GRIDLIFE_DISPATCH_H
