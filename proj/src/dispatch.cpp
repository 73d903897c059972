#include "gridlife/dispatch.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gridlife/csv.h"
#include "gridlife/error.h"

namespace gridlife::dispatch {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

double number_or(const nlohmann::json& doc, const char* key, double fallback) {
  return doc.contains(key) ? doc.at(key).get<double>() : fallback;
}

}  // namespace

void Tariff::validate() const {
  require(buy.size() == sell.size(), "tariff buy and sell series differ in length");
  for (std::size_t t = 0; t < buy.size(); ++t) {
    require(buy[t] >= 0.0 && sell[t] >= 0.0, "tariff step " + std::to_string(t) + ": prices must be non-negative");
    require(sell[t] <= buy[t], "tariff step " + std::to_string(t) + ": sell price " + csv::format_number(sell[t]) +
                                   " exceeds buy price " + csv::format_number(buy[t]));
  }
}

double Tariff::max_buy() const { return buy.empty() ? 0.0 : *std::max_element(buy.begin(), buy.end()); }

ThetaVector ThetaVector::from_array(std::span<const double> v) {
  if (v.size() != 4) throw ConfigError("theta needs exactly four components");
  return {v[0], v[1], v[2], v[3]};
}

ThetaVector ThetaVector::parse(const std::string& text) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("theta component '" + item + "' is not a number");
    }
  }
  auto theta = from_array(values);
  theta.validate();
  return theta;
}

void ThetaVector::validate() const {
  for (double v : as_array()) {
    require(std::isfinite(v) && v >= 0.0, "theta components must be finite and non-negative");
  }
}

BatteryState BatteryState::from_capacity(double rated, double now, double p_chg_cap, double p_dis_cap, double eta_c,
                                         double eta_d, std::optional<double> e0) {
  BatteryState b;
  b.rated_capacity = rated;
  b.capacity_now = now;
  b.e_lower = (rated - now) / 2.0;
  b.e_upper = (rated + now) / 2.0;
  b.p_chg_cap = p_chg_cap;
  b.p_dis_cap = p_dis_cap;
  b.eta_c = eta_c;
  b.eta_d = eta_d;
  b.e0 = e0.value_or(rated / 2.0);
  return b;
}

void BatteryState::validate() const {
  require(rated_capacity > 0.0, "rated capacity must be positive");
  require(e_lower <= e_upper, "battery energy window is empty (lower bound above upper bound)");
  require(e_lower - 1e-9 <= e0 && e0 <= e_upper + 1e-9, "initial energy lies outside the battery window");
  require(p_chg_cap >= 0.0 && p_dis_cap >= 0.0, "power limits must be non-negative");
  require(eta_c > 0.0 && eta_c <= 1.0 && eta_d > 0.0 && eta_d <= 1.0, "efficiencies must lie in (0,1]");
}

BatteryState BatteryConfig::state_at(double capacity_kwh) const {
  return BatteryState::from_capacity(c0_kwh, capacity_kwh, p_chg_cap_kw, p_dis_cap_kw, eta_c, eta_d);
}

BatteryConfig BatteryConfig::from_json(const nlohmann::json& doc) {
  BatteryConfig b;
  try {
    b.c0_kwh = number_or(doc, "c0_kwh", b.c0_kwh);
    b.c_now_kwh = number_or(doc, "c_now_kwh", b.c0_kwh);
    b.p_chg_cap_kw = number_or(doc, "p_chg_cap_kw", b.p_chg_cap_kw);
    b.p_dis_cap_kw = number_or(doc, "p_dis_cap_kw", b.p_dis_cap_kw);
    b.eta_c = number_or(doc, "eta_c", b.eta_c);
    b.eta_d = number_or(doc, "eta_d", b.eta_d);
    b.grid_cap_kw = number_or(doc, "grid_cap_kw", b.grid_cap_kw);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("battery: ") + e.what());
  }
  require(b.c0_kwh > 0.0, "battery: c0_kwh must be positive");
  require(b.c_now_kwh > 0.0 && b.c_now_kwh <= b.c0_kwh, "battery: c_now_kwh must lie in (0, c0_kwh]");
  require(b.grid_cap_kw >= 0.0, "battery: grid_cap_kw must be non-negative");
  b.state().validate();
  return b;
}

BatteryConfig BatteryConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

nlohmann::json BatteryConfig::to_json() const {
  return {{"c0_kwh", c0_kwh},     {"c_now_kwh", c_now_kwh}, {"p_chg_cap_kw", p_chg_cap_kw},
          {"p_dis_cap_kw", p_dis_cap_kw}, {"eta_c", eta_c},         {"eta_d", eta_d},
          {"grid_cap_kw", grid_cap_kw}};
}

void DispatchProblem::validate() const {
  const std::size_t T = horizon();
  require(T >= 1, "dispatch horizon must have at least one step");
  require(tau_h > 0.0, "step length must be positive");
  require(load_kw.size() == T && tariff.buy.size() == T, "forecast and tariff lengths must match the horizon");
  for (std::size_t t = 0; t < T; ++t) {
    require(pv_kw[t] >= 0.0 && load_kw[t] >= 0.0, "forecasts must be non-negative");
  }
  tariff.validate();
  theta.validate();
  battery.validate();
}

lp::LinearProgram build_lp(const DispatchProblem& p) {
  p.validate();
  const std::size_t T = p.horizon();
  const LpLayout at{T};
  const auto& b = p.battery;
  const double tau = p.tau_h;
  const auto& th = p.theta;

  double band_low_max = b.e_upper, band_high_min = b.e_lower;
  double peak_c_min = 0.0, peak_d_min = 0.0;
  if (p.history) {
    // Settled energy may sit a rounding error outside the window.
    constexpr double kDrift = 1e-7;
    if (p.history->e_min < b.e_lower - kDrift || p.history->e_max > b.e_upper + kDrift) {
      throw ConfigError("realized energy left the battery window");
    }
    band_low_max = std::clamp(p.history->e_min, b.e_lower, b.e_upper);
    band_high_min = std::clamp(p.history->e_max, b.e_lower, b.e_upper);
    peak_c_min = p.history->p_chg_peak;
    peak_d_min = p.history->p_dis_peak;
  }
  if (peak_c_min > b.p_chg_cap + 1e-9 || peak_d_min > b.p_dis_cap + 1e-9) {
    throw ConfigError("realized peak power exceeds the battery limits");
  }

  auto tie = [&](double weight) { return (p.tie_break && weight == 0.0) ? kTieBreakCost : 0.0; };

  lp::LinearProgram lp;
  for (std::size_t t = 0; t < T; ++t) {
    lp.add_column(p.tariff.buy[t] * tau, 0.0, p.grid_cap_kw, "p_buy[" + std::to_string(t) + "]");
    lp.add_column(-p.tariff.sell[t] * tau, 0.0, p.grid_cap_kw, "p_sell[" + std::to_string(t) + "]");
    lp.add_column(th.efc * tau, 0.0, lp::kInf, "p_charge[" + std::to_string(t) + "]");
    lp.add_column(th.efc * tau, 0.0, lp::kInf, "p_discharge[" + std::to_string(t) + "]");
    lp.add_column(0.0, -lp::kInf, lp::kInf, "e[" + std::to_string(t) + "]");
  }
  lp.add_column(-(th.dod + tie(th.dod)), b.e_lower, band_low_max, "e_band_low");
  lp.add_column(th.dod + tie(th.dod), band_high_min, b.e_upper, "e_band_high");
  lp.add_column(th.c + tie(th.c), std::min(peak_c_min, b.p_chg_cap), b.p_chg_cap, "p_charge_peak");
  lp.add_column(th.d + tie(th.d), std::min(peak_d_min, b.p_dis_cap), b.p_dis_cap, "p_discharge_peak");

  if (band_low_max < b.e_lower - 1e-9 || band_high_min > b.e_upper + 1e-9) {
    throw ConfigError("realized energy band lies outside the battery window");
  }

  lp.basis_hint.clear();
  for (std::size_t t = 0; t < T; ++t) {
    const double net = p.load_kw[t] - p.pv_kw[t];
    lp.add_row(net, net, {{at.buy(t), 1.0}, {at.discharge(t), 1.0}, {at.sell(t), -1.0}, {at.charge(t), -1.0}},
               "balance[" + std::to_string(t) + "]");
    lp.basis_hint.push_back(static_cast<long>(net >= 0.0 ? at.buy(t) : at.sell(t)));
  }
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<std::pair<std::size_t, double>> row{
        {at.energy(t), 1.0}, {at.charge(t), -tau * b.eta_c}, {at.discharge(t), tau / b.eta_d}};
    double rhs = 0.0;
    if (t == 0) {
      rhs = p.initial_energy();
    } else {
      row.push_back({at.energy(t - 1), -1.0});
    }
    lp.add_row(rhs, rhs, row, "dynamics[" + std::to_string(t) + "]");
    lp.basis_hint.push_back(static_cast<long>(at.energy(t)));
  }
  for (std::size_t t = 0; t < T; ++t) {
    lp.add_row(-lp::kInf, 0.0, {{at.energy(t), 1.0}, {at.band_high(), -1.0}}, "band_high[" + std::to_string(t) + "]");
    lp.add_row(0.0, lp::kInf, {{at.energy(t), 1.0}, {at.band_low(), -1.0}}, "band_low[" + std::to_string(t) + "]");
    lp.basis_hint.push_back(-1);
    lp.basis_hint.push_back(-1);
  }
  const double terminal = p.terminal_energy();
  lp.add_row(terminal, terminal, {{at.energy(T - 1), 1.0}}, "terminal");
  lp.add_row(0.0, lp::kInf, {{at.band_high(), 1.0}, {at.band_low(), -1.0}}, "band_order");
  lp.basis_hint.push_back(-1);
  lp.basis_hint.push_back(-1);
  for (std::size_t t = 0; t < T; ++t) {
    lp.add_row(-lp::kInf, 0.0, {{at.charge(t), 1.0}, {at.peak_charge(), -1.0}}, "peak_charge[" + std::to_string(t) + "]");
    lp.add_row(-lp::kInf, 0.0, {{at.discharge(t), 1.0}, {at.peak_discharge(), -1.0}},
               "peak_discharge[" + std::to_string(t) + "]");
    lp.basis_hint.push_back(-1);
    lp.basis_hint.push_back(-1);
  }
  lp.start_at_upper.assign(lp.num_cols(), false);
  lp.start_at_upper[at.band_high()] = true;
  return lp;
}

DispatchSolution solve(const DispatchProblem& problem, const lp::SimplexOptions& options) {
  const auto lp = build_lp(problem);
  const auto result = lp::solve(lp, options);
  if (result.status == lp::Status::kInfeasible) throw InfeasibleError("dispatch problem is infeasible");
  if (result.status != lp::Status::kOptimal) {
    throw std::runtime_error("dispatch LP ended with status " + lp::to_string(result.status));
  }

  const std::size_t T = problem.horizon();
  const LpLayout at{T};
  const auto& x = result.x;
  DispatchSolution s;
  s.iterations = result.iterations;
  for (std::size_t t = 0; t < T; ++t) {
    s.p_buy.push_back(x[at.buy(t)]);
    s.p_sell.push_back(x[at.sell(t)]);
    s.p_charge.push_back(x[at.charge(t)]);
    s.p_discharge.push_back(x[at.discharge(t)]);
    s.energy.push_back(x[at.energy(t)]);
  }
  s.band_low = x[at.band_low()];
  s.band_high = x[at.band_high()];
  s.peak_charge = x[at.peak_charge()];
  s.peak_discharge = x[at.peak_discharge()];

  const auto& th = problem.theta;
  double throughput = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    s.operational_cost += (problem.tariff.buy[t] * s.p_buy[t] - problem.tariff.sell[t] * s.p_sell[t]) * problem.tau_h;
    throughput += (s.p_charge[t] + s.p_discharge[t]) * problem.tau_h;
  }
  s.penalty_cost = th.efc * throughput + th.dod * (s.band_high - s.band_low) + th.c * s.peak_charge + th.d * s.peak_discharge;
  if (problem.tie_break) {
    auto tie = [](double weight) { return weight == 0.0 ? kTieBreakCost : 0.0; };
    s.tie_break_cost = tie(th.dod) * (s.band_high - s.band_low) + tie(th.c) * s.peak_charge + tie(th.d) * s.peak_discharge;
  }
  s.objective = s.operational_cost + s.penalty_cost + s.tie_break_cost;
  return s;
}

double max_constraint_violation(const DispatchProblem& p, const DispatchSolution& s) {
  const std::size_t T = p.horizon();
  const auto& b = p.battery;
  double worst = 0.0;
  auto at_least = [&worst](double value, double bound) { worst = std::max(worst, bound - value); };
  auto equal = [&worst](double a, double c) { worst = std::max(worst, std::abs(a - c)); };

  double prev = p.initial_energy();
  for (std::size_t t = 0; t < T; ++t) {
    at_least(s.p_buy[t], 0.0);
    at_least(s.p_sell[t], 0.0);
    at_least(s.p_charge[t], 0.0);
    at_least(s.p_discharge[t], 0.0);
    equal(s.p_buy[t] + s.p_discharge[t] + p.pv_kw[t], s.p_sell[t] + s.p_charge[t] + p.load_kw[t]);
    equal(s.energy[t], prev + s.p_charge[t] * p.tau_h * b.eta_c - s.p_discharge[t] * p.tau_h / b.eta_d);
    prev = s.energy[t];
    at_least(s.energy[t], s.band_low);
    at_least(s.band_high, s.energy[t]);
    at_least(s.peak_charge, s.p_charge[t]);
    at_least(s.peak_discharge, s.p_discharge[t]);
    at_least(p.grid_cap_kw, s.p_buy[t]);
    at_least(p.grid_cap_kw, s.p_sell[t]);
  }
  equal(s.energy[T - 1], p.terminal_energy());
  at_least(s.band_low, b.e_lower);
  at_least(s.band_high, s.band_low);
  at_least(b.e_upper, s.band_high);
  at_least(b.p_chg_cap, s.peak_charge);
  at_least(b.p_dis_cap, s.peak_discharge);
  return worst;
}

// ---------------------------------------------------------------------------
// Rolling horizon

void DayScenario::validate() const {
  require(tau_h > 0.0, "scenario step length must be positive");
  require(!pv_kw.empty(), "scenario has no steps");
  require(load_kw.size() == pv_kw.size() && tariff.buy.size() == pv_kw.size(), "scenario columns differ in length");
  for (std::size_t t = 0; t < pv_kw.size(); ++t) {
    require(pv_kw[t] >= 0.0 && load_kw[t] >= 0.0, "scenario step " + std::to_string(t) + ": PV and load must be non-negative");
  }
  tariff.validate();
}

DayScenario DayScenario::load_csv(const std::filesystem::path& path, double tau_h) {
  const auto table = csv::read(path);
  csv::require_header(table, {"t", "pv_kw", "load_kw", "buy_price", "sell_price"});
  DayScenario s;
  s.tau_h = tau_h;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (static_cast<std::size_t>(table.number(r, 0)) != r) {
      throw DataError(path.string() + ":" + std::to_string(r + 2) + ": t must count 0,1,2,...");
    }
    s.pv_kw.push_back(table.number(r, 1));
    s.load_kw.push_back(table.number(r, 2));
    s.tariff.buy.push_back(table.number(r, 3));
    s.tariff.sell.push_back(table.number(r, 4));
  }
  s.validate();
  return s;
}

void DayScenario::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  csv::Writer w(out);
  w.row(std::vector<std::string>{"t", "pv_kw", "load_kw", "buy_price", "sell_price"});
  for (std::size_t t = 0; t < steps(); ++t) {
    w.row(std::vector<double>{static_cast<double>(t), pv_kw[t], load_kw[t], tariff.buy[t], tariff.sell[t]});
  }
}

void PerfectForecaster::forecast(std::size_t step, std::vector<double>& pv, std::vector<double>& load) const {
  pv.assign(scenario_.pv_kw.begin() + static_cast<std::ptrdiff_t>(step), scenario_.pv_kw.end());
  load.assign(scenario_.load_kw.begin() + static_cast<std::ptrdiff_t>(step), scenario_.load_kw.end());
}

NoisyForecaster::NoisyForecaster(const DayScenario& scenario, double sigma, std::uint64_t seed) : scenario_(scenario) {
  if (sigma < 0.0) throw ConfigError("forecast noise must be non-negative");
  Rng rng(seed);
  auto draw = [&] {
    const double z = std::clamp(standard_normal(rng), -3.0, 3.0);
    return 1.0 + sigma * z;
  };
  for (std::size_t t = 0; t < scenario.steps(); ++t) {
    pv_.push_back(std::max(0.0, scenario.pv_kw[t] * draw()));
    load_.push_back(std::max(0.0, scenario.load_kw[t] * draw()));
  }
}

void NoisyForecaster::forecast(std::size_t step, std::vector<double>& pv, std::vector<double>& load) const {
  pv.assign(scenario_.pv_kw.begin() + static_cast<std::ptrdiff_t>(step), scenario_.pv_kw.end());
  load.assign(scenario_.load_kw.begin() + static_cast<std::ptrdiff_t>(step), scenario_.load_kw.end());
  pv[0] = pv_[step];
  load[0] = load_[step];
}

DayScenario NoisyForecaster::realized() const {
  DayScenario s = scenario_;
  s.pv_kw = pv_;
  s.load_kw = load_;
  return s;
}

double penalty_of(const ThetaVector& theta, const DayAggregates& a) {
  return theta.efc * a.throughput_kwh + theta.dod * a.band() + theta.c * a.p_chg_peak + theta.d * a.p_dis_peak;
}

namespace {

// Settles one committed step against realized PV/load.
void settle(DayResult& day, const DayScenario& scenario, const BatteryState& battery, std::size_t t, double p_charge,
            double p_discharge, double pv, double load, double& energy) {
  const double tau = scenario.tau_h;
  const double net = load - pv + p_charge - p_discharge;
  const double buy = std::max(net, 0.0);
  const double sell = std::max(-net, 0.0);
  energy += p_charge * tau * battery.eta_c - p_discharge * tau / battery.eta_d;
  day.p_buy.push_back(buy);
  day.p_sell.push_back(sell);
  day.p_charge.push_back(p_charge);
  day.p_discharge.push_back(p_discharge);
  day.energy.push_back(energy);
  auto& a = day.aggregates;
  a.throughput_kwh += (p_charge + p_discharge) * tau;
  a.e_min = std::min(a.e_min, energy);
  a.e_max = std::max(a.e_max, energy);
  a.p_chg_peak = std::max(a.p_chg_peak, p_charge);
  a.p_dis_peak = std::max(a.p_dis_peak, p_discharge);
  a.operational_cost += (scenario.tariff.buy[t] * buy - scenario.tariff.sell[t] * sell) * tau;
}

DayResult start_day(const BatteryState& battery) {
  DayResult day;
  day.aggregates.e_min = battery.e0;
  day.aggregates.e_max = battery.e0;
  return day;
}

}  // namespace

DayResult rolling_mpc(const DayScenario& scenario, const ThetaVector& theta, const BatteryState& battery,
                      double grid_cap_kw, const Forecaster& forecaster, bool tie_break) {
  scenario.validate();
  const std::size_t T = scenario.steps();
  DayResult day = start_day(battery);
  double energy = battery.e0;

  DispatchProblem problem;
  problem.tau_h = scenario.tau_h;
  problem.theta = theta;
  problem.battery = battery;
  problem.grid_cap_kw = grid_cap_kw;
  problem.tie_break = tie_break;
  problem.e_terminal = battery.e0;

  for (std::size_t k = 0; k < T; ++k) {
    forecaster.forecast(k, problem.pv_kw, problem.load_kw);
    problem.tariff.buy.assign(scenario.tariff.buy.begin() + static_cast<std::ptrdiff_t>(k), scenario.tariff.buy.end());
    problem.tariff.sell.assign(scenario.tariff.sell.begin() + static_cast<std::ptrdiff_t>(k), scenario.tariff.sell.end());
    problem.e_initial = energy;
    problem.history = History{day.aggregates.e_min, day.aggregates.e_max, day.aggregates.p_chg_peak,
                              day.aggregates.p_dis_peak};
    DispatchSolution plan;
    try {
      plan = solve(problem);
    } catch (const InfeasibleError&) {
      throw InfeasibleError("dispatch infeasible at step " + std::to_string(k));
    }
    day.lp_iterations += plan.iterations;
    settle(day, scenario, battery, k, plan.p_charge[0], plan.p_discharge[0], forecaster.realized_pv(k),
           forecaster.realized_load(k), energy);
  }
  day.penalty_cost = penalty_of(theta, day.aggregates);
  return day;
}

DayResult single_shot(const DayScenario& scenario, const ThetaVector& theta, const BatteryState& battery,
                      double grid_cap_kw, bool tie_break) {
  scenario.validate();
  DispatchProblem problem;
  problem.tau_h = scenario.tau_h;
  problem.pv_kw = scenario.pv_kw;
  problem.load_kw = scenario.load_kw;
  problem.tariff = scenario.tariff;
  problem.theta = theta;
  problem.battery = battery;
  problem.grid_cap_kw = grid_cap_kw;
  problem.tie_break = tie_break;
  const auto plan = solve(problem);

  DayResult day = start_day(battery);
  day.lp_iterations = plan.iterations;
  double energy = battery.e0;
  for (std::size_t t = 0; t < scenario.steps(); ++t) {
    settle(day, scenario, battery, t, plan.p_charge[t], plan.p_discharge[t], scenario.pv_kw[t], scenario.load_kw[t],
           energy);
  }
  day.penalty_cost = penalty_of(theta, day.aggregates);
  return day;
}

DayResult idle_day(const DayScenario& scenario, const BatteryState& battery) {
  scenario.validate();
  DayResult day = start_day(battery);
  double energy = battery.e0;
  for (std::size_t t = 0; t < scenario.steps(); ++t) {
    settle(day, scenario, battery, t, 0.0, 0.0, scenario.pv_kw[t], scenario.load_kw[t], energy);
  }
  return day;
}

std::vector<double> aggregates_to_features(const DayAggregates& a, const BatteryState& battery, double ambient_c,
                                           const gbt::RateModel* model) {
  std::vector<double> x{battery.capacity_now, ambient_c, a.band() / battery.rated_capacity, a.p_chg_peak, a.p_dis_peak};
  return model ? model->clamp_features(x) : x;
}

nlohmann::json to_json(const DispatchSolution& s) {
  return {{"schema_version", "dispatch-v1"},
          {"p_buy_kw", s.p_buy},
          {"p_sell_kw", s.p_sell},
          {"p_charge_kw", s.p_charge},
          {"p_discharge_kw", s.p_discharge},
          {"energy_kwh", s.energy},
          {"band_low_kwh", s.band_low},
          {"band_high_kwh", s.band_high},
          {"peak_charge_kw", s.peak_charge},
          {"peak_discharge_kw", s.peak_discharge},
          {"operational_cost_usd", s.operational_cost},
          {"penalty_cost_usd", s.penalty_cost},
          {"tie_break_cost_usd", s.tie_break_cost},
          {"objective_usd", s.objective}};
}

}  // namespace gridlife::dispatch
