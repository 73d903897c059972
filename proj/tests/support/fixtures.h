// Test helpers that bridge oracle instances and library types.
#ifndef GRIDLIFE_TESTS_FIXTURES_H
#define GRIDLIFE_TESTS_FIXTURES_H

#include <algorithm>
#include <cmath>
#include <random>

#include "gridlife/dispatch.h"
#include "gridlife/lifecycle.h"
#include "oracles.h"

namespace fixtures {

inline gridlife::dispatch::DispatchProblem to_problem(const oracle::DispatchInstance& d, bool tie_break = false) {
  gridlife::dispatch::DispatchProblem p;
  p.tau_h = d.tau;
  p.pv_kw = d.pv;
  p.load_kw = d.load;
  p.tariff = {d.buy, d.sell};
  p.theta = {d.theta_efc, d.theta_dod, d.theta_c, d.theta_d};
  auto& b = p.battery;
  b.rated_capacity = d.e_lo + d.e_hi;
  b.capacity_now = d.e_hi - d.e_lo;
  b.e_lower = d.e_lo;
  b.e_upper = d.e_hi;
  b.p_chg_cap = d.pc_cap;
  b.p_dis_cap = d.pd_cap;
  b.eta_c = d.eta_c;
  b.eta_d = d.eta_d;
  b.e0 = d.e0;
  p.grid_cap_kw = d.grid_cap;
  p.tie_break = tie_break;
  return p;
}

/// Largest violation of every dispatch constraint, evaluated from scratch:
/// bounds, balance, storage dynamics, band and peak coverage, terminal energy.
inline double constraint_violation(const oracle::DispatchInstance& d,
                                   const gridlife::dispatch::DispatchSolution& s) {
  double worst = 0.0;
  auto below = [&](double v, double lo) { worst = std::max(worst, lo - v); };
  auto above = [&](double v, double hi) { worst = std::max(worst, v - hi); };
  const std::size_t T = d.pv.size();
  double e = d.e0;
  for (std::size_t t = 0; t < T; ++t) {
    below(s.p_buy[t], 0.0);
    above(s.p_buy[t], d.grid_cap);
    below(s.p_sell[t], 0.0);
    above(s.p_sell[t], d.grid_cap);
    below(s.p_charge[t], 0.0);
    below(s.p_discharge[t], 0.0);
    worst = std::max(worst, std::abs(s.p_buy[t] - s.p_sell[t] + d.pv[t] + s.p_discharge[t] - s.p_charge[t] - d.load[t]));
    e += d.tau * (d.eta_c * s.p_charge[t] - s.p_discharge[t] / d.eta_d);
    worst = std::max(worst, std::abs(s.energy[t] - e));
    below(s.energy[t], s.band_low);
    above(s.energy[t], s.band_high);
    above(s.p_charge[t], s.peak_charge);
    above(s.p_discharge[t], s.peak_discharge);
  }
  below(s.band_low, d.e_lo);
  above(s.band_high, d.e_hi);
  below(s.band_high, s.band_low);
  above(s.peak_charge, d.pc_cap);
  above(s.peak_discharge, d.pd_cap);
  worst = std::max(worst, std::abs(s.energy[T - 1] - d.e0));
  return worst;
}

/// A 24-step day: time-of-use prices, bell-shaped PV, evening load peak, all
/// scaled by random factors.
inline gridlife::dispatch::DayScenario random_day(std::mt19937_64& rng, std::size_t steps = 24) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  gridlife::dispatch::DayScenario day;
  day.tau_h = 24.0 / static_cast<double>(steps);
  const double pv_peak = 100.0 + 400.0 * u(rng);
  const double load_base = 100.0 + 150.0 * u(rng);
  for (std::size_t t = 0; t < steps; ++t) {
    const double h = (static_cast<double>(t) + 0.5) * day.tau_h;
    const double pv = h > 6.0 && h < 19.0 ? pv_peak * std::sin(M_PI * (h - 6.0) / 13.0) * (0.7 + 0.3 * u(rng)) : 0.0;
    const double load = load_base * (1.0 + 0.6 * std::exp(-0.5 * std::pow((h - 19.0) / 2.0, 2))) * (0.9 + 0.2 * u(rng));
    const double buy = h < 7.0 ? 0.12 : (h < 17.0 ? 0.25 : (h < 21.0 ? 0.5 : 0.25));
    day.pv_kw.push_back(pv);
    day.load_kw.push_back(load);
    day.tariff.buy.push_back(buy * (0.9 + 0.2 * u(rng)));
    day.tariff.sell.push_back(0.05);
  }
  return day;
}

/// Stub lifecycle: every season is the same day. Constant 300 kW load, no PV,
/// cheap energy in hours 0-1, expensive in hours 2-3, 50 kW power limits.
/// With theta = 0 the battery charges 100 kWh and discharges 90.25 kWh daily.
inline gridlife::lifecycle::Setup stub_setup(double c_min_frac = 0.5, int n0 = 40) {
  gridlife::lifecycle::LifecycleConfig cfg;
  cfg.c_min_frac = c_min_frac;
  cfg.n0_periods = n0;
  cfg.battery.p_chg_cap_kw = 50.0;
  cfg.battery.p_dis_cap_kw = 50.0;
  gridlife::dispatch::DayScenario day;
  for (int h = 0; h < 24; ++h) {
    day.pv_kw.push_back(0.0);
    day.load_kw.push_back(300.0);
    day.tariff.buy.push_back(h < 2 ? 0.1 : (h < 4 ? 0.5 : 0.48));
    day.tariff.sell.push_back(0.0);
  }
  gridlife::lifecycle::Setup setup;
  setup.config = cfg;
  setup.seasons.assign(4, day);
  return setup;
}

inline constexpr double kStubThroughput = 100.0 + 90.25;

}  // namespace fixtures

#endif  // GRIDLIFE_TESTS_FIXTURES_H
