#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.h"
#include "gridlife/dispatch.h"
#include "gridlife/error.h"
#include "oracles.h"

using namespace gridlife;
using namespace gridlife::dispatch;

namespace {

double throughput(const DispatchSolution& s, double tau) {
  double sum = 0.0;
  for (std::size_t t = 0; t < s.p_charge.size(); ++t) sum += (s.p_charge[t] + s.p_discharge[t]) * tau;
  return sum;
}

BatteryConfig default_battery() { return BatteryConfig{}; }

}  // namespace

TEST(BuildLp, VariableCount) {
  std::mt19937_64 rng(1);
  for (std::size_t T : {1u, 3u, 24u}) {
    const auto lp = build_lp(fixtures::to_problem(oracle::random_dispatch_instance(rng, T)));
    EXPECT_EQ(lp.num_cols(), 5 * T + 4);
  }
}

TEST(BuildLp, EmptyWindowRejected) {
  std::mt19937_64 rng(2);
  auto p = fixtures::to_problem(oracle::random_dispatch_instance(rng, 2));
  std::swap(p.battery.e_lower, p.battery.e_upper);
  EXPECT_THROW(build_lp(p), ConfigError);
}

TEST(Theta, ParseAndValidate) {
  const auto t = ThetaVector::parse("0.087,0.066,0.073,0.056");
  EXPECT_EQ(t, (ThetaVector{0.087, 0.066, 0.073, 0.056}));
  EXPECT_THROW(ThetaVector::parse("1,2,3"), ConfigError);
  EXPECT_THROW(ThetaVector::parse("1,x,3,4"), ConfigError);
  EXPECT_THROW(ThetaVector::parse("1,-2,3,4"), ConfigError);
}

TEST(Battery, CentredWindow) {
  const auto b = BatteryState::from_capacity(910.8, 600.0, 500, 500, 0.95, 0.95);
  EXPECT_DOUBLE_EQ(b.e_lower, 155.4);
  EXPECT_DOUBLE_EQ(b.e_upper, 755.4);
  EXPECT_DOUBLE_EQ(b.e0, 455.4);
}

TEST(Solve, InfeasibleWhenLoadExceedsSupply) {
  std::mt19937_64 rng(3);
  auto d = oracle::random_dispatch_instance(rng, 2);
  d.load[1] = d.grid_cap + d.pd_cap + d.pv[1] + 10.0;
  EXPECT_THROW(solve(fixtures::to_problem(d)), InfeasibleError);
}

TEST(Solve, IdleOptimalWithFlatPricesAndNoPv) {
  DispatchProblem p;
  p.pv_kw.assign(6, 0.0);
  p.load_kw = {100, 120, 90, 150, 130, 110};
  p.tariff = {std::vector<double>(6, 0.2), std::vector<double>(6, 0.05)};
  p.battery = default_battery().state();
  p.grid_cap_kw = 1500;
  const auto s = solve(p);
  double bill = 0.0;
  for (double l : p.load_kw) bill += 0.2 * l;
  EXPECT_NEAR(s.operational_cost, bill, 1e-9);
  EXPECT_NEAR(s.objective, bill, 1e-6);
}

TEST(Solve, MatchesVertexEnumerationOracle) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t T = 1 + rep % 3;
    const auto d = oracle::random_dispatch_instance(rng, T);
    const auto expected = oracle::dispatch_optimum(d);
    ASSERT_TRUE(expected.has_value());
    const auto s = solve(fixtures::to_problem(d));
    EXPECT_NEAR(s.objective, *expected, 1e-6 * std::max(1.0, std::abs(*expected))) << "rep " << rep;
    EXPECT_LE(fixtures::constraint_violation(d, s), 1e-9);
  }
}

TEST(Solve, GridSearchUpperBoundsLpOnFourSteps) {
  // Two-level tariff, no PV. Grid over net battery power per step; the last
  // step is fixed by the terminal condition.
  oracle::DispatchInstance d;
  d.pv.assign(4, 0.0);
  d.load = {80, 80, 120, 120};
  d.buy = {0.1, 0.1, 0.4, 0.4};
  d.sell = {0.0, 0.0, 0.0, 0.0};
  d.e_lo = 10;
  d.e_hi = 190;
  d.e0 = 100;
  d.pc_cap = d.pd_cap = 45;
  d.eta_c = d.eta_d = 0.9;
  d.grid_cap = 300;
  d.theta_efc = 0.01;
  const auto lp = solve(fixtures::to_problem(d)).objective;

  auto cost_of = [&](const std::array<double, 4>& u) {
    double e = d.e0, cost = 0.0;
    for (int t = 0; t < 4; ++t) {
      const double pc = std::max(u[t], 0.0), pd = std::max(-u[t], 0.0);
      if (pc > d.pc_cap + 1e-9 || pd > d.pd_cap + 1e-9) return std::numeric_limits<double>::infinity();
      e += d.eta_c * pc - pd / d.eta_d;
      if (e < d.e_lo - 1e-9 || e > d.e_hi + 1e-9) return std::numeric_limits<double>::infinity();
      const double net = d.load[t] + pc - pd;
      cost += (net > 0 ? d.buy[t] : d.sell[t]) * net + d.theta_efc * (pc + pd);
    }
    return std::abs(e - d.e0) < 1e-9 ? cost : std::numeric_limits<double>::infinity();
  };
  double best = INFINITY;
  for (int a = 0; a < 10; ++a) {
    for (int b = 0; b < 10; ++b) {
      for (int c = 0; c < 10; ++c) {
        std::array<double, 4> u{-45.0 + 10.0 * a, -45.0 + 10.0 * b, -45.0 + 10.0 * c, 0.0};
        double e = d.e0;
        for (int t = 0; t < 3; ++t) e += u[t] > 0 ? d.eta_c * u[t] : u[t] / d.eta_d;
        const double gap = d.e0 - e;
        u[3] = gap > 0 ? gap / d.eta_c : gap * d.eta_d;
        best = std::min(best, cost_of(u));
      }
    }
  }
  ASSERT_TRUE(std::isfinite(best));
  EXPECT_LE(lp, best + 1e-9);
  EXPECT_LE(best - lp, 0.02 * std::abs(lp));
}

TEST(Solve, NoSimultaneousBuyAndSell) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    auto d = oracle::random_dispatch_instance(rng, 1 + rep % 6);
    for (std::size_t t = 0; t < d.buy.size(); ++t) d.sell[t] = std::min(d.sell[t], 0.95 * d.buy[t]);
    const auto s = solve(fixtures::to_problem(d, true));
    for (std::size_t t = 0; t < s.p_buy.size(); ++t) EXPECT_LE(s.p_buy[t] * s.p_sell[t], 1e-9) << rep;
  }
}

TEST(Solve, ObjectiveDecomposes) {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 30; ++rep) {
    const auto d = oracle::random_dispatch_instance(rng, 6);
    const auto p = fixtures::to_problem(d, true);
    const auto s = solve(p);
    double op = 0.0;
    for (std::size_t t = 0; t < 6; ++t) op += (d.buy[t] * s.p_buy[t] - d.sell[t] * s.p_sell[t]) * d.tau;
    const double pen = d.theta_efc * throughput(s, d.tau) + d.theta_dod * (s.band_high - s.band_low) +
                       d.theta_c * s.peak_charge + d.theta_d * s.peak_discharge;
    EXPECT_NEAR(s.operational_cost, op, 1e-9 * std::max(1.0, std::abs(op)));
    EXPECT_NEAR(s.penalty_cost, pen, 1e-9 * std::max(1.0, pen));
    EXPECT_NEAR(s.objective, op + pen + s.tie_break_cost, 1e-6 * std::max(1.0, std::abs(s.objective)));
    EXPECT_LE(max_constraint_violation(p, s), 1e-9);
  }
}

TEST(Solve, PenalizedQuantityNonIncreasingInItsWeight) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const auto day = fixtures::random_day(rng);
    DispatchProblem p;
    p.pv_kw = day.pv_kw;
    p.load_kw = day.load_kw;
    p.tariff = day.tariff;
    p.battery = default_battery().state_at(700.0);
    p.grid_cap_kw = 1500;
    double prev_tp = INFINITY, prev_band = INFINITY, prev_pc = INFINITY;
    for (double w : {0.0, 0.02, 0.05, 0.1, 0.2}) {
      p.theta = {w, 0.0, 0.0, 0.0};
      const auto s = solve(p);
      EXPECT_LE(throughput(s, 1.0), prev_tp + 1e-6);
      prev_tp = throughput(s, 1.0);
    }
    for (double w : {0.0, 0.05, 0.2, 1.0}) {
      p.theta = {0.0, w, 0.0, 0.0};
      const auto s = solve(p);
      EXPECT_LE(s.band_high - s.band_low, prev_band + 1e-6);
      prev_band = s.band_high - s.band_low;
    }
    for (double w : {0.0, 0.05, 0.2, 1.0}) {
      p.theta = {0.0, 0.0, w, 0.0};
      const auto s = solve(p);
      EXPECT_LE(s.peak_charge, prev_pc + 1e-6);
      prev_pc = s.peak_charge;
    }
  }
}

TEST(Rolling, PerfectForecastEqualsSingleShot) {
  std::mt19937_64 rng(8);
  const auto battery = default_battery();
  for (int rep = 0; rep < 5; ++rep) {
    const auto day = fixtures::random_day(rng);
    const ThetaVector theta{0.03 * rep, 0.01, 0.02, 0.0};
    const PerfectForecaster f(day);
    const auto rolled = rolling_mpc(day, theta, battery.state_at(800.0), battery.grid_cap_kw, f);
    const auto single = single_shot(day, theta, battery.state_at(800.0), battery.grid_cap_kw);
    EXPECT_NEAR(rolled.objective(), single.objective(), 1e-6 * std::abs(single.objective()));
  }
}

TEST(Rolling, ForecastNoiseCostsOnAverage) {
  std::mt19937_64 rng(9);
  const auto battery = default_battery();
  const ThetaVector theta{0.02, 0.02, 0.02, 0.02};
  double noisy = 0.0, hindsight = 0.0;
  for (int rep = 0; rep < 30; ++rep) {
    const auto day = fixtures::random_day(rng);
    const NoisyForecaster f(day, 0.1, 100 + rep);
    noisy += rolling_mpc(day, theta, battery.state(), battery.grid_cap_kw, f).objective();
    hindsight += single_shot(f.realized(), theta, battery.state(), battery.grid_cap_kw).objective();
  }
  EXPECT_GE(noisy, hindsight - 1e-6);
}

TEST(Rolling, IdleDayPaysNetLoad) {
  std::mt19937_64 rng(10);
  const auto day = fixtures::random_day(rng);
  const auto r = idle_day(day, default_battery().state());
  double bill = 0.0;
  for (std::size_t t = 0; t < day.steps(); ++t) {
    const double net = day.load_kw[t] - day.pv_kw[t];
    bill += (net > 0 ? day.tariff.buy[t] : day.tariff.sell[t]) * net * day.tau_h;
  }
  EXPECT_NEAR(r.aggregates.operational_cost, bill, 1e-9);
  EXPECT_EQ(r.aggregates.throughput_kwh, 0.0);
  EXPECT_EQ(r.aggregates.band(), 0.0);
}

TEST(Features, DodFromBand) {
  const auto b = BatteryState::from_capacity(910.8, 800.0, 500, 500, 0.95, 0.95);
  DayAggregates a;
  a.e_min = 200.0;
  a.e_max = 200.0 + 0.4 * 910.8;
  a.p_chg_peak = 300;
  a.p_dis_peak = 250;
  const auto x = aggregates_to_features(a, b, 25.0);
  ASSERT_EQ(x.size(), 5u);
  EXPECT_DOUBLE_EQ(x[0], 800.0);
  EXPECT_DOUBLE_EQ(x[1], 25.0);
  EXPECT_NEAR(x[2], 0.4, 1e-12);
  EXPECT_DOUBLE_EQ(x[3], 300.0);
  EXPECT_DOUBLE_EQ(x[4], 250.0);

  a.e_min = b.e_lower;
  a.e_max = b.e_upper;
  EXPECT_NEAR(aggregates_to_features(a, b, 25.0)[2], 800.0 / 910.8, 1e-12);
}

TEST(Features, IdleDodClampedToTrainingMinimum) {
  const auto b = BatteryState::from_capacity(910.8, 800.0, 500, 500, 0.95, 0.95);
  std::vector<gbt::Forest> forests{gbt::Forest{0.5, 0.1, 1.0, {gbt::Tree{{-1}, {0.0}, {-1}, {-1}, {0.0}}}, {}}};
  const gbt::QuantileEnsemble model(data::AgingMode::kCyclic, forests, {}, {300, 0, 0.05, 50, 50},
                                    {910.8, 55, 1.0, 2000, 2500});
  const auto x = aggregates_to_features(DayAggregates{}, b, 25.0, &model);
  EXPECT_DOUBLE_EQ(x[2], 0.05);
  EXPECT_DOUBLE_EQ(x[3], 50.0);
}

TEST(Scenario, CsvRoundTripAndSellAboveBuyRejected) {
  std::mt19937_64 rng(11);
  const auto day = fixtures::random_day(rng);
  const auto path = std::filesystem::temp_directory_path() / "gridlife_unit_day.csv";
  day.write_csv(path);
  const auto back = DayScenario::load_csv(path, day.tau_h);
  EXPECT_EQ(back.pv_kw, day.pv_kw);
  EXPECT_EQ(back.tariff.buy, day.tariff.buy);

  auto bad = day;
  bad.tariff.sell[5] = bad.tariff.buy[5] + 0.01;
  try {
    bad.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("step 5"), std::string::npos);
  }
}
