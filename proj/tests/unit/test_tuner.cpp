#include <atomic>
#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.h"
#include "gridlife/error.h"
#include "gridlife/tuner.h"

using namespace gridlife;
using namespace gridlife::tuner;

namespace {

double sphere(const Point& x) {
  double s = 0.0;
  for (double v : x) s += (v - 0.3) * (v - 0.3);
  return s;
}

PsoConfig small_swarm(int iterations) {
  PsoConfig c;
  c.n_particles = 20;
  c.n_iterations = iterations;
  c.bounds_given = true;
  c.seed = 11;
  return c;
}

}  // namespace

TEST(Pso, SphereConverges) {
  const auto r = pso_optimize(sphere, small_swarm(100));
  EXPECT_LT(r.best_cost, 1e-3);
  for (double v : r.best) EXPECT_NEAR(v, 0.3, 0.05);
  ASSERT_EQ(r.log.size(), 101u);
  for (std::size_t k = 1; k < r.log.size(); ++k) EXPECT_LE(r.log[k].best_cost, r.log[k - 1].best_cost);
}

TEST(Pso, StaysInsideBounds) {
  auto cfg = small_swarm(30);
  cfg.upper = {0.2, 0.4, 0.1, 0.9};
  std::atomic<int> outside{0};
  const auto r = pso_optimize(
      [&](const Point& x) {
        for (std::size_t d = 0; d < 4; ++d) {
          if (x[d] < cfg.lower[d] || x[d] > cfg.upper[d]) ++outside;
        }
        return -x[0] - x[1] + x[2] + x[3];
      },
      cfg);
  EXPECT_EQ(outside.load(), 0);
  EXPECT_NEAR(r.best[0], 0.2, 1e-6);
  EXPECT_NEAR(r.best[2], 0.0, 1e-6);
}

TEST(Pso, ConstantObjectiveKeepsFirstEvaluatedBest) {
  const auto r = pso_optimize([](const Point&) { return 4.0; }, small_swarm(5));
  EXPECT_EQ(r.best_cost, 4.0);
  EXPECT_EQ(r.best, (Point{0.0, 0.0, 0.0, 0.0}));
}

TEST(Pso, Deterministic) {
  const auto a = pso_optimize(sphere, small_swarm(20));
  const auto b = pso_optimize(sphere, small_swarm(20));
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(a.best_cost, b.best_cost);
}

TEST(Pso, NonFiniteObjectiveMarksInvalid) {
  const auto r = pso_optimize(
      [](const Point& x) { return x[0] > 0.6 ? std::nan("") : sphere(x); }, small_swarm(30));
  EXPECT_TRUE(std::isfinite(r.best_cost));
  EXPECT_LE(r.best[0], 0.6);
  int invalid = 0;
  for (const auto& it : r.log) invalid += it.invalid;
  EXPECT_GT(invalid, 0);
}

TEST(Pso, ConfigValidation) {
  PsoConfig c;
  c.n_particles = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PsoConfig{};
  c.lower[1] = 2.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Bounds, FromTariff) {
  const auto setup = fixtures::stub_setup();
  const auto ub = theta_upper_bounds(setup.seasons);
  EXPECT_DOUBLE_EQ(ub[0], 0.5);
  EXPECT_DOUBLE_EQ(ub[1], 0.5);
  EXPECT_DOUBLE_EQ(ub[2], 0.5 * 24.0);
  EXPECT_DOUBLE_EQ(ub[3], 0.5 * 24.0);
}

TEST(Policy, ParseNames) {
  EXPECT_EQ(parse_policy("ro"), PolicyKind::kRo);
  EXPECT_EQ(parse_policy("nousage"), PolicyKind::kNoUsage);
  EXPECT_THROW(parse_policy("xx"), ConfigError);
  EXPECT_EQ(parse_axis("temperature"), SweepAxis::kTemperature);
  EXPECT_THROW(parse_axis("speed"), ConfigError);
}

TEST(Axis, AppliesOneSetting) {
  const auto base = fixtures::stub_setup();
  EXPECT_DOUBLE_EQ(apply_axis(base, SweepAxis::kQuantile, 0.8).config.quantile, 0.8);
  const auto hot = apply_axis(base, SweepAxis::kTemperature, 35.0);
  for (int n = 1; n <= 4; ++n) EXPECT_DOUBLE_EQ(hot.ambient(n), 35.0);
  const auto big = apply_axis(base, SweepAxis::kCapacity, 1000.0);
  EXPECT_DOUBLE_EQ(big.config.c0_kwh, 1000.0);
  EXPECT_DOUBLE_EQ(big.config.invest_usd, base.config.invest_usd);
  EXPECT_DOUBLE_EQ(big.config.battery.p_chg_cap_kw, base.config.battery.p_chg_cap_kw);
}

TEST(Evaluate, BenchmarkAndNoUsageNeedNoTuning) {
  const auto setup = fixtures::stub_setup();
  const lifecycle::ConstantRateModel cyc({0.1, 0.5, 0.9, 0.95}, {0.05, 0.1, 0.15, 0.2});
  const lifecycle::ConstantRateModel cal({0.1, 0.5, 0.9, 0.95}, {0.1, 0.2, 0.3, 0.35});
  EvaluationSettings s;
  s.mc_paths = 5;
  const auto bench = evaluate_policy(PolicyKind::kBenchmark, std::nullopt, setup, {&cyc, &cal}, PsoConfig{}, s);
  EXPECT_TRUE(bench.theta.is_zero());
  EXPECT_FALSE(bench.tuning.has_value());
  EXPECT_LE(bench.cost_q90, bench.cost_q95);
  const auto idle = evaluate_policy(PolicyKind::kNoUsage, std::nullopt, setup, {&cyc, &cal}, PsoConfig{}, s);
  EXPECT_GT(idle.mean_life_days, bench.mean_life_days);
}

TEST(Tune, RoBeatsBenchmarkObjectiveOnStub) {
  const auto setup = fixtures::stub_setup();
  const lifecycle::ConstantRateModel cyc({0.1, 0.5, 0.9}, {2.0, 3.0, 4.0});
  const lifecycle::ConstantRateModel cal({0.1, 0.5, 0.9}, {0.1, 0.2, 0.3});
  auto pso = small_swarm(4);
  pso.n_particles = 6;
  pso.bounds_given = false;
  const auto r = tune(PolicyKind::kRo, setup, {&cyc, &cal}, pso, EvaluationSettings{});
  EXPECT_LE(r.best_cost, ro_objective({}, setup, {&cyc, &cal}, 1) + 1e-6);
}
