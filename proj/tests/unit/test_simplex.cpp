#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gridlife/simplex.h"
#include "oracles.h"

using namespace gridlife::lp;

namespace {

LinearProgram to_lp(const oracle::DenseLp& d) {
  LinearProgram lp;
  for (std::size_t j = 0; j < d.c.size(); ++j) lp.add_column(d.c[j], d.col_lo[j], d.col_hi[j]);
  for (std::size_t i = 0; i < d.a.size(); ++i) {
    std::vector<std::pair<std::size_t, double>> coeffs;
    for (std::size_t j = 0; j < d.c.size(); ++j) {
      if (d.a[i][j] != 0.0) coeffs.push_back({j, d.a[i][j]});
    }
    lp.add_row(d.row_lo[i], d.row_hi[i], coeffs);
  }
  return lp;
}

oracle::DenseLp random_lp(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  oracle::DenseLp d;
  // A known interior-ish point keeps most instances feasible.
  std::vector<double> x0(n);
  for (std::size_t j = 0; j < n; ++j) {
    x0[j] = 2.0 * u(rng);
    d.c.push_back(u(rng));
    d.col_lo.push_back(x0[j] - 1.0 - std::abs(u(rng)));
    d.col_hi.push_back(x0[j] + 1.0 + std::abs(u(rng)));
  }
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> row(n);
    double ax = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::abs(u(rng)) < 0.2 ? 0.0 : u(rng);
      ax += row[j] * x0[j];
    }
    d.a.push_back(row);
    const int kind = static_cast<int>(rng() % 4);
    const double slack = std::abs(u(rng));
    if (kind == 0) {  // equality
      d.row_lo.push_back(ax);
      d.row_hi.push_back(ax);
    } else {
      d.row_lo.push_back(ax - slack - (kind == 1 ? 0.0 : 0.5));
      d.row_hi.push_back(ax + slack);
    }
  }
  return d;
}

}  // namespace

TEST(Simplex, SingleLowerBound) {
  LinearProgram lp;
  lp.add_column(1.0, -kInf, kInf);
  lp.add_row(3.0, kInf, {{0, 1.0}});
  const auto s = solve(lp);
  ASSERT_EQ(s.status, Status::kOptimal);
  EXPECT_NEAR(s.objective, 3.0, 1e-12);
  EXPECT_NEAR(s.x[0], 3.0, 1e-12);
}

TEST(Simplex, MatchesVertexEnumeration) {
  std::mt19937_64 rng(99);
  int compared = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 2 + rep % 4;
    const std::size_t m = 1 + rep % 5;
    const auto d = random_lp(rng, n, m);
    const auto expected = oracle::lp_by_vertices(d);
    ASSERT_TRUE(expected.has_value());
    for (bool bland : {false, true}) {
      SimplexOptions opt;
      opt.bland_only = bland;
      const auto lp = to_lp(d);
      const auto s = solve(lp, opt);
      ASSERT_EQ(s.status, Status::kOptimal) << "rep " << rep;
      EXPECT_NEAR(s.objective, *expected, 1e-7 * std::max(1.0, std::abs(*expected))) << "rep " << rep;
      EXPECT_LE(lp.max_violation(s.x), 1e-9);
      EXPECT_NEAR(lp.objective(s.x), s.objective, 1e-9);
    }
    ++compared;
  }
  EXPECT_EQ(compared, 300);
}

TEST(Simplex, DetectsInfeasibility) {
  LinearProgram lp;
  lp.add_column(1.0, 0.0, 1.0);
  lp.add_column(1.0, 0.0, 1.0);
  lp.add_row(3.0, kInf, {{0, 1.0}, {1, 1.0}});
  EXPECT_EQ(solve(lp).status, Status::kInfeasible);
}

TEST(Simplex, DetectsUnboundedness) {
  LinearProgram lp;
  lp.add_column(-1.0, 0.0, kInf);
  lp.add_column(0.0, 0.0, kInf);
  lp.add_row(-kInf, 1.0, {{0, 1.0}, {1, -1.0}});
  EXPECT_EQ(solve(lp).status, Status::kUnbounded);
}

TEST(Simplex, DegenerateCyclingExampleTerminates) {
  // Classic instance on which largest-coefficient pricing cycles without an
  // anti-cycling rule. Optimum -1/20 at x1 = 1/25, x3 = 1.
  LinearProgram lp;
  lp.add_column(-0.75, 0.0, kInf);
  lp.add_column(150.0, 0.0, kInf);
  lp.add_column(-0.02, 0.0, kInf);
  lp.add_column(6.0, 0.0, kInf);
  lp.add_row(-kInf, 0.0, {{0, 0.25}, {1, -60.0}, {2, -0.04}, {3, 9.0}});
  lp.add_row(-kInf, 0.0, {{0, 0.5}, {1, -90.0}, {2, -0.02}, {3, 3.0}});
  lp.add_row(-kInf, 1.0, {{2, 1.0}});
  for (bool bland : {false, true}) {
    SimplexOptions opt;
    opt.bland_only = bland;
    opt.degenerate_limit = 3;
    const auto s = solve(lp, opt);
    ASSERT_EQ(s.status, Status::kOptimal);
    EXPECT_NEAR(s.objective, -0.05, 1e-12);
  }
}

TEST(Simplex, FreeVariablesAndEqualities) {
  // min x + y  s.t. x - y = 1, x + 2y >= 4, both free.
  LinearProgram lp;
  lp.add_column(1.0, -kInf, kInf);
  lp.add_column(1.0, -kInf, kInf);
  lp.add_row(1.0, 1.0, {{0, 1.0}, {1, -1.0}});
  lp.add_row(4.0, kInf, {{0, 1.0}, {1, 2.0}});
  const auto s = solve(lp);
  ASSERT_EQ(s.status, Status::kOptimal);
  EXPECT_NEAR(s.x[0], 2.0, 1e-12);
  EXPECT_NEAR(s.x[1], 1.0, 1e-12);
}
