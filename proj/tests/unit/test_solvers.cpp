#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dynrisk/assignment.hpp"
#include "dynrisk/error.hpp"
#include "dynrisk/simplex.hpp"
#include "support.hpp"

using namespace dynrisk;

namespace {

LinearProgram random_lp(std::mt19937_64& rng, std::size_t n, std::size_t rows) {
  LinearProgram lp;
  for (std::size_t j = 0; j < n; ++j) {
    lp.objective.push_back(uniform01(rng) * 2 - 1);
    lp.lower.push_back(-1 - 4 * uniform01(rng));
    lp.upper.push_back(1 + 4 * uniform01(rng));
  }
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> r(n);
    for (double& v : r) v = uniform01(rng) * 2 - 1;
    lp.ge_rows.push_back(r);
    lp.ge_rhs.push_back(uniform01(rng) * 2 - 1.5);
  }
  return lp;
}

}  // namespace

TEST(Simplex, MatchesVertexEnumeration) {
  std::mt19937_64 rng(41);
  int infeasible = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto lp = random_lp(rng, 1 + trial % 5, trial % 7);
    const auto res = solve_lp(lp);
    const double oracle = oracle::lp_vertex_min(lp);
    if (std::isnan(oracle)) {
      EXPECT_EQ(res.status, LpStatus::Infeasible);
      ++infeasible;
      continue;
    }
    ASSERT_EQ(res.status, LpStatus::Optimal);
    EXPECT_NEAR(res.value, oracle, 1e-9 * std::max(1.0, std::abs(oracle)));
    for (std::size_t i = 0; i < lp.ge_rows.size(); ++i) {
      double v = 0;
      for (std::size_t j = 0; j < res.x.size(); ++j) v += lp.ge_rows[i][j] * res.x[j];
      EXPECT_GE(v, lp.ge_rhs[i] - 1e-9);
    }
  }
  EXPECT_GT(infeasible, 0);
}

TEST(Simplex, DegenerateRowsTerminate) {
  LinearProgram lp;
  lp.objective = {1, 1};
  lp.ge_rows = {{1, 1}, {1, 1}, {2, 2}, {1, 0}};
  lp.ge_rhs = {1, 1, 2, 0};
  lp.lower = {-5, -5};
  lp.upper = {5, 5};
  const auto res = solve_lp(lp);
  ASSERT_EQ(res.status, LpStatus::Optimal);
  EXPECT_NEAR(res.value, 1.0, 1e-12);
}

TEST(Simplex, Infeasible) {
  LinearProgram lp;
  lp.objective = {1};
  lp.ge_rows = {{1}, {-1}};
  lp.ge_rhs = {1, 0};
  lp.lower = {-10};
  lp.upper = {10};
  EXPECT_EQ(solve_lp(lp).status, LpStatus::Infeasible);
}

TEST(Assignment, MatchesBruteForce) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t cols = 1 + trial % 7;
    const std::size_t rows = 1 + (trial / 7) % cols;
    std::vector<std::vector<double>> w(rows, std::vector<double>(cols));
    for (auto& r : w)
      for (double& v : r) v = uniform01(rng) < 0.15 ? kNegInf : std::round(uniform01(rng) * 20 - 10);
    const double oracle = oracle::assignment_oracle(w);
    if (oracle == kNegInf) {
      EXPECT_THROW(solve_assignment_max(w), InputError);
      continue;
    }
    const auto res = solve_assignment_max(w);
    EXPECT_NEAR(res.value, oracle, 1e-12);
    double sum = 0;
    std::vector<bool> used(cols, false);
    for (std::size_t i = 0; i < rows; ++i) {
      EXPECT_FALSE(used[res.row_to_col[i]]);
      used[res.row_to_col[i]] = true;
      sum += w[i][res.row_to_col[i]];
    }
    EXPECT_NEAR(sum, res.value, 1e-12);
  }
}

TEST(Assignment, TiesGoToLowestColumn) {
  const auto res = solve_assignment_max({{1, 1, 1}});
  EXPECT_EQ(res.row_to_col[0], 0u);
}
