#pragma once

#include <vector>

namespace dynrisk {

// Small dense linear program
//
//   minimize    objective · x
//   subject to  ge_rows[i] · x >= ge_rhs[i]
//               lower <= x <= upper        (both finite)
struct LinearProgram {
  std::vector<double> objective;
  std::vector<std::vector<double>> ge_rows;
  std::vector<double> ge_rhs;
  std::vector<double> lower;
  std::vector<double> upper;
};

enum class LpStatus { Optimal, Infeasible };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
  std::vector<double> x;
};

// Two-phase tableau simplex with Bland's rule. Boxes are finite, so the
// problem is never unbounded.
LpResult solve_lp(const LinearProgram& lp);

}  // namespace dynrisk
