#pragma once

#include <cstddef>
#include <vector>

namespace dynrisk {

struct AssignmentResult {
  double value = 0.0;
  // row_to_col[i] is the column matched to row i.
  std::vector<std::size_t> row_to_col;
};

// Maximum-weight matching of every row to a distinct column (rows <= cols)
// by the O(rows² · cols) shortest augmenting path method. Entries equal to
// -inf are forbidden pairs; throws InputError when no feasible matching
// exists. Ties resolve toward the lowest column index.
AssignmentResult solve_assignment_max(const std::vector<std::vector<double>>& weight);

}  // namespace dynrisk
