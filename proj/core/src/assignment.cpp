#include "dynrisk/assignment.hpp"

#include <cmath>
#include <limits>

#include "dynrisk/error.hpp"

namespace dynrisk {

AssignmentResult solve_assignment_max(const std::vector<std::vector<double>>& weight) {
  const std::size_t n = weight.size();
  AssignmentResult res;
  if (n == 0) return res;
  const std::size_t m = weight.front().size();
  if (m < n) throw InputError("assignment: more rows than columns");

  double max_abs = 0.0;
  for (const auto& row : weight) {
    if (row.size() != m) throw InputError("assignment: ragged weight matrix");
    for (double w : row) {
      if (std::isnan(w) || w == std::numeric_limits<double>::infinity()) throw InputError("assignment: bad weight");
      if (std::isfinite(w)) max_abs = std::max(max_abs, std::abs(w));
    }
  }
  // forbidden pairs get a cost no feasible matching can beat
  const double forbidden = 1.0 + 4.0 * static_cast<double>(n + 1) * (max_abs + 1.0);
  auto cost = [&](std::size_t i, std::size_t j) {
    const double w = weight[i][j];
    return std::isfinite(w) ? -w : forbidden;
  };

  // potentials u (rows), v (cols); p[j] = row matched to column j (1-based, 0 = free)
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  res.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) res.row_to_col[p[j] - 1] = j - 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weight[i][res.row_to_col[i]];
    if (!std::isfinite(w)) throw InputError("assignment: no feasible matching");
    res.value += w;
  }
  return res;
}

}  // namespace dynrisk
