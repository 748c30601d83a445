#include "dynrisk/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dynrisk/error.hpp"

namespace dynrisk {

namespace {

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : a_(rows, std::vector<double>(cols + 1, 0.0)), basis_(rows, 0) {}

  std::vector<double>& row(std::size_t i) { return a_[i]; }
  double& rhs(std::size_t i) { return a_[i].back(); }
  std::size_t rows() const { return a_.size(); }
  std::size_t cols() const { return a_.empty() ? 0 : a_[0].size() - 1; }
  std::vector<std::size_t>& basis() { return basis_; }

  void pivot(std::size_t r, std::size_t c) {
    auto& pr = a_[r];
    const double p = pr[c];
    for (double& v : pr) v /= p;
    for (std::size_t i = 0; i < a_.size(); ++i) {
      if (i == r) continue;
      const double f = a_[i][c];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < pr.size(); ++j) a_[i][j] -= f * pr[j];
      a_[i][c] = 0.0;
    }
    basis_[r] = c;
  }

  // Minimizes cost · x over the current basis; columns with allowed[j] ==
  // false never enter. Returns false if unbounded.
  bool optimize(const std::vector<double>& cost, const std::vector<bool>& allowed, double eps) {
    for (std::size_t iter = 0; iter < 100000; ++iter) {
      // reduced costs d_j = c_j - c_B·column_j
      std::size_t enter = cols();
      for (std::size_t j = 0; j < cols(); ++j) {
        if (!allowed[j]) continue;
        double d = cost[j];
        for (std::size_t i = 0; i < rows(); ++i) d -= cost[basis_[i]] * a_[i][j];
        if (d < -eps) {
          enter = j;  // Bland: lowest index
          break;
        }
      }
      if (enter == cols()) return true;
      std::size_t leave = rows();
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < rows(); ++i) {
        const double coef = a_[i][enter];
        if (coef <= eps) continue;
        const double ratio = a_[i].back() / coef;
        if (ratio < best - eps || (std::abs(ratio - best) <= eps && basis_[i] < basis_[leave])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave == rows()) return false;
      pivot(leave, enter);
    }
    throw InvariantViolation("simplex: iteration limit reached");
  }

  double objective(const std::vector<double>& cost) const {
    double v = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) v += cost[basis_[i]] * a_[i].back();
    return v;
  }

 private:
  std::vector<std::vector<double>> a_;
  std::vector<std::size_t> basis_;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp) {
  const std::size_t n = lp.objective.size();
  if (lp.lower.size() != n || lp.upper.size() != n) throw InputError("solve_lp: bound vectors have wrong size");
  if (lp.ge_rows.size() != lp.ge_rhs.size()) throw InputError("solve_lp: row/rhs mismatch");
  for (std::size_t j = 0; j < n; ++j) {
    if (!(lp.lower[j] <= lp.upper[j]) || !std::isfinite(lp.lower[j]) || !std::isfinite(lp.upper[j])) {
      throw InputError("solve_lp: bounds must be finite with lower <= upper");
    }
  }

  // y = x - lower >= 0; rows: ge constraints then y_j <= width_j.
  struct Row {
    std::vector<double> coef;
    double rhs;
    bool ge;
  };
  std::vector<Row> rows;
  double scale = 1.0;
  for (std::size_t i = 0; i < lp.ge_rows.size(); ++i) {
    if (lp.ge_rows[i].size() != n) throw InputError("solve_lp: constraint row has wrong size");
    double shift = 0.0;
    for (std::size_t j = 0; j < n; ++j) shift += lp.ge_rows[i][j] * lp.lower[j];
    rows.push_back({lp.ge_rows[i], lp.ge_rhs[i] - shift, true});
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> coef(n, 0.0);
    coef[j] = 1.0;
    rows.push_back({std::move(coef), lp.upper[j] - lp.lower[j], false});
  }
  for (auto& r : rows) {
    if (r.rhs < 0.0) {
      for (double& v : r.coef) v = -v;
      r.rhs = -r.rhs;
      r.ge = !r.ge;
    }
    scale = std::max(scale, r.rhs);
  }

  // columns: n structural, one slack/surplus per row, one artificial per ge row
  const std::size_t m = rows.size();
  std::size_t n_art = 0;
  for (const auto& r : rows) n_art += r.ge ? 1 : 0;
  const std::size_t total = n + m + n_art;
  Tableau tab(m, total);
  std::vector<bool> is_art(total, false);
  std::size_t art = n + m;
  for (std::size_t i = 0; i < m; ++i) {
    auto& row = tab.row(i);
    for (std::size_t j = 0; j < n; ++j) row[j] = rows[i].coef[j];
    row[n + i] = rows[i].ge ? -1.0 : 1.0;
    tab.rhs(i) = rows[i].rhs;
    if (rows[i].ge) {
      row[art] = 1.0;
      is_art[art] = true;
      tab.basis()[i] = art++;
    } else {
      tab.basis()[i] = n + i;
    }
  }

  const double eps = 1e-11;
  std::vector<double> phase1(total, 0.0);
  for (std::size_t j = 0; j < total; ++j) phase1[j] = is_art[j] ? 1.0 : 0.0;
  std::vector<bool> allowed(total, true);
  tab.optimize(phase1, allowed, eps);
  if (tab.objective(phase1) > 1e-9 * scale) return {LpStatus::Infeasible, 0.0, {}};

  // drive zero-level artificials out of the basis
  for (std::size_t i = 0; i < m; ++i) {
    if (!is_art[tab.basis()[i]]) continue;
    for (std::size_t j = 0; j < n + m; ++j) {
      if (std::abs(tab.row(i)[j]) > 1e-9) {
        tab.pivot(i, j);
        break;
      }
    }
  }
  for (std::size_t j = 0; j < total; ++j) allowed[j] = !is_art[j];

  std::vector<double> phase2(total, 0.0);
  for (std::size_t j = 0; j < n; ++j) phase2[j] = lp.objective[j];
  if (!tab.optimize(phase2, allowed, eps)) throw InvariantViolation("simplex: bounded program reported unbounded");

  LpResult res;
  res.status = LpStatus::Optimal;
  res.x = lp.lower;
  for (std::size_t i = 0; i < m; ++i) {
    if (tab.basis()[i] < n) res.x[tab.basis()[i]] += tab.rhs(i);
  }
  res.value = 0.0;
  for (std::size_t j = 0; j < n; ++j) res.value += lp.objective[j] * res.x[j];
  return res;
}

}  // namespace dynrisk
