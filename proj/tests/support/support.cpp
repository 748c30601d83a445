#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace dynrisk::oracle {

SpacePtr random_space(std::mt19937_64& rng, std::size_t min_m, std::size_t max_m, int horizon, bool uniform) {
  std::uniform_int_distribution<std::size_t> pick_m(min_m, max_m);
  const std::size_t m = pick_m(rng);
  std::vector<double> probs(m, 1.0 / static_cast<double>(m));
  if (!uniform) {
    double sum = 0.0;
    for (double& p : probs) sum += (p = 0.5 + uniform01(rng));
    for (double& p : probs) p /= sum;
  }
  std::vector<Partition> parts;
  Partition cur{Atom(m)};
  std::iota(cur[0].begin(), cur[0].end(), std::size_t{0});
  parts.push_back(cur);
  for (int t = 1; t <= horizon; ++t) {
    Partition next;
    for (const auto& atom : cur) {
      std::size_t pos = 0;
      while (pos < atom.size()) {
        std::uniform_int_distribution<std::size_t> len(1, std::max<std::size_t>(1, (atom.size() + 1) / 2));
        const std::size_t l = std::min(atom.size() - pos, len(rng));
        next.emplace_back(atom.begin() + static_cast<std::ptrdiff_t>(pos),
                          atom.begin() + static_cast<std::ptrdiff_t>(pos + l));
        pos += l;
      }
    }
    parts.push_back(next);
    cur = std::move(next);
  }
  return make_space(FiniteFilteredSpace(std::move(probs), std::move(parts)));
}

DensityProcess random_density(const SpacePtr& space, int t0, int t1, std::mt19937_64& rng) {
  auto inc = random_adapted(space, t0, t1, rng, 0.1, 1.0);
  std::vector<double> mass(space->outcome_count(), 0.0);
  for (int s = t0; s <= t1; ++s)
    for (std::size_t w = 0; w < mass.size(); ++w) mass[w] += inc(s, w);
  const auto cond = cond_expect(*space, mass, t0);
  std::vector<double> inv(cond.size());
  for (std::size_t k = 0; k < inv.size(); ++k) inv[k] = 1.0 / cond[k];
  return DensityProcess(inc.scaled(ConditionalValue(t0, std::move(inv))));
}

AdaptedProcess lumpy_process(const SpacePtr& space, int t0, int t1, std::mt19937_64& rng, int levels) {
  auto rows = random_adapted(space, t0, t1, rng, 0, levels).rows();
  for (auto& r : rows)
    for (double& v : r) v = std::floor(v);
  return AdaptedProcess(space, t0, std::move(rows));
}

AdaptedProcess constant_terminal_process(const SpacePtr& space, std::mt19937_64& rng, double p_top) {
  const int h = space->horizon();
  std::vector<std::vector<double>> rows(h + 1, std::vector<double>(space->outcome_count()));
  const double c = std::floor(uniform01(rng) * 3);
  for (int s = 0; s <= h; ++s)
    for (std::size_t k = 0; k < space->atom_count(s); ++k) {
      const double v = s == h ? c : (uniform01(rng) < p_top ? 2.0 : std::floor(uniform01(rng) * 2));
      for (std::size_t w : space->atoms(s)[k]) rows[s][w] = v;
    }
  return AdaptedProcess(space, 0, std::move(rows));
}

KernelModel kernel_with_silent_nodes(const SpacePtr& space, bool with_costs, double p_silent, std::mt19937_64& rng) {
  std::vector<std::vector<std::vector<NodeKernel>>> menus(static_cast<std::size_t>(space->horizon()));
  for (int s = 0; s < space->horizon(); ++s) {
    std::vector<std::size_t> n_children(space->atom_count(s), 0);
    for (const auto& c : space->atoms(s + 1)) ++n_children[space->atom_of(s, c.front())];
    for (std::size_t j = 0; j < space->atom_count(s); ++j) {
      const bool silent = s > 0 && uniform01(rng) < p_silent;
      std::vector<NodeKernel> menu;
      for (int i = 0; i < 2; ++i) {
        NodeKernel k;
        k.stop = silent ? 0.0 : 0.05 + 0.55 * uniform01(rng);
        double sum = 0.0;
        for (std::size_t c = 0; c < n_children[j]; ++c) {
          k.children.push_back(0.2 + 0.8 * uniform01(rng));
          sum += k.children.back();
        }
        for (double& w : k.children) w /= sum;
        k.cost = with_costs && i > 0 ? 0.05 + 0.95 * uniform01(rng) : 0.0;
        menu.push_back(std::move(k));
      }
      menus[s].push_back(std::move(menu));
    }
  }
  return KernelModel(space, std::move(menus));
}

namespace {

// Solves a x = b in place; false when singular.
bool solve_square(std::vector<std::vector<double>> a, std::vector<double> b, std::vector<double>& x) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) < 1e-12) return false;
    std::swap(a[piv], a[c]);
    std::swap(b[piv], b[c]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  x.resize(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return true;
}

}  // namespace

double lp_vertex_min(const LinearProgram& lp) {
  const std::size_t n = lp.objective.size();
  std::vector<std::vector<double>> rows = lp.ge_rows;
  std::vector<double> rhs = lp.ge_rhs;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> e(n, 0.0);
    e[j] = 1.0;
    rows.push_back(e);
    rhs.push_back(lp.lower[j]);
    e[j] = -1.0;
    rows.push_back(e);
    rhs.push_back(-lp.upper[j]);
  }
  double best = std::numeric_limits<double>::quiet_NaN();
  std::vector<bool> choose(rows.size(), false);
  std::fill(choose.begin(), choose.begin() + static_cast<std::ptrdiff_t>(n), true);
  do {
    std::vector<std::vector<double>> a;
    std::vector<double> b;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (choose[i]) {
        a.push_back(rows[i]);
        b.push_back(rhs[i]);
      }
    std::vector<double> x;
    if (!solve_square(a, b, x)) continue;
    bool feasible = true;
    for (std::size_t i = 0; i < rows.size() && feasible; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < n; ++j) v += rows[i][j] * x[j];
      feasible = v >= rhs[i] - 1e-9 * std::max(1.0, std::abs(rhs[i]));
    }
    if (!feasible) continue;
    double obj = 0.0;
    for (std::size_t j = 0; j < n; ++j) obj += lp.objective[j] * x[j];
    if (std::isnan(best) || obj < best) best = obj;
  } while (std::prev_permutation(choose.begin(), choose.end()));
  return best;
}

ConditionalValue penalty_oracle(const DualFiniteUtility& u, const DensityProcess& a, double box) {
  const auto& sp = u.space();
  const int t = u.t_start(), te = u.t_end();
  std::vector<double> out;
  for (std::size_t k = 0; k < sp.atom_count(t); ++k) {
    // one variable per node (s, F_s atom) below atom k
    std::vector<std::pair<int, std::size_t>> nodes;
    for (int s = t; s <= te; ++s)
      for (std::size_t j = 0; j < sp.atom_count(s); ++j)
        if (sp.atom_of(t, sp.atoms(s)[j][0]) == k) nodes.emplace_back(s, j);
    auto coef = [&](const DensityProcess& d) {
      std::vector<double> c;
      for (const auto& [s, j] : nodes) {
        double v = 0.0;
        for (std::size_t w : sp.atoms(s)[j]) v += sp.prob(w) * d.delta(s, w);
        c.push_back(v / sp.atom_prob(t, k));
      }
      return c;
    };
    LinearProgram lp, cone;
    lp.objective = cone.objective = coef(a);
    for (const auto& sc : u.scenarios()) {
      if (sc.penalty[k] == kNegInf) continue;
      lp.ge_rows.push_back(coef(sc.density));
      lp.ge_rhs.push_back(sc.penalty[k]);
      cone.ge_rows.push_back(lp.ge_rows.back());
      cone.ge_rhs.push_back(0.0);
    }
    lp.lower.assign(nodes.size(), -box);
    lp.upper.assign(nodes.size(), box);
    cone.lower.assign(nodes.size(), -1.0);
    cone.upper.assign(nodes.size(), 1.0);
    if (lp_vertex_min(cone) < -1e-9) {
      out.push_back(kNegInf);
    } else {
      out.push_back(lp_vertex_min(lp));
    }
  }
  return ConditionalValue(t, std::move(out));
}

std::vector<AdaptedProcess> class_oracle(const AdaptedProcess& x) {
  const auto& sp = x.space();
  const std::size_t m = sp.outcome_count();
  std::vector<std::size_t> perm(m);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::set<std::vector<std::vector<double>>> seen;
  std::vector<AdaptedProcess> out;
  do {
    std::vector<std::vector<double>> rows(x.length(), std::vector<double>(m));
    for (std::size_t k = 0; k < rows.size(); ++k)
      for (std::size_t w = 0; w < m; ++w) rows[k][w] = x(x.t_start() + static_cast<int>(k), perm[w]);
    bool adapted = true;
    for (std::size_t k = 0; k < rows.size() && adapted; ++k)
      adapted = sp.is_measurable(x.t_start() + static_cast<int>(k), rows[k]);
    if (!adapted || !seen.insert(rows).second) continue;
    out.emplace_back(x.space_ptr(), x.t_start(), std::move(rows));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

double assignment_oracle(const std::vector<std::vector<double>>& w) {
  const std::size_t n = w.size(), m = w.front().size();
  std::vector<std::size_t> cols(m);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  double best = -std::numeric_limits<double>::infinity();
  do {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += w[i][cols[i]];
    best = std::max(best, v);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace dynrisk::oracle
