#include "dynrisk/kernel_model.hpp"

#include <algorithm>
#include <cmath>

#include "dynrisk/error.hpp"

namespace dynrisk {

KernelModel::KernelModel(SpacePtr space, std::vector<std::vector<std::vector<NodeKernel>>> menus)
    : space_(std::move(space)), menus_(std::move(menus)) {
  if (!space_) throw InputError("kernel model: null space");
  const int horizon = space_->horizon();
  if (static_cast<int>(menus_.size()) != horizon) throw InputError("kernel model: need one menu level per s < T");
  children_.resize(menus_.size());
  for (int s = 0; s < horizon; ++s) {
    const std::size_t na = space_->atom_count(s);
    if (menus_[s].size() != na) throw InputError("kernel model: menu count differs from atom count at s = " + std::to_string(s));
    children_[s].resize(na);
    for (std::size_t c = 0; c < space_->atom_count(s + 1); ++c) {
      children_[s][space_->atom_of(s, space_->atoms(s + 1)[c].front())].push_back(c);
    }
    for (std::size_t j = 0; j < na; ++j) {
      const auto& menu = menus_[s][j];
      if (menu.empty()) throw InputError("kernel model: empty menu");
      bool has_free = false;
      for (const auto& k : menu) {
        if (!(k.stop >= 0.0 && k.stop < 1.0)) throw InputError("kernel model: stop weight outside [0, 1)");
        if (!(k.cost >= 0.0) || !std::isfinite(k.cost)) throw InputError("kernel model: negative cost");
        if (k.children.size() != children_[s][j].size()) throw InputError("kernel model: wrong number of child weights");
        double sum = 0.0;
        for (double w : k.children) {
          if (!(w > 0.0)) throw InputError("kernel model: child weights must be positive");
          sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw InputError("kernel model: child weights must sum to 1");
        has_free = has_free || k.cost == 0.0;
      }
      if (!has_free) throw InputError("kernel model: every menu needs a zero-cost kernel");
    }
  }
}

KernelModel KernelModel::random(SpacePtr space, std::size_t menu_size, bool with_costs, std::mt19937_64& rng) {
  if (!space) throw InputError("kernel model: null space");
  if (menu_size == 0) throw InputError("kernel model: menu size must be positive");
  std::vector<std::vector<std::vector<NodeKernel>>> menus(static_cast<std::size_t>(space->horizon()));
  for (int s = 0; s < space->horizon(); ++s) {
    std::vector<std::size_t> n_children(space->atom_count(s), 0);
    for (const auto& c : space->atoms(s + 1)) ++n_children[space->atom_of(s, c.front())];
    for (std::size_t j = 0; j < space->atom_count(s); ++j) {
      std::vector<NodeKernel> menu;
      for (std::size_t i = 0; i < menu_size; ++i) {
        NodeKernel k;
        k.stop = 0.05 + 0.55 * uniform01(rng);
        double sum = 0.0;
        for (std::size_t c = 0; c < n_children[j]; ++c) {
          k.children.push_back(0.2 + 0.8 * uniform01(rng));
          sum += k.children.back();
        }
        for (double& w : k.children) w /= sum;
        k.cost = (with_costs && i > 0) ? 0.05 + 0.95 * uniform01(rng) : 0.0;
        menu.push_back(std::move(k));
      }
      menus[s].push_back(std::move(menu));
    }
  }
  return KernelModel(std::move(space), std::move(menus));
}

std::vector<KernelModel::Node> KernelModel::nodes_from(int s) const {
  std::vector<Node> nodes;
  for (int r = s; r < space_->horizon(); ++r)
    for (std::size_t j = 0; j < space_->atom_count(r); ++j) nodes.push_back({r, j});
  return nodes;
}

std::size_t KernelModel::combination_count(const std::vector<Node>& nodes, std::size_t cap) const {
  std::size_t n = 1;
  for (const auto& nd : nodes) {
    n *= menus_[nd.time][nd.atom].size();
    if (n > cap) throw CapExceeded("kernel model: more than " + std::to_string(cap) + " scenarios");
  }
  return n;
}

DualFiniteUtility KernelModel::utility_at(int s, std::size_t cap) const {
  space_->check_time(s);
  const auto& sp = *space_;
  const int horizon = sp.horizon();
  const auto nodes = nodes_from(s);
  const std::size_t total = combination_count(nodes, cap);
  const std::size_t m = sp.outcome_count();

  std::vector<Scenario> out;
  std::vector<std::size_t> pick(nodes.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    // mass reaching each node, level by level
    std::vector<std::vector<double>> reach(static_cast<std::size_t>(horizon + 1));
    for (int r = s; r <= horizon; ++r) reach[r].assign(sp.atom_count(r), 0.0);
    std::fill(reach[s].begin(), reach[s].end(), 1.0);
    std::vector<double> gamma(sp.atom_count(s), 0.0);
    std::vector<std::vector<double>> inc(static_cast<std::size_t>(horizon - s + 1), std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& nd = nodes[i];
      const auto& k = menus_[nd.time][nd.atom][pick[i]];
      const double pi = reach[nd.time][nd.atom];
      const auto& kids = children_of(nd.time, nd.atom);
      for (std::size_t c = 0; c < kids.size(); ++c) reach[nd.time + 1][kids[c]] += pi * (1.0 - k.stop) * k.children[c];
      const std::size_t root = sp.atom_of(s, sp.atoms(nd.time)[nd.atom].front());
      gamma[root] -= pi * k.cost;
      const double cond = sp.atom_prob(nd.time, nd.atom) / sp.atom_prob(s, root);
      for (std::size_t w : sp.atoms(nd.time)[nd.atom]) inc[nd.time - s][w] = pi * k.stop / cond;
    }
    for (std::size_t j = 0; j < sp.atom_count(horizon); ++j) {
      const std::size_t root = sp.atom_of(s, sp.atoms(horizon)[j].front());
      const double cond = sp.atom_prob(horizon, j) / sp.atom_prob(s, root);
      for (std::size_t w : sp.atoms(horizon)[j]) inc[horizon - s][w] = reach[horizon][j] / cond;
    }
    DensityProcess a(space_, s, std::move(inc));
    ConditionalValue g(s, std::move(gamma));
    auto same = std::find_if(out.begin(), out.end(), [&](const Scenario& sc) { return sc.density.approx_equal(a, 1e-12); });
    if (same == out.end()) {
      out.push_back({std::move(a), std::move(g)});
    } else {
      std::vector<double> merged(same->penalty.values().begin(), same->penalty.values().end());
      for (std::size_t k = 0; k < merged.size(); ++k) merged[k] = std::max(merged[k], g[k]);
      same->penalty = ConditionalValue(s, std::move(merged));
    }

    for (std::size_t i = 0; i < pick.size(); ++i) {
      if (++pick[i] < menus_[nodes[i].time][nodes[i].atom].size()) break;
      pick[i] = 0;
    }
  }
  return DualFiniteUtility(std::move(out));
}

UtilityProcess KernelModel::process(std::size_t cap) const {
  std::vector<UtilityFunction> members;
  for (int s = 0; s <= space_->horizon(); ++s) members.emplace_back(utility_at(s, cap));
  return UtilityProcess(std::move(members));
}

std::vector<DensityProcess> KernelModel::densities(std::size_t cap) const {
  const auto u = utility_at(0, cap);
  std::vector<DensityProcess> out;
  for (const auto& sc : u.scenarios()) out.push_back(sc.density);
  return out;
}

std::vector<TerminalDensity> KernelModel::terminal_densities(std::size_t cap) const {
  const auto& sp = *space_;
  const int horizon = sp.horizon();
  const auto nodes = nodes_from(0);
  const std::size_t total = combination_count(nodes, cap);
  std::vector<TerminalDensity> out;
  std::vector<std::size_t> pick(nodes.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    std::vector<std::vector<double>> q(static_cast<std::size_t>(horizon + 1));
    for (int r = 0; r <= horizon; ++r) q[r].assign(sp.atom_count(r), 0.0);
    q[0][0] = 1.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& nd = nodes[i];
      const auto& k = menus_[nd.time][nd.atom][pick[i]];
      const auto& kids = children_of(nd.time, nd.atom);
      for (std::size_t c = 0; c < kids.size(); ++c) q[nd.time + 1][kids[c]] += q[nd.time][nd.atom] * k.children[c];
    }
    std::vector<double> h(sp.outcome_count(), 0.0);
    for (std::size_t j = 0; j < sp.atom_count(horizon); ++j)
      for (std::size_t w : sp.atoms(horizon)[j]) h[w] = q[horizon][j] / sp.atom_prob(horizon, j);
    TerminalDensity f(space_, std::move(h));
    if (std::none_of(out.begin(), out.end(), [&](const TerminalDensity& g) { return g.approx_equal(f, 1e-12); })) {
      out.push_back(std::move(f));
    }
    for (std::size_t i = 0; i < pick.size(); ++i) {
      if (++pick[i] < menus_[nodes[i].time][nodes[i].atom].size()) break;
      pick[i] = 0;
    }
  }
  return out;
}

}  // namespace dynrisk
