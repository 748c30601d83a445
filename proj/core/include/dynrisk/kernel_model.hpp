#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "dynrisk/processes.hpp"
#include "dynrisk/space.hpp"
#include "dynrisk/utility.hpp"

namespace dynrisk {

// One choice at a node (s, atom of F_s): stop there with weight q, otherwise
// move to the child atoms of F_{s+1} with the given conditional weights,
// paying cost c >= 0 (weighted by the mass reaching the node).
struct NodeKernel {
  double stop = 0.0;
  std::vector<double> children;
  double cost = 0.0;
};

// A menu of kernels at every non-terminal node. A scenario picks one kernel
// per node; picks are independent across nodes, which makes the generated
// density sets rectangular: time-consistent as utility processes and closed
// under concatenation.
class KernelModel {
 public:
  // menus[s][j] for s < T and j over the atoms of F_s. Every kernel needs
  // 0 <= stop < 1, positive child weights summing to 1, cost >= 0, and every
  // menu a zero-cost entry.
  KernelModel(SpacePtr space, std::vector<std::vector<std::vector<NodeKernel>>> menus);

  // Menus of `menu_size` random kernels; with_costs = false gives a coherent
  // model. The first kernel of every menu is free.
  static KernelModel random(SpacePtr space, std::size_t menu_size, bool with_costs, std::mt19937_64& rng);

  const FiniteFilteredSpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }

  // Scenarios of the subtree starting at time s: densities in Dᵉ_{s,T} with
  // penalty −(expected accumulated cost). Throws CapExceeded past `cap`.
  DualFiniteUtility utility_at(int s, std::size_t cap = 100000) const;
  UtilityProcess process(std::size_t cap = 100000) const;

  // Densities of the full tree from time 0, deduplicated.
  std::vector<DensityProcess> densities(std::size_t cap = 100000) const;

  // Terminal densities dQ/dP of the transition measures alone (stop weights
  // ignored), deduplicated; an m-stable set.
  std::vector<TerminalDensity> terminal_densities(std::size_t cap = 100000) const;

 private:
  struct Node {
    int time;
    std::size_t atom;
  };
  std::vector<Node> nodes_from(int s) const;
  std::size_t combination_count(const std::vector<Node>& nodes, std::size_t cap) const;
  // child atoms of (s, j) in F_{s+1}, in canonical order
  const std::vector<std::size_t>& children_of(int s, std::size_t j) const { return children_[s][j]; }

  SpacePtr space_;
  std::vector<std::vector<std::vector<NodeKernel>>> menus_;
  std::vector<std::vector<std::vector<std::size_t>>> children_;
};

}  // namespace dynrisk
