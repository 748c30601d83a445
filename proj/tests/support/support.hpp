#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "dynrisk/kernel_model.hpp"
#include "dynrisk/processes.hpp"
#include "dynrisk/simplex.hpp"
#include "dynrisk/space.hpp"
#include "dynrisk/utility.hpp"

namespace dynrisk::oracle {

// Outcomes 0..M-1; every atom of F_{t-1} splits into 1 to 3 contiguous blocks.
SpacePtr random_space(std::mt19937_64& rng, std::size_t min_m, std::size_t max_m, int horizon, bool uniform);

// Strictly positive increments normalized atom by atom, so the result is in Dᵉ_{t0,t1}.
DensityProcess random_density(const SpacePtr& space, int t0, int t1, std::mt19937_64& rng);

// Values floor(U[0, levels)) per atom, so paths repeat and classes stay small.
AdaptedProcess lumpy_process(const SpacePtr& space, int t0, int t1, std::mt19937_64& rng, int levels = 3);

// X_T is one constant from {0, 1, 2}; earlier values are 2 with probability
// p_top per atom, else 0 or 1.
AdaptedProcess constant_terminal_process(const SpacePtr& space, std::mt19937_64& rng, double p_top);

// Two-kernel menus; a node at s >= 1 is silent (stop = 0 in every kernel)
// with probability p_silent.
KernelModel kernel_with_silent_nodes(const SpacePtr& space, bool with_costs, double p_silent, std::mt19937_64& rng);

// Exhaustive vertex enumeration of a box-constrained LP: every choice of n
// active rows among the constraints and box faces, solved by Gaussian
// elimination. NaN when infeasible.
double lp_vertex_min(const LinearProgram& lp);

// Penalty by vertex enumeration: an atom is -inf when some direction d in
// [-1,1]^n keeps every finite constraint (G d >= 0) and lowers the objective.
ConditionalValue penalty_oracle(const DualFiniteUtility& u, const DensityProcess& a, double box);

// All M! relabellings of the paths, kept when adapted, deduplicated.
std::vector<AdaptedProcess> class_oracle(const AdaptedProcess& x);

// Best injective row-to-column matching by trying every injection.
double assignment_oracle(const std::vector<std::vector<double>>& w);

}  // namespace dynrisk::oracle
