#pragma once

#include <cstddef>
#include <vector>

#include "dynrisk/processes.hpp"
#include "dynrisk/space.hpp"

namespace dynrisk {

// Distribution of the path vector (X_t, ..., X_T): distinct paths in
// lexicographic order with their masses.
struct PathLaw {
  std::vector<std::vector<double>> paths;
  std::vector<double> masses;

  bool approx_equal(const PathLaw& other, double tol = 1e-12) const;
};

PathLaw path_law(const AdaptedProcess& x);

struct ClassOptions {
  std::size_t cap = 100000;
  // Permute paths only among outcomes of equal probability; required when
  // the space is not uniform.
  bool group_by_level = false;
  // bound on search nodes visited, dead ends included
  std::size_t node_cap = 100000000;
};

// Every adapted process on the representative's window whose path vector
// has the same law, listed in a fixed depth-first order.
struct RearrangementClass {
  AdaptedProcess representative;
  std::vector<AdaptedProcess> members;
  std::size_t representative_index = 0;
  bool grouped_by_level = false;
};

RearrangementClass enumerate_class(const AdaptedProcess& x, const ClassOptions& opts = {});

struct MaxCorrelation {
  ConditionalValue value;
  // index into the class of the first member attaining the value, per atom
  std::vector<std::size_t> argmax;
};

// Ψ_a(X̂) = ess sup over the class of ≺X̃, a≻_{t,T}, atom-wise.
MaxCorrelation max_correlation(const DensityProcess& a, const RearrangementClass& cls, int t);
MaxCorrelation max_correlation(const DensityProcess& a, const AdaptedProcess& x, int t, const ClassOptions& opts = {});

// Assignment relaxation of Ψ_a that drops adaptedness: per F_t atom, the
// outcomes of the atom are matched to distinct path slots.
ConditionalValue lap_upper_bound(const DensityProcess& a, const AdaptedProcess& x, int t,
                                 const ClassOptions& opts = {});

struct ComonotoneCertificate {
  bool comonotone = true;
  bool members_attain = true;
  bool sum_attains = true;
  // Ψ_{a0}(X̃ⁱ) − ≺X̃ⁱ, a0≻ per member and atom
  std::vector<std::vector<double>> member_residuals;
  std::vector<double> sum_residuals;
};

ComonotoneCertificate is_comonotone(const DensityProcess& a0, const std::vector<AdaptedProcess>& family,
                                    double tol = kDefaultTol, const ClassOptions& opts = {});

}  // namespace dynrisk
