#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dynrisk/processes.hpp"
#include "dynrisk/space.hpp"

namespace dynrisk {

// One generating density of a dual-finite utility with its penalty value
// (F_t-measurable, in [-inf, 0]).
struct Scenario {
  DensityProcess density;
  ConditionalValue penalty;
};

// φ(X) = min_i ( ≺X, a_i≻_{t,T} − γ_i ) over a finite scenario list.
class DualFiniteUtility {
 public:
  // Validates: common window, every a_i in D_{t,T}, penalties at time t with
  // values in [-inf, 0] and atom-wise maximum exactly 0.
  explicit DualFiniteUtility(std::vector<Scenario> scenarios);

  // γ ≡ 0.
  static DualFiniteUtility coherent(std::vector<DensityProcess> densities);

  // Skips the penalty normalization and sign checks. Only for exercising
  // the axiom checker on broken inputs.
  static DualFiniteUtility unchecked(std::vector<Scenario> scenarios);

  const FiniteFilteredSpace& space() const { return scenarios_.front().density.space(); }
  const SpacePtr& space_ptr() const { return scenarios_.front().density.space_ptr(); }
  int t_start() const { return scenarios_.front().density.t_start(); }
  int t_end() const { return scenarios_.front().density.t_end(); }
  const std::vector<Scenario>& scenarios() const { return scenarios_; }
  bool is_coherent() const;
  // max |γ| over finite values, 0 for coherent utilities
  double penalty_scale() const;

 private:
  struct Unchecked {};
  DualFiniteUtility(std::vector<Scenario> scenarios, Unchecked);

  std::vector<Scenario> scenarios_;
};

// φ_{t,T}(X) = −(1/α) log E[exp(−α X_T) | F_t].
class EntropicUtility {
 public:
  EntropicUtility(SpacePtr space, double alpha, int t_start, int t_end);

  const FiniteFilteredSpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  double alpha() const { return alpha_; }
  int t_start() const { return t_start_; }
  int t_end() const { return t_end_; }

 private:
  SpacePtr space_;
  double alpha_;
  int t_start_;
  int t_end_;
};

// φ_{t,T}(X) = min_{f∈P} −(1/α) log( E[f exp(−α X_T) | F_t] / E[f | F_t] ).
class RobustEntropicUtility {
 public:
  RobustEntropicUtility(double alpha, std::vector<TerminalDensity> densities, int t_start, int t_end);

  const FiniteFilteredSpace& space() const { return densities_.front().space(); }
  const SpacePtr& space_ptr() const { return densities_.front().space_ptr(); }
  double alpha() const { return alpha_; }
  const std::vector<TerminalDensity>& densities() const { return densities_; }
  int t_start() const { return t_start_; }
  int t_end() const { return t_end_; }

 private:
  double alpha_;
  std::vector<TerminalDensity> densities_;
  int t_start_;
  int t_end_;
};

using UtilityFunction = std::variant<DualFiniteUtility, EntropicUtility, RobustEntropicUtility>;

int window_start(const UtilityFunction& u);
int window_end(const UtilityFunction& u);
const FiniteFilteredSpace& space_of(const UtilityFunction& u);
std::string variant_name(const UtilityFunction& u);

// φ(X). X's window must cover [t, T] of the utility.
ConditionalValue evaluate(const UtilityFunction& u, const AdaptedProcess& x);
// Ψ(X) = −φ(−X).
ConditionalValue insurance_evaluate(const UtilityFunction& u, const AdaptedProcess& x);

// One utility function per t in [first, T], member k living on [first + k, T].
class UtilityProcess {
 public:
  explicit UtilityProcess(std::vector<UtilityFunction> members);

  static UtilityProcess entropic(SpacePtr space, double alpha, int first, int horizon);
  // φ_s(X) = min_{a∈M} ≺X,a≻_{s,T} / ≺1,a≻_{s,T} for M ⊂ Dᵉ_{0,T}.
  static UtilityProcess normalized_coherent(const std::vector<DensityProcess>& set);

  int first() const { return first_; }
  int horizon() const { return first_ + static_cast<int>(members_.size()) - 1; }
  const UtilityFunction& at(int t) const;
  const std::vector<UtilityFunction>& members() const { return members_; }
  const FiniteFilteredSpace& space() const { return space_of(members_.front()); }

 private:
  std::vector<UtilityFunction> members_;
  int first_;
};

// φ_{τ,T}(X) := Σ_t φ_{t,T}(1_{τ=t} X), returned outcome-wise.
std::vector<double> evaluate_at_stopping_time(const UtilityProcess& up, const AdaptedProcess& x,
                                              const StoppingTime& tau);

// --- axioms ---------------------------------------------------------------

enum class AxiomStatus { Pass, Fail, Vacuous };

struct AxiomResult {
  std::string axiom;
  AxiomStatus status = AxiomStatus::Pass;
  std::size_t samples = 0;
  double max_violation = 0.0;
  std::string counterexample;
};

struct AxiomReport {
  std::uint64_t seed = 0;
  std::size_t sample_count = 0;
  std::vector<AxiomResult> results;

  const AxiomResult& get(const std::string& axiom) const;
  bool passes(const std::string& axiom) const { return get(axiom).status == AxiomStatus::Pass; }
};

// Axiom names: "0-locality", "1-monotonicity", "2-cash-invariance",
// "3-concavity", "4-coherence", "5-continuity" (always Vacuous),
// "6-relevance".
AxiomReport check_axioms(const UtilityFunction& u, std::size_t sample_count, std::uint64_t seed,
                         double tol = kDefaultTol);

// --- penalty ----------------------------------------------------------------

// φ^#_{t,T}(a) = ess inf over the acceptance set of ≺X,a≻_{t,T}, computed by
// one box-constrained LP per F_t atom with 10× bound escalation; atoms where
// the value keeps falling with the box report -inf. bound <= 0 selects the
// default 10^6·max(1, max|γ|).
ConditionalValue penalty(const DualFiniteUtility& u, const DensityProcess& a, double bound = 0.0);

// --- time consistency -------------------------------------------------------

struct TimeConsistencyReport {
  bool passed = true;
  bool exhaustive_stopping_times = true;
  std::size_t checks = 0;
  double max_residual = 0.0;
  // Σ_t φ_t(1_{τ=t}X) against φ_s(X) for deterministic τ ≡ s
  double max_tau_residual = 0.0;
  std::string first_failure;
  std::uint64_t seed = 0;
};

TimeConsistencyReport time_consistency_check(const UtilityProcess& up, std::size_t samples, std::uint64_t seed,
                                             double tol = kDefaultTol);

// --- attainment ---------------------------------------------------------------

struct ArgmaxDensity {
  DensityProcess a_star;
  ConditionalValue value;
  bool attained_in_set = false;
  std::vector<std::size_t> scenario_per_atom;
};

// Per F_t atom picks the first scenario maximizing ≺X,a_i≻ + γ_i and glues
// the picks on atoms.
ArgmaxDensity argmax_density(const DualFiniteUtility& u, const AdaptedProcess& x);

struct PenaltyConsistencyRow {
  std::size_t scenario = 0;
  ConditionalValue lhs;  // φ^#_t(a)
  ConditionalValue rhs;  // max_b φ^#_t(a ⊕ b) + E[φ^#_s(a) | F_t]
  double residual = 0.0;
};

struct PenaltyConsistencyReport {
  int t = 0;
  int s = 0;
  std::vector<PenaltyConsistencyRow> rows;
  double max_residual = 0.0;
};

// Residuals of the penalty recursion for every a in Q_t with θ ≡ s and A = Ω.
// Members at t and s must be dual-finite.
PenaltyConsistencyReport penalty_consistency_check(const UtilityProcess& up, int t, int s);

}  // namespace dynrisk
