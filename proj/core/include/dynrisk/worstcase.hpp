#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dynrisk/processes.hpp"
#include "dynrisk/rearrange.hpp"
#include "dynrisk/space.hpp"
#include "dynrisk/utility.hpp"

namespace dynrisk {

// n processes on a common space and window.
class Portfolio {
 public:
  explicit Portfolio(std::vector<AdaptedProcess> members);

  std::size_t size() const { return members_.size(); }
  const AdaptedProcess& operator[](std::size_t i) const { return members_[i]; }
  const std::vector<AdaptedProcess>& members() const { return members_; }
  int t_start() const { return members_.front().t_start(); }
  int t_end() const { return members_.front().t_end(); }
  const FiniteFilteredSpace& space() const { return members_.front().space(); }

  AdaptedProcess sum() const;
  AdaptedProcess mean() const;
  Portfolio restrict(int t0, int t1) const;

 private:
  std::vector<AdaptedProcess> members_;
};

// Any map from positions to F_t-measurable values; must be safe to call
// from several threads at once.
using Functional = std::function<ConditionalValue(const AdaptedProcess&)>;

// X ↦ Ψ(X) = −φ(−X).
Functional insurance_of(const UtilityFunction& u);

// F_{t,T}(a) = (1/n) Σ Ψ_a(Xⁱ) + φ^#(a).
ConditionalValue average_risk(const DensityProcess& a, const Portfolio& marginals, const DualFiniteUtility& u,
                              const ClassOptions& opts = {});

struct WorstScenario {
  DensityProcess a0;
  ConditionalValue value;
  std::vector<std::size_t> candidate_per_atom;
  // one candidate attains the value on every atom
  bool single_candidate = true;
  // the candidates are the generating scenarios of a coherent utility, so
  // the value is the supremum over all of D; otherwise only a lower bound
  bool exact = false;
};

WorstScenario worst_scenario(const std::vector<DensityProcess>& candidates, const Portfolio& marginals,
                             const DualFiniteUtility& u, const ClassOptions& opts = {});

struct WorstPortfolioOptions {
  std::size_t cap = 1000000;
  std::size_t workers = 1;
  double tol = kDefaultTol;
  ClassOptions classes;
  // also list every tuple attaining the supremum on all atoms
  bool collect_attaining = false;
};

struct WorstCaseResult {
  ConditionalValue sup_value;
  std::optional<Portfolio> attaining_tuple;
  bool attained_uniformly = false;
  // tuple index attaining the supremum on each atom (first in order)
  std::vector<std::size_t> per_atom_argmax;
  std::size_t search_size = 0;
  std::optional<std::size_t> attaining_index;
  std::vector<std::size_t> all_attaining;
};

// Tuple index k enumerates the class product with member 0 most significant.
std::vector<std::size_t> decode_tuple(std::size_t k, const std::vector<std::size_t>& class_sizes);
Portfolio tuple_portfolio(const std::vector<RearrangementClass>& classes, const std::vector<std::size_t>& picks);

WorstCaseResult worst_portfolio_bruteforce(const std::vector<RearrangementClass>& classes, const Functional& psi,
                                           const WorstPortfolioOptions& opts = {});
WorstCaseResult worst_portfolio_bruteforce(const Portfolio& marginals, const Functional& psi,
                                           const WorstPortfolioOptions& opts = {});
WorstCaseResult worst_portfolio_bruteforce(const Portfolio& marginals, const UtilityFunction& u,
                                           const WorstPortfolioOptions& opts = {});

// Whether `candidate` attains the worst-case supremum of psi on every atom.
struct WorstCertificate {
  bool worst = false;
  ConditionalValue sup_value;
  ConditionalValue value;
  double gap = 0.0;  // max over atoms of sup − value
};

WorstCertificate certify_worst(const Portfolio& candidate, const Functional& psi, const WorstPortfolioOptions& opts = {});

enum class PartStatus { Holds, Fails, NotApplicable };

struct DualEqualityReport {
  ConditionalValue lhs;  // sup over rearrangements of Ψ(mean)
  ConditionalValue rhs;  // max over scenarios of F(a)
  double residual = 0.0;
  bool equality_holds = false;
  PartStatus comonotone_attains = PartStatus::NotApplicable;
  std::optional<std::vector<std::size_t>> comonotone_tuple;
  double comonotone_residual = 0.0;
  std::size_t search_size = 0;
};

DualEqualityReport verify_dual_equality(const Portfolio& marginals, const DualFiniteUtility& u,
                                   const WorstPortfolioOptions& opts = {});

// Xⁱ = 1_{C1}·Bᵢ·Δa + shiftᵢ, outcome by outcome on a's window.
using Matrix = std::vector<std::vector<double>>;
Portfolio build_density_linear_portfolio(const DensityProcess& a, const std::vector<Matrix>& b,
                            const std::vector<std::vector<double>>& shifts, const Event& c1);

// X ↦ E(1_{C1} Σ_{s≥t} X_s Δa_s | F_t).
Functional weighted_expectation(const DensityProcess& a, const Event& c1, int t);

struct StageCertificate {
  int t = 0;
  WorstCertificate certificate;
};

// Certifies the restriction of the portfolio to [t, T] for every t.
std::vector<StageCertificate> certify_density_linear_portfolio(const Portfolio& x, const DensityProcess& a, const Event& c1,
                                                 const WorstPortfolioOptions& opts = {});

// stages[k] is the portfolio of time first + k, on [first + k, T].
struct AdaptedWorstProcess {
  std::vector<Portfolio> stages;
};

struct AdaptedWorstCheck {
  bool valid = true;
  std::vector<bool> stage_worst;
  bool links_hold = true;
  int failing_t = -1;
  std::size_t failing_member = 0;
  std::string message;
};

AdaptedWorstCheck check_adapted_worst_process(const AdaptedWorstProcess& candidate, const UtilityProcess& up,
                                              const WorstPortfolioOptions& opts = {});

// Depth-first search over uniformly attaining worst tuples at each stage for
// a chain satisfying the law link; stage t uses the classes of the marginals
// restricted to [t, T].
std::optional<AdaptedWorstProcess> find_adapted_worst_process(const Portfolio& marginals, const UtilityProcess& up,
                                                              const WorstPortfolioOptions& opts = {});

// Hypothesis bounds for preservation under dual-finite processes.
struct PreservationHypotheses {
  int first = 0;
  std::vector<std::vector<DensityProcess>> q;  // q[s - first]: generators of Q_s on [s, T]
  DensityProcess b;                            // on [first, T]
  std::vector<ConditionalValue> eps;           // eps[s - first], for s < T
  bool convex_hull = true;                     // Q_s is the hull of its generators

  static PreservationHypotheses derive(const UtilityProcess& up);
  // empty when every bound holds pointwise; otherwise what failed
  std::string violation() const;
};

enum class PreservationVariant { Representation, NormalizedCoherent, TwoPeriod, RobustEntropic };

struct PreservationOptions {
  WorstPortfolioOptions worst;
  std::size_t consistency_samples = 2;
  std::size_t axiom_samples = 20;
  std::uint64_t seed = 1;
};

struct PreservationReport {
  PreservationVariant variant = PreservationVariant::Representation;
  bool hypotheses_met = false;
  std::string hypothesis_failure;
  bool candidate_valid = false;
  bool preserved = false;
  std::vector<StageCertificate> stages;
  int failing_t = -1;
};

PreservationReport verify_preservation(PreservationVariant variant, const UtilityProcess& up,
                                       const AdaptedWorstProcess& candidate,
                                       const PreservationHypotheses* hyp = nullptr,
                                       const PreservationOptions& opts = {});

const char* variant_label(PreservationVariant v);

// (A·X)(ω) = A · path(ω).
AdaptedProcess apply_matrix(const Matrix& a, const AdaptedProcess& x);

struct MatrixSup {
  ConditionalValue value;
  std::vector<std::size_t> argmax;
  std::optional<std::size_t> uniform_index;
  bool directed = false;  // one matrix attains every atom
};

MatrixSup matrix_sup(const UtilityFunction& u, const AdaptedProcess& x, const std::vector<Matrix>& c);

struct MatrixCompareReport {
  bool unit_eigenvector = false;
  bool nonnegative = false;
  bool acceptance_implication = false;
  bool dominance = false;
  std::size_t acceptance_samples = 0;
  std::uint64_t seed = 0;
  bool hypotheses_met = false;
  bool conclusion_tested = false;
  bool conclusion_holds = false;
  std::optional<ConditionalValue> lhs;
  std::optional<ConditionalValue> rhs;
  double max_violation = 0.0;
  std::string failure;
};

MatrixCompareReport matrix_compare(const Matrix& a, const UtilityFunction& u, const Portfolio& x_tilde,
                                   const Portfolio& x_bar, std::size_t samples = 200, std::uint64_t seed = 1,
                                   double tol = kDefaultTol);

}  // namespace dynrisk
