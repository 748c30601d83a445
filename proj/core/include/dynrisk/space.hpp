#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dynrisk {

inline constexpr double kDefaultTol = 1e-9;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Saturating addition on [-inf, +inf): -inf absorbs finite values.
// -inf + +inf has no meaning here and throws InputError.
double ext_add(double a, double b);

using Atom = std::vector<std::size_t>;
using Partition = std::vector<Atom>;

// Finite outcome set {0..M-1} with strictly positive probabilities and a
// refining sequence of partitions F_0 (trivial) ⊆ F_1 ⊆ ... ⊆ F_T.
//
// Atoms are stored in canonical form: outcomes sorted inside each atom and
// atoms sorted by their smallest outcome. Atom indices used throughout the
// library refer to that order.
class FiniteFilteredSpace {
 public:
  FiniteFilteredSpace(std::vector<double> probs, std::vector<Partition> partitions);

  // Tree with branching[s] children per node at time s (horizon =
  // branching.size()). Outcomes are the leaves in depth-first order. Uniform
  // probabilities when probs is empty.
  static FiniteFilteredSpace tree(const std::vector<std::size_t>& branching,
                                  std::vector<double> probs = {});

  std::size_t outcome_count() const { return probs_.size(); }
  int horizon() const { return static_cast<int>(partitions_.size()) - 1; }
  std::span<const double> probs() const { return probs_; }
  double prob(std::size_t omega) const { return probs_[omega]; }

  const Partition& atoms(int t) const;
  std::size_t atom_count(int t) const { return atoms(t).size(); }
  std::size_t atom_of(int t, std::size_t omega) const;
  double atom_prob(int t, std::size_t atom) const;

  // Throws InputError unless 0 <= t <= horizon().
  void check_time(int t) const;

  // True iff y is constant (within tol) on each atom of F_t.
  bool is_measurable(int t, std::span<const double> y, double tol = 0.0) const;

  bool is_uniform(double tol = 1e-12) const;

  bool operator==(const FiniteFilteredSpace& other) const;

 private:
  std::vector<double> probs_;
  std::vector<Partition> partitions_;
  std::vector<std::vector<std::size_t>> atom_index_;  // [t][omega]
  std::vector<std::vector<double>> atom_probs_;       // [t][atom]
};

using SpacePtr = std::shared_ptr<const FiniteFilteredSpace>;

inline SpacePtr make_space(FiniteFilteredSpace space) {
  return std::make_shared<const FiniteFilteredSpace>(std::move(space));
}

// F_t-measurable random variable: one value per atom of F_t. -inf is allowed
// (penalty values), +inf and NaN are rejected.
class ConditionalValue {
 public:
  ConditionalValue() = default;
  ConditionalValue(int time, std::vector<double> values);

  static ConditionalValue constant(const FiniteFilteredSpace& space, int t, double c);

  int time() const { return time_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t atom) const { return values_[atom]; }
  std::span<const double> values() const { return values_; }

  // Outcome-indexed copy.
  std::vector<double> lift(const FiniteFilteredSpace& space) const;

  // Largest atom-wise |difference|; -inf matches -inf exactly, -inf against
  // a finite value is +inf.
  double max_abs_diff(const ConditionalValue& other) const;
  bool approx_equal(const ConditionalValue& other, double tol = kDefaultTol) const {
    return max_abs_diff(other) <= tol;
  }

  bool has_neg_inf() const;

 private:
  int time_ = 0;
  std::vector<double> values_;
};

// Subset of outcomes. Measurability with respect to a given F_t (or F_θ) is
// checked where it matters, not on construction.
class Event {
 public:
  Event() = default;
  explicit Event(std::vector<bool> members) : members_(std::move(members)) {}

  static Event all(std::size_t outcome_count) { return Event(std::vector<bool>(outcome_count, true)); }
  static Event none(std::size_t outcome_count) { return Event(std::vector<bool>(outcome_count, false)); }
  // Union of the listed atoms of F_t.
  static Event of_atoms(const FiniteFilteredSpace& space, int t, const std::vector<std::size_t>& atoms);

  std::size_t size() const { return members_.size(); }
  bool contains(std::size_t omega) const { return members_[omega]; }
  bool empty() const;
  Event complement() const;

  bool is_measurable(const FiniteFilteredSpace& space, int t) const;

  bool operator==(const Event&) const = default;

 private:
  std::vector<bool> members_;
};

// Outcome-indexed integer time. The constructor validates the stopping-time
// property; use check_stopping_time for a diagnostic instead of a throw.
class StoppingTime {
 public:
  StoppingTime(const FiniteFilteredSpace& space, std::vector<int> values);
  static StoppingTime constant(const FiniteFilteredSpace& space, int s);

  int operator()(std::size_t omega) const { return values_[omega]; }
  std::span<const int> values() const { return values_; }
  int min() const;
  int max() const;
  bool is_deterministic() const { return min() == max(); }

  bool operator==(const StoppingTime&) const = default;

 private:
  std::vector<int> values_;
};

struct StoppingTimeCheck {
  bool ok = true;
  int time = -1;          // first s where {θ <= s} is not F_s-measurable
  std::size_t atom = 0;   // offending atom of F_s
  std::string message;
};

StoppingTimeCheck check_stopping_time(const FiniteFilteredSpace& space, std::span<const int> candidate);

inline bool is_stopping_time(const FiniteFilteredSpace& space, std::span<const int> candidate) {
  return check_stopping_time(space, candidate).ok;
}

// Every stopping time with values in [t_low, t_high], in a deterministic
// order (constant t_low first). Throws CapExceeded past `cap` results.
std::vector<StoppingTime> enumerate_stopping_times(const FiniteFilteredSpace& space, int t_low,
                                                   int t_high, std::size_t cap = 100000);

// E(y | F_t), one value per atom.
ConditionalValue cond_expect(const FiniteFilteredSpace& space, std::span<const double> y, int t);

// Atom-wise maximum / minimum of a non-empty family at a common time.
ConditionalValue ess_sup_family(std::span<const ConditionalValue> family);
ConditionalValue ess_inf_family(std::span<const ConditionalValue> family);

}  // namespace dynrisk
