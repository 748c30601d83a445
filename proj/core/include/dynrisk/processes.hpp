#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dynrisk/space.hpp"

namespace dynrisk {

// Bounded adapted process on the time window [t_start, t_end]: one finite
// value per (s, outcome), constant on the atoms of F_s.
class AdaptedProcess {
 public:
  // values[s - t_start][omega]
  AdaptedProcess(SpacePtr space, int t_start, std::vector<std::vector<double>> values);

  static AdaptedProcess constant(SpacePtr space, int t_start, int t_end, double c);
  // paths[omega][s - t_start]
  static AdaptedProcess from_paths(SpacePtr space, int t_start, const std::vector<std::vector<double>>& paths);

  const FiniteFilteredSpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  int t_start() const { return t_start_; }
  int t_end() const { return t_start_ + static_cast<int>(values_.size()) - 1; }
  std::size_t length() const { return values_.size(); }

  double operator()(int s, std::size_t omega) const { return values_[s - t_start_][omega]; }
  std::span<const double> at(int s) const;
  std::vector<double> path(std::size_t omega) const;
  const std::vector<std::vector<double>>& rows() const { return values_; }

  AdaptedProcess restrict(int t0, int t1) const;

  // X + m·1_{[t_start, ∞)} with m measurable at t_start.
  AdaptedProcess plus_cash(const ConditionalValue& m) const;
  AdaptedProcess plus_cash(double m) const;
  // λ·X with λ measurable at t_start.
  AdaptedProcess scaled(const ConditionalValue& lambda) const;
  // 1_A·X; A should be measurable at t_start for the result to stay adapted.
  AdaptedProcess masked(const Event& a) const;

  AdaptedProcess operator-() const;
  AdaptedProcess& operator+=(const AdaptedProcess& other);
  AdaptedProcess& operator-=(const AdaptedProcess& other);
  AdaptedProcess& operator*=(double c);
  friend AdaptedProcess operator+(AdaptedProcess a, const AdaptedProcess& b) { return a += b; }
  friend AdaptedProcess operator-(AdaptedProcess a, const AdaptedProcess& b) { return a -= b; }
  friend AdaptedProcess operator*(double c, AdaptedProcess a) { return a *= c; }

  double max_abs_diff(const AdaptedProcess& other) const;
  bool approx_equal(const AdaptedProcess& other, double tol = kDefaultTol) const {
    return max_abs_diff(other) <= tol;
  }

 private:
  void check_compatible(const AdaptedProcess& other) const;

  SpacePtr space_;
  int t_start_ = 0;
  std::vector<std::vector<double>> values_;
};

// Density process given by its increments Δa_s on [t_start, t_end]
// (a_{t_start - 1} = 0). Construction only checks adaptedness and
// finiteness; class membership (A¹₊, D, Dᵉ) is checked by membership().
class DensityProcess {
 public:
  explicit DensityProcess(AdaptedProcess increments);
  DensityProcess(SpacePtr space, int t_start, std::vector<std::vector<double>> increments)
      : DensityProcess(AdaptedProcess(std::move(space), t_start, std::move(increments))) {}

  // Δa_s = 1/(t_end - t_start + 1) everywhere.
  static DensityProcess uniform(SpacePtr space, int t_start, int t_end);

  const AdaptedProcess& increments() const { return inc_; }
  const FiniteFilteredSpace& space() const { return inc_.space(); }
  const SpacePtr& space_ptr() const { return inc_.space_ptr(); }
  int t_start() const { return inc_.t_start(); }
  int t_end() const { return inc_.t_end(); }
  double delta(int s, std::size_t omega) const { return inc_(s, omega); }
  // a_s(ω); 0 for s < t_start.
  double cumulative(int s, std::size_t omega) const;
  // Σ_{j=s}^{t_end} Δa_j(ω); 0 for s > t_end.
  double tail(int s, std::size_t omega) const;

  // Zero-extend or truncate onto [t0, t1].
  DensityProcess rewindow(int t0, int t1) const;

  double max_abs_diff(const DensityProcess& other) const { return inc_.max_abs_diff(other.inc_); }
  bool approx_equal(const DensityProcess& other, double tol = kDefaultTol) const {
    return inc_.approx_equal(other.inc_, tol);
  }

 private:
  AdaptedProcess inc_;
};

// Strictly positive F_T-measurable density with E(h) = 1.
class TerminalDensity {
 public:
  TerminalDensity(SpacePtr space, std::vector<double> h);

  const FiniteFilteredSpace& space() const { return *space_; }
  const SpacePtr& space_ptr() const { return space_; }
  std::span<const double> values() const { return h_; }
  double operator[](std::size_t omega) const { return h_[omega]; }

  double max_abs_diff(const TerminalDensity& other) const;
  bool approx_equal(const TerminalDensity& other, double tol = kDefaultTol) const {
    return max_abs_diff(other) <= tol;
  }

 private:
  SpacePtr space_;
  std::vector<double> h_;
};

// ≺X, a≻_{t, t_end} = E(Σ_{s=t}^{t_end} X_s Δa_s | F_t).
ConditionalValue pairing(const AdaptedProcess& x, const DensityProcess& a, int t, int t_end);
inline ConditionalValue pairing(const AdaptedProcess& x, const DensityProcess& a) {
  return pairing(x, a, x.t_start(), x.t_end());
}
// ≺1, a≻_{t, t_end}
ConditionalValue total_mass(const DensityProcess& a, int t, int t_end);

// π_{τ,θ}(X)_s = 1_{τ<=s} X_{s∧θ}, on X's window.
AdaptedProcess project(const AdaptedProcess& x, const StoppingTime& tau, const StoppingTime& theta);

double sup_norm(const AdaptedProcess& x);
double a1_norm(const DensityProcess& a);

enum class DensityClass { A1Plus, D, De };

struct MembershipReport {
  bool ok = true;
  std::string condition;  // first violated condition, empty when ok
  int time = -1;
  std::size_t location = 0;  // outcome (increments, tails) or atom (normalization)
  std::string message;
};

// Membership of a in (A¹_{t,T})₊, D_{t,T} or Dᵉ_{t,T} where T = a.t_end().
MembershipReport membership(const DensityProcess& a, DensityClass cls, int t, double tol = kDefaultTol);

// a ⊕_A^θ b with tails truncated at the common window end.
DensityProcess concatenate(const DensityProcess& a, const DensityProcess& b, const StoppingTime& theta,
                           const Event& event);

// f ⊗_A^s g.
TerminalDensity paste(const TerminalDensity& f, const TerminalDensity& g, int s, const Event& event);

// a restricted to [s, t_end] and divided by ≺1,a≻_{s,t_end}; lands in D_{s,t_end}.
DensityProcess normalized_restriction(const DensityProcess& a, int s);

// All events measurable at θ, i.e. unions of the atoms {θ = s} ∩ (atom of F_s).
std::vector<Event> events_at_stopping_time(const FiniteFilteredSpace& space, const StoppingTime& theta,
                                           std::size_t cap = 1u << 20);

struct StabilityOptions {
  std::size_t cap = 1000000;  // generated elements
  double tol = kDefaultTol;
};

struct StabilityReport {
  bool stable = true;
  // false when only deterministic stopping times were tried (large spaces)
  bool exhaustive_stopping_times = true;
  std::size_t generated = 0;
  std::optional<DensityProcess> missing_density;
  std::optional<TerminalDensity> missing_terminal;
  std::string witness;  // which pair / time / event produced the missing element
};

StabilityReport stability_check(const std::vector<DensityProcess>& set, const StabilityOptions& opts = {});
StabilityReport stability_check(const std::vector<TerminalDensity>& set, const StabilityOptions& opts = {});

// On each F_t atom k, the increments of candidates[choice[k]].
DensityProcess glue_on_atoms(const std::vector<DensityProcess>& candidates, const std::vector<std::size_t>& choice,
                             int t);

// Uniform on [0, 1) from the top 53 bits.
double uniform01(std::mt19937_64& rng);

// Independent uniform values in [lo, hi) on every atom of every F_s.
AdaptedProcess random_adapted(SpacePtr space, int t0, int t1, std::mt19937_64& rng, double lo, double hi);

}  // namespace dynrisk
