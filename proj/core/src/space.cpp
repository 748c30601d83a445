#include "dynrisk/space.hpp"

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "dynrisk/error.hpp"

namespace dynrisk {

double ext_add(double a, double b) {
  if ((std::isinf(a) && std::isinf(b)) && (a > 0) != (b > 0)) {
    throw InputError("ext_add: -inf + inf is undefined");
  }
  return a + b;
}

namespace {

void canonicalize(Partition& part) {
  for (auto& atom : part) std::sort(atom.begin(), atom.end());
  std::sort(part.begin(), part.end(), [](const Atom& a, const Atom& b) { return a.front() < b.front(); });
}

}  // namespace

FiniteFilteredSpace::FiniteFilteredSpace(std::vector<double> probs, std::vector<Partition> partitions)
    : probs_(std::move(probs)), partitions_(std::move(partitions)) {
  const std::size_t m = probs_.size();
  if (m == 0) throw InputError("space: outcome set is empty");
  if (partitions_.size() < 2) throw InputError("space: horizon must be at least 1");

  double total = 0.0;
  for (std::size_t w = 0; w < m; ++w) {
    if (!(probs_[w] > 0.0) || !std::isfinite(probs_[w])) {
      throw InputError("space: probability of outcome " + std::to_string(w) + " is not strictly positive");
    }
    total += probs_[w];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "space: probabilities sum to " << total << ", expected 1";
    throw InputError(os.str());
  }

  const int horizon = static_cast<int>(partitions_.size()) - 1;
  atom_index_.assign(partitions_.size(), std::vector<std::size_t>(m, m));
  atom_probs_.resize(partitions_.size());
  for (int t = 0; t <= horizon; ++t) {
    auto& part = partitions_[t];
    for (const auto& atom : part) {
      if (atom.empty()) throw InputError("space: empty atom at time " + std::to_string(t));
    }
    canonicalize(part);
    for (std::size_t k = 0; k < part.size(); ++k) {
      double p = 0.0;
      for (std::size_t w : part[k]) {
        if (w >= m) throw InputError("space: outcome index out of range at time " + std::to_string(t));
        if (atom_index_[t][w] != m) {
          throw InputError("space: outcome " + std::to_string(w) + " appears twice at time " + std::to_string(t));
        }
        atom_index_[t][w] = k;
        p += probs_[w];
      }
      atom_probs_[t].push_back(p);
    }
    for (std::size_t w = 0; w < m; ++w) {
      if (atom_index_[t][w] == m) {
        throw InputError("space: outcome " + std::to_string(w) + " not covered at time " + std::to_string(t));
      }
    }
  }
  if (partitions_[0].size() != 1) throw InputError("space: F_0 must be trivial");
  for (int t = 0; t < horizon; ++t) {
    // every atom of F_{t+1} must sit inside a single atom of F_t
    for (const auto& atom : partitions_[t + 1]) {
      const std::size_t parent = atom_index_[t][atom.front()];
      for (std::size_t w : atom) {
        if (atom_index_[t][w] != parent) {
          throw InputError("space: partition at time " + std::to_string(t + 1) + " does not refine time " +
                           std::to_string(t));
        }
      }
    }
  }
}

FiniteFilteredSpace FiniteFilteredSpace::tree(const std::vector<std::size_t>& branching, std::vector<double> probs) {
  if (branching.empty()) throw InputError("tree: need at least one period");
  std::size_t m = 1;
  for (std::size_t b : branching) {
    if (b == 0) throw InputError("tree: zero branching");
    m *= b;
  }
  if (probs.empty()) probs.assign(m, 1.0 / static_cast<double>(m));
  if (probs.size() != m) throw InputError("tree: probability vector has wrong length");

  std::vector<Partition> parts(branching.size() + 1);
  std::size_t block = m;
  for (std::size_t t = 0; t <= branching.size(); ++t) {
    if (t > 0) block /= branching[t - 1];
    for (std::size_t start = 0; start < m; start += block) {
      Atom atom(block);
      std::iota(atom.begin(), atom.end(), start);
      parts[t].push_back(std::move(atom));
    }
  }
  return FiniteFilteredSpace(std::move(probs), std::move(parts));
}

const Partition& FiniteFilteredSpace::atoms(int t) const {
  check_time(t);
  return partitions_[t];
}

std::size_t FiniteFilteredSpace::atom_of(int t, std::size_t omega) const {
  check_time(t);
  return atom_index_[t][omega];
}

double FiniteFilteredSpace::atom_prob(int t, std::size_t atom) const {
  check_time(t);
  return atom_probs_[t][atom];
}

void FiniteFilteredSpace::check_time(int t) const {
  if (t < 0 || t > horizon()) {
    throw InputError("time " + std::to_string(t) + " outside [0, " + std::to_string(horizon()) + "]");
  }
}

bool FiniteFilteredSpace::is_measurable(int t, std::span<const double> y, double tol) const {
  if (y.size() != outcome_count()) throw InputError("is_measurable: wrong vector length");
  for (const auto& atom : atoms(t)) {
    const double ref = y[atom.front()];
    for (std::size_t w : atom) {
      if (!(std::abs(y[w] - ref) <= tol)) return false;
    }
  }
  return true;
}

bool FiniteFilteredSpace::is_uniform(double tol) const {
  const double p0 = probs_.front();
  return std::all_of(probs_.begin(), probs_.end(), [&](double p) { return std::abs(p - p0) <= tol; });
}

bool FiniteFilteredSpace::operator==(const FiniteFilteredSpace& other) const {
  return probs_ == other.probs_ && partitions_ == other.partitions_;
}

// ---------------------------------------------------------------------------

ConditionalValue::ConditionalValue(int time, std::vector<double> values) : time_(time), values_(std::move(values)) {
  for (double v : values_) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw InputError("conditional value: NaN or +inf is not allowed");
    }
  }
}

ConditionalValue ConditionalValue::constant(const FiniteFilteredSpace& space, int t, double c) {
  return ConditionalValue(t, std::vector<double>(space.atom_count(t), c));
}

std::vector<double> ConditionalValue::lift(const FiniteFilteredSpace& space) const {
  if (values_.size() != space.atom_count(time_)) throw InputError("lift: value count does not match atoms");
  std::vector<double> out(space.outcome_count());
  for (std::size_t w = 0; w < out.size(); ++w) out[w] = values_[space.atom_of(time_, w)];
  return out;
}

double ConditionalValue::max_abs_diff(const ConditionalValue& other) const {
  if (time_ != other.time_ || values_.size() != other.values_.size()) {
    throw InputError("conditional values at different times or sizes");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    const double a = values_[k];
    const double b = other.values_[k];
    if (std::isinf(a) || std::isinf(b)) {
      if (a != b) return std::numeric_limits<double>::infinity();
      continue;
    }
    worst = std::max(worst, std::abs(a - b));
  }
  return worst;
}

bool ConditionalValue::has_neg_inf() const {
  return std::any_of(values_.begin(), values_.end(), [](double v) { return std::isinf(v); });
}

// ---------------------------------------------------------------------------

Event Event::of_atoms(const FiniteFilteredSpace& space, int t, const std::vector<std::size_t>& atoms) {
  std::vector<bool> members(space.outcome_count(), false);
  const auto& part = space.atoms(t);
  for (std::size_t k : atoms) {
    if (k >= part.size()) throw InputError("event: atom index out of range");
    for (std::size_t w : part[k]) members[w] = true;
  }
  return Event(std::move(members));
}

bool Event::empty() const {
  return std::none_of(members_.begin(), members_.end(), [](bool b) { return b; });
}

Event Event::complement() const {
  std::vector<bool> out(members_.size());
  for (std::size_t w = 0; w < out.size(); ++w) out[w] = !members_[w];
  return Event(std::move(out));
}

bool Event::is_measurable(const FiniteFilteredSpace& space, int t) const {
  if (members_.size() != space.outcome_count()) return false;
  for (const auto& atom : space.atoms(t)) {
    const bool ref = members_[atom.front()];
    for (std::size_t w : atom) {
      if (members_[w] != ref) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

StoppingTimeCheck check_stopping_time(const FiniteFilteredSpace& space, std::span<const int> candidate) {
  StoppingTimeCheck res;
  if (candidate.size() != space.outcome_count()) {
    res.ok = false;
    res.message = "stopping time has wrong length";
    return res;
  }
  for (std::size_t w = 0; w < candidate.size(); ++w) {
    if (candidate[w] < 0 || candidate[w] > space.horizon()) {
      res.ok = false;
      res.message = "value out of [0, T] at outcome " + std::to_string(w);
      return res;
    }
  }
  for (int s = 0; s <= space.horizon(); ++s) {
    const auto& part = space.atoms(s);
    for (std::size_t k = 0; k < part.size(); ++k) {
      const bool ref = candidate[part[k].front()] <= s;
      for (std::size_t w : part[k]) {
        if ((candidate[w] <= s) != ref) {
          res.ok = false;
          res.time = s;
          res.atom = k;
          res.message = "{theta <= " + std::to_string(s) + "} is not a union of atoms of F_" + std::to_string(s) +
                        " (atom " + std::to_string(k) + ")";
          return res;
        }
      }
    }
  }
  return res;
}

StoppingTime::StoppingTime(const FiniteFilteredSpace& space, std::vector<int> values) : values_(std::move(values)) {
  const auto check = check_stopping_time(space, values_);
  if (!check.ok) throw InputError("not a stopping time: " + check.message);
}

StoppingTime StoppingTime::constant(const FiniteFilteredSpace& space, int s) {
  space.check_time(s);
  return StoppingTime(space, std::vector<int>(space.outcome_count(), s));
}

int StoppingTime::min() const { return *std::min_element(values_.begin(), values_.end()); }
int StoppingTime::max() const { return *std::max_element(values_.begin(), values_.end()); }

std::vector<StoppingTime> enumerate_stopping_times(const FiniteFilteredSpace& space, int t_low, int t_high,
                                                   std::size_t cap) {
  space.check_time(t_low);
  space.check_time(t_high);
  if (t_low > t_high) throw InputError("enumerate_stopping_times: empty range");

  const std::size_t m = space.outcome_count();
  std::vector<StoppingTime> out;
  std::vector<int> values(m, -1);

  // At each time the outcomes not yet stopped form a union of F_s atoms;
  // every subset of those atoms may stop now.
  std::function<void(int)> recurse = [&](int s) {
    std::vector<std::size_t> alive_atoms;
    const auto& part = space.atoms(s);
    for (std::size_t k = 0; k < part.size(); ++k) {
      if (values[part[k].front()] < 0) alive_atoms.push_back(k);
    }
    if (alive_atoms.empty()) {
      if (out.size() >= cap) throw CapExceeded("stopping-time enumeration exceeds cap " + std::to_string(cap));
      out.emplace_back(space, values);
      return;
    }
    if (s == t_high) {
      for (std::size_t k : alive_atoms)
        for (std::size_t w : part[k]) values[w] = s;
      recurse(s);
      for (std::size_t k : alive_atoms)
        for (std::size_t w : part[k]) values[w] = -1;
      return;
    }
    if (alive_atoms.size() >= 63) throw CapExceeded("stopping-time enumeration: too many atoms");
    const std::uint64_t full = (std::uint64_t{1} << alive_atoms.size()) - 1;
    // all-stop first so that the constant time comes out first
    for (std::uint64_t mask = full + 1; mask-- > 0;) {
      if (s < t_low && mask != 0) continue;
      for (std::size_t j = 0; j < alive_atoms.size(); ++j) {
        if (mask >> j & 1U)
          for (std::size_t w : part[alive_atoms[j]]) values[w] = s;
      }
      recurse(s + 1);
      for (std::size_t j = 0; j < alive_atoms.size(); ++j) {
        if (mask >> j & 1U)
          for (std::size_t w : part[alive_atoms[j]]) values[w] = -1;
      }
    }
  };
  recurse(0);
  return out;
}

// ---------------------------------------------------------------------------

ConditionalValue cond_expect(const FiniteFilteredSpace& space, std::span<const double> y, int t) {
  space.check_time(t);
  if (y.size() != space.outcome_count()) throw InputError("cond_expect: wrong vector length");
  const auto& part = space.atoms(t);
  std::vector<double> values(part.size());
  for (std::size_t k = 0; k < part.size(); ++k) {
    double num = 0.0;
    bool neg_inf = false;
    for (std::size_t w : part[k]) {
      if (std::isinf(y[w]) && y[w] < 0) {
        neg_inf = true;
        continue;
      }
      num += space.prob(w) * y[w];
    }
    values[k] = neg_inf ? kNegInf : num / space.atom_prob(t, k);
  }
  return ConditionalValue(t, std::move(values));
}

namespace {

template <class Pick>
ConditionalValue fold_family(std::span<const ConditionalValue> family, Pick pick, const char* name) {
  if (family.empty()) throw InputError(std::string(name) + ": empty family");
  const int t = family.front().time();
  std::vector<double> acc(family.front().values().begin(), family.front().values().end());
  for (const auto& v : family.subspan(1)) {
    if (v.time() != t || v.size() != acc.size()) throw InputError(std::string(name) + ": mismatched times");
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] = pick(acc[k], v[k]);
  }
  return ConditionalValue(t, std::move(acc));
}

}  // namespace

ConditionalValue ess_sup_family(std::span<const ConditionalValue> family) {
  return fold_family(family, [](double a, double b) { return std::max(a, b); }, "ess_sup_family");
}

ConditionalValue ess_inf_family(std::span<const ConditionalValue> family) {
  return fold_family(family, [](double a, double b) { return std::min(a, b); }, "ess_inf_family");
}

}  // namespace dynrisk
