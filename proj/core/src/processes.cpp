#include "dynrisk/processes.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dynrisk/error.hpp"

namespace dynrisk {

namespace {

double adapt_tol(std::span<const double> row) {
  double scale = 1.0;
  for (double v : row) scale = std::max(scale, std::abs(v));
  return 1e-12 * scale;
}

std::string where(int s, std::size_t omega) {
  return "(s=" + std::to_string(s) + ", omega=" + std::to_string(omega) + ")";
}

}  // namespace

AdaptedProcess::AdaptedProcess(SpacePtr space, int t_start, std::vector<std::vector<double>> values)
    : space_(std::move(space)), t_start_(t_start), values_(std::move(values)) {
  if (!space_) throw InputError("process: null space");
  if (values_.empty()) throw InputError("process: empty window");
  space_->check_time(t_start_);
  space_->check_time(t_end());
  for (std::size_t k = 0; k < values_.size(); ++k) {
    const int s = t_start_ + static_cast<int>(k);
    const auto& row = values_[k];
    if (row.size() != space_->outcome_count()) {
      throw InputError("process: row for s=" + std::to_string(s) + " has wrong length");
    }
    for (std::size_t w = 0; w < row.size(); ++w) {
      if (!std::isfinite(row[w])) throw InputError("process: non-finite value at " + where(s, w));
    }
    if (!space_->is_measurable(s, row, adapt_tol(row))) {
      throw InputError("process: value at time " + std::to_string(s) + " is not F_" + std::to_string(s) +
                       "-measurable");
    }
  }
}

AdaptedProcess AdaptedProcess::constant(SpacePtr space, int t_start, int t_end, double c) {
  if (t_end < t_start) throw InputError("process: empty window");
  const std::size_t m = space->outcome_count();
  return AdaptedProcess(std::move(space), t_start,
                        std::vector<std::vector<double>>(static_cast<std::size_t>(t_end - t_start + 1),
                                                         std::vector<double>(m, c)));
}

AdaptedProcess AdaptedProcess::from_paths(SpacePtr space, int t_start, const std::vector<std::vector<double>>& paths) {
  if (paths.size() != space->outcome_count() || paths.empty()) throw InputError("from_paths: wrong outcome count");
  const std::size_t len = paths.front().size();
  std::vector<std::vector<double>> rows(len, std::vector<double>(paths.size()));
  for (std::size_t w = 0; w < paths.size(); ++w) {
    if (paths[w].size() != len) throw InputError("from_paths: ragged paths");
    for (std::size_t k = 0; k < len; ++k) rows[k][w] = paths[w][k];
  }
  return AdaptedProcess(std::move(space), t_start, std::move(rows));
}

std::span<const double> AdaptedProcess::at(int s) const {
  if (s < t_start_ || s > t_end()) throw InputError("process: time " + std::to_string(s) + " outside window");
  return values_[s - t_start_];
}

std::vector<double> AdaptedProcess::path(std::size_t omega) const {
  std::vector<double> p(values_.size());
  for (std::size_t k = 0; k < values_.size(); ++k) p[k] = values_[k][omega];
  return p;
}

AdaptedProcess AdaptedProcess::restrict(int t0, int t1) const {
  if (t0 < t_start_ || t1 > t_end() || t0 > t1) {
    throw InputError("restrict: [" + std::to_string(t0) + ", " + std::to_string(t1) + "] not inside window");
  }
  return AdaptedProcess(space_, t0,
                        std::vector<std::vector<double>>(values_.begin() + (t0 - t_start_),
                                                         values_.begin() + (t1 - t_start_ + 1)));
}

AdaptedProcess AdaptedProcess::plus_cash(const ConditionalValue& m) const {
  if (m.time() != t_start_) throw InputError("plus_cash: cash must be measurable at window start");
  const auto lifted = m.lift(*space_);
  auto rows = values_;
  for (auto& row : rows)
    for (std::size_t w = 0; w < row.size(); ++w) row[w] += lifted[w];
  return AdaptedProcess(space_, t_start_, std::move(rows));
}

AdaptedProcess AdaptedProcess::plus_cash(double m) const {
  auto rows = values_;
  for (auto& row : rows)
    for (double& v : row) v += m;
  return AdaptedProcess(space_, t_start_, std::move(rows));
}

AdaptedProcess AdaptedProcess::scaled(const ConditionalValue& lambda) const {
  if (lambda.time() != t_start_) throw InputError("scaled: factor must be measurable at window start");
  const auto lifted = lambda.lift(*space_);
  auto rows = values_;
  for (auto& row : rows)
    for (std::size_t w = 0; w < row.size(); ++w) row[w] *= lifted[w];
  return AdaptedProcess(space_, t_start_, std::move(rows));
}

AdaptedProcess AdaptedProcess::masked(const Event& a) const {
  if (a.size() != space_->outcome_count()) throw InputError("masked: event has wrong size");
  auto rows = values_;
  for (auto& row : rows)
    for (std::size_t w = 0; w < row.size(); ++w)
      if (!a.contains(w)) row[w] = 0.0;
  return AdaptedProcess(space_, t_start_, std::move(rows));
}

AdaptedProcess AdaptedProcess::operator-() const {
  AdaptedProcess out = *this;
  out *= -1.0;
  return out;
}

void AdaptedProcess::check_compatible(const AdaptedProcess& other) const {
  if (!(*space_ == *other.space_)) throw InputError("processes live on different spaces");
  if (t_start_ != other.t_start_ || values_.size() != other.values_.size()) {
    throw InputError("processes have different windows");
  }
}

AdaptedProcess& AdaptedProcess::operator+=(const AdaptedProcess& other) {
  check_compatible(other);
  for (std::size_t k = 0; k < values_.size(); ++k)
    for (std::size_t w = 0; w < values_[k].size(); ++w) values_[k][w] += other.values_[k][w];
  return *this;
}

AdaptedProcess& AdaptedProcess::operator-=(const AdaptedProcess& other) {
  check_compatible(other);
  for (std::size_t k = 0; k < values_.size(); ++k)
    for (std::size_t w = 0; w < values_[k].size(); ++w) values_[k][w] -= other.values_[k][w];
  return *this;
}

AdaptedProcess& AdaptedProcess::operator*=(double c) {
  for (auto& row : values_)
    for (double& v : row) v *= c;
  return *this;
}

double AdaptedProcess::max_abs_diff(const AdaptedProcess& other) const {
  check_compatible(other);
  double worst = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k)
    for (std::size_t w = 0; w < values_[k].size(); ++w)
      worst = std::max(worst, std::abs(values_[k][w] - other.values_[k][w]));
  return worst;
}

// ---------------------------------------------------------------------------

DensityProcess::DensityProcess(AdaptedProcess increments) : inc_(std::move(increments)) {}

DensityProcess DensityProcess::uniform(SpacePtr space, int t_start, int t_end) {
  return DensityProcess(AdaptedProcess::constant(std::move(space), t_start, t_end,
                                                 1.0 / static_cast<double>(t_end - t_start + 1)));
}

double DensityProcess::cumulative(int s, std::size_t omega) const {
  double acc = 0.0;
  for (int j = t_start(); j <= std::min(s, t_end()); ++j) acc += inc_(j, omega);
  return acc;
}

double DensityProcess::tail(int s, std::size_t omega) const {
  double acc = 0.0;
  for (int j = std::max(s, t_start()); j <= t_end(); ++j) acc += inc_(j, omega);
  return acc;
}

DensityProcess DensityProcess::rewindow(int t0, int t1) const {
  if (t0 > t1) throw InputError("rewindow: empty window");
  const std::size_t m = space().outcome_count();
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(t1 - t0 + 1), std::vector<double>(m, 0.0));
  for (int s = std::max(t0, t_start()); s <= std::min(t1, t_end()); ++s) {
    const auto row = inc_.at(s);
    rows[s - t0].assign(row.begin(), row.end());
  }
  return DensityProcess(space_ptr(), t0, std::move(rows));
}

// ---------------------------------------------------------------------------

TerminalDensity::TerminalDensity(SpacePtr space, std::vector<double> h) : space_(std::move(space)), h_(std::move(h)) {
  if (!space_) throw InputError("terminal density: null space");
  if (h_.size() != space_->outcome_count()) throw InputError("terminal density: wrong length");
  double mean = 0.0;
  for (std::size_t w = 0; w < h_.size(); ++w) {
    if (!(h_[w] > 0.0) || !std::isfinite(h_[w])) {
      throw InputError("terminal density: value at outcome " + std::to_string(w) + " is not strictly positive");
    }
    mean += space_->prob(w) * h_[w];
  }
  if (std::abs(mean - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "terminal density: E(h) = " << mean << ", expected 1";
    throw InputError(os.str());
  }
}

double TerminalDensity::max_abs_diff(const TerminalDensity& other) const {
  if (h_.size() != other.h_.size()) throw InputError("terminal densities on different spaces");
  double worst = 0.0;
  for (std::size_t w = 0; w < h_.size(); ++w) worst = std::max(worst, std::abs(h_[w] - other.h_[w]));
  return worst;
}

// ---------------------------------------------------------------------------

ConditionalValue pairing(const AdaptedProcess& x, const DensityProcess& a, int t, int t_end) {
  if (t > t_end) throw InputError("pairing: t > T'");
  if (t < x.t_start() || t_end > x.t_end() || t < a.t_start() || t_end > a.t_end()) {
    throw InputError("pairing: window [" + std::to_string(t) + ", " + std::to_string(t_end) +
                     "] not covered by process and density");
  }
  if (!(x.space() == a.space())) throw InputError("pairing: different spaces");
  const std::size_t m = x.space().outcome_count();
  std::vector<double> sum(m, 0.0);
  for (int s = t; s <= t_end; ++s)
    for (std::size_t w = 0; w < m; ++w) sum[w] += x(s, w) * a.delta(s, w);
  return cond_expect(x.space(), sum, t);
}

ConditionalValue total_mass(const DensityProcess& a, int t, int t_end) {
  if (t < a.t_start() || t_end > a.t_end() || t > t_end) throw InputError("total_mass: window outside density");
  const std::size_t m = a.space().outcome_count();
  std::vector<double> sum(m, 0.0);
  for (int s = t; s <= t_end; ++s)
    for (std::size_t w = 0; w < m; ++w) sum[w] += a.delta(s, w);
  return cond_expect(a.space(), sum, t);
}

AdaptedProcess project(const AdaptedProcess& x, const StoppingTime& tau, const StoppingTime& theta) {
  const std::size_t m = x.space().outcome_count();
  if (tau.values().size() != m || theta.values().size() != m) throw InputError("project: wrong stopping-time length");
  for (std::size_t w = 0; w < m; ++w) {
    if (tau(w) > theta(w)) throw InputError("project: tau > theta at outcome " + std::to_string(w));
    if (tau(w) < x.t_start() || theta(w) > x.t_end()) {
      throw InputError("project: stopping times leave the process window");
    }
  }
  auto rows = x.rows();
  for (int s = x.t_start(); s <= x.t_end(); ++s) {
    for (std::size_t w = 0; w < m; ++w) {
      rows[s - x.t_start()][w] = s < tau(w) ? 0.0 : x(std::min(s, theta(w)), w);
    }
  }
  // adaptedness follows from the stopping-time property; the constructor asserts it
  return AdaptedProcess(x.space_ptr(), x.t_start(), std::move(rows));
}

double sup_norm(const AdaptedProcess& x) {
  double worst = 0.0;
  for (const auto& row : x.rows())
    for (double v : row) worst = std::max(worst, std::abs(v));
  return worst;
}

double a1_norm(const DensityProcess& a) {
  const auto& space = a.space();
  double acc = 0.0;
  for (int s = a.t_start(); s <= a.t_end(); ++s)
    for (std::size_t w = 0; w < space.outcome_count(); ++w) acc += space.prob(w) * std::abs(a.delta(s, w));
  return acc;
}

MembershipReport membership(const DensityProcess& a, DensityClass cls, int t, double tol) {
  MembershipReport rep;
  const auto& space = a.space();
  const std::size_t m = space.outcome_count();
  if (t < a.t_start() || t > a.t_end()) {
    rep.ok = false;
    rep.condition = "window";
    rep.message = "time " + std::to_string(t) + " outside density window";
    return rep;
  }
  for (int s = t; s <= a.t_end(); ++s) {
    for (std::size_t w = 0; w < m; ++w) {
      if (a.delta(s, w) < 0.0) {
        rep.ok = false;
        rep.condition = "nonnegative increment";
        rep.time = s;
        rep.location = w;
        rep.message = "negative increment at " + where(s, w);
        return rep;
      }
    }
  }
  if (cls == DensityClass::A1Plus) return rep;

  const auto mass = total_mass(a, t, a.t_end());
  for (std::size_t k = 0; k < mass.size(); ++k) {
    if (std::abs(mass[k] - 1.0) > tol) {
      rep.ok = false;
      rep.condition = "normalization";
      rep.time = t;
      rep.location = k;
      std::ostringstream os;
      os.precision(12);
      os << "conditional total mass " << mass[k] << " != 1 on atom " << k << " of F_" << t;
      rep.message = os.str();
      return rep;
    }
  }
  if (cls == DensityClass::D) return rep;

  for (int s = t; s <= a.t_end(); ++s) {
    for (std::size_t w = 0; w < m; ++w) {
      if (!(a.tail(s, w) > 0.0)) {
        rep.ok = false;
        rep.condition = "positive tail";
        rep.time = s;
        rep.location = w;
        rep.message = "tail sum from s=" + std::to_string(s) + " vanishes at outcome " + std::to_string(w);
        return rep;
      }
    }
  }
  return rep;
}

namespace {

bool measurable_at_stopping_time(const FiniteFilteredSpace& space, const StoppingTime& theta, const Event& ev) {
  for (int s = theta.min(); s <= theta.max(); ++s) {
    for (const auto& atom : space.atoms(s)) {
      if (theta(atom.front()) != s) continue;  // {θ = s} is a union of F_s atoms
      const bool ref = ev.contains(atom.front());
      for (std::size_t w : atom)
        if (ev.contains(w) != ref) return false;
    }
  }
  return true;
}

}  // namespace

DensityProcess concatenate(const DensityProcess& a, const DensityProcess& b, const StoppingTime& theta,
                           const Event& event) {
  if (a.t_start() != b.t_start() || a.t_end() != b.t_end()) throw InputError("concatenate: windows differ");
  if (!(a.space() == b.space())) throw InputError("concatenate: different spaces");
  const auto& space = a.space();
  const std::size_t m = space.outcome_count();
  if (event.size() != m) throw InputError("concatenate: event has wrong size");
  if (theta.min() < a.t_start() || theta.max() > a.t_end()) {
    throw InputError("concatenate: stopping time outside the density window");
  }
  if (!measurable_at_stopping_time(space, theta, event)) {
    throw InputError("concatenate: event is not F_theta-measurable");
  }
  for (const auto* d : {&a, &b}) {
    const auto rep = membership(*d, DensityClass::A1Plus, d->t_start());
    if (!rep.ok) throw InputError("concatenate: input not in A1+: " + rep.message);
  }

  // conditional tail masses at θ, per outcome
  std::vector<double> tail_a(m), tail_b(m);
  for (int s = theta.min(); s <= theta.max(); ++s) {
    std::vector<double> ya(m), yb(m);
    for (std::size_t w = 0; w < m; ++w) {
      ya[w] = a.tail(s, w);
      yb[w] = b.tail(s, w);
    }
    const auto ea = cond_expect(space, ya, s).lift(space);
    const auto eb = cond_expect(space, yb, s).lift(space);
    for (std::size_t w = 0; w < m; ++w) {
      if (theta(w) == s) {
        tail_a[w] = ea[w];
        tail_b[w] = eb[w];
      }
    }
  }

  auto rows = a.increments().rows();
  for (std::size_t w = 0; w < m; ++w) {
    const bool keep_a = !event.contains(w) || tail_b[w] == 0.0;
    if (keep_a) continue;
    const double ratio = tail_a[w] / tail_b[w];
    for (int s = theta(w); s <= a.t_end(); ++s) rows[s - a.t_start()][w] = ratio * b.delta(s, w);
  }
  DensityProcess out(a.space_ptr(), a.t_start(), std::move(rows));

  const int t0 = a.t_start();
  if (membership(a, DensityClass::D, t0).ok && membership(b, DensityClass::D, t0).ok) {
    const auto rep = membership(out, DensityClass::D, t0);
    if (!rep.ok) throw InvariantViolation("concatenate: output left D: " + rep.message);
  }
  return out;
}

TerminalDensity paste(const TerminalDensity& f, const TerminalDensity& g, int s, const Event& event) {
  const auto& space = f.space();
  if (!(space == g.space())) throw InputError("paste: different spaces");
  if (!event.is_measurable(space, s)) throw InputError("paste: event is not F_s-measurable");
  const auto ef = cond_expect(space, f.values(), s).lift(space);
  const auto eg = cond_expect(space, g.values(), s).lift(space);
  std::vector<double> out(space.outcome_count());
  for (std::size_t w = 0; w < out.size(); ++w) {
    out[w] = (event.contains(w) && eg[w] > 0.0) ? ef[w] * g[w] / eg[w] : f[w];
  }
  return TerminalDensity(f.space_ptr(), std::move(out));
}

DensityProcess normalized_restriction(const DensityProcess& a, int s) {
  const auto mass = total_mass(a, s, a.t_end());
  for (std::size_t k = 0; k < mass.size(); ++k) {
    if (!(mass[k] > 0.0)) {
      throw InputError("normalized_restriction: zero remaining mass on atom " + std::to_string(k) + " of F_" +
                       std::to_string(s));
    }
  }
  const auto lifted = mass.lift(a.space());
  std::vector<std::vector<double>> rows;
  for (int j = s; j <= a.t_end(); ++j) {
    const auto row = a.increments().at(j);
    std::vector<double> r(row.begin(), row.end());
    for (std::size_t w = 0; w < r.size(); ++w) r[w] /= lifted[w];
    rows.push_back(std::move(r));
  }
  return DensityProcess(a.space_ptr(), s, std::move(rows));
}

std::vector<Event> events_at_stopping_time(const FiniteFilteredSpace& space, const StoppingTime& theta,
                                           std::size_t cap) {
  std::vector<const Atom*> blocks;
  for (int s = theta.min(); s <= theta.max(); ++s) {
    for (const auto& atom : space.atoms(s)) {
      if (theta(atom.front()) == s) blocks.push_back(&atom);
    }
  }
  if (blocks.size() >= 63 || (std::size_t{1} << blocks.size()) > cap) {
    throw CapExceeded("events_at_stopping_time: 2^" + std::to_string(blocks.size()) + " events exceed cap");
  }
  std::vector<Event> out;
  const std::size_t count = std::size_t{1} << blocks.size();
  out.reserve(count);
  for (std::size_t mask = 0; mask < count; ++mask) {
    std::vector<bool> members(space.outcome_count(), false);
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      if (mask >> j & 1U)
        for (std::size_t w : *blocks[j]) members[w] = true;
    }
    out.emplace_back(std::move(members));
  }
  return out;
}

namespace {

template <class T>
bool contains_approx(const std::vector<T>& set, const T& x, double tol) {
  return std::any_of(set.begin(), set.end(), [&](const T& y) { return y.max_abs_diff(x) <= tol; });
}

std::string event_string(const Event& e) {
  std::string s = "{";
  for (std::size_t w = 0; w < e.size(); ++w) {
    if (e.contains(w)) s += (s.size() > 1 ? "," : "") + std::to_string(w);
  }
  return s + "}";
}

}  // namespace

StabilityReport stability_check(const std::vector<DensityProcess>& set, const StabilityOptions& opts) {
  StabilityReport rep;
  if (set.empty()) return rep;
  const auto& space = set.front().space();
  const int t0 = set.front().t_start();
  const int t1 = set.front().t_end();
  for (const auto& d : set) {
    if (d.t_start() != t0 || d.t_end() != t1) throw InputError("stability_check: densities have different windows");
  }

  std::vector<StoppingTime> times;
  if (space.outcome_count() <= 8 && space.horizon() <= 3) {
    times = enumerate_stopping_times(space, t0, t1);
  } else {
    rep.exhaustive_stopping_times = false;
    for (int s = t0; s <= t1; ++s) times.push_back(StoppingTime::constant(space, s));
  }

  for (const auto& theta : times) {
    const auto events = events_at_stopping_time(space, theta);
    for (std::size_t i = 0; i < set.size(); ++i) {
      for (std::size_t j = 0; j < set.size(); ++j) {
        for (const auto& ev : events) {
          if (++rep.generated > opts.cap) {
            throw CapExceeded("stability_check: more than " + std::to_string(opts.cap) + " generated elements");
          }
          auto c = concatenate(set[i], set[j], theta, ev);
          if (!contains_approx(set, c, opts.tol)) {
            rep.stable = false;
            std::ostringstream os;
            os << "a=" << i << " b=" << j << " theta=(";
            for (std::size_t w = 0; w < theta.values().size(); ++w) os << (w ? "," : "") << theta(w);
            os << ") A=" << event_string(ev);
            rep.witness = os.str();
            rep.missing_density = std::move(c);
            return rep;
          }
        }
      }
    }
  }
  return rep;
}

StabilityReport stability_check(const std::vector<TerminalDensity>& set, const StabilityOptions& opts) {
  StabilityReport rep;
  if (set.empty()) return rep;
  const auto& space = set.front().space();
  for (int s = 0; s <= space.horizon(); ++s) {
    const std::size_t atoms = space.atom_count(s);
    if (atoms >= 63) throw CapExceeded("stability_check: too many atoms");
    for (std::size_t mask = 0; mask < (std::size_t{1} << atoms); ++mask) {
      std::vector<std::size_t> chosen;
      for (std::size_t k = 0; k < atoms; ++k)
        if (mask >> k & 1U) chosen.push_back(k);
      const auto ev = Event::of_atoms(space, s, chosen);
      for (std::size_t i = 0; i < set.size(); ++i) {
        for (std::size_t j = 0; j < set.size(); ++j) {
          if (++rep.generated > opts.cap) {
            throw CapExceeded("stability_check: more than " + std::to_string(opts.cap) + " generated elements");
          }
          auto p = paste(set[i], set[j], s, ev);
          if (!contains_approx(set, p, opts.tol)) {
            rep.stable = false;
            rep.witness = "f=" + std::to_string(i) + " g=" + std::to_string(j) + " s=" + std::to_string(s) +
                          " A=" + event_string(ev);
            rep.missing_terminal = std::move(p);
            return rep;
          }
        }
      }
    }
  }
  return rep;
}

DensityProcess glue_on_atoms(const std::vector<DensityProcess>& candidates, const std::vector<std::size_t>& choice,
                             int t) {
  if (candidates.empty()) throw InputError("glue_on_atoms: no candidates");
  const auto& sp = candidates.front().space();
  if (choice.size() != sp.atom_count(t)) throw InputError("glue_on_atoms: one choice per atom required");
  const int t0 = candidates.front().t_start();
  const int t1 = candidates.front().t_end();
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(t1 - t0 + 1),
                                        std::vector<double>(sp.outcome_count(), 0.0));
  for (std::size_t k = 0; k < choice.size(); ++k) {
    if (choice[k] >= candidates.size()) throw InputError("glue_on_atoms: choice out of range");
    const auto& c = candidates[choice[k]];
    if (c.t_start() != t0 || c.t_end() != t1) throw InputError("glue_on_atoms: windows differ");
    for (std::size_t w : sp.atoms(t)[k]) {
      for (int s = t0; s <= t1; ++s) rows[s - t0][w] = c.delta(s, w);
    }
  }
  return DensityProcess(candidates.front().space_ptr(), t0, std::move(rows));
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

AdaptedProcess random_adapted(SpacePtr space, int t0, int t1, std::mt19937_64& rng, double lo, double hi) {
  std::vector<std::vector<double>> rows;
  for (int s = t0; s <= t1; ++s) {
    std::vector<double> row(space->outcome_count(), 0.0);
    for (const auto& atom : space->atoms(s)) {
      const double v = lo + (hi - lo) * uniform01(rng);
      for (std::size_t w : atom) row[w] = v;
    }
    rows.push_back(std::move(row));
  }
  return AdaptedProcess(std::move(space), t0, std::move(rows));
}

}  // namespace dynrisk
