#include "dynrisk/utility.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "dynrisk/error.hpp"
#include "dynrisk/simplex.hpp"

namespace dynrisk {

namespace {

void check_window(const FiniteFilteredSpace& space, int t, int t_end, const char* who) {
  if (t < 0 || t > t_end || t_end > space.horizon()) {
    throw InputError(std::string(who) + ": bad window [" + std::to_string(t) + ", " + std::to_string(t_end) + "]");
  }
}

void check_covers(const AdaptedProcess& x, const FiniteFilteredSpace& space, int t, int t_end) {
  if (!(x.space() == space)) throw InputError("evaluate: process lives on a different space");
  if (x.t_start() > t || x.t_end() < t_end) {
    throw InputError("evaluate: process window [" + std::to_string(x.t_start()) + ", " + std::to_string(x.t_end()) +
                     "] does not cover [" + std::to_string(t) + ", " + std::to_string(t_end) + "]");
  }
}

void check_scenario_shape(const std::vector<Scenario>& scenarios) {
  if (scenarios.empty()) throw InputError("dual-finite utility: no scenarios");
  const auto& first = scenarios.front().density;
  for (const auto& sc : scenarios) {
    if (!(sc.density.space() == first.space())) throw InputError("dual-finite utility: scenarios on different spaces");
    if (sc.density.t_start() != first.t_start() || sc.density.t_end() != first.t_end()) {
      throw InputError("dual-finite utility: scenario windows differ");
    }
    if (sc.penalty.time() != first.t_start() || sc.penalty.size() != first.space().atom_count(first.t_start())) {
      throw InputError("dual-finite utility: penalty must be a value per atom at the window start");
    }
  }
}

// −(1/α) log( Σ w e^{−αx} / Σ w ) over one atom, shifted for stability.
double entropic_atom(double alpha, const std::vector<double>& weights, const std::vector<double>& xs) {
  double lo = std::numeric_limits<double>::infinity();
  for (double x : xs) lo = std::min(lo, x);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += weights[i] * std::exp(-alpha * (xs[i] - lo));
    den += weights[i];
  }
  return lo - std::log(num / den) / alpha;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

// --- construction -------------------------------------------------------------

DualFiniteUtility::DualFiniteUtility(std::vector<Scenario> scenarios, Unchecked) : scenarios_(std::move(scenarios)) {
  check_scenario_shape(scenarios_);
}

DualFiniteUtility::DualFiniteUtility(std::vector<Scenario> scenarios) : scenarios_(std::move(scenarios)) {
  check_scenario_shape(scenarios_);
  const int t = t_start();
  for (std::size_t i = 0; i < scenarios_.size(); ++i) {
    const auto rep = membership(scenarios_[i].density, DensityClass::D, t);
    if (!rep.ok) throw InputError("dual-finite utility: scenario " + std::to_string(i) + " not in D: " + rep.message);
    for (double g : scenarios_[i].penalty.values()) {
      if (g > 0.0) throw InputError("dual-finite utility: positive penalty in scenario " + std::to_string(i));
    }
  }
  for (std::size_t k = 0; k < space().atom_count(t); ++k) {
    double best = kNegInf;
    for (const auto& sc : scenarios_) best = std::max(best, sc.penalty[k]);
    if (std::abs(best) > kDefaultTol) {
      throw InputError("dual-finite utility: max penalty on atom " + std::to_string(k) + " is " + fmt(best) +
                       ", expected 0");
    }
  }
}

DualFiniteUtility DualFiniteUtility::coherent(std::vector<DensityProcess> densities) {
  std::vector<Scenario> sc;
  sc.reserve(densities.size());
  for (auto& a : densities) {
    auto g = ConditionalValue::constant(a.space(), a.t_start(), 0.0);
    sc.push_back({std::move(a), std::move(g)});
  }
  return DualFiniteUtility(std::move(sc));
}

DualFiniteUtility DualFiniteUtility::unchecked(std::vector<Scenario> scenarios) {
  return DualFiniteUtility(std::move(scenarios), Unchecked{});
}

bool DualFiniteUtility::is_coherent() const {
  for (const auto& sc : scenarios_)
    for (double g : sc.penalty.values())
      if (g != 0.0) return false;
  return true;
}

double DualFiniteUtility::penalty_scale() const {
  double m = 0.0;
  for (const auto& sc : scenarios_)
    for (double g : sc.penalty.values())
      if (std::isfinite(g)) m = std::max(m, std::abs(g));
  return m;
}

EntropicUtility::EntropicUtility(SpacePtr space, double alpha, int t_start, int t_end)
    : space_(std::move(space)), alpha_(alpha), t_start_(t_start), t_end_(t_end) {
  if (!space_) throw InputError("entropic utility: null space");
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) throw InputError("entropic utility: alpha must be positive");
  check_window(*space_, t_start_, t_end_, "entropic utility");
}

RobustEntropicUtility::RobustEntropicUtility(double alpha, std::vector<TerminalDensity> densities, int t_start,
                                             int t_end)
    : alpha_(alpha), densities_(std::move(densities)), t_start_(t_start), t_end_(t_end) {
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) throw InputError("robust entropic utility: alpha must be positive");
  if (densities_.empty()) throw InputError("robust entropic utility: empty density set");
  for (const auto& f : densities_) {
    if (!(f.space() == densities_.front().space())) {
      throw InputError("robust entropic utility: densities on different spaces");
    }
  }
  check_window(space(), t_start_, t_end_, "robust entropic utility");
}

int window_start(const UtilityFunction& u) {
  return std::visit([](const auto& v) { return v.t_start(); }, u);
}

int window_end(const UtilityFunction& u) {
  return std::visit([](const auto& v) { return v.t_end(); }, u);
}

const FiniteFilteredSpace& space_of(const UtilityFunction& u) {
  return std::visit([](const auto& v) -> const FiniteFilteredSpace& { return v.space(); }, u);
}

std::string variant_name(const UtilityFunction& u) {
  switch (u.index()) {
    case 0: return "dual_finite";
    case 1: return "entropic";
    default: return "robust_entropic";
  }
}

// --- evaluation -----------------------------------------------------------------

namespace {

ConditionalValue eval_dual(const DualFiniteUtility& u, const AdaptedProcess& x) {
  const int t = u.t_start(), te = u.t_end();
  check_covers(x, u.space(), t, te);
  std::vector<double> out(u.space().atom_count(t), std::numeric_limits<double>::infinity());
  for (const auto& sc : u.scenarios()) {
    const auto p = pairing(x, sc.density, t, te);
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (sc.penalty[k] == kNegInf) continue;
      out[k] = std::min(out[k], p[k] - sc.penalty[k]);
    }
  }
  for (double v : out) {
    if (!std::isfinite(v)) throw InputError("evaluate: every scenario carries an infinite penalty on some atom");
  }
  return ConditionalValue(t, std::move(out));
}

ConditionalValue eval_entropic(const EntropicUtility& u, const AdaptedProcess& x) {
  const int t = u.t_start(), te = u.t_end();
  check_covers(x, u.space(), t, te);
  const auto& sp = u.space();
  std::vector<double> out;
  for (const auto& atom : sp.atoms(t)) {
    std::vector<double> w, xs;
    for (std::size_t o : atom) {
      w.push_back(sp.prob(o));
      xs.push_back(x(te, o));
    }
    out.push_back(entropic_atom(u.alpha(), w, xs));
  }
  return ConditionalValue(t, std::move(out));
}

ConditionalValue eval_robust(const RobustEntropicUtility& u, const AdaptedProcess& x) {
  const int t = u.t_start(), te = u.t_end();
  check_covers(x, u.space(), t, te);
  const auto& sp = u.space();
  std::vector<double> out;
  for (const auto& atom : sp.atoms(t)) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : u.densities()) {
      std::vector<double> w, xs;
      for (std::size_t o : atom) {
        w.push_back(sp.prob(o) * f[o]);
        xs.push_back(x(te, o));
      }
      best = std::min(best, entropic_atom(u.alpha(), w, xs));
    }
    out.push_back(best);
  }
  return ConditionalValue(t, std::move(out));
}

}  // namespace

ConditionalValue evaluate(const UtilityFunction& u, const AdaptedProcess& x) {
  switch (u.index()) {
    case 0: return eval_dual(std::get<0>(u), x);
    case 1: return eval_entropic(std::get<1>(u), x);
    default: return eval_robust(std::get<2>(u), x);
  }
}

ConditionalValue insurance_evaluate(const UtilityFunction& u, const AdaptedProcess& x) {
  const auto v = evaluate(u, -x);
  std::vector<double> out(v.values().begin(), v.values().end());
  for (double& d : out) d = -d;
  return ConditionalValue(v.time(), std::move(out));
}

// --- processes ------------------------------------------------------------------

UtilityProcess::UtilityProcess(std::vector<UtilityFunction> members) : members_(std::move(members)) {
  if (members_.empty()) throw InputError("utility process: no members");
  first_ = window_start(members_.front());
  const int te = window_end(members_.front());
  for (std::size_t k = 0; k < members_.size(); ++k) {
    if (window_start(members_[k]) != first_ + static_cast<int>(k) || window_end(members_[k]) != te) {
      throw InputError("utility process: member " + std::to_string(k) + " has the wrong window");
    }
    if (!(space_of(members_[k]) == space_of(members_.front()))) {
      throw InputError("utility process: members on different spaces");
    }
  }
  if (first_ + static_cast<int>(members_.size()) - 1 != te) {
    throw InputError("utility process: members must run up to the horizon");
  }
}

UtilityProcess UtilityProcess::entropic(SpacePtr space, double alpha, int first, int horizon) {
  std::vector<UtilityFunction> m;
  for (int t = first; t <= horizon; ++t) m.emplace_back(EntropicUtility(space, alpha, t, horizon));
  return UtilityProcess(std::move(m));
}

UtilityProcess UtilityProcess::normalized_coherent(const std::vector<DensityProcess>& set) {
  if (set.empty()) throw InputError("normalized_coherent: empty set");
  const int t0 = set.front().t_start(), te = set.front().t_end();
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto rep = membership(set[i], DensityClass::De, t0);
    if (!rep.ok) throw InputError("normalized_coherent: element " + std::to_string(i) + " not in De: " + rep.message);
  }
  std::vector<UtilityFunction> m;
  for (int s = t0; s <= te; ++s) {
    std::vector<DensityProcess> q;
    for (const auto& a : set) {
      auto r = normalized_restriction(a, s);
      const bool dup = std::any_of(q.begin(), q.end(), [&](const DensityProcess& b) { return b.approx_equal(r, 1e-12); });
      if (!dup) q.push_back(std::move(r));
    }
    m.emplace_back(DualFiniteUtility::coherent(std::move(q)));
  }
  return UtilityProcess(std::move(m));
}

const UtilityFunction& UtilityProcess::at(int t) const {
  if (t < first_ || t > horizon()) throw InputError("utility process: no member at t = " + std::to_string(t));
  return members_[static_cast<std::size_t>(t - first_)];
}

std::vector<double> evaluate_at_stopping_time(const UtilityProcess& up, const AdaptedProcess& x,
                                              const StoppingTime& tau) {
  const auto& sp = up.space();
  const std::size_t m = sp.outcome_count();
  if (tau.values().size() != m) throw InputError("evaluate_at_stopping_time: wrong stopping-time length");
  if (tau.min() < std::max(up.first(), x.t_start()) || tau.max() > up.horizon()) {
    throw InputError("evaluate_at_stopping_time: stopping time leaves the window");
  }
  std::vector<double> out(m, 0.0);
  for (int t = tau.min(); t <= tau.max(); ++t) {
    std::vector<bool> hit(m);
    for (std::size_t w = 0; w < m; ++w) hit[w] = tau(w) == t;
    const auto v = evaluate(up.at(t), x.restrict(t, up.horizon()).masked(Event(hit))).lift(sp);
    for (std::size_t w = 0; w < m; ++w) out[w] = ext_add(out[w], v[w]);
  }
  return out;
}

// --- axioms -----------------------------------------------------------------------

const AxiomResult& AxiomReport::get(const std::string& axiom) const {
  for (const auto& r : results)
    if (r.axiom == axiom) return r;
  throw InputError("axiom report: unknown axiom " + axiom);
}

namespace {

struct AxiomTally {
  AxiomResult r;
  double tol;

  AxiomTally(std::string name, double tol_) : tol(tol_) { r.axiom = std::move(name); }

  // records lhs >= rhs (up to a relative tolerance); violation = rhs - lhs
  void geq(double lhs, double rhs, const std::string& what) {
    const double slack = tol * std::max({1.0, std::abs(lhs), std::abs(rhs)});
    record(rhs - lhs, slack, what + ": " + fmt(lhs) + " < " + fmt(rhs));
  }
  void eq(double lhs, double rhs, const std::string& what) {
    const double slack = tol * std::max({1.0, std::abs(lhs), std::abs(rhs)});
    record(std::abs(lhs - rhs), slack, what + ": " + fmt(lhs) + " != " + fmt(rhs));
  }
  void record(double violation, double slack, const std::string& what) {
    ++r.samples;
    r.max_violation = std::max(r.max_violation, violation);
    if (violation > slack && r.status == AxiomStatus::Pass) {
      r.status = AxiomStatus::Fail;
      r.counterexample = what;
    }
  }
};

ConditionalValue random_cv(const FiniteFilteredSpace& sp, int t, std::mt19937_64& rng, double lo, double hi) {
  std::vector<double> v(sp.atom_count(t));
  for (double& d : v) d = lo + (hi - lo) * uniform01(rng);
  return ConditionalValue(t, std::move(v));
}

}  // namespace

AxiomReport check_axioms(const UtilityFunction& u, std::size_t sample_count, std::uint64_t seed, double tol) {
  AxiomReport rep;
  rep.seed = seed;
  rep.sample_count = sample_count;
  const auto& sp = space_of(u);
  const SpacePtr spp = std::visit([](const auto& v) { return v.space_ptr(); }, u);
  const int t = window_start(u), te = window_end(u);
  const std::size_t na = sp.atom_count(t);
  std::mt19937_64 rng(seed);

  AxiomTally loc("0-locality", tol), mono("1-monotonicity", tol), cash("2-cash-invariance", tol),
      conc("3-concavity", tol), coh("4-coherence", tol), rel("6-relevance", tol);

  auto coherence_case = [&](const AdaptedProcess& x, const ConditionalValue& fx, const ConditionalValue& lam,
                            const std::string& tag) {
    const auto lhs = evaluate(u, x.scaled(lam));
    for (std::size_t k = 0; k < na; ++k) coh.eq(lhs[k], lam[k] * fx[k], tag + " atom " + std::to_string(k));
  };

  for (std::size_t i = 0; i < sample_count; ++i) {
    const std::string tag = "sample " + std::to_string(i);
    const auto x = random_adapted(spp, t, te, rng, -5.0, 5.0);
    const auto y = random_adapted(spp, t, te, rng, -5.0, 5.0);
    const auto fx = evaluate(u, x);
    const auto fy = evaluate(u, y);

    std::vector<bool> in(sp.outcome_count(), false);
    std::vector<bool> atom_in(na);
    for (std::size_t k = 0; k < na; ++k) {
      atom_in[k] = (rng() & 1u) != 0;
      for (std::size_t w : sp.atoms(t)[k]) in[w] = atom_in[k];
    }
    const auto fa = evaluate(u, x.masked(Event(in)));
    for (std::size_t k = 0; k < na; ++k) {
      loc.eq(fa[k], atom_in[k] ? fx[k] : 0.0, tag + " atom " + std::to_string(k));
    }

    auto up = x;
    up += random_adapted(spp, t, te, rng, 0.0, 3.0);
    const auto fup = evaluate(u, up);
    for (std::size_t k = 0; k < na; ++k) mono.geq(fup[k], fx[k], tag + " atom " + std::to_string(k));

    const auto m = random_cv(sp, t, rng, -5.0, 5.0);
    const auto fm = evaluate(u, x.plus_cash(m));
    for (std::size_t k = 0; k < na; ++k) cash.eq(fm[k], fx[k] + m[k], tag + " atom " + std::to_string(k));

    const auto lam = random_cv(sp, t, rng, 0.0, 1.0);
    std::vector<double> comp(na);
    for (std::size_t k = 0; k < na; ++k) comp[k] = 1.0 - lam[k];
    auto mix = x.scaled(lam);
    mix += y.scaled(ConditionalValue(t, comp));
    const auto fmix = evaluate(u, mix);
    for (std::size_t k = 0; k < na; ++k) {
      conc.geq(fmix[k], lam[k] * fx[k] + comp[k] * fy[k], tag + " atom " + std::to_string(k));
    }

    coherence_case(x, fx, ConditionalValue::constant(sp, t, 2.0), tag + " lambda=2");
    coherence_case(x, fx, random_cv(sp, t, rng, 0.0, 3.0), tag + " random lambda");
  }

  for (int s = t; s <= te; ++s) {
    for (std::size_t j = 0; j < sp.atom_count(s); ++j) {
      for (double eps : {1.0, 0.1, 0.01}) {
        std::vector<std::vector<double>> rows(static_cast<std::size_t>(te - t + 1),
                                              std::vector<double>(sp.outcome_count(), 0.0));
        for (int r = s; r <= te; ++r)
          for (std::size_t w : sp.atoms(s)[j]) rows[r - t][w] = -eps;
        const auto f = evaluate(u, AdaptedProcess(spp, t, std::move(rows)));
        std::vector<bool> touched(na, false);
        for (std::size_t w : sp.atoms(s)[j]) touched[sp.atom_of(t, w)] = true;
        for (std::size_t k = 0; k < na; ++k) {
          if (!touched[k]) continue;
          // strict: φ(−ε1_A1_{[s,∞)}) < 0 on A
          ++rel.r.samples;
          rel.r.max_violation = std::max(rel.r.max_violation, f[k]);
          if (f[k] >= 0.0 && rel.r.status == AxiomStatus::Pass) {
            rel.r.status = AxiomStatus::Fail;
            rel.r.counterexample = "s=" + std::to_string(s) + " atom " + std::to_string(j) + " eps=" + fmt(eps) +
                                   ": value " + fmt(f[k]) + " on F_t atom " + std::to_string(k);
          }
        }
      }
    }
  }

  AxiomResult cont;
  cont.axiom = "5-continuity";
  cont.status = AxiomStatus::Vacuous;
  cont.counterexample = "vacuous on finite spaces";
  rep.results = {loc.r, mono.r, cash.r, conc.r, coh.r, cont, rel.r};
  return rep;
}

// --- penalty ----------------------------------------------------------------------

namespace {

// value of the per-atom LP for a given box; nullopt when infeasible
std::optional<double> penalty_lp(const std::vector<std::vector<double>>& scen_coef, const std::vector<double>& gamma,
                                 const std::vector<double>& obj, double box) {
  LinearProgram lp;
  lp.objective = obj;
  for (std::size_t i = 0; i < scen_coef.size(); ++i) {
    if (gamma[i] == kNegInf) continue;
    lp.ge_rows.push_back(scen_coef[i]);
    lp.ge_rhs.push_back(gamma[i]);
  }
  lp.lower.assign(obj.size(), -box);
  lp.upper.assign(obj.size(), box);
  const auto res = solve_lp(lp);
  if (res.status != LpStatus::Optimal) return std::nullopt;
  return res.value;
}

// weights of ≺X,a≻ on atom k as a linear form in the node values
std::vector<double> node_coefficients(const DensityProcess& a, int t, std::size_t k,
                                      const std::vector<std::pair<int, std::size_t>>& nodes) {
  const auto& sp = a.space();
  const double pk = sp.atom_prob(t, k);
  std::vector<double> c;
  c.reserve(nodes.size());
  for (const auto& [s, j] : nodes) {
    double v = 0.0;
    for (std::size_t w : sp.atoms(s)[j]) v += sp.prob(w) / pk * a.delta(s, w);
    c.push_back(v);
  }
  return c;
}

}  // namespace

ConditionalValue penalty(const DualFiniteUtility& u, const DensityProcess& a, double bound) {
  const int t = u.t_start(), te = u.t_end();
  if (!(a.space() == u.space())) throw InputError("penalty: density on a different space");
  if (a.t_start() != t || a.t_end() != te) throw InputError("penalty: density window differs from the utility's");
  const auto mem = membership(a, DensityClass::A1Plus, t);
  if (!mem.ok) throw InputError("penalty: density has negative increments: " + mem.message);
  const double m0 = bound > 0.0 ? bound : 1e6 * std::max(1.0, u.penalty_scale());
  const double drop = 1e-6 * m0;
  const auto& sp = u.space();

  std::vector<double> out;
  for (std::size_t k = 0; k < sp.atom_count(t); ++k) {
    std::vector<std::pair<int, std::size_t>> nodes;
    for (int s = t; s <= te; ++s)
      for (std::size_t j = 0; j < sp.atom_count(s); ++j)
        if (sp.atom_of(t, sp.atoms(s)[j].front()) == k) nodes.emplace_back(s, j);
    std::vector<std::vector<double>> coef;
    std::vector<double> gamma;
    for (const auto& sc : u.scenarios()) {
      coef.push_back(node_coefficients(sc.density, t, k, nodes));
      gamma.push_back(sc.penalty[k]);
    }
    const auto obj = node_coefficients(a, t, k, nodes);

    std::vector<double> vals;
    double box = m0;
    for (int round = 0; round < 4; ++round, box *= 10.0) {
      const auto v = penalty_lp(coef, gamma, obj, box);
      if (!v) throw InputError("penalty: empty acceptance set on atom " + std::to_string(k) + " (corrupted utility)");
      vals.push_back(*v);
    }
    if (vals[3] < vals[2] - drop) {
      out.push_back(kNegInf);
      continue;
    }
    std::size_t r = 0;
    while (r + 1 < vals.size() && vals[r + 1] < vals[r] - drop) ++r;
    out.push_back(vals[r]);
  }
  return ConditionalValue(t, std::move(out));
}

// --- time consistency -------------------------------------------------------------

TimeConsistencyReport time_consistency_check(const UtilityProcess& up, std::size_t samples, std::uint64_t seed,
                                             double tol) {
  TimeConsistencyReport rep;
  rep.seed = seed;
  const auto& sp = up.space();
  const SpacePtr spp = std::visit([](const auto& v) { return v.space_ptr(); }, up.members().front());
  const int te = up.horizon();
  const bool small = sp.outcome_count() <= 8 && te <= 3;
  std::mt19937_64 rng(seed);

  auto fail = [&](const std::string& what) {
    if (rep.passed) rep.first_failure = what;
    rep.passed = false;
  };

  for (int t = up.first(); t <= te; ++t) {
    std::vector<StoppingTime> thetas;
    if (small) {
      try {
        thetas = enumerate_stopping_times(sp, t, te);
      } catch (const CapExceeded&) {
        thetas.clear();
      }
    }
    if (thetas.empty()) {
      rep.exhaustive_stopping_times = false;
      for (int s = t; s <= te; ++s) thetas.push_back(StoppingTime::constant(sp, s));
    }
    for (std::size_t th = 0; th < thetas.size(); ++th) {
      const auto& theta = thetas[th];
      for (std::size_t i = 0; i < samples; ++i) {
        const auto x = random_adapted(spp, t, te, rng, -5.0, 5.0);
        const auto lhs = evaluate(up.at(t), x);
        const auto at_theta = evaluate_at_stopping_time(up, x, theta);
        auto rows = x.rows();
        for (int s = t; s <= te; ++s)
          for (std::size_t w = 0; w < sp.outcome_count(); ++w)
            if (s >= theta(w)) rows[s - t][w] = at_theta[w];
        const auto rhs = evaluate(up.at(t), AdaptedProcess(spp, t, std::move(rows)));
        ++rep.checks;
        for (std::size_t k = 0; k < lhs.size(); ++k) {
          const double r = std::abs(lhs[k] - rhs[k]);
          rep.max_residual = std::max(rep.max_residual, r);
          if (r > tol * std::max(1.0, std::abs(lhs[k]))) {
            fail("t=" + std::to_string(t) + " theta#" + std::to_string(th) + " sample " + std::to_string(i) +
                 " atom " + std::to_string(k) + ": " + fmt(lhs[k]) + " vs " + fmt(rhs[k]));
          }
        }
      }
    }
  }

  for (int s = up.first(); s <= te; ++s) {
    for (std::size_t i = 0; i < samples; ++i) {
      const auto x = random_adapted(spp, up.first(), te, rng, -5.0, 5.0);
      const auto summed = evaluate_at_stopping_time(up, x, StoppingTime::constant(sp, s));
      const auto direct = evaluate(up.at(s), x.restrict(s, te)).lift(sp);
      for (std::size_t w = 0; w < sp.outcome_count(); ++w) {
        const double r = std::abs(summed[w] - direct[w]);
        rep.max_tau_residual = std::max(rep.max_tau_residual, r);
        if (r > tol * std::max(1.0, std::abs(direct[w]))) {
          fail("tau=" + std::to_string(s) + " sample " + std::to_string(i) + " outcome " + std::to_string(w));
        }
      }
    }
  }
  return rep;
}

// --- attainment -------------------------------------------------------------------

ArgmaxDensity argmax_density(const DualFiniteUtility& u, const AdaptedProcess& x) {
  const int t = u.t_start(), te = u.t_end();
  check_covers(x, u.space(), t, te);
  const std::size_t na = u.space().atom_count(t);
  std::vector<double> best(na, kNegInf);
  std::vector<std::size_t> pick(na, 0);
  for (std::size_t i = 0; i < u.scenarios().size(); ++i) {
    const auto& sc = u.scenarios()[i];
    const auto p = pairing(x, sc.density, t, te);
    for (std::size_t k = 0; k < na; ++k) {
      const double v = ext_add(p[k], sc.penalty[k]);
      if (v > best[k]) {
        best[k] = v;
        pick[k] = i;
      }
    }
  }
  std::vector<DensityProcess> dens;
  for (const auto& sc : u.scenarios()) dens.push_back(sc.density);
  auto glued = glue_on_atoms(dens, pick, t);
  const bool in_set =
      std::any_of(dens.begin(), dens.end(), [&](const DensityProcess& d) { return d.approx_equal(glued); });
  return {std::move(glued), ConditionalValue(t, std::move(best)), in_set, std::move(pick)};
}

PenaltyConsistencyReport penalty_consistency_check(const UtilityProcess& up, int t, int s) {
  if (t > s) throw InputError("penalty_consistency_check: t > s");
  const auto* ut = std::get_if<DualFiniteUtility>(&up.at(t));
  const auto* us = std::get_if<DualFiniteUtility>(&up.at(s));
  if (!ut || !us) throw InputError("penalty_consistency_check: members at t and s must be dual-finite");
  const auto& sp = ut->space();
  const int te = ut->t_end();
  const auto theta = StoppingTime::constant(sp, s);
  const auto omega = Event::all(sp.outcome_count());

  PenaltyConsistencyReport rep;
  rep.t = t;
  rep.s = s;
  for (std::size_t i = 0; i < ut->scenarios().size(); ++i) {
    const auto& a = ut->scenarios()[i].density;
    const auto lhs = penalty(*ut, a);
    std::vector<ConditionalValue> glued;
    for (const auto& sc : us->scenarios()) {
      glued.push_back(penalty(*ut, concatenate(a, sc.density.rewindow(t, te), theta, omega)));
    }
    const auto sup = ess_sup_family(glued);
    const auto later = penalty(*us, a.rewindow(s, te)).lift(sp);
    const auto tail = cond_expect(sp, later, t);
    std::vector<double> rhs(sup.size());
    for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] = ext_add(sup[k], tail[k]);
    PenaltyConsistencyRow row{i, lhs, ConditionalValue(t, std::move(rhs)), 0.0};
    row.residual = row.lhs.max_abs_diff(row.rhs);
    rep.max_residual = std::max(rep.max_residual, row.residual);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace dynrisk
