#include "dynrisk/worstcase.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include <Eigen/Dense>

#include "dynrisk/error.hpp"

namespace dynrisk {

namespace {

double slack(double tol, double v) { return tol * std::max(1.0, std::abs(v)); }

bool attains(std::span<const double> v, const ConditionalValue& sup, double tol) {
  for (std::size_t k = 0; k < v.size(); ++k)
    if (v[k] < sup[k] - slack(tol, sup[k])) return false;
  return true;
}

// Runs body(lo, hi, chunk) over contiguous chunks of [0, n); rethrows the
// first exception in chunk order.
template <class Body>
void parallel_chunks(std::size_t n, std::size_t workers, Body body) {
  const std::size_t w = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::exception_ptr> errors(w);
  auto run = [&](std::size_t c) {
    try {
      body(n * c / w, n * (c + 1) / w, c);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (w == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t c = 0; c < w; ++c) threads.emplace_back(run, c);
    for (auto& th : threads) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

Portfolio::Portfolio(std::vector<AdaptedProcess> members) : members_(std::move(members)) {
  if (members_.empty()) throw InputError("portfolio: no members");
  for (const auto& m : members_) {
    if (!(m.space() == members_.front().space())) throw InputError("portfolio: members on different spaces");
    if (m.t_start() != t_start() || m.t_end() != t_end()) throw InputError("portfolio: members on different windows");
  }
}

AdaptedProcess Portfolio::sum() const {
  auto s = members_.front();
  for (std::size_t i = 1; i < members_.size(); ++i) s += members_[i];
  return s;
}

AdaptedProcess Portfolio::mean() const {
  auto s = sum();
  s *= 1.0 / static_cast<double>(members_.size());
  return s;
}

Portfolio Portfolio::restrict(int t0, int t1) const {
  std::vector<AdaptedProcess> r;
  for (const auto& m : members_) r.push_back(m.restrict(t0, t1));
  return Portfolio(std::move(r));
}

Functional insurance_of(const UtilityFunction& u) {
  return [u](const AdaptedProcess& x) { return insurance_evaluate(u, x); };
}

ConditionalValue average_risk(const DensityProcess& a, const Portfolio& marginals, const DualFiniteUtility& u,
                              const ClassOptions& opts) {
  const int t = u.t_start();
  if (marginals.t_start() != t || marginals.t_end() != u.t_end()) {
    throw InputError("average_risk: marginals must live on the utility's window");
  }
  std::vector<double> acc(u.space().atom_count(t), 0.0);
  for (const auto& x : marginals.members()) {
    const auto psi = max_correlation(a, x, t, opts).value;
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += psi[k];
  }
  // a generating scenario of a coherent utility has penalty exactly 0
  const bool generating = u.is_coherent() && std::any_of(u.scenarios().begin(), u.scenarios().end(),
                                                         [&](const Scenario& sc) { return sc.density.approx_equal(a, 0.0); });
  const auto pen = generating ? ConditionalValue::constant(u.space(), t, 0.0) : penalty(u, a);
  for (std::size_t k = 0; k < acc.size(); ++k) {
    acc[k] = ext_add(acc[k] / static_cast<double>(marginals.size()), pen[k]);
  }
  return ConditionalValue(t, std::move(acc));
}

WorstScenario worst_scenario(const std::vector<DensityProcess>& candidates, const Portfolio& marginals,
                             const DualFiniteUtility& u, const ClassOptions& opts) {
  if (candidates.empty()) throw InputError("worst_scenario: no candidates");
  const int t = u.t_start();
  const std::size_t na = u.space().atom_count(t);
  std::vector<double> best(na, kNegInf);
  std::vector<std::size_t> pick(na, 0);
  std::vector<ConditionalValue> values;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    values.push_back(average_risk(candidates[i], marginals, u, opts));
    for (std::size_t k = 0; k < na; ++k) {
      if (values.back()[k] > best[k] || i == 0) {
        best[k] = values.back()[k];
        pick[k] = i;
      }
    }
  }
  bool single = false;
  for (std::size_t i = 0; i < candidates.size() && !single; ++i) {
    single = true;
    for (std::size_t k = 0; k < na; ++k) single = single && values[i][k] >= best[k];
  }
  bool exact = u.is_coherent();
  for (const auto& c : candidates) {
    exact = exact && std::any_of(u.scenarios().begin(), u.scenarios().end(),
                                 [&](const Scenario& sc) { return sc.density.approx_equal(c, 0.0); });
  }
  exact = exact && candidates.size() == u.scenarios().size();
  return {glue_on_atoms(candidates, pick, t), ConditionalValue(t, std::move(best)), std::move(pick), single, exact};
}

std::vector<std::size_t> decode_tuple(std::size_t k, const std::vector<std::size_t>& class_sizes) {
  std::vector<std::size_t> picks(class_sizes.size(), 0);
  for (std::size_t i = class_sizes.size(); i-- > 0;) {
    picks[i] = k % class_sizes[i];
    k /= class_sizes[i];
  }
  return picks;
}

Portfolio tuple_portfolio(const std::vector<RearrangementClass>& classes, const std::vector<std::size_t>& picks) {
  std::vector<AdaptedProcess> m;
  for (std::size_t i = 0; i < classes.size(); ++i) m.push_back(classes[i].members.at(picks[i]));
  return Portfolio(std::move(m));
}

WorstCaseResult worst_portfolio_bruteforce(const std::vector<RearrangementClass>& classes, const Functional& psi,
                                           const WorstPortfolioOptions& opts) {
  if (classes.empty()) throw InputError("worst_portfolio: no marginals");
  std::vector<std::size_t> sizes;
  std::size_t total = 1;
  for (const auto& c : classes) {
    sizes.push_back(c.members.size());
    total *= c.members.size();
    if (total > opts.cap) {
      throw CapExceeded("worst_portfolio: more than " + std::to_string(opts.cap) +
                        " tuples; bound the search with lap_upper_bound instead");
    }
  }
  const auto& sp = classes.front().representative.space();
  const int t = classes.front().representative.t_start();
  const std::size_t na = sp.atom_count(t);
  const double inv_n = 1.0 / static_cast<double>(classes.size());

  auto value_of = [&](std::size_t k) {
    const auto picks = decode_tuple(k, sizes);
    auto mean = classes[0].members[picks[0]];
    for (std::size_t i = 1; i < classes.size(); ++i) mean += classes[i].members[picks[i]];
    mean *= inv_n;
    return psi(mean);
  };

  std::vector<double> values(total * na);
  const std::size_t w = std::max<std::size_t>(1, std::min(opts.workers, total));
  std::vector<std::vector<double>> chunk_best(w, std::vector<double>(na, kNegInf));
  std::vector<std::vector<std::size_t>> chunk_arg(w, std::vector<std::size_t>(na, 0));
  parallel_chunks(total, w, [&](std::size_t lo, std::size_t hi, std::size_t c) {
    for (std::size_t k = lo; k < hi; ++k) {
      const auto v = value_of(k);
      if (v.size() != na || v.time() != t) throw InputError("worst_portfolio: functional returned the wrong shape");
      for (std::size_t j = 0; j < na; ++j) {
        values[k * na + j] = v[j];
        if (v[j] > chunk_best[c][j] || k == lo) {
          chunk_best[c][j] = v[j];
          chunk_arg[c][j] = k;
        }
      }
    }
  });

  WorstCaseResult res;
  res.search_size = total;
  std::vector<double> best(na, kNegInf);
  res.per_atom_argmax.assign(na, 0);
  for (std::size_t c = 0; c < w; ++c) {
    for (std::size_t j = 0; j < na; ++j) {
      if (chunk_best[c][j] > best[j] || c == 0) {
        best[j] = chunk_best[c][j];
        res.per_atom_argmax[j] = chunk_arg[c][j];
      }
    }
  }
  res.sup_value = ConditionalValue(t, std::move(best));
  for (std::size_t k = 0; k < total; ++k) {
    if (!attains(std::span<const double>(values.data() + k * na, na), res.sup_value, opts.tol)) continue;
    if (!res.attaining_index) res.attaining_index = k;
    if (!opts.collect_attaining) break;
    res.all_attaining.push_back(k);
  }
  if (res.attaining_index) {
    res.attained_uniformly = true;
    res.attaining_tuple = tuple_portfolio(classes, decode_tuple(*res.attaining_index, sizes));
  }
  return res;
}

WorstCaseResult worst_portfolio_bruteforce(const Portfolio& marginals, const Functional& psi,
                                           const WorstPortfolioOptions& opts) {
  std::vector<RearrangementClass> classes;
  for (const auto& m : marginals.members()) classes.push_back(enumerate_class(m, opts.classes));
  return worst_portfolio_bruteforce(classes, psi, opts);
}

WorstCaseResult worst_portfolio_bruteforce(const Portfolio& marginals, const UtilityFunction& u,
                                           const WorstPortfolioOptions& opts) {
  if (marginals.t_start() != window_start(u) || marginals.t_end() != window_end(u)) {
    throw InputError("worst_portfolio: marginals must live on the utility's window");
  }
  return worst_portfolio_bruteforce(marginals, insurance_of(u), opts);
}

WorstCertificate certify_worst(const Portfolio& candidate, const Functional& psi, const WorstPortfolioOptions& opts) {
  const auto wc = worst_portfolio_bruteforce(candidate, psi, opts);
  WorstCertificate cert;
  cert.value = psi(candidate.mean());
  cert.gap = 0.0;
  cert.worst = true;
  for (std::size_t k = 0; k < cert.value.size(); ++k) {
    cert.gap = std::max(cert.gap, wc.sup_value[k] - cert.value[k]);
    if (cert.value[k] < wc.sup_value[k] - slack(opts.tol, wc.sup_value[k])) cert.worst = false;
  }
  cert.sup_value = wc.sup_value;
  return cert;
}

// --- dual equality ------------------------------------------------------------------

DualEqualityReport verify_dual_equality(const Portfolio& marginals, const DualFiniteUtility& u,
                                   const WorstPortfolioOptions& opts) {
  if (!u.is_coherent()) throw InputError("verify_dual_equality: utility must be coherent");
  const int t = u.t_start();
  std::vector<RearrangementClass> classes;
  for (const auto& m : marginals.members()) classes.push_back(enumerate_class(m, opts.classes));
  const UtilityFunction uf = u;
  const auto wc = worst_portfolio_bruteforce(classes, insurance_of(uf), opts);
  std::vector<DensityProcess> cands;
  for (const auto& sc : u.scenarios()) cands.push_back(sc.density);
  const auto ws = worst_scenario(cands, marginals, u, opts.classes);

  DualEqualityReport rep;
  rep.lhs = wc.sup_value;
  rep.rhs = ws.value;
  rep.search_size = wc.search_size;
  rep.residual = rep.lhs.max_abs_diff(rep.rhs);
  rep.equality_holds = true;
  for (std::size_t k = 0; k < rep.lhs.size(); ++k)
    if (std::abs(rep.lhs[k] - rep.rhs[k]) > slack(opts.tol, rep.lhs[k])) rep.equality_holds = false;

  // members attaining Ψ_{a0} on every atom, per marginal
  std::vector<std::vector<std::size_t>> good(classes.size());
  std::size_t product = 1;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto mc = max_correlation(ws.a0, classes[i], t);
    for (std::size_t j = 0; j < classes[i].members.size(); ++j) {
      if (attains(pairing(classes[i].members[j], ws.a0, t, u.t_end()).values(), mc.value, opts.tol)) good[i].push_back(j);
    }
    product *= good[i].size();
    if (product == 0 || product > opts.cap) return rep;
  }
  std::vector<std::size_t> gsizes;
  for (const auto& g : good) gsizes.push_back(g.size());
  for (std::size_t k = 0; k < product; ++k) {
    const auto sel = decode_tuple(k, gsizes);
    std::vector<std::size_t> picks(sel.size());
    for (std::size_t i = 0; i < sel.size(); ++i) picks[i] = good[i][sel[i]];
    const auto pf = tuple_portfolio(classes, picks);
    const auto s = pf.sum();
    const auto psi_sum = max_correlation(ws.a0, s, t, opts.classes).value;
    if (!attains(pairing(s, ws.a0, t, u.t_end()).values(), psi_sum, opts.tol)) continue;
    rep.comonotone_tuple = picks;
    const auto v = insurance_evaluate(uf, pf.mean());
    rep.comonotone_residual = v.max_abs_diff(wc.sup_value);
    rep.comonotone_attains = attains(v.values(), wc.sup_value, opts.tol) ? PartStatus::Holds : PartStatus::Fails;
    break;
  }
  return rep;
}

// --- density-linear portfolios --------------------------------------------------------------------

Portfolio build_density_linear_portfolio(const DensityProcess& a, const std::vector<Matrix>& b,
                            const std::vector<std::vector<double>>& shifts, const Event& c1) {
  const auto& sp = a.space();
  const std::size_t len = static_cast<std::size_t>(a.t_end() - a.t_start() + 1);
  if (b.empty() || b.size() != shifts.size()) throw InputError("portfolio: need one matrix and one shift per member");
  if (c1.size() != sp.outcome_count()) throw InputError("portfolio: event has wrong size");
  std::vector<AdaptedProcess> members;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i].size() != len || shifts[i].size() != len) throw InputError("portfolio: dimensions must match the window");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(len));
    for (std::size_t r = 0; r < len; ++r) {
      if (b[i][r].size() != len) throw InputError("portfolio: matrix is not square");
      for (std::size_t c = 0; c < len; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = b[i][r][c];
    }
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10) {
      throw InputError("portfolio: matrix " + std::to_string(i) + " is not positive semidefinite");
    }
    std::vector<std::vector<double>> rows(len, std::vector<double>(sp.outcome_count(), 0.0));
    for (std::size_t w = 0; w < sp.outcome_count(); ++w) {
      for (std::size_t r = 0; r < len; ++r) {
        double v = shifts[i][r];
        if (c1.contains(w))
          for (std::size_t c = 0; c < len; ++c) v += b[i][r][c] * a.delta(a.t_start() + static_cast<int>(c), w);
        rows[r][w] = v;
      }
    }
    try {
      members.emplace_back(a.space_ptr(), a.t_start(), std::move(rows));
    } catch (const InputError& e) {
      throw InputError(std::string("portfolio: member is not adapted: ") + e.what());
    }
  }
  return Portfolio(std::move(members));
}

Functional weighted_expectation(const DensityProcess& a, const Event& c1, int t) {
  return [a, c1, t](const AdaptedProcess& x) {
    if (x.t_start() != t) throw InputError("weighted_expectation: process must start at t");
    std::vector<double> acc(x.space().outcome_count(), 0.0);
    for (int s = t; s <= x.t_end(); ++s)
      for (std::size_t w = 0; w < acc.size(); ++w)
        if (c1.contains(w)) acc[w] += x(s, w) * a.delta(s, w);
    return cond_expect(x.space(), acc, t);
  };
}

std::vector<StageCertificate> certify_density_linear_portfolio(const Portfolio& x, const DensityProcess& a, const Event& c1,
                                                 const WorstPortfolioOptions& opts) {
  std::vector<StageCertificate> out;
  for (int t = x.t_start(); t <= x.t_end(); ++t) {
    out.push_back({t, certify_worst(x.restrict(t, x.t_end()), weighted_expectation(a, c1, t), opts)});
  }
  return out;
}

// --- adapted worst portfolio processes ------------------------------------------------

namespace {

// X^{t,i} ∼ (X^{t,i}_t, X^{t+1,i}_{t+1..T})
bool law_link(const AdaptedProcess& cur, const AdaptedProcess& next) {
  auto rows = next.rows();
  rows.insert(rows.begin(), cur.rows().front());
  const AdaptedProcess spliced(cur.space_ptr(), cur.t_start(), std::move(rows));
  return path_law(cur).approx_equal(path_law(spliced));
}

}  // namespace

AdaptedWorstCheck check_adapted_worst_process(const AdaptedWorstProcess& candidate, const UtilityProcess& up,
                                              const WorstPortfolioOptions& opts) {
  AdaptedWorstCheck chk;
  if (candidate.stages.empty()) throw InputError("adapted worst process: no stages");
  const int first = candidate.stages.front().t_start();
  for (std::size_t k = 0; k < candidate.stages.size(); ++k) {
    const auto& st = candidate.stages[k];
    const int t = first + static_cast<int>(k);
    if (st.t_start() != t || st.t_end() != up.horizon() || st.size() != candidate.stages.front().size()) {
      throw InputError("adapted worst process: stage " + std::to_string(t) + " has the wrong shape");
    }
    const bool worst = certify_worst(st, insurance_of(up.at(t)), opts).worst;
    chk.stage_worst.push_back(worst);
    if (!worst && chk.valid) {
      chk.valid = false;
      chk.failing_t = t;
      chk.message = "stage " + std::to_string(t) + " is not a worst portfolio";
    }
  }
  for (std::size_t k = 0; k + 1 < candidate.stages.size(); ++k) {
    for (std::size_t i = 0; i < candidate.stages[k].size(); ++i) {
      if (law_link(candidate.stages[k][i], candidate.stages[k + 1][i])) continue;
      if (chk.links_hold) {
        chk.links_hold = false;
        if (chk.valid) {
          chk.failing_t = first + static_cast<int>(k);
          chk.failing_member = i;
          chk.message = "law link broken at t=" + std::to_string(chk.failing_t) + " member " + std::to_string(i);
        }
      }
      chk.valid = false;
    }
  }
  return chk;
}

std::optional<AdaptedWorstProcess> find_adapted_worst_process(const Portfolio& marginals, const UtilityProcess& up,
                                                              const WorstPortfolioOptions& opts) {
  const int first = marginals.t_start();
  const int te = up.horizon();
  if (marginals.t_end() != te || first < up.first()) throw InputError("find_adapted_worst_process: window mismatch");
  auto o = opts;
  o.collect_attaining = true;
  std::vector<std::vector<RearrangementClass>> classes;
  std::vector<std::vector<std::size_t>> sizes;
  std::vector<std::vector<std::size_t>> attaining;
  for (int t = first; t <= te; ++t) {
    std::vector<RearrangementClass> cl;
    std::vector<std::size_t> sz;
    for (const auto& m : marginals.members()) {
      cl.push_back(enumerate_class(m.restrict(t, te), opts.classes));
      sz.push_back(cl.back().members.size());
    }
    attaining.push_back(worst_portfolio_bruteforce(cl, insurance_of(up.at(t)), o).all_attaining);
    if (attaining.back().empty()) return std::nullopt;
    classes.push_back(std::move(cl));
    sizes.push_back(std::move(sz));
  }

  const std::size_t stages = classes.size();
  std::vector<std::size_t> pos(stages, 0);
  std::size_t visited = 0;
  std::size_t k = 0;
  // iterative depth-first search over attaining tuples, stage by stage
  while (true) {
    if (pos[k] == attaining[k].size()) {
      if (k == 0) return std::nullopt;
      pos[k] = 0;
      ++pos[--k];
      continue;
    }
    if (++visited > opts.cap) throw CapExceeded("find_adapted_worst_process: search cap exceeded");
    bool ok = true;
    if (k > 0) {
      const auto prev = decode_tuple(attaining[k - 1][pos[k - 1]], sizes[k - 1]);
      const auto cur = decode_tuple(attaining[k][pos[k]], sizes[k]);
      for (std::size_t i = 0; i < prev.size() && ok; ++i) {
        ok = law_link(classes[k - 1][i].members[prev[i]], classes[k][i].members[cur[i]]);
      }
    }
    if (!ok) {
      ++pos[k];
      continue;
    }
    if (k + 1 == stages) break;
    ++k;
  }
  AdaptedWorstProcess out;
  for (std::size_t s = 0; s < stages; ++s) {
    out.stages.push_back(tuple_portfolio(classes[s], decode_tuple(attaining[s][pos[s]], sizes[s])));
  }
  return out;
}

// --- preservation -------------------------------------------------------------------

PreservationHypotheses PreservationHypotheses::derive(const UtilityProcess& up) {
  const auto& sp = up.space();
  const int first = up.first(), te = up.horizon();
  std::vector<std::vector<DensityProcess>> q;
  for (int s = first; s <= te; ++s) {
    const auto* u = std::get_if<DualFiniteUtility>(&up.at(s));
    if (!u) throw InputError("preservation hypotheses: every member must be dual-finite");
    std::vector<DensityProcess> gens;
    for (const auto& sc : u->scenarios()) gens.push_back(sc.density);
    q.push_back(std::move(gens));
  }
  const std::size_t m = sp.outcome_count();
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(te - first + 1), std::vector<double>(m, 0.0));
  for (int s = first; s <= te; ++s)
    for (const auto& a : q[s - first])
      for (int k = s; k <= te; ++k)
        for (std::size_t w = 0; w < m; ++w) rows[k - first][w] = std::max(rows[k - first][w], a.delta(k, w));
  DensityProcess b(std::get<0>(up.at(first)).space_ptr(), first, std::move(rows));
  std::vector<ConditionalValue> eps;
  for (int s = first; s < te; ++s) {
    std::vector<double> e(sp.atom_count(s), std::numeric_limits<double>::infinity());
    for (const auto& a : q[s - first])
      for (std::size_t w = 0; w < m; ++w) {
        const std::size_t k = sp.atom_of(s, w);
        e[k] = std::min(e[k], a.tail(s + 1, w));
      }
    eps.emplace_back(s, std::move(e));
  }
  return {first, std::move(q), std::move(b), std::move(eps), true};
}

std::string PreservationHypotheses::violation() const {
  if (q.empty()) return "no scenario families";
  const auto& sp = b.space();
  const int te = b.t_end();
  if (b.t_start() != first || static_cast<int>(q.size()) != te - first + 1 ||
      static_cast<int>(eps.size()) != te - first) {
    return "families, bound and tail floors do not cover [first, T]";
  }
  for (int s = first; s <= te; ++s) {
    if (q[s - first].empty()) return "Q_" + std::to_string(s) + " is empty";
    for (std::size_t i = 0; i < q[s - first].size(); ++i) {
      const auto& a = q[s - first][i];
      const std::string who = "Q_" + std::to_string(s) + " element " + std::to_string(i);
      if (a.t_start() != s || a.t_end() != te) return who + " has the wrong window";
      const auto mem = membership(a, DensityClass::De, s);
      if (!mem.ok) return who + " is not in De: " + mem.message;
      for (int k = s; k <= te; ++k)
        for (std::size_t w = 0; w < sp.outcome_count(); ++w)
          if (a.delta(k, w) > b.delta(k, w) + 1e-12) return who + " exceeds the bound b at time " + std::to_string(k);
      if (s == te) continue;
      const auto& e = eps[s - first];
      for (std::size_t w = 0; w < sp.outcome_count(); ++w) {
        const double floor = e[sp.atom_of(s, w)];
        if (!(floor > 0.0)) return "eps_" + std::to_string(s) + " is not strictly positive";
        if (floor > a.tail(s + 1, w) + 1e-12) return who + " has a tail below eps_" + std::to_string(s);
      }
    }
  }
  return {};
}

const char* variant_label(PreservationVariant v) {
  switch (v) {
    case PreservationVariant::Representation: return "representation";
    case PreservationVariant::NormalizedCoherent: return "normalized-coherent";
    case PreservationVariant::TwoPeriod: return "two-period";
    default: return "robust-entropic";
  }
}

namespace {

std::string check_time_consistency(const UtilityProcess& up, const PreservationOptions& opts) {
  const auto tc = time_consistency_check(up, opts.consistency_samples, opts.seed);
  if (tc.passed) return {};
  return "utility process is not time-consistent: " + tc.first_failure;
}

std::string variant_hypotheses(PreservationVariant variant, const UtilityProcess& up,
                               const PreservationHypotheses* hyp, const PreservationOptions& opts) {
  switch (variant) {
    case PreservationVariant::Representation: {
      for (const auto& m : up.members())
        if (m.index() != 0) return "every member must be dual-finite";
      const auto derived = hyp ? std::optional<PreservationHypotheses>() : PreservationHypotheses::derive(up);
      const auto& h = hyp ? *hyp : *derived;
      if (h.first != up.first()) return "hypotheses start at the wrong time";
      if (auto v = h.violation(); !v.empty()) return v;
      for (int s = up.first(); s <= up.horizon(); ++s) {
        for (const auto& sc : std::get<0>(up.at(s)).scenarios()) {
          const auto& gens = h.q[s - h.first];
          if (std::none_of(gens.begin(), gens.end(), [&](const DensityProcess& g) { return g.approx_equal(sc.density); })) {
            return "a scenario of the utility at s=" + std::to_string(s) + " lies outside Q_s";
          }
        }
      }
      return check_time_consistency(up, opts);
    }
    case PreservationVariant::NormalizedCoherent: {
      for (const auto& m : up.members()) {
        const auto* u = std::get_if<DualFiniteUtility>(&m);
        if (!u || !u->is_coherent()) return "every member must be coherent dual-finite";
        const auto ax = check_axioms(m, opts.axiom_samples, opts.seed);
        if (!ax.passes("4-coherence")) return "coherence check failed: " + ax.get("4-coherence").counterexample;
        if (!ax.passes("6-relevance")) return "relevance check failed: " + ax.get("6-relevance").counterexample;
      }
      std::vector<DensityProcess> set;
      for (const auto& sc : std::get<0>(up.at(up.first())).scenarios()) set.push_back(sc.density);
      for (std::size_t i = 0; i < set.size(); ++i) {
        const auto mem = membership(set[i], DensityClass::De, up.first());
        if (!mem.ok) return "element " + std::to_string(i) + " of M is not in De";
      }
      const auto stab = stability_check(set);
      if (!stab.stable) return "M is not stable under concatenation: " + stab.witness;
      const auto rebuilt = UtilityProcess::normalized_coherent(set);
      for (int s = up.first(); s <= up.horizon(); ++s) {
        const auto& have = std::get<0>(up.at(s)).scenarios();
        const auto& want = std::get<0>(rebuilt.at(s)).scenarios();
        if (have.size() != want.size()) return "member at s=" + std::to_string(s) + " is not the normalized restriction of M";
        for (std::size_t i = 0; i < have.size(); ++i)
          if (!have[i].density.approx_equal(want[i].density)) {
            return "member at s=" + std::to_string(s) + " is not the normalized restriction of M";
          }
      }
      return {};
    }
    case PreservationVariant::TwoPeriod: {
      if (up.horizon() - up.first() != 2) return "the two-period case needs a window of length 3";
      if (up.at(up.first()).index() != 0) return "the initial member must be dual-finite";
      return check_time_consistency(up, opts);
    }
    default: {
      const auto* r0 = std::get_if<RobustEntropicUtility>(&up.members().front());
      if (!r0) return "every member must be robust entropic";
      for (const auto& m : up.members()) {
        const auto* r = std::get_if<RobustEntropicUtility>(&m);
        if (!r || r->alpha() != r0->alpha() || r->densities().size() != r0->densities().size()) {
          return "members must share alpha and the density set";
        }
        for (std::size_t i = 0; i < r->densities().size(); ++i)
          if (!r->densities()[i].approx_equal(r0->densities()[i], 0.0)) return "members must share the density set";
      }
      const auto stab = stability_check(r0->densities());
      if (!stab.stable) return "density set is not m-stable: " + stab.witness;
      return check_time_consistency(up, opts);
    }
  }
}

}  // namespace

PreservationReport verify_preservation(PreservationVariant variant, const UtilityProcess& up,
                                       const AdaptedWorstProcess& candidate, const PreservationHypotheses* hyp,
                                       const PreservationOptions& opts) {
  PreservationReport rep;
  rep.variant = variant;
  if (candidate.stages.empty()) throw InputError("verify_preservation: candidate has no stages");
  rep.hypothesis_failure = variant_hypotheses(variant, up, hyp, opts);
  if (rep.hypothesis_failure.empty()) {
    const auto chk = check_adapted_worst_process(candidate, up, opts.worst);
    rep.candidate_valid = chk.valid;
    if (!chk.valid) rep.hypothesis_failure = "candidate is not an adapted worst portfolio process: " + chk.message;
  }
  rep.hypotheses_met = rep.hypothesis_failure.empty();
  if (!rep.hypotheses_met) return rep;

  const auto& stage0 = candidate.stages.front();
  const int last = variant == PreservationVariant::TwoPeriod ? stage0.t_start() + 1 : up.horizon();
  rep.preserved = true;
  for (int t = stage0.t_start() + 1; t <= last; ++t) {
    rep.stages.push_back({t, certify_worst(stage0.restrict(t, up.horizon()), insurance_of(up.at(t)), opts.worst)});
    if (!rep.stages.back().certificate.worst && rep.preserved) {
      rep.preserved = false;
      rep.failing_t = t;
    }
  }
  return rep;
}

// --- matrices -----------------------------------------------------------------------

AdaptedProcess apply_matrix(const Matrix& a, const AdaptedProcess& x) {
  const std::size_t len = x.length();
  if (a.size() != len) throw InputError("apply_matrix: matrix size differs from the window length");
  std::vector<std::vector<double>> rows(len, std::vector<double>(x.space().outcome_count(), 0.0));
  for (std::size_t r = 0; r < len; ++r) {
    if (a[r].size() != len) throw InputError("apply_matrix: matrix is not square");
    for (std::size_t w = 0; w < rows[r].size(); ++w)
      for (std::size_t c = 0; c < len; ++c) rows[r][w] += a[r][c] * x(x.t_start() + static_cast<int>(c), w);
  }
  try {
    return AdaptedProcess(x.space_ptr(), x.t_start(), std::move(rows));
  } catch (const InputError& e) {
    throw InputError(std::string("apply_matrix: A·X is not adapted: ") + e.what());
  }
}

MatrixSup matrix_sup(const UtilityFunction& u, const AdaptedProcess& x, const std::vector<Matrix>& c) {
  if (c.empty()) throw InputError("matrix_sup: no matrices");
  std::vector<ConditionalValue> vals;
  for (const auto& a : c) vals.push_back(insurance_evaluate(u, apply_matrix(a, x)));
  const std::size_t na = vals.front().size();
  std::vector<double> best(na, kNegInf);
  std::vector<std::size_t> arg(na, 0);
  for (std::size_t i = 0; i < vals.size(); ++i)
    for (std::size_t k = 0; k < na; ++k)
      if (vals[i][k] > best[k] || i == 0) {
        best[k] = vals[i][k];
        arg[k] = i;
      }
  MatrixSup res{ConditionalValue(vals.front().time(), std::move(best)), std::move(arg), std::nullopt, false};
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (attains(vals[i].values(), res.value, kDefaultTol)) {
      res.uniform_index = i;
      res.directed = true;
      break;
    }
  }
  return res;
}

MatrixCompareReport matrix_compare(const Matrix& a, const UtilityFunction& u, const Portfolio& x_tilde,
                                   const Portfolio& x_bar, std::size_t samples, std::uint64_t seed, double tol) {
  MatrixCompareReport rep;
  rep.seed = seed;
  const std::size_t len = x_tilde.members().front().length();
  const int t = window_start(u), te = window_end(u);
  if (a.size() != len || x_bar.members().front().length() != len || static_cast<int>(len) != te - t + 1) {
    throw InputError("matrix_compare: dimensions differ");
  }
  if (x_tilde.t_start() != t || x_bar.t_start() != t) throw InputError("matrix_compare: portfolios must start at t");
  for (const auto& row : a)
    if (row.size() != len) throw InputError("matrix_compare: matrix is not square");

  rep.unit_eigenvector = true;
  rep.nonnegative = true;
  for (const auto& row : a) {
    double sum = 0.0;
    for (double v : row) {
      sum += v;
      if (v < 0.0) rep.nonnegative = false;
    }
    if (std::abs(sum - 1.0) > 1e-12) rep.unit_eigenvector = false;
  }
  if (!rep.unit_eigenvector) rep.failure = "(1,...,1) is not a fixed vector";
  else if (!rep.nonnegative) rep.failure = "negative entry";

  const auto& sp = x_tilde.space();
  const SpacePtr spp = x_tilde[0].space_ptr();
  if (rep.unit_eigenvector && rep.nonnegative) {
    rep.acceptance_implication = true;
    std::mt19937_64 rng(seed);
    try {
      for (std::size_t i = 0; i < samples; ++i) {
        auto x = random_adapted(spp, t, te, rng, -5.0, 5.0);
        const auto c = evaluate(u, apply_matrix(a, x));
        std::vector<double> shift(c.size());
        for (std::size_t k = 0; k < shift.size(); ++k) shift[k] = -c[k] + (i % 2 == 1 ? uniform01(rng) : 0.0);
        x = x.plus_cash(ConditionalValue(t, std::move(shift)));
        const auto fa = evaluate(u, apply_matrix(a, x));
        const auto fx = evaluate(u, x);
        ++rep.acceptance_samples;
        for (std::size_t k = 0; k < fx.size(); ++k) {
          if (fa[k] < -slack(tol, fa[k])) continue;
          rep.max_violation = std::max(rep.max_violation, -fx[k]);
          if (fx[k] < -slack(tol, fx[k]) && rep.acceptance_implication) {
            rep.acceptance_implication = false;
            rep.failure = "A·X accepted but X not, sample " + std::to_string(i) + " atom " + std::to_string(k);
          }
        }
      }
    } catch (const InputError& e) {
      rep.acceptance_implication = false;
      rep.failure = e.what();
    }
  }

  if (rep.unit_eigenvector && rep.nonnegative && rep.acceptance_implication) {
    try {
      const auto lhs_sum = apply_matrix(a, x_tilde.sum());
      const auto rhs_sum = x_bar.sum();
      rep.dominance = true;
      for (int s = t; s <= te && rep.dominance; ++s)
        for (std::size_t w = 0; w < sp.outcome_count(); ++w)
          if (lhs_sum(s, w) > rhs_sum(s, w) + 1e-12 * std::max(1.0, std::abs(rhs_sum(s, w)))) {
            rep.dominance = false;
            rep.failure = "A·sum(X~) exceeds sum(X-) at s=" + std::to_string(s) + " outcome " + std::to_string(w);
            break;
          }
    } catch (const InputError& e) {
      rep.dominance = false;
      rep.failure = e.what();
    }
  }
  rep.hypotheses_met = rep.unit_eigenvector && rep.nonnegative && rep.acceptance_implication && rep.dominance;
  if (!rep.hypotheses_met) return rep;

  rep.conclusion_tested = true;
  rep.lhs = insurance_evaluate(u, apply_matrix(a, x_tilde.mean()));
  rep.rhs = insurance_evaluate(u, apply_matrix(a, x_bar.mean()));
  rep.conclusion_holds = true;
  rep.max_violation = 0.0;
  for (std::size_t k = 0; k < rep.lhs->size(); ++k) {
    const double gap = (*rep.lhs)[k] - (*rep.rhs)[k];
    rep.max_violation = std::max(rep.max_violation, gap);
    if (gap > slack(tol, (*rep.rhs)[k])) {
      rep.conclusion_holds = false;
      rep.failure = "conclusion fails on atom " + std::to_string(k);
    }
  }
  return rep;
}

}  // namespace dynrisk
