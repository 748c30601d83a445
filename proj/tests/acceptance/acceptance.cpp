#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dynrisk/error.hpp"
#include "dynrisk/kernel_model.hpp"
#include "dynrisk/processes.hpp"
#include "dynrisk/rearrange.hpp"
#include "dynrisk/utility.hpp"
#include "dynrisk/worstcase.hpp"
#include "support.hpp"

#ifdef DYNRISK_CLI_PATH
#include <unistd.h>
#endif

using namespace dynrisk;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: no budget
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome entropic_time_consistency() {
  const double alphas[] = {0.5, 1.0, 2.0};
  double worst = 0.0;
  std::size_t checks = 0;
  for (int seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const int h = 1 + seed % 3;
    const auto sp = oracle::random_space(rng, 2, 8, h, seed % 2 == 0);
    const auto up = UtilityProcess::entropic(sp, alphas[seed % 3], 0, h);
    const auto rep = time_consistency_check(up, 2, 5000 + static_cast<std::uint64_t>(seed), 1e-9);
    checks += rep.checks;
    worst = std::max({worst, rep.max_residual, rep.max_tau_residual});
    if (!rep.passed || !rep.exhaustive_stopping_times) {
      return {false, "seed " + std::to_string(seed) + ": " +
                         (rep.passed ? std::string("stopping times not exhaustive") : rep.first_failure)};
    }
  }
  return {worst <= 1e-9, std::to_string(checks) + " recursions, max residual " + fmt("%.3g", worst)};
}

Outcome axiom_suite() {
  const char* entropic_pass[] = {"0-locality", "1-monotonicity", "2-cash-invariance", "3-concavity", "6-relevance"};
  const char* coherent_pass[] = {"0-locality", "1-monotonicity", "2-cash-invariance", "3-concavity", "4-coherence"};
  std::string example;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(2000 + seed);
    const int h = 1 + seed % 3;
    const auto sp = oracle::random_space(rng, 2, 6, h, seed % 2 == 0);
    const UtilityFunction ent = EntropicUtility(sp, 0.5 + uniform01(rng) * 1.5, 0, h);
    const auto re = check_axioms(ent, 20, 7000 + static_cast<std::uint64_t>(seed), 1e-9);
    for (const char* ax : entropic_pass)
      if (!re.passes(ax)) return {false, "entropic seed " + std::to_string(seed) + " fails " + ax};
    const auto& coh = re.get("4-coherence");
    if (coh.status != AxiomStatus::Fail || coh.counterexample.empty()) {
      return {false, "entropic seed " + std::to_string(seed) + " shows no coherence counterexample"};
    }
    if (example.empty()) example = coh.counterexample;

    const int t = static_cast<int>(rng() % static_cast<unsigned>(h));
    std::vector<DensityProcess> dens;
    for (int i = 0, n = 1 + seed % 3; i < n; ++i) dens.push_back(oracle::random_density(sp, t, h, rng));
    const UtilityFunction cu = DualFiniteUtility::coherent(dens);
    const auto rc = check_axioms(cu, 20, 8000 + static_cast<std::uint64_t>(seed), 1e-9);
    for (const char* ax : coherent_pass)
      if (!rc.passes(ax)) return {false, "coherent seed " + std::to_string(seed) + " fails " + ax};
  }
  return {true, "200 utilities; entropic coherence counterexample: " + example};
}

// Shared by the dual-equality and comonotone criteria.
struct DualEqualityRun {
  int accepted = 0;
  int rejected = 0;
  int part_i_fail = 0;
  double max_residual = 0.0;
  int with_comonotone = 0;
  int part_ii_fail = 0;
  double max_comonotone_attains = 0.0;
  bool done = false;
};

DualEqualityRun& dual_equality_run() {
  static DualEqualityRun r;
  if (r.done) return r;
  r.done = true;
  WorstPortfolioOptions opts;
  opts.cap = 200000;
  opts.classes.cap = 2000;
  opts.tol = 1e-9;
  for (std::uint64_t seed = 3000; r.accepted < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const int len = 1 + static_cast<int>(seed % 2);  // window [t, T] with T - t = len
    const int h = len + static_cast<int>(rng() % 2);
    const int t = h - len;
    const auto sp = oracle::random_space(rng, 3, 6, h, true);
    std::vector<DensityProcess> dens;
    for (int i = 0, n = 1 + static_cast<int>(rng() % 3); i < n; ++i) dens.push_back(oracle::random_density(sp, t, h, rng));
    const auto u = DualFiniteUtility::coherent(dens);
    std::vector<AdaptedProcess> xs;
    for (int i = 0, n = 1 + static_cast<int>(rng() % 3); i < n; ++i) xs.push_back(oracle::lumpy_process(sp, t, h, rng));
    try {
      const auto rep = verify_dual_equality(Portfolio(xs), u, opts);
      ++r.accepted;
      r.max_residual = std::max(r.max_residual, rep.residual);
      if (!rep.equality_holds || rep.residual > 1e-9) ++r.part_i_fail;
      if (rep.comonotone_attains != PartStatus::NotApplicable) {
        ++r.with_comonotone;
        r.max_comonotone_attains = std::max(r.max_comonotone_attains, rep.comonotone_residual);
        if (rep.comonotone_attains == PartStatus::Fails || rep.comonotone_residual > 1e-9) ++r.part_ii_fail;
      }
    } catch (const CapExceeded&) {
      ++r.rejected;
    }
  }
  return r;
}

Outcome dual_equality() {
  const auto& r = dual_equality_run();
  return {r.part_i_fail == 0, std::to_string(r.accepted) + " instances (" + std::to_string(r.rejected) +
                                  " over cap, reseeded), max residual " + fmt("%.3g", r.max_residual)};
}

Outcome comonotone_attainment() {
  const auto& r = dual_equality_run();
  return {r.part_ii_fail == 0 && r.with_comonotone > 0,
          std::to_string(r.with_comonotone) + " of " + std::to_string(r.accepted) +
              " instances have a comonotone tuple, max residual " + fmt("%.3g", r.max_comonotone_attains)};
}

std::size_t lp_variables(const FiniteFilteredSpace& sp) {
  std::size_t n = 0;
  for (int s = 0; s <= sp.horizon(); ++s) n += sp.atom_count(s);
  return n;
}

Outcome penalty_vs_oracle() {
  int neg_inf = 0, finite = 0, regenerated = 0;
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    std::mt19937_64 rng(4000 + inst);
    SpacePtr sp;
    do {
      sp = oracle::random_space(rng, 2, 4, 1 + inst % 2, inst % 3 != 0);
      if (lp_variables(*sp) > 6) ++regenerated;
    } while (lp_variables(*sp) > 6);
    const int h = sp->horizon();
    std::vector<Scenario> sc;
    for (int i = 0, n = 2 + inst % 2; i < n; ++i) {
      const double g = i == 0 ? 0.0 : (i == 2 && inst % 4 == 1 ? kNegInf : -uniform01(rng));
      sc.push_back({oracle::random_density(sp, 0, h, rng), ConditionalValue(0, {g})});
    }
    const DualFiniteUtility u(sc);
    auto mix = sc[0].density.increments();
    mix *= 0.3;
    auto other = sc[1].density.increments();
    other *= 0.7;
    const std::vector<DensityProcess> targets{oracle::random_density(sp, 0, h, rng), sc[1].density,
                                              DensityProcess(mix + other)};
    const double box = 1e6 * std::max(1.0, u.penalty_scale());
    for (const auto& a : targets) {
      const auto got = penalty(u, a);
      const auto want = oracle::penalty_oracle(u, a, box);
      const double d = got.max_abs_diff(want);
      worst = std::max(worst, d);
      if (d > 1e-8) return {false, "instance " + std::to_string(inst) + " differs by " + fmt("%.3g", d)};
      (want[0] == kNegInf ? neg_inf : finite)++;
    }
  }
  return {neg_inf > 0 && finite > 0, std::to_string(finite) + " finite and " + std::to_string(neg_inf) +
                                         " -inf penalties agree, max diff " + fmt("%.3g", worst) + ", " +
                                         std::to_string(regenerated) + " spaces regenerated"};
}

Event random_theta_event(const FiniteFilteredSpace& sp, const StoppingTime& theta, std::mt19937_64& rng) {
  std::map<std::pair<int, std::size_t>, bool> coin;
  std::vector<bool> in(sp.outcome_count());
  for (std::size_t w = 0; w < in.size(); ++w) {
    const auto key = std::make_pair(theta(w), sp.atom_of(theta(w), w));
    if (!coin.count(key)) coin[key] = uniform01(rng) < 0.5;
    in[w] = coin[key];
  }
  return Event(std::move(in));
}

TerminalDensity random_terminal(const SpacePtr& sp, std::mt19937_64& rng) {
  std::vector<double> h(sp->outcome_count());
  double mean = 0;
  for (std::size_t w = 0; w < h.size(); ++w) mean += sp->prob(w) * (h[w] = 0.1 + uniform01(rng));
  for (double& v : h) v /= mean;
  return TerminalDensity(sp, std::move(h));
}

Outcome algebra_closure() {
  double self_diff = 0.0, mass_diff = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    std::mt19937_64 rng(5000 + trial);
    const auto sp = oracle::random_space(rng, 2, 7, 1 + trial % 3, trial % 3 == 0);
    const int h = sp->horizon();
    const auto a = oracle::random_density(sp, 0, h, rng);
    const auto b = oracle::random_density(sp, 0, h, rng);
    const auto taus = enumerate_stopping_times(*sp, 0, h);
    const auto& theta = taus[rng() % taus.size()];
    const auto ev = random_theta_event(*sp, theta, rng);
    const auto mem = membership(concatenate(a, b, theta, ev), DensityClass::D, 0, 1e-10);
    if (!mem.ok) return {false, "concatenation " + std::to_string(trial) + " leaves D: " + mem.message};
    self_diff = std::max(self_diff, concatenate(a, a, theta, ev).max_abs_diff(a));
  }
  for (int trial = 0; trial < 500; ++trial) {
    std::mt19937_64 rng(6000 + trial);
    const auto sp = oracle::random_space(rng, 2, 7, 1 + trial % 3, trial % 2 == 0);
    const auto f = random_terminal(sp, rng);
    const auto g = random_terminal(sp, rng);
    const int s = static_cast<int>(rng() % static_cast<unsigned>(sp->horizon() + 1));
    std::vector<std::size_t> atoms;
    for (std::size_t k = 0; k < sp->atom_count(s); ++k)
      if (uniform01(rng) < 0.5) atoms.push_back(k);
    const auto ev = Event::of_atoms(*sp, s, atoms);
    const auto p = paste(f, g, s, ev);
    double mean = 0.0;
    for (std::size_t w = 0; w < sp->outcome_count(); ++w) {
      if (!(p[w] > 0.0)) return {false, "paste " + std::to_string(trial) + " is not strictly positive"};
      mean += sp->prob(w) * p[w];
    }
    mass_diff = std::max(mass_diff, std::abs(mean - 1.0));
    self_diff = std::max(self_diff, paste(f, f, s, ev).max_abs_diff(f));
  }
  return {mass_diff <= 1e-10 && self_diff <= 1e-12,
          "1000 triples, max |E h - 1| " + fmt("%.3g", mass_diff) + ", max self diff " + fmt("%.3g", self_diff)};
}

UtilityProcess robust_entropic_process(const KernelModel& km, double alpha) {
  const auto dens = km.terminal_densities();
  const int h = km.space().horizon();
  std::vector<UtilityFunction> members;
  for (int t = 0; t <= h; ++t) members.emplace_back(RobustEntropicUtility(alpha, dens, t, h));
  return UtilityProcess(std::move(members));
}

Outcome preservation() {
  const PreservationVariant variants[] = {PreservationVariant::Representation, PreservationVariant::NormalizedCoherent,
                                          PreservationVariant::TwoPeriod, PreservationVariant::RobustEntropic};
  std::map<std::string, std::pair<int, int>> tally;  // label -> (instances, non-trivial)
  int accepted = 0, rejected = 0;
  for (std::uint64_t seed = 9000; accepted < 50; ++seed) {
    const auto variant = variants[accepted % 4];
    std::mt19937_64 rng(seed);
    const auto sp = oracle::random_space(rng, 3, 5, 2, true);
    const auto km = oracle::kernel_with_silent_nodes(sp, variant != PreservationVariant::NormalizedCoherent &&
                                                             variant != PreservationVariant::RobustEntropic,
                                                     0.5, rng);
    const auto up = variant == PreservationVariant::NormalizedCoherent ? UtilityProcess::normalized_coherent(km.densities())
                    : variant == PreservationVariant::RobustEntropic   ? robust_entropic_process(km, 1.0)
                                                                       : km.process();
    const Portfolio x({oracle::constant_terminal_process(sp, rng, 0.7), oracle::constant_terminal_process(sp, rng, 0.7)});
    const auto cand = find_adapted_worst_process(x, up);
    if (!cand) {
      ++rejected;
      continue;
    }
    const auto rep = verify_preservation(variant, up, *cand);
    if (!rep.hypotheses_met) {
      ++rejected;
      continue;
    }
    ++accepted;
    if (!rep.preserved) {
      return {false, std::string(variant_label(variant)) + " seed " + std::to_string(seed) + " loses worst-ness at t=" +
                         std::to_string(rep.failing_t)};
    }
    WorstPortfolioOptions o;
    o.collect_attaining = true;
    const auto wc = worst_portfolio_bruteforce(cand->stages[0], insurance_of(up.at(0)), o);
    auto& entry = tally[variant_label(variant)];
    ++entry.first;
    if (wc.all_attaining.size() < wc.search_size) ++entry.second;
  }
  std::string detail = "50 preserved (" + std::to_string(rejected) + " seeds rejected); non-trivial:";
  for (const auto& [label, c] : tally) detail += " " + label + " " + std::to_string(c.second) + "/" + std::to_string(c.first);
  return {true, detail};
}

bool same_rows(const AdaptedProcess& a, const AdaptedProcess& b) { return a.rows() == b.rows(); }

Outcome rearrangement_oracle() {
  int instances = 0, skipped = 0;
  for (int trial = 0; trial < 120; ++trial) {
    std::mt19937_64 rng(10000 + trial);
    const auto sp = oracle::random_space(rng, 2, 7, 1 + trial % 3, true);
    const int t = static_cast<int>(rng() % static_cast<unsigned>(sp->horizon() + 1));
    const auto x = oracle::lumpy_process(sp, t, sp->horizon(), rng);
    ClassOptions opts;
    opts.cap = 10000;
    RearrangementClass cls{x, {}, 0, false};
    try {
      cls = enumerate_class(x, opts);
    } catch (const CapExceeded&) {
      ++skipped;
      continue;
    }
    ++instances;
    const auto naive = oracle::class_oracle(x);
    if (naive.size() != cls.members.size()) return {false, "class size differs on trial " + std::to_string(trial)};
    for (const auto& m : cls.members)
      if (std::none_of(naive.begin(), naive.end(), [&](const AdaptedProcess& o) { return same_rows(o, m); })) {
        return {false, "member outside the oracle class on trial " + std::to_string(trial)};
      }
    const auto a = oracle::random_density(sp, t, sp->horizon(), rng);
    const auto mc = max_correlation(a, cls, t);
    std::vector<double> best(sp->atom_count(t), kNegInf);
    for (const auto& m : naive) {
      const auto p = pairing(m, a, t, sp->horizon());
      for (std::size_t k = 0; k < best.size(); ++k) best[k] = std::max(best[k], p[k]);
    }
    const auto lap = lap_upper_bound(a, x, t);
    for (std::size_t k = 0; k < best.size(); ++k) {
      if (mc.value[k] != best[k]) return {false, "max_correlation differs on trial " + std::to_string(trial)};
      if (lap[k] < mc.value[k] - 1e-12) return {false, "assignment bound below on trial " + std::to_string(trial)};
    }
  }
  const auto sp = make_space(FiniteFilteredSpace::tree({2, 2}));
  const AdaptedProcess x(sp, 0, {{0, 0, 0, 0}, {1, 1, 0, 0}, {5, 0, 0, 0}});
  const DensityProcess a(sp, 0, {{0, 0, 0, 0}, {0.2, 0.2, 0, 0}, {0, 0, 1, 0}});
  const double mc = max_correlation(a, x, 0).value[0];
  const double lap = lap_upper_bound(a, x, 0)[0];
  return {lap > mc + 1e-9, std::to_string(instances) + " classes match (" + std::to_string(skipped) +
                               " over 1e4 skipped); strict gap " + fmt("%.6g", mc) + " < " + fmt("%.6g", lap)};
}

// Lower-triangular, row-stochastic, nonnegative, last row e_T.
Matrix random_averaging(std::size_t len, std::mt19937_64& rng) {
  Matrix a(len, std::vector<double>(len, 0.0));
  for (std::size_t r = 0; r + 1 < len; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c <= r; ++c) sum += (a[r][c] = uniform01(rng) < 0.3 ? 0.0 : uniform01(rng));
    if (sum == 0.0) a[r][r] = sum = 1.0;
    for (std::size_t c = 0; c <= r; ++c) a[r][c] /= sum;
  }
  a[len - 1][len - 1] = 1.0;
  return a;
}

UtilityFunction terminal_utility(const SpacePtr& sp, int h, int variant, std::mt19937_64& rng) {
  if (variant == 0) return EntropicUtility(sp, 0.5 + 1.5 * uniform01(rng), 0, h);
  std::vector<DensityProcess> dens;
  for (int i = 0; i < 2; ++i) {
    const auto d = oracle::random_density(sp, h, h, rng);
    dens.push_back(d.rewindow(0, h));
  }
  std::vector<Scenario> sc{{dens[0], ConditionalValue(0, {0.0})}, {dens[1], ConditionalValue(0, {-uniform01(rng)})}};
  return DualFiniteUtility(sc);
}

Outcome matrix_comparison() {
  int proven = 0, rejected = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 11000; proven < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const int h = 1 + static_cast<int>(seed % 2);
    const auto sp = oracle::random_space(rng, 2, 6, h, seed % 3 == 0);
    const auto u = terminal_utility(sp, h, static_cast<int>(seed % 2), rng);
    const auto a = random_averaging(static_cast<std::size_t>(h + 1), rng);
    std::vector<AdaptedProcess> xt, xb;
    for (int i = 0; i < 2; ++i) {
      xt.push_back(random_adapted(sp, 0, h, rng, -2.0, 2.0));
      auto slack = random_adapted(sp, 0, h, rng, 0.0, 0.5);
      xb.push_back(apply_matrix(a, xt.back()) + slack);
    }
    const auto rep = matrix_compare(a, u, Portfolio(xt), Portfolio(xb), 200, seed, 1e-9);
    if (!rep.hypotheses_met) {
      ++rejected;
      continue;
    }
    ++proven;
    worst = std::max(worst, rep.max_violation);
    if (!rep.conclusion_tested || !rep.conclusion_holds) {
      return {false, "seed " + std::to_string(seed) + ": conclusion fails by " + fmt("%.3g", rep.max_violation)};
    }
  }

  // guard paths: no conclusion may be asserted
  const auto sp = make_space(FiniteFilteredSpace::tree({2}));
  const UtilityFunction ent = EntropicUtility(sp, 1.0, 0, 1);
  const Portfolio xt({AdaptedProcess(sp, 0, {{0, 0}, {1, -1}})});
  const Portfolio xb({AdaptedProcess(sp, 0, {{0, 0}, {2, 0}})});
  // φ(AX) only sees X_0 here, so AX can be acceptable while X is not
  const Matrix early{{1, 0}, {1, 0}};
  const Portfolio flat({AdaptedProcess(sp, 0, {{1, 1}, {1, 1}})});
  struct Guard {
    const char* what;
    MatrixCompareReport rep;
  };
  const std::vector<Guard> guards{
      {"negative entry", matrix_compare({{1.5, -0.5}, {0, 1}}, ent, xt, xb)},
      {"rows not summing to 1", matrix_compare({{2, 0}, {0, 2}}, ent, xt, xb)},
      {"acceptance implication", matrix_compare(early, ent, flat, Portfolio({apply_matrix(early, flat.members()[0])}))},
      {"dominance", matrix_compare({{1, 0}, {0, 1}}, ent, xb, xt)},
  };
  for (const auto& g : guards) {
    if (g.rep.conclusion_tested || g.rep.hypotheses_met) return {false, std::string("guard not triggered: ") + g.what};
  }
  if (guards[2].rep.acceptance_implication) return {false, "acceptance-implication guard passed its own check"};
  return {true, "50 instances hold (max violation " + fmt("%.3g", worst) + ", " + std::to_string(rejected) +
                    " rejected by hypotheses); 4 guards assert nothing"};
}

#ifdef DYNRISK_CLI_PATH
std::string slurp_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    all += f.filename().string() + "\n" + ss.str();
  }
  return all;
}

Outcome cli_determinism() {
  const std::filesystem::path scenario = std::filesystem::path(DYNRISK_SCENARIO_DIR) / "end_to_end.json";
  const auto base = std::filesystem::temp_directory_path() / ("dynrisk_acc_" + std::to_string(::getpid()));
  std::filesystem::remove_all(base);
  std::vector<std::string> outputs;
  int i = 0;
  for (int workers : {1, 1, 4}) {
    const auto dir = base / std::to_string(i++);
    std::filesystem::create_directories(dir);
    const std::string cmd = std::string("\"") + DYNRISK_CLI_PATH + "\" run \"" + scenario.string() + "\" --out \"" +
                            dir.string() + "\" --workers " + std::to_string(workers) + " > \"" +
                            (dir / "stdout.txt").string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    if (rc != 0) return {false, "cli exited with status " + std::to_string(rc)};
    outputs.push_back(slurp_dir(dir));
  }
  std::filesystem::remove_all(base);
  if (outputs[0] != outputs[1]) return {false, "two runs with 1 worker differ"};
  if (outputs[0] != outputs[2]) return {false, "1 and 4 workers differ"};
  return {true, "3 runs byte-identical (" + std::to_string(outputs[0].size()) + " bytes)"};
}
#else
Outcome cli_determinism() { return {false, "command line tool not built"}; }
#endif

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "entropic time-consistency", 30, entropic_time_consistency},
      {2, "axiom suite", 30, axiom_suite},
      {3, "dual equality for worst portfolios", 120, dual_equality},
      {4, "comonotone tuple attains the supremum", 0, comonotone_attainment},
      {5, "penalty LP vs vertex enumeration", 60, penalty_vs_oracle},
      {6, "concatenation and pasting closure", 0, algebra_closure},
      {7, "worst portfolio preservation", 300, preservation},
      {8, "rearrangement class oracle", 0, rearrangement_oracle},
      {9, "matrix comparison", 0, matrix_comparison},
      {10, "cli determinism", 0, cli_determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", c.budget_s) + " s budget";
    }
    if (!o.pass) ++failures;
    std::printf("%s %2d %-40s %8.2fs  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
