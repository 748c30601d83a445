#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dynrisk/error.hpp"
#include "dynrisk/rearrange.hpp"
#include "dynrisk/worstcase.hpp"
#include "scenario.hpp"

namespace dynrisk::cli {

namespace {

std::string num(double v) {
  if (v == -std::numeric_limits<double>::infinity()) return "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string atom_label(int t, std::size_t k) { return std::to_string(t) + "/" + std::to_string(k); }

class Report {
 public:
  explicit Report(std::string task) : task_(std::move(task)) { os_ << "task\tatom\tquantity\tvalue\tbound\tstatus\n"; }

  void row(const std::string& atom, const std::string& quantity, const std::string& value,
           const std::string& bound = "-", const std::string& status = "-") {
    os_ << task_ << '\t' << atom << '\t' << quantity << '\t' << value << '\t' << bound << '\t' << status << '\n';
  }
  void values(const std::string& quantity, const ConditionalValue& v) {
    for (std::size_t k = 0; k < v.size(); ++k) row(atom_label(v.time(), k), quantity, num(v[k]));
  }
  std::string str() const { return os_.str(); }

 private:
  std::string task_;
  std::ostringstream os_;
};

const char* pass_fail(bool ok) { return ok ? "PASS" : "FAIL"; }

struct Args {
  const ScenarioFile& s;
  const json& a;
  std::string task;

  const json& at(const char* key) const {
    if (!a.contains(key)) throw ScenarioError("task '" + task + "': missing argument '" + key + "'");
    return a.at(key);
  }
  std::string str(const char* key) const {
    const auto& v = at(key);
    if (!v.is_string()) throw ScenarioError("task '" + task + "': '" + key + "' must be a name");
    return v.get<std::string>();
  }
  double number(const char* key, double def) const {
    return a.contains(key) ? parse_number(a.at(key), task + "." + key) : def;
  }
  std::size_t count(const char* key, std::size_t def) const {
    if (!a.contains(key)) return def;
    if (!a.at(key).is_number_unsigned()) throw ScenarioError("task '" + task + "': '" + key + "' must be a count");
    return a.at(key).get<std::size_t>();
  }
  int integer(const char* key, int def) const {
    if (!a.contains(key)) return def;
    if (!a.at(key).is_number_integer()) throw ScenarioError("task '" + task + "': '" + key + "' must be an integer");
    return a.at(key).get<int>();
  }
  bool flag(const char* key, bool def) const {
    if (!a.contains(key)) return def;
    if (!a.at(key).is_boolean()) throw ScenarioError("task '" + task + "': '" + key + "' must be true or false");
    return a.at(key).get<bool>();
  }
  std::vector<std::string> names(const char* key) const {
    const auto& v = at(key);
    if (!v.is_array()) throw ScenarioError("task '" + task + "': '" + key + "' must be a list of names");
    return v.get<std::vector<std::string>>();
  }
  Portfolio portfolio(const char* key) const {
    std::vector<AdaptedProcess> xs;
    for (const auto& n : names(key)) xs.push_back(s.process(n));
    if (xs.empty()) throw ScenarioError("task '" + task + "': '" + key + "' is empty");
    return Portfolio(std::move(xs));
  }
  const DualFiniteUtility& dual_finite(const char* key) const {
    const auto* u = std::get_if<DualFiniteUtility>(&s.utility(str(key)));
    if (!u) throw ScenarioError("task '" + task + "': utility '" + str(key) + "' must be dual-finite");
    return *u;
  }
  Matrix matrix(const json& v, const std::string& where) const {
    Matrix m;
    if (!v.is_array()) throw ScenarioError(where + ": expected a matrix");
    for (const auto& r : v) {
      std::vector<double> row;
      for (const auto& x : r) row.push_back(parse_number(x, where));
      m.push_back(std::move(row));
    }
    return m;
  }
  ClassOptions classes() const {
    ClassOptions o;
    o.cap = count("class_cap", o.cap);
    o.group_by_level = flag("group_by_level", false);
    return o;
  }
  WorstPortfolioOptions worst(std::size_t workers) const {
    WorstPortfolioOptions o;
    o.cap = count("cap", o.cap);
    o.workers = workers;
    o.tol = number("tol", o.tol);
    o.classes = classes();
    return o;
  }
};

// Compares against "expect" (one value per atom) when given.
Verdict check_expect(const Args& args, const ConditionalValue& v, Report& r, const std::string& quantity) {
  if (!args.a.contains("expect")) {
    r.values(quantity, v);
    return Verdict::Info;
  }
  const auto& e = args.at("expect");
  if (!e.is_array() || e.size() != v.size()) {
    throw ScenarioError("task '" + args.task + "': 'expect' needs one value per atom of F_" + std::to_string(v.time()));
  }
  const double tol = args.number("tol", kDefaultTol);
  bool ok = true;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double want = parse_number(e[k], args.task + ".expect");
    const bool hit = (want == v[k]) || std::abs(want - v[k]) <= tol;
    ok = ok && hit;
    r.row(atom_label(v.time(), k), quantity, num(v[k]), num(want), pass_fail(hit));
  }
  return ok ? Verdict::Pass : Verdict::Fail;
}

Verdict expect_flag(const Args& args, bool got, Report& r, const std::string& quantity, bool def = true) {
  const bool want = args.flag("expect", def);
  r.row("-", quantity, got ? "true" : "false", want ? "true" : "false", pass_fail(got == want));
  return got == want ? Verdict::Pass : Verdict::Fail;
}

Verdict check_space(const Args& args, Report& r) {
  const auto& sp = *args.s.space;
  double sum = 0.0;
  for (double p : sp.probs()) sum += p;
  r.row("-", "outcomes", std::to_string(sp.outcome_count()));
  r.row("-", "horizon", std::to_string(sp.horizon()));
  for (int t = 0; t <= sp.horizon(); ++t) r.row("-", "atoms_F" + std::to_string(t), std::to_string(sp.atom_count(t)));
  r.row("-", "prob_sum_error", num(std::abs(sum - 1.0)), "1e-12", pass_fail(std::abs(sum - 1.0) <= 1e-12));
  r.row("-", "uniform", sp.is_uniform() ? "true" : "false");
  return std::abs(sum - 1.0) <= 1e-12 ? Verdict::Pass : Verdict::Fail;
}

Verdict check_membership(const Args& args, Report& r) {
  const auto& a = args.s.density(args.str("density"));
  const auto cls_name = args.a.value("class", std::string("D"));
  DensityClass cls;
  if (cls_name == "A1+") cls = DensityClass::A1Plus;
  else if (cls_name == "D") cls = DensityClass::D;
  else if (cls_name == "De") cls = DensityClass::De;
  else throw ScenarioError("task '" + args.task + "': class must be A1+, D or De");
  const auto rep = membership(a, cls, args.integer("t", a.t_start()), args.number("tol", kDefaultTol));
  if (!rep.ok) r.row(std::to_string(rep.time) + "@" + std::to_string(rep.location), rep.condition, rep.message);
  return expect_flag(args, rep.ok, r, "member_of_" + cls_name);
}

const char* axiom_status(AxiomStatus s) {
  switch (s) {
    case AxiomStatus::Pass: return "pass";
    case AxiomStatus::Fail: return "fail";
    default: return "vacuous";
  }
}

Verdict axioms(const Args& args, Report& r, std::uint64_t seed) {
  const auto rep = check_axioms(args.s.utility(args.str("utility")), args.count("samples", 50), seed,
                                args.number("tol", kDefaultTol));
  r.row("-", "seed", std::to_string(rep.seed));
  r.row("-", "samples", std::to_string(rep.sample_count));
  const json none = json::object();
  const auto& expect = args.a.contains("expect") ? args.at("expect") : none;
  bool ok = true;
  for (const auto& res : rep.results) {
    std::string bound = "-", status = "-";
    if (expect.contains(res.axiom)) {
      bound = expect.at(res.axiom).get<std::string>();
      const bool hit = bound == axiom_status(res.status);
      ok = ok && hit;
      status = pass_fail(hit);
    }
    r.row("-", res.axiom, axiom_status(res.status), bound, status);
    r.row("-", res.axiom + ".max_violation", num(res.max_violation));
    if (!res.counterexample.empty()) r.row("-", res.axiom + ".counterexample", res.counterexample);
  }
  if (expect.empty()) return Verdict::Info;
  return ok ? Verdict::Pass : Verdict::Fail;
}

Verdict evaluate_task(const Args& args, Report& r) {
  const auto& u = args.s.utility(args.str("utility"));
  const auto& x = args.s.process(args.str("process"));
  const bool ins = args.flag("insurance", false);
  return check_expect(args, ins ? insurance_evaluate(u, x) : evaluate(u, x), r, ins ? "insurance" : "utility");
}

Verdict penalty_task(const Args& args, Report& r) {
  return check_expect(args, penalty(args.dual_finite("utility"), args.s.density(args.str("density")), args.number("bound", 0.0)),
                      r, "penalty");
}

Verdict max_correlation_task(const Args& args, Report& r) {
  const auto& a = args.s.density(args.str("density"));
  const auto& x = args.s.process(args.str("process"));
  const int t = args.integer("t", x.t_start());
  const auto opts = args.classes();
  const auto cls = enumerate_class(x.restrict(t, x.t_end()), opts);
  const auto mc = max_correlation(a, cls, t);
  const auto lap = lap_upper_bound(a, x, t, opts);
  r.row("-", "class_size", std::to_string(cls.members.size()));
  r.row("-", "grouped_by_level", cls.grouped_by_level ? "true" : "false");
  bool ok = true;
  for (std::size_t k = 0; k < mc.value.size(); ++k) {
    const bool below = mc.value[k] <= lap[k] + 1e-12;
    ok = ok && below;
    r.row(atom_label(t, k), "max_correlation", num(mc.value[k]), num(lap[k]), pass_fail(below));
    r.row(atom_label(t, k), "argmax", std::to_string(mc.argmax[k]));
  }
  if (!ok) return Verdict::Fail;
  const auto ex = check_expect(args, mc.value, r, "expected");
  return ex == Verdict::Info ? Verdict::Pass : ex;
}

Verdict comonotone_task(const Args& args, Report& r) {
  const auto& a = args.s.density(args.str("density"));
  std::vector<AdaptedProcess> family;
  for (const auto& n : args.names("processes")) family.push_back(args.s.process(n));
  if (family.empty()) throw ScenarioError("task '" + args.task + "': no processes");
  const auto cert = is_comonotone(a, family, args.number("tol", kDefaultTol), args.classes());
  const int t = family.front().t_start();
  for (std::size_t i = 0; i < cert.member_residuals.size(); ++i)
    for (std::size_t k = 0; k < cert.member_residuals[i].size(); ++k)
      r.row(atom_label(t, k), "residual_member_" + std::to_string(i), num(cert.member_residuals[i][k]));
  for (std::size_t k = 0; k < cert.sum_residuals.size(); ++k) r.row(atom_label(t, k), "residual_sum", num(cert.sum_residuals[k]));
  return expect_flag(args, cert.comonotone, r, "comonotone");
}

Verdict worst_scenario_task(const Args& args, Report& r) {
  const auto& u = args.dual_finite("utility");
  std::vector<DensityProcess> cands;
  if (args.a.contains("candidates")) {
    for (const auto& n : args.names("candidates")) cands.push_back(args.s.density(n));
  } else {
    for (const auto& sc : u.scenarios()) cands.push_back(sc.density);
  }
  const auto ws = worst_scenario(cands, args.portfolio("processes"), u, args.classes());
  r.row("-", "exact", ws.exact ? "true" : "false");
  r.row("-", "single_candidate", ws.single_candidate ? "true" : "false");
  for (std::size_t k = 0; k < ws.candidate_per_atom.size(); ++k)
    r.row(atom_label(ws.value.time(), k), "candidate", std::to_string(ws.candidate_per_atom[k]));
  return check_expect(args, ws.value, r, ws.exact ? "average_risk_sup" : "average_risk_lower_bound");
}

Verdict worst_portfolio_task(const Args& args, Report& r, std::size_t workers) {
  const auto wc = worst_portfolio_bruteforce(args.portfolio("processes"), args.s.utility(args.str("utility")),
                                             args.worst(workers));
  r.row("-", "search_size", std::to_string(wc.search_size));
  r.row("-", "attained_uniformly", wc.attained_uniformly ? "true" : "false");
  if (wc.attaining_index) r.row("-", "attaining_tuple", std::to_string(*wc.attaining_index));
  for (std::size_t k = 0; k < wc.per_atom_argmax.size(); ++k)
    r.row(atom_label(wc.sup_value.time(), k), "argmax_tuple", std::to_string(wc.per_atom_argmax[k]));
  return check_expect(args, wc.sup_value, r, "sup_insurance_of_mean");
}

Verdict dual_equality_task(const Args& args, Report& r, std::size_t workers) {
  const auto rep = verify_dual_equality(args.portfolio("processes"), args.dual_finite("utility"), args.worst(workers));
  const double tol = args.number("tol", kDefaultTol);
  r.row("-", "search_size", std::to_string(rep.search_size));
  for (std::size_t k = 0; k < rep.lhs.size(); ++k) {
    const bool hit = std::abs(rep.lhs[k] - rep.rhs[k]) <= tol * std::max(1.0, std::abs(rep.lhs[k]));
    r.row(atom_label(rep.lhs.time(), k), "sup_over_rearrangements", num(rep.lhs[k]), num(rep.rhs[k]), pass_fail(hit));
  }
  r.row("-", "equality", pass_fail(rep.equality_holds), num(rep.residual), pass_fail(rep.equality_holds));
  const char* co = rep.comonotone_attains == PartStatus::Holds ? "PASS" : rep.comonotone_attains == PartStatus::Fails ? "FAIL" : "NOT-APPLICABLE";
  r.row("-", "comonotone_tuple_attains", co, num(rep.comonotone_residual), co);
  return rep.equality_holds && rep.comonotone_attains != PartStatus::Fails ? Verdict::Pass : Verdict::Fail;
}

Verdict preservation_task(const Args& args, Report& r, std::uint64_t seed, std::size_t workers) {
  const auto name = args.a.value("variant", std::string("representation"));
  PreservationVariant v;
  if (name == "representation") v = PreservationVariant::Representation;
  else if (name == "normalized-coherent") v = PreservationVariant::NormalizedCoherent;
  else if (name == "two-period") v = PreservationVariant::TwoPeriod;
  else if (name == "robust-entropic") v = PreservationVariant::RobustEntropic;
  else throw ScenarioError("task '" + args.task + "': unknown variant '" + name + "'");
  const auto up = args.s.utility_process(args.str("utility_process"));
  PreservationOptions opts;
  opts.worst = args.worst(workers);
  opts.seed = seed;
  const auto cand = find_adapted_worst_process(args.portfolio("processes"), up, opts.worst);
  if (!cand) {
    r.row("-", "candidate", "none", "-", "HYPOTHESES-UNMET");
    return Verdict::Fail;
  }
  const auto rep = verify_preservation(v, up, *cand, nullptr, opts);
  r.row("-", "variant", variant_label(v));
  if (!rep.hypotheses_met) {
    r.row("-", "hypotheses", rep.hypothesis_failure, "-", "HYPOTHESES-UNMET");
    return Verdict::Fail;
  }
  for (const auto& st : rep.stages)
    r.row("-", "worst_at_t" + std::to_string(st.t), st.certificate.worst ? "true" : "false", num(st.certificate.gap),
          pass_fail(st.certificate.worst));
  return rep.preserved ? Verdict::Pass : Verdict::Fail;
}

Verdict matrix_sup_task(const Args& args, Report& r) {
  std::vector<Matrix> mats;
  const auto& list = args.at("matrices");
  for (std::size_t i = 0; i < list.size(); ++i) mats.push_back(args.matrix(list[i], args.task + ".matrices"));
  const auto ms = matrix_sup(args.s.utility(args.str("utility")), args.s.process(args.str("process")), mats);
  r.row("-", "directed", ms.directed ? "true" : "false");
  if (ms.uniform_index) r.row("-", "uniform_matrix", std::to_string(*ms.uniform_index));
  for (std::size_t k = 0; k < ms.argmax.size(); ++k)
    r.row(atom_label(ms.value.time(), k), "argmax_matrix", std::to_string(ms.argmax[k]));
  return check_expect(args, ms.value, r, "sup_insurance");
}

Verdict matrix_compare_task(const Args& args, Report& r, std::uint64_t seed) {
  const auto rep = matrix_compare(args.matrix(args.at("matrix"), args.task + ".matrix"), args.s.utility(args.str("utility")),
                                  args.portfolio("x_tilde"), args.portfolio("x_bar"), args.count("samples", 200), seed,
                                  args.number("tol", kDefaultTol));
  auto yn = [](bool b) { return b ? "true" : "false"; };
  r.row("-", "rows_sum_to_one", yn(rep.unit_eigenvector));
  r.row("-", "nonnegative", yn(rep.nonnegative));
  r.row("-", "acceptance_implication", yn(rep.acceptance_implication), std::to_string(rep.acceptance_samples));
  r.row("-", "dominance", yn(rep.dominance));
  r.row("-", "seed", std::to_string(rep.seed));
  if (!rep.hypotheses_met) {
    r.row("-", "conclusion", "not tested", "-", "HYPOTHESES-UNMET");
    return Verdict::Fail;
  }
  if (rep.lhs && rep.rhs)
    for (std::size_t k = 0; k < rep.lhs->size(); ++k)
      r.row(atom_label(rep.lhs->time(), k), "insurance_of_mean_tilde", num((*rep.lhs)[k]), num((*rep.rhs)[k]),
            pass_fail((*rep.lhs)[k] <= (*rep.rhs)[k] + args.number("tol", kDefaultTol)));
  r.row("-", "conclusion", yn(rep.conclusion_holds), num(rep.max_violation), pass_fail(rep.conclusion_holds));
  return rep.conclusion_holds ? Verdict::Pass : Verdict::Fail;
}

Verdict stability_task(const Args& args, Report& r) {
  StabilityOptions opts;
  opts.cap = args.count("cap", opts.cap);
  StabilityReport rep;
  if (args.a.contains("terminal_densities")) {
    std::vector<TerminalDensity> set;
    for (const auto& n : args.names("terminal_densities")) set.push_back(args.s.terminal_density(n));
    rep = stability_check(set, opts);
  } else {
    std::vector<DensityProcess> set;
    for (const auto& n : args.names("densities")) set.push_back(args.s.density(n));
    rep = stability_check(set, opts);
  }
  r.row("-", "generated", std::to_string(rep.generated));
  r.row("-", "exhaustive_stopping_times", rep.exhaustive_stopping_times ? "true" : "false");
  if (!rep.witness.empty()) r.row("-", "witness", rep.witness);
  return expect_flag(args, rep.stable, r, "stable");
}

Verdict time_consistency_task(const Args& args, Report& r, std::uint64_t seed) {
  const auto rep = time_consistency_check(args.s.utility_process(args.str("utility_process")), args.count("samples", 5), seed,
                                          args.number("tol", kDefaultTol));
  r.row("-", "seed", std::to_string(rep.seed));
  r.row("-", "checks", std::to_string(rep.checks));
  r.row("-", "exhaustive_stopping_times", rep.exhaustive_stopping_times ? "true" : "false");
  r.row("-", "max_residual", num(rep.max_residual), num(args.number("tol", kDefaultTol)), pass_fail(rep.passed));
  r.row("-", "max_stopping_time_residual", num(rep.max_tau_residual));
  if (!rep.passed) r.row("-", "first_failure", rep.first_failure);
  return expect_flag(args, rep.passed, r, "time_consistent");
}

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_';
  return out;
}

}  // namespace

const char* verdict_label(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::Info: return "INFO";
    case Verdict::FailedCap: return "FAILED-CAP";
    default: return "INPUT-ERROR";
  }
}

TaskResult run_task(const ScenarioFile& s, const Task& task, std::uint64_t seed, std::size_t workers) {
  Report r(task.name);
  const Args args{s, task.args, task.name};
  TaskResult res;
  try {
    const auto& k = task.kind;
    if (k == "check-space") res.verdict = check_space(args, r);
    else if (k == "check-membership") res.verdict = check_membership(args, r);
    else if (k == "axioms") res.verdict = axioms(args, r, seed);
    else if (k == "evaluate") res.verdict = evaluate_task(args, r);
    else if (k == "penalty") res.verdict = penalty_task(args, r);
    else if (k == "max-correlation") res.verdict = max_correlation_task(args, r);
    else if (k == "comonotone") res.verdict = comonotone_task(args, r);
    else if (k == "worst-scenario") res.verdict = worst_scenario_task(args, r);
    else if (k == "worst-portfolio") res.verdict = worst_portfolio_task(args, r, workers);
    else if (k == "dual-equality") res.verdict = dual_equality_task(args, r, workers);
    else if (k == "verify-preservation") res.verdict = preservation_task(args, r, seed, workers);
    else if (k == "matrix-sup") res.verdict = matrix_sup_task(args, r);
    else if (k == "matrix-compare") res.verdict = matrix_compare_task(args, r, seed);
    else if (k == "stability") res.verdict = stability_task(args, r);
    else if (k == "time-consistency") res.verdict = time_consistency_task(args, r, seed);
    else throw ScenarioError("task '" + task.name + "': unknown kind '" + k + "'");
  } catch (const CapExceeded& e) {
    r.row("-", "cap", e.what(), "-", "FAILED-CAP");
    res.verdict = Verdict::FailedCap;
  } catch (const ScenarioError& e) {
    r.row("-", "error", e.what(), "-", "INPUT-ERROR");
    res.verdict = Verdict::InputError;
  } catch (const InputError& e) {
    r.row("-", "error", e.what(), "-", "INPUT-ERROR");
    res.verdict = Verdict::InputError;
  } catch (const json::exception& e) {
    r.row("-", "error", e.what(), "-", "INPUT-ERROR");
    res.verdict = Verdict::InputError;
  }
  res.report = r.str();
  return res;
}

int run_scenario(const ScenarioFile& s, const RunOptions& opts, std::ostream& out) {
  const std::uint64_t base = opts.seed.value_or(s.seed);
  if (opts.out_dir) std::filesystem::create_directories(*opts.out_dir);
  bool input_error = false, cap = false, failed = false;
  for (std::size_t i = 0; i < s.tasks.size(); ++i) {
    const auto& task = s.tasks[i];
    if (opts.only && task.name != *opts.only) continue;
    std::uint64_t seed = base + i;
    if (!opts.seed && task.args.contains("seed") && task.args.at("seed").is_number_unsigned()) {
      seed = task.args.at("seed").get<std::uint64_t>();
    }
    const auto res = run_task(s, task, seed, opts.workers);
    input_error = input_error || res.verdict == Verdict::InputError;
    cap = cap || res.verdict == Verdict::FailedCap;
    failed = failed || res.verdict == Verdict::Fail;
    out << task.name << '\t' << task.kind << '\t' << verdict_label(res.verdict) << '\n';
    if (opts.out_dir) {
      char prefix[16];
      std::snprintf(prefix, sizeof prefix, "%02zu-", i);
      std::ofstream f(std::filesystem::path(*opts.out_dir) / (prefix + sanitize(task.name) + ".tsv"), std::ios::binary);
      f << res.report;
    } else {
      out << res.report;
    }
  }
  if (input_error) return 2;
  if (cap) return 3;
  return failed ? 1 : 0;
}

}  // namespace dynrisk::cli
