#include "scenario.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "dynrisk/error.hpp"

namespace dynrisk::cli {

namespace {

template <class T>
const T& lookup(const std::map<std::string, T>& m, const std::string& name, const char* what) {
  const auto it = m.find(name);
  if (it == m.end()) throw ScenarioError(std::string("unknown ") + what + " '" + name + "'");
  return it->second;
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ScenarioError(where + ": missing '" + key + "'");
  return obj.at(key);
}

int get_int(const json& obj, const char* key, const std::string& where) {
  const auto& v = field(obj, key, where);
  if (!v.is_number_integer()) throw ScenarioError(where + ": '" + key + "' must be an integer");
  return v.get<int>();
}

std::vector<double> number_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw ScenarioError(where + ": expected a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(parse_number(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<std::vector<double>> number_rows(const json& v, const std::string& where) {
  if (!v.is_array()) throw ScenarioError(where + ": expected a list of rows");
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number_list(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

json number_json(double v) {
  if (v == -std::numeric_limits<double>::infinity()) return "-inf";
  return v;
}

json rows_json(const std::vector<std::vector<double>>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json row = json::array();
    for (double v : r) row.push_back(number_json(v));
    out.push_back(row);
  }
  return out;
}

SpacePtr parse_space(const json& v) {
  const std::string where = "space";
  std::vector<double> probs;
  if (v.contains("probs")) probs = number_list(v.at("probs"), where + ".probs");
  try {
    if (v.contains("tree")) {
      std::vector<std::size_t> branching;
      for (const auto& b : v.at("tree")) {
        if (!b.is_number_unsigned()) throw ScenarioError("space.tree: branching factors must be positive integers");
        branching.push_back(b.get<std::size_t>());
      }
      return make_space(FiniteFilteredSpace::tree(branching, probs));
    }
    std::vector<Partition> parts;
    for (const auto& p : field(v, "partitions", where)) {
      Partition part;
      for (const auto& atom : p) part.push_back(atom.get<Atom>());
      parts.push_back(std::move(part));
    }
    return make_space(FiniteFilteredSpace(std::move(probs), std::move(parts)));
  } catch (const json::exception& e) {
    throw ScenarioError(where + ": " + e.what());
  } catch (const InputError& e) {
    throw ScenarioError(where + ": " + e.what());
  }
}

DensityProcess parse_density(const SpacePtr& sp, const json& v, const std::string& where) {
  try {
    DensityProcess a(sp, get_int(v, "start", where), number_rows(field(v, "increments", where), where + ".increments"));
    const auto mem = membership(a, DensityClass::A1Plus, a.t_start());
    if (!mem.ok) throw ScenarioError(where + ": " + mem.message);
    return a;
  } catch (const InputError& e) {
    throw ScenarioError(where + ": " + e.what());
  }
}

json density_json(const DensityProcess& a) {
  return {{"start", a.t_start()}, {"increments", rows_json(a.increments().rows())}};
}

TerminalDensity parse_terminal(const SpacePtr& sp, const json& v, const std::string& where) {
  try {
    return TerminalDensity(sp, number_list(v, where));
  } catch (const InputError& e) {
    throw ScenarioError(where + ": " + e.what());
  }
}

json terminal_json(const TerminalDensity& f) {
  json out = json::array();
  for (double v : f.values()) out.push_back(v);
  return out;
}

// A density is either the name of a declared one or an inline object.
DensityProcess density_ref(const ScenarioFile& s, const json& v, const std::string& where) {
  if (v.is_string()) return s.density(v.get<std::string>());
  return parse_density(s.space, v, where);
}

TerminalDensity terminal_ref(const ScenarioFile& s, const json& v, const std::string& where) {
  if (v.is_string()) return s.terminal_density(v.get<std::string>());
  return parse_terminal(s.space, v, where);
}

UtilityFunction parse_utility(const ScenarioFile& s, const json& v, const std::string& where) {
  const auto kind = field(v, "kind", where).get<std::string>();
  try {
    if (kind == "dual-finite") {
      std::vector<Scenario> sc;
      const auto& list = field(v, "scenarios", where);
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string w = where + ".scenarios[" + std::to_string(i) + "]";
        auto a = density_ref(s, field(list[i], "density", w), w + ".density");
        const int t = a.t_start();
        sc.push_back({std::move(a), ConditionalValue(t, number_list(field(list[i], "penalty", w), w + ".penalty"))});
      }
      if (sc.empty()) throw ScenarioError(where + ": no scenarios");
      return DualFiniteUtility(std::move(sc));
    }
    if (kind == "coherent") {
      std::vector<DensityProcess> dens;
      const auto& list = field(v, "densities", where);
      for (std::size_t i = 0; i < list.size(); ++i)
        dens.push_back(density_ref(s, list[i], where + ".densities[" + std::to_string(i) + "]"));
      if (dens.empty()) throw ScenarioError(where + ": no densities");
      return DualFiniteUtility::coherent(std::move(dens));
    }
    const double alpha = parse_number(field(v, "alpha", where), where + ".alpha");
    const int t0 = get_int(v, "start", where);
    const int t1 = get_int(v, "end", where);
    if (kind == "entropic") return EntropicUtility(s.space, alpha, t0, t1);
    if (kind == "robust-entropic") {
      std::vector<TerminalDensity> dens;
      const auto& list = field(v, "densities", where);
      for (std::size_t i = 0; i < list.size(); ++i)
        dens.push_back(terminal_ref(s, list[i], where + ".densities[" + std::to_string(i) + "]"));
      if (dens.empty()) throw ScenarioError(where + ": no densities");
      return RobustEntropicUtility(alpha, std::move(dens), t0, t1);
    }
  } catch (const InputError& e) {
    throw ScenarioError(where + ": " + e.what());
  }
  throw ScenarioError(where + ": unknown utility kind '" + kind + "'");
}

json utility_json(const UtilityFunction& u) {
  if (const auto* d = std::get_if<DualFiniteUtility>(&u)) {
    json list = json::array();
    for (const auto& sc : d->scenarios()) {
      json pen = json::array();
      for (double v : sc.penalty.values()) pen.push_back(number_json(v));
      list.push_back({{"density", density_json(sc.density)}, {"penalty", pen}});
    }
    return {{"kind", "dual-finite"}, {"scenarios", list}};
  }
  if (const auto* e = std::get_if<EntropicUtility>(&u)) {
    return {{"kind", "entropic"}, {"alpha", e->alpha()}, {"start", e->t_start()}, {"end", e->t_end()}};
  }
  const auto& r = std::get<RobustEntropicUtility>(u);
  json list = json::array();
  for (const auto& f : r.densities()) list.push_back(terminal_json(f));
  return {{"kind", "robust-entropic"}, {"alpha", r.alpha()}, {"start", r.t_start()}, {"end", r.t_end()},
          {"densities", list}};
}

UtilityProcessSpec parse_utility_process(const ScenarioFile& s, const json& v, const std::string& where) {
  UtilityProcessSpec p;
  p.kind = field(v, "kind", where).get<std::string>();
  if (p.kind == "entropic") {
    p.alpha = parse_number(field(v, "alpha", where), where + ".alpha");
    p.first = v.value("first", 0);
  } else if (p.kind == "normalized-coherent") {
    p.densities = field(v, "densities", where).get<std::vector<std::string>>();
    for (const auto& d : p.densities) s.density(d);
  } else if (p.kind == "members") {
    p.members = field(v, "members", where).get<std::vector<std::string>>();
    for (const auto& m : p.members) s.utility(m);
  } else {
    throw ScenarioError(where + ": unknown utility process kind '" + p.kind + "'");
  }
  return p;
}

json utility_process_json(const UtilityProcessSpec& p) {
  if (p.kind == "entropic") return {{"kind", p.kind}, {"alpha", p.alpha}, {"first", p.first}};
  if (p.kind == "normalized-coherent") return {{"kind", p.kind}, {"densities", p.densities}};
  return {{"kind", p.kind}, {"members", p.members}};
}

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

double parse_number(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto str = v.get<std::string>();
    if (str == "-inf") return -std::numeric_limits<double>::infinity();
    char* end = nullptr;
    errno = 0;
    const double d = std::strtod(str.c_str(), &end);
    if (!str.empty() && end == str.c_str() + str.size() && errno == 0 && std::isfinite(d)) return d;
  }
  throw ScenarioError(where + ": not a number: " + v.dump());
}

const AdaptedProcess& ScenarioFile::process(const std::string& name) const { return lookup(processes, name, "process"); }
const DensityProcess& ScenarioFile::density(const std::string& name) const { return lookup(densities, name, "density"); }
const TerminalDensity& ScenarioFile::terminal_density(const std::string& name) const {
  return lookup(terminal_densities, name, "terminal density");
}
const UtilityFunction& ScenarioFile::utility(const std::string& name) const { return lookup(utilities, name, "utility"); }

UtilityProcess ScenarioFile::utility_process(const std::string& name) const {
  const auto& p = lookup(utility_processes, name, "utility process");
  if (p.kind == "entropic") return UtilityProcess::entropic(space, p.alpha, p.first, space->horizon());
  if (p.kind == "normalized-coherent") {
    std::vector<DensityProcess> set;
    for (const auto& d : p.densities) set.push_back(density(d));
    return UtilityProcess::normalized_coherent(set);
  }
  std::vector<UtilityFunction> members;
  for (const auto& m : p.members) members.push_back(utility(m));
  return UtilityProcess(std::move(members));
}

ScenarioFile parse_scenario(const json& doc) {
  if (!doc.is_object()) throw ScenarioError("top level must be an object");
  ScenarioFile s;
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) throw ScenarioError("seed must be a non-negative integer");
    s.seed = doc.at("seed").get<std::uint64_t>();
  }
  s.space = parse_space(field(doc, "space", "scenario"));
  const json empty = json::object();
  const json processes_block = doc.value("processes", empty);
  for (const auto& [name, v] : processes_block.items()) {
    const std::string where = "processes." + name;
    try {
      s.processes.emplace(name, AdaptedProcess(s.space, get_int(v, "start", where),
                                               number_rows(field(v, "values", where), where + ".values")));
    } catch (const InputError& e) {
      throw ScenarioError(where + ": " + e.what());
    }
  }
  const json densities_block = doc.value("densities", empty);
  for (const auto& [name, v] : densities_block.items())
    s.densities.emplace(name, parse_density(s.space, v, "densities." + name));
  const json terminal_densities_block = doc.value("terminal_densities", empty);
  for (const auto& [name, v] : terminal_densities_block.items())
    s.terminal_densities.emplace(name, parse_terminal(s.space, v, "terminal_densities." + name));
  const json utilities_block = doc.value("utilities", empty);
  for (const auto& [name, v] : utilities_block.items())
    s.utilities.emplace(name, parse_utility(s, v, "utilities." + name));
  const json utility_processes_block = doc.value("utility_processes", empty);
  for (const auto& [name, v] : utility_processes_block.items())
    s.utility_processes.emplace(name, parse_utility_process(s, v, "utility_processes." + name));
  if (doc.contains("tasks")) {
    const auto& tasks = doc.at("tasks");
    if (!tasks.is_array()) throw ScenarioError("tasks must be a list");
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const std::string where = "tasks[" + std::to_string(i) + "]";
      Task t;
      t.kind = field(tasks[i], "kind", where).get<std::string>();
      t.name = tasks[i].value("name", t.kind + "-" + std::to_string(i));
      t.args = tasks[i].value("args", json::object());
      s.tasks.push_back(std::move(t));
    }
  }
  return s;
}

ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto text = ss.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(path + ": parse error at " + line_col(text, e.byte == 0 ? 0 : e.byte - 1) + ": " + e.what());
  }
  try {
    return parse_scenario(doc);
  } catch (const json::exception& e) {
    throw ScenarioError(path + ": " + e.what());
  } catch (const ScenarioError& e) {
    throw ScenarioError(path + ": " + e.what());
  }
}

json to_json(const ScenarioFile& s) {
  json doc;
  doc["seed"] = s.seed;
  json parts = json::array();
  for (int t = 0; t <= s.space->horizon(); ++t) parts.push_back(s.space->atoms(t));
  json probs = json::array();
  for (double p : s.space->probs()) probs.push_back(p);
  doc["space"] = {{"probs", probs}, {"partitions", parts}};
  doc["processes"] = json::object();
  for (const auto& [name, x] : s.processes) doc["processes"][name] = {{"start", x.t_start()}, {"values", rows_json(x.rows())}};
  doc["densities"] = json::object();
  for (const auto& [name, a] : s.densities) doc["densities"][name] = density_json(a);
  doc["terminal_densities"] = json::object();
  for (const auto& [name, f] : s.terminal_densities) doc["terminal_densities"][name] = terminal_json(f);
  doc["utilities"] = json::object();
  for (const auto& [name, u] : s.utilities) doc["utilities"][name] = utility_json(u);
  doc["utility_processes"] = json::object();
  for (const auto& [name, p] : s.utility_processes) doc["utility_processes"][name] = utility_process_json(p);
  doc["tasks"] = json::array();
  for (const auto& t : s.tasks) doc["tasks"].push_back({{"name", t.name}, {"kind", t.kind}, {"args", t.args}});
  return doc;
}

}  // namespace dynrisk::cli
