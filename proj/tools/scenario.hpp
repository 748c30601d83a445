#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dynrisk/processes.hpp"
#include "dynrisk/space.hpp"
#include "dynrisk/utility.hpp"

namespace dynrisk::cli {

using json = nlohmann::json;

// Malformed file or unresolved name; the message says where.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct UtilityProcessSpec {
  std::string kind;  // "entropic", "normalized-coherent" or "members"
  double alpha = 1.0;
  int first = 0;
  std::vector<std::string> densities;  // normalized-coherent
  std::vector<std::string> members;    // names of utilities, one per time
};

struct Task {
  std::string name;
  std::string kind;
  json args;
};

struct ScenarioFile {
  std::uint64_t seed = 1;
  SpacePtr space;
  std::map<std::string, AdaptedProcess> processes;
  std::map<std::string, DensityProcess> densities;
  std::map<std::string, TerminalDensity> terminal_densities;
  std::map<std::string, UtilityFunction> utilities;
  std::map<std::string, UtilityProcessSpec> utility_processes;
  std::vector<Task> tasks;

  const AdaptedProcess& process(const std::string& name) const;
  const DensityProcess& density(const std::string& name) const;
  const TerminalDensity& terminal_density(const std::string& name) const;
  const UtilityFunction& utility(const std::string& name) const;
  UtilityProcess utility_process(const std::string& name) const;
};

// Numbers are JSON numbers or decimal strings; "-inf" is the only
// non-finite value accepted.
double parse_number(const json& v, const std::string& where);

ScenarioFile parse_scenario(const json& doc);
ScenarioFile load_scenario(const std::string& path);
json to_json(const ScenarioFile& s);

struct RunOptions {
  std::optional<std::string> only;
  std::optional<std::string> out_dir;
  std::size_t workers = 1;
  std::optional<std::uint64_t> seed;
};

enum class Verdict { Pass, Fail, Info, FailedCap, InputError };

struct TaskResult {
  Verdict verdict = Verdict::Info;
  std::string report;  // TSV body including the header
};

TaskResult run_task(const ScenarioFile& s, const Task& task, std::uint64_t seed, std::size_t workers);

// Runs the tasks in file order, writes one report per task (to out_dir or
// `out`), one summary line per task to `out`. Returns the exit status.
int run_scenario(const ScenarioFile& s, const RunOptions& opts, std::ostream& out);

const char* verdict_label(Verdict v);

}  // namespace dynrisk::cli
