#include <iostream>

#include <CLI11.hpp>

#include "scenario.hpp"

int main(int argc, char** argv) {
  using namespace dynrisk::cli;
  CLI::App app{"Dynamic monetary utilities and worst-case portfolios on finite scenario trees"};
  app.require_subcommand(1);

  std::string path;
  RunOptions opts;
  std::string only, out_dir;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "Run the tasks of a scenario file");
  run->add_option("file", path, "Scenario file")->required();
  auto* only_opt = run->add_option("--only", only, "Run only the task with this name");
  auto* out_opt = run->add_option("--out", out_dir, "Write one report per task into this directory");
  run->add_option("--workers", opts.workers, "Worker threads for tuple enumeration")->check(CLI::PositiveNumber);
  auto* seed_opt = run->add_option("--seed", seed, "Override every seed in the file");

  std::string dump_path;
  auto* dump = app.add_subcommand("dump", "Load a scenario file and print it back in canonical form");
  dump->add_option("file", dump_path, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*dump) {
      std::cout << to_json(load_scenario(dump_path)).dump(2) << '\n';
      return 0;
    }
    if (*only_opt) opts.only = only;
    if (*out_opt) opts.out_dir = out_dir;
    if (*seed_opt) opts.seed = seed;
    const auto scenario = load_scenario(path);
    return run_scenario(scenario, opts, std::cout);
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
