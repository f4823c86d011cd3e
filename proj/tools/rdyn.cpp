#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "rdyn/acceptance.hpp"
#include "rdyn/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Reduced dynamics of interacting bosons"};
  app.require_subcommand(1);
  std::string config;
  auto* run = app.add_subcommand("run", "Run the engines of a scenario");
  run->add_option("config", config, "Scenario JSON")->required();
  auto* validate = app.add_subcommand("validate", "Check a scenario without writing files");
  validate->add_option("config", config, "Scenario JSON")->required();
  auto* selftest = app.add_subcommand("selftest", "Run the acceptance criteria");
  CLI11_PARSE(app, argc, argv);

  using namespace rdyn::harness;
  try {
    if (*selftest) return rdyn::acceptance::run_all(std::cout) ? EXIT_SUCCESS : EXIT_FAILURE;
    const ScenarioConfig cfg = load_config(config);
    if (*validate) {
      for (const std::string& line : rdyn::harness::validate(cfg)) std::cout << line << '\n';
      return EXIT_SUCCESS;
    }
    const RunResult result = rdyn::harness::run(cfg);
    for (const EngineSummary& e : result.engines) std::cout << engine_name(e.engine) << " " << e.csv.string() << '\n';
    std::cout << "manifest " << result.manifest.string() << '\n';
    return EXIT_SUCCESS;
  } catch (...) {
    return exit_code_for_current_exception(std::cerr);
  }
}
