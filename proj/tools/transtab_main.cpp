#include <CLI11.hpp>

#include "transtab/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Finite-time transient stability analysis: repulsion-rate and "
               "FTLE fields, ridge extraction, and online stability certificates"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  int jobs = 0;

  for (const std::string name :
       {"simulate", "field", "ridge", "monitor", "equilibria"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run config (JSON)")->required();
    sub->add_option("--set", overrides, "override config keys (dotted.path=value)");
    sub->add_option("--jobs", jobs, "worker count for field scans (default: logical cores)");
  }

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  // The subcommand must match the config's command key; the config wins on
  // everything else.
  overrides.insert(overrides.begin(), "command=" + command);
  return transtab::run_config(config_path, overrides, jobs);
}
