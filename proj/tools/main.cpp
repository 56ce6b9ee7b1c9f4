#include "autotaxi/commands.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  using namespace autotaxi;
  CLI::App app{"Multi-aircraft auto-taxiing simulator"};
  app.require_subcommand(1);

  CommandOptions opts;
  std::string policy;
  std::uint64_t seed = 0;
  std::string out_dir;
  bool no_splines = false;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", opts.scenario, "Scenario YAML file")->required();
    cmd->add_option("--out", out_dir, "Output root (default: $AUTOTAXI_OUT_DIR or ./runs)");
    cmd->add_option("--policy", policy, "safe_taxi, naive or wait_and_go");
    cmd->add_option("--seed", seed, "Tie-break seed");
    cmd->add_option("--set", opts.sets, "Override a scenario key, e.g. solver.d_safe=0.2")
        ->take_all();
    cmd->add_flag("--no-splines", no_splines, "Skip splines.csv");
  };
  CLI::App* run = app.add_subcommand("run", "Simulate one policy and write run artifacts");
  add_common(run);
  CLI::App* compare = app.add_subcommand("compare", "Run all three policies and tabulate metrics");
  add_common(compare);
  CLI::App* validate = app.add_subcommand("validate", "Check a scenario and print its plan");
  add_common(validate);
  std::string run_dir;
  CLI::App* plot = app.add_subcommand("plot-data", "Write figure-ready series for a run");
  plot->add_option("run_dir", run_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }
  for (CLI::App* cmd : {run, compare, validate}) {
    if (!cmd->parsed()) continue;
    if (cmd->count("--policy")) opts.policy = policy;
    if (cmd->count("--seed")) opts.seed = seed;
    if (cmd->count("--out")) opts.out = out_dir;
    opts.splines = !no_splines;
  }
  try {
    if (run->parsed()) return cmd_run(opts, std::cout, std::cerr);
    if (compare->parsed()) return cmd_compare(opts, std::cout, std::cerr);
    if (validate->parsed()) return cmd_validate(opts, std::cout, std::cerr);
    if (plot->parsed()) return cmd_plot_data(run_dir, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitConfigError;
}
