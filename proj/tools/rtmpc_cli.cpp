#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "rtmpc/runner.hpp"

namespace {

void add_common_flags(CLI::App* cmd, rtmpc::RunInvocation* invocation,
                      std::vector<std::string>* sets) {
  cmd->add_option("--scenario", invocation->scenario, "Scenario preset")
      ->check(CLI::IsMember(rtmpc::preset_names()))
      ->required();
  cmd->add_option("--config", invocation->config_path, "Config file overlaying the preset");
  cmd->add_option("--out", invocation->out_dir, "Output directory for CSV files");
  cmd->add_option("--set", *sets, "Raw config override, key=value")->take_all();
}

void apply_sets(rtmpc::RunInvocation* invocation, const std::vector<std::string>& sets) {
  for (const std::string& entry : sets) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--set expects key=value, got: " + entry);
    }
    invocation->overrides.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-based real-time MPC scenario runner"};
  app.require_subcommand(1);

  rtmpc::RunInvocation run_invocation;
  std::vector<std::string> run_sets;
  long steps = -1;
  int iterations = -1;
  long seed = -1;
  bool no_learning = false;
  std::string learner;
  int async_latency = -1;
  double threshold = -1.0;
  long runs = -1;
  long steps_per_run = -1;
  long periods = -1;

  CLI::App* run = app.add_subcommand("run", "Run one closed-loop scenario");
  add_common_flags(run, &run_invocation, &run_sets);
  run->add_option("--steps", steps, "Number of simulated steps");
  run->add_option("--it", iterations, "Optimizer iterations per step");
  run->add_option("--seed", seed, "Seed for the learner's latency schedule");
  run->add_flag("--no-learning", no_learning, "Disable the memory/warm-start learner");
  run->add_option("--learner", learner, "Learner kind")
      ->check(CLI::IsMember({"hull", "lipschitz", "off"}));
  run->add_option("--async-latency", async_latency,
                  "Simulate learner updates taking 0..N control periods");
  run->add_option("--threshold", threshold, "Significance threshold for storing points");
  run->add_option("--runs", runs, "Reset-schedule scenarios: number of runs");
  run->add_option("--steps-per-run", steps_per_run, "Reset-schedule scenarios: steps per run");
  run->add_option("--periods", periods, "Reference scenarios: number of reference periods");
  run->add_flag("--oracle", run_invocation.with_oracle,
                "Also solve each step to tolerance and emit a suboptimality CSV");
  run->add_option("--oracle-window", run_invocation.oracle_window,
                  "Trailing steps covered by the suboptimality CSV");
  run->add_option("--dump-hull", run_invocation.hull_dump_path,
                  "Write the final hull memory to this file");

  rtmpc::SweepInvocation sweep_invocation;
  std::vector<std::string> sweep_sets;
  int it_min = 1;
  int it_max = 2;
  CLI::App* sweep = app.add_subcommand("sweep", "Sweep optimizer iteration counts");
  add_common_flags(sweep, &sweep_invocation.base, &sweep_sets);
  sweep->add_option("--it-min", it_min, "Smallest iteration count");
  sweep->add_option("--it-max", it_max, "Largest iteration count");
  sweep->add_option("--repeats", sweep_invocation.repeats, "Random initial conditions per point");
  sweep->add_option("--seed", sweep_invocation.seed, "Seed for the initial-condition draws");
  long sweep_steps = -1;
  sweep->add_option("--steps", sweep_steps, "Steps per run");

  std::string dump_path;
  CLI::App* audit = app.add_subcommand("audit-hull", "Consistency-check a hull memory dump");
  audit->add_option("dump", dump_path, "Path to a hull dump file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      apply_sets(&run_invocation, run_sets);
      const rtmpc::ConfigMap preset = rtmpc::resolve_config(run_invocation);
      if (runs > 0 || steps_per_run > 0) {
        const long per_run = steps_per_run > 0
                                 ? steps_per_run
                                 : preset.get_long("disturbance.reset_period", 120);
        run_invocation.overrides.emplace_back("disturbance.reset_period",
                                              std::to_string(per_run));
        if (runs > 0) {
          run_invocation.overrides.emplace_back("sim_steps", std::to_string(runs * per_run + 1));
        }
      }
      if (periods > 0) {
        const long period = preset.get_long("reference.period", 200);
        run_invocation.overrides.emplace_back("sim_steps", std::to_string(periods * period));
      }
      if (steps > 0) {
        run_invocation.overrides.emplace_back("sim_steps", std::to_string(steps));
      }
      if (iterations > 0) {
        run_invocation.overrides.emplace_back("optimizer.iterations", std::to_string(iterations));
      }
      if (no_learning) {
        run_invocation.overrides.emplace_back("learning.learner", "off");
      } else if (!learner.empty()) {
        run_invocation.overrides.emplace_back("learning.learner", learner);
      }
      if (threshold >= 0.0) {
        run_invocation.overrides.emplace_back("learning.threshold", std::to_string(threshold));
      }
      if (async_latency >= 0) {
        run_invocation.overrides.emplace_back("learning.async", "true");
        run_invocation.overrides.emplace_back("learning.async_max_delay",
                                              std::to_string(async_latency));
      }
      if (seed >= 0) {
        run_invocation.overrides.emplace_back("learning.async_seed", std::to_string(seed));
      }
      rtmpc::run_scenario(run_invocation);
      return 0;
    }
    if (sweep->parsed()) {
      apply_sets(&sweep_invocation.base, sweep_sets);
      if (sweep_steps > 0) {
        sweep_invocation.base.overrides.emplace_back("sim_steps", std::to_string(sweep_steps));
      }
      if (it_min < 1 || it_max < it_min) {
        throw CLI::ValidationError("need 1 <= it-min <= it-max");
      }
      for (int it = it_min; it <= it_max; ++it) {
        sweep_invocation.iteration_counts.push_back(it);
      }
      sweep_invocation.base.quiet = true;
      const auto rows = rtmpc::sweep_iterations(sweep_invocation);
      for (const auto& row : rows) {
        std::cout << "it=" << row.iterations << " learning=" << (row.learning ? "on" : "off")
                  << " mean_cost=" << row.mean_accumulated_cost
                  << " mean_step_seconds=" << row.mean_wall_seconds_per_step << "\n";
      }
      return 0;
    }
    if (audit->parsed()) {
      return rtmpc::audit_hull_dump(dump_path);
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
