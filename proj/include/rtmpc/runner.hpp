#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rtmpc/config.hpp"
#include "rtmpc/controller.hpp"

namespace rtmpc {

/// Scenario-runner entry points shared by the command-line tool and the
/// test suites. All emitted CSV uses '.' decimals, a header row, and no
/// locale-dependent formatting.
struct RunInvocation {
  std::string scenario;                                     // preset name
  std::string config_path;                                  // optional overlay file
  std::vector<std::pair<std::string, std::string>> overrides;  // key, value
  std::string out_dir = ".";
  bool with_oracle = false;
  long oracle_window = 500;
  std::string hull_dump_path;  // write the hull memory here after the run
  bool quiet = false;
};

/// Resolved configuration for an invocation (preset + file + overrides).
ConfigMap resolve_config(const RunInvocation& invocation);

struct RunArtifacts {
  Scenario scenario;
  RunRecord record;
  std::string trace_path;
  std::string summary_path;
  std::string stats_path;
  std::string subopt_path;  // empty unless the oracle comparison ran
};

/// Runs the scenario and writes trace/summary/stats CSVs (and the
/// suboptimality CSV when requested). Throws on configuration errors;
/// controller faults propagate as std::runtime_error.
RunArtifacts run_scenario(const RunInvocation& invocation);

struct SweepRow {
  int iterations = 0;
  bool learning = false;
  double mean_wall_seconds_per_step = 0.0;
  double mean_accumulated_cost = 0.0;
};

struct SweepInvocation {
  RunInvocation base;
  std::vector<int> iteration_counts;
  int repeats = 1;
  std::uint64_t seed = 0;
};

/// Runs the scenario over the iteration-count grid with learning on and
/// off, starting from seeded random draws inside the state polytope.
/// Writes sweep.csv and returns the rows.
std::vector<SweepRow> sweep_iterations(const SweepInvocation& invocation);

/// Re-runs the hull memory consistency audit on a saved dump. Returns 0
/// when every check passes, 1 on violations, 2 on parse failure.
int audit_hull_dump(const std::string& dump_path, std::vector<std::string>* violations = nullptr);

/// Per-period aggregates recomputed from the trace. Period p covers steps
/// [offset + (p-1)*L, offset + p*L); reset-schedule runs use offset 1 so
/// every period starts at the reset state. Used for both summary emission
/// and tests.
struct PeriodSummary {
  long period = 0;
  double accumulated_stage_cost = 0.0;
  double mean_tracking_error = 0.0;  // mean |x1 - r|; zero without reference
};
std::vector<PeriodSummary> summarize_periods(const RunRecord& record, long period_length,
                                             long offset = 0);

/// Suboptimality of both warm starts and the applied sequence against the
/// reference solver, for the trailing `window` steps of a recorded run.
struct SuboptRow {
  long k = 0;
  double optimal_cost = 0.0;
  double subopt_temporal = 0.0;
  double subopt_spatial = 0.0;  // nan when the memory had no answer
  double subopt_final = 0.0;
};
std::vector<SuboptRow> suboptimality_trace(const Scenario& scenario, const RunRecord& record,
                                           long window);

}  // namespace rtmpc
