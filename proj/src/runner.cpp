#include "rtmpc/runner.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

namespace rtmpc {

namespace {

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out.imbue(std::locale::classic());
  out << std::setprecision(17);
  return out;
}

void write_trace(const std::string& path, const Scenario& scenario, const RunRecord& record) {
  std::ofstream out = open_csv(path);
  const int n = scenario.plant.state_dim;
  const int m = scenario.plant.input_dim;
  out << "k";
  for (int i = 0; i < n; ++i) {
    out << ",x" << i + 1;
  }
  for (int i = 0; i < m; ++i) {
    out << ",u" << i + 1;
  }
  out << ",r,stage_cost,cost_current,cost_temporal,cost_spatial,spatial_available,"
         "selected,iterations,cost_final,value_bound,shift_decrease_ok,learner_event\n";
  for (const StepRecord& s : record.steps) {
    out << s.k;
    for (int i = 0; i < n; ++i) {
      out << "," << s.x(i);
    }
    for (int i = 0; i < m; ++i) {
      out << "," << s.u(i);
    }
    out << "," << s.r << "," << s.stage_cost << "," << s.cost_current << "," << s.cost_temporal
        << "," << s.cost_spatial << "," << (s.spatial_available ? 1 : 0) << "," << s.selected
        << "," << s.iterations << "," << s.cost_final << "," << s.value_bound << ","
        << (s.shift_decrease_ok ? 1 : 0) << "," << s.learner_event << "\n";
  }
}

long summary_period_length(const Scenario& scenario) {
  if (scenario.reference.kind == ReferenceSignal::Kind::periodic_step) {
    return scenario.reference.period;
  }
  if (scenario.disturbance.kind == DisturbanceSignal::Kind::reset_schedule) {
    return scenario.disturbance.reset_period;
  }
  return 0;
}

void write_summary(const std::string& path, const Scenario& scenario, const RunRecord& record) {
  std::ofstream out = open_csv(path);
  const long period = summary_period_length(scenario);
  const long offset =
      scenario.disturbance.kind == DisturbanceSignal::Kind::reset_schedule ? 1 : 0;
  out << "period,accumulated_stage_cost,mean_tracking_error\n";
  for (const PeriodSummary& row : summarize_periods(record, period, offset)) {
    out << row.period << "," << row.accumulated_stage_cost << "," << row.mean_tracking_error
        << "\n";
  }
}

void write_stats(const std::string& path, const RunRecord& record) {
  std::ofstream out = open_csv(path);
  out << "added,interior_only,skipped_small,skipped_busy,skipped_error,walk_aborts,"
         "shift_decrease_violations,max_optimizer_increase,accumulated_cost,final_state_norm,"
         "wall_seconds\n";
  out << record.learner.added << "," << record.learner.interior_only << ","
      << record.learner.skipped_small << "," << record.learner.skipped_busy << ","
      << record.learner.skipped_error << "," << record.learner.walk_aborts << ","
      << record.shift_decrease_violations << "," << record.max_optimizer_increase << ","
      << record.accumulated_cost << "," << record.final_state.norm() << ","
      << record.wall_seconds << "\n";
}

}  // namespace

ConfigMap resolve_config(const RunInvocation& invocation) {
  ConfigMap config = ConfigMap::parse(preset_config_text(invocation.scenario));
  if (!invocation.config_path.empty()) {
    config.merge(ConfigMap::parse_file(invocation.config_path));
  }
  for (const auto& [key, value] : invocation.overrides) {
    config.set(key, value);
  }
  return config;
}

std::vector<PeriodSummary> summarize_periods(const RunRecord& record, long period_length,
                                             long offset) {
  std::vector<PeriodSummary> rows;
  if (record.steps.empty()) {
    return rows;
  }
  if (period_length <= 0) {
    PeriodSummary all;
    all.period = 1;
    for (const StepRecord& s : record.steps) {
      all.accumulated_stage_cost += s.stage_cost;
      all.mean_tracking_error += std::abs(s.x(0) - s.r);
    }
    all.mean_tracking_error /= static_cast<double>(record.steps.size());
    rows.push_back(all);
    return rows;
  }
  // Steps k in [offset + p*L, offset + (p+1)*L) form period p+1; partial
  // periods are dropped.
  long period = 1;
  PeriodSummary current;
  current.period = period;
  long count = 0;
  for (const StepRecord& s : record.steps) {
    const long local = s.k - offset;
    if (local < 0) {
      continue;
    }
    if (local / period_length + 1 != period) {
      if (count == period_length) {
        current.mean_tracking_error /= static_cast<double>(count);
        rows.push_back(current);
      }
      period = local / period_length + 1;
      current = PeriodSummary{};
      current.period = period;
      count = 0;
    }
    current.accumulated_stage_cost += s.stage_cost;
    current.mean_tracking_error += std::abs(s.x(0) - s.r);
    ++count;
  }
  if (count == period_length) {
    current.mean_tracking_error /= static_cast<double>(count);
    rows.push_back(current);
  }
  return rows;
}

std::vector<SuboptRow> suboptimality_trace(const Scenario& scenario, const RunRecord& record,
                                           long window) {
  std::vector<SuboptRow> rows;
  const long total = static_cast<long>(record.steps.size());
  const long begin = window > 0 && window < total ? total - window : 0;
  if (record.input_sequences.size() != record.steps.size()) {
    throw std::invalid_argument("suboptimality_trace: run was recorded without input sequences");
  }
  const CostModel& cost = *scenario.cost;
  Vec warm = Vec::Zero(cost.input_sequence_dim());
  for (long i = begin; i < total; ++i) {
    const StepRecord& s = record.steps[static_cast<size_t>(i)];
    const Vec successor = cost.plant().step(s.x, s.u);
    const double r_next = scenario.reference.at(s.k + 1);
    warm = record.input_sequences[static_cast<size_t>(i)];
    const OracleSolution sol = oracle_solve(scenario.optimizer, cost, successor, warm, r_next);
    SuboptRow row;
    row.k = s.k;
    row.optimal_cost = sol.cost;
    row.subopt_temporal = s.cost_temporal - sol.cost;
    row.subopt_spatial = s.spatial_available ? s.cost_spatial - sol.cost
                                             : std::numeric_limits<double>::quiet_NaN();
    row.subopt_final = s.cost_final - sol.cost;
    rows.push_back(row);
  }
  return rows;
}

RunArtifacts run_scenario(const RunInvocation& invocation) {
  const ConfigMap config = resolve_config(invocation);
  RunArtifacts artifacts;
  artifacts.scenario = build_scenario(config);

  RunOptions options;
  options.record_input_sequences = invocation.with_oracle;
  std::optional<ConvexHullMemory> final_hull;
  if (!invocation.hull_dump_path.empty()) {
    const long last_step = artifacts.scenario.sim_steps - 1;
    options.observer = [&final_hull, last_step](long k, const LearnerFacade& facade) {
      if (k == last_step && facade.hull() != nullptr) {
        final_hull = *facade.hull();
      }
    };
  }
  artifacts.record = run_closed_loop(artifacts.scenario, options);

  std::filesystem::create_directories(invocation.out_dir);
  const std::string base = invocation.out_dir + "/" + artifacts.scenario.name;
  artifacts.trace_path = base + "_trace.csv";
  artifacts.summary_path = base + "_summary.csv";
  artifacts.stats_path = base + "_stats.csv";
  write_trace(artifacts.trace_path, artifacts.scenario, artifacts.record);
  write_summary(artifacts.summary_path, artifacts.scenario, artifacts.record);
  write_stats(artifacts.stats_path, artifacts.record);

  if (invocation.with_oracle) {
    artifacts.subopt_path = base + "_subopt.csv";
    std::ofstream out = open_csv(artifacts.subopt_path);
    out << "k,optimal_cost,subopt_temporal,subopt_spatial,subopt_final\n";
    for (const SuboptRow& row :
         suboptimality_trace(artifacts.scenario, artifacts.record, invocation.oracle_window)) {
      out << row.k << "," << row.optimal_cost << "," << row.subopt_temporal << ","
          << row.subopt_spatial << "," << row.subopt_final << "\n";
    }
  }

  if (!invocation.hull_dump_path.empty()) {
    if (!final_hull.has_value()) {
      throw std::runtime_error("hull dump requested but the run built no hull memory");
    }
    std::ofstream out(invocation.hull_dump_path);
    if (!out) {
      throw std::runtime_error("cannot write " + invocation.hull_dump_path);
    }
    final_hull->dump(out);
  }

  if (!invocation.quiet) {
    std::cout << artifacts.scenario.name << ": " << artifacts.record.steps.size()
              << " steps, accumulated cost " << artifacts.record.accumulated_cost
              << ", |x(end)| = " << artifacts.record.final_state.norm() << "\n"
              << "learner: added " << artifacts.record.learner.added << ", interior "
              << artifacts.record.learner.interior_only << ", skipped small "
              << artifacts.record.learner.skipped_small << ", skipped busy "
              << artifacts.record.learner.skipped_busy << ", errors "
              << artifacts.record.learner.skipped_error << "\n";
  }
  return artifacts;
}

std::vector<SweepRow> sweep_iterations(const SweepInvocation& invocation) {
  if (invocation.iteration_counts.empty()) {
    throw std::invalid_argument("sweep_iterations: empty iteration range");
  }
  const ConfigMap base_config = resolve_config(invocation.base);
  Scenario probe = build_scenario(base_config);
  if (probe.state_C.rows() == 0) {
    throw std::invalid_argument("sweep_iterations: scenario has no state polytope to draw from");
  }
  const auto vertices = polytope_vertices(probe.state_C, probe.state_d);
  Vec lo = vertices.front();
  Vec hi = vertices.front();
  for (const Vec& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  std::mt19937_64 rng(invocation.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec> starts;
  while (static_cast<int>(starts.size()) < invocation.repeats) {
    Vec x(lo.size());
    for (long j = 0; j < x.size(); ++j) {
      x(j) = lo(j) + (hi(j) - lo(j)) * unit(rng);
    }
    if (((probe.state_C * x - 0.9 * probe.state_d).array() <= 0.0).all()) {
      starts.push_back(0.9 * x);
    }
  }

  std::vector<SweepRow> rows;
  for (int iterations : invocation.iteration_counts) {
    for (bool learning : {true, false}) {
      SweepRow row;
      row.iterations = iterations;
      row.learning = learning;
      double total_cost = 0.0;
      double total_seconds = 0.0;
      long total_steps = 0;
      for (const Vec& x0 : starts) {
        Scenario scenario = build_scenario(base_config);
        scenario.budget.count = iterations;
        scenario.budget.wall_clock_seconds = 0.0;
        scenario.x0 = x0;
        if (!learning) {
          scenario.learning.kind = LearnerKind::off;
        }
        const RunRecord record = run_closed_loop(scenario);
        total_cost += record.accumulated_cost;
        total_seconds += record.wall_seconds;
        total_steps += static_cast<long>(record.steps.size());
      }
      row.mean_accumulated_cost = total_cost / static_cast<double>(starts.size());
      row.mean_wall_seconds_per_step = total_seconds / static_cast<double>(total_steps);
      rows.push_back(row);
    }
  }

  std::filesystem::create_directories(invocation.base.out_dir);
  std::ofstream out =
      open_csv(invocation.base.out_dir + "/" + probe.name + "_sweep.csv");
  out << "iterations,learning,mean_wall_seconds_per_step,mean_accumulated_cost\n";
  for (const SweepRow& row : rows) {
    out << row.iterations << "," << (row.learning ? 1 : 0) << ","
        << row.mean_wall_seconds_per_step << "," << row.mean_accumulated_cost << "\n";
  }
  return rows;
}

int audit_hull_dump(const std::string& dump_path, std::vector<std::string>* violations) {
  std::ifstream in(dump_path);
  if (!in) {
    std::cerr << "audit: cannot open " << dump_path << "\n";
    return 2;
  }
  const auto hull = ConvexHullMemory::read_dump(in);
  if (!hull.has_value()) {
    std::cerr << "audit: parse failure in " << dump_path << "\n";
    return 2;
  }
  const std::vector<std::string> issues = hull->audit();
  if (violations != nullptr) {
    *violations = issues;
  }
  for (const std::string& issue : issues) {
    std::cerr << "audit: " << issue << "\n";
  }
  if (issues.empty()) {
    std::cout << "audit: " << hull->point_count() << " points, " << hull->live_lower_count()
              << " lower facets, " << hull->live_outer_count()
              << " outer facets, all checks passed\n";
  }
  return issues.empty() ? 0 : 1;
}

}  // namespace rtmpc
