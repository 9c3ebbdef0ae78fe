#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rtmpc/cost.hpp"
#include "rtmpc/hull.hpp"
#include "rtmpc/lipnet.hpp"
#include "rtmpc/model.hpp"
#include "rtmpc/rtopt.hpp"
#include "rtmpc/types.hpp"

namespace rtmpc {

enum class LearnerKind { off, hull, lipschitz };

/// Simulated learner latency: each memory update takes a number of control
/// periods drawn from a seeded uniform distribution. While an update is in
/// flight, at most the newest offered point stays queued.
struct AsyncConfig {
  bool enabled = false;
  int min_delay = 0;
  int max_delay = 0;
  std::uint64_t seed = 0;
};

struct LearningConfig {
  LearnerKind kind = LearnerKind::off;
  double significance_threshold = 1e-2;
  bool seed_polytope_vertices = false;
  bool seed_origin = false;
  // Multiplier on the cost's Lipschitz constants, for region-restricted
  // bounds when trajectories are known to stay compact. < 1 trades the
  // global envelope guarantee for tighter local cones.
  double lipschitz_scale = 1.0;
  AsyncConfig async;
};

/// Everything needed to run one closed-loop experiment.
struct Scenario {
  std::string name;
  double Ts = 0.1;
  PlantModel plant;
  std::shared_ptr<const CostModel> cost;
  DisturbanceSignal disturbance;
  ReferenceSignal reference;
  Vec x0;
  long sim_steps = 0;
  IterationBudget budget;
  OptimizerConfig optimizer;
  TemporalWarmStartPolicy warm_start;
  LearningConfig learning;
  Mat state_C;  // state polytope rows, used for seeding and sampled starts
  Vec state_d;
};

struct LearnerStats {
  long added = 0;           // points inserted into the memory
  long interior_only = 0;   // stored without extending the hull surface
  long skipped_small = 0;   // improvement below the significance threshold
  long skipped_busy = 0;    // displaced from the queue while an update ran
  long skipped_error = 0;   // degenerate location or rejected record
  long walk_aborts = 0;     // query-side location failures
};

/// Wraps one of the two memories behind a uniform query/offer interface,
/// adding pre-initialization buffering, the significance filter, and the
/// simulated-latency update pipeline.
class LearnerFacade {
 public:
  LearnerFacade(const Scenario& scenario);

  struct QueryResult {
    bool available = false;
    bool aborted = false;  // degenerate walk; skip this step's memory update
    Vec input;
    double bound = kInfinity;  // value-function upper bound at the query
    int facet = 0;             // hull location (signed) when applicable
  };

  LearnerKind kind() const { return kind_; }
  bool ready() const;

  /// Warm-start query against the committed memory; advances the walk hint.
  QueryResult query(const Vec& x);

  /// Offers the data point recorded at x (cost J of sequence U there).
  /// `at_query` must be the query() result for this exact x this step.
  void offer(const Vec& x, const Vec& U, double J, const QueryResult& at_query, long k);

  /// Completes due asynchronous updates; call at the start of each step.
  void tick(long k);

  /// Inserts bypassing the significance filter and the async pipeline
  /// (dataset seeding before the run).
  void seed(const Vec& x, const Vec& U, double J);

  /// Value bound at x against the committed memory; pure.
  double value_bound(const Vec& x) const;

  const LearnerStats& stats() const { return stats_; }
  const ConvexHullMemory* hull() const { return hull_ ? &*hull_ : nullptr; }
  const LipschitzDataset* lipschitz_data() const {
    return kind_ == LearnerKind::lipschitz ? &lipschitz_ : nullptr;
  }

 private:
  struct PendingPoint {
    Vec x;
    Vec U;
    double J = 0.0;
    double L = 0.0;
    int facet_hint = 0;
  };

  void enqueue(PendingPoint point, long k);
  void start(PendingPoint point, long k);
  void commit(const PendingPoint& point, bool trust_hint);
  void commit_hull(const PendingPoint& point, bool trust_hint);
  void try_initialize_hull();
  int draw_delay();

  LearnerKind kind_ = LearnerKind::off;
  double threshold_ = 1e-2;
  double lipschitz_scale_ = 1.0;
  const CostModel* cost_ = nullptr;
  int state_dim_ = 0;

  std::optional<ConvexHullMemory> hull_;
  std::vector<HullPoint> buffer_;
  int guess_hint_ = 0;

  LipschitzDataset lipschitz_;

  AsyncConfig async_;
  std::mt19937_64 rng_;
  std::optional<PendingPoint> in_flight_;
  long in_flight_done_ = 0;
  std::optional<PendingPoint> queued_;

  LearnerStats stats_;
};

struct StepRecord {
  long k = 0;
  Vec x;        // state at the start of the step
  Vec u;        // input applied during the step
  double r = 0.0;
  double stage_cost = 0.0;
  double cost_current = 0.0;    // J(U(k), x(k))
  double cost_temporal = 0.0;   // J at the successor of the shift warm start
  double cost_spatial = 0.0;    // same for the memory warm start (nan if n/a)
  bool spatial_available = false;
  char selected = 't';
  int iterations = 0;
  double cost_final = 0.0;      // J(U(k+1), successor)
  double value_bound = kInfinity;  // memory bound at the successor
  bool shift_decrease_ok = true;   // cost_temporal <= cost_current - stage + tol
  double optimizer_increase = 0.0; // worst per-update cost increase (0 by construction)
  char learner_event = 'n';  // a=added q=queued b=busy s=small e=error i=interior n=none
};

struct RunRecord {
  std::vector<StepRecord> steps;
  std::vector<Vec> input_sequences;  // U(k+1) per step when recording is on
  LearnerStats learner;
  Vec final_state;
  double accumulated_cost = 0.0;
  long shift_decrease_violations = 0;
  double max_optimizer_increase = 0.0;
  double wall_seconds = 0.0;
};

using StepObserver = std::function<void(long k, const LearnerFacade&)>;

struct RunOptions {
  bool record_input_sequences = false;
  StepObserver observer;
};

/// Controller state threaded through the closed loop: the pending input
/// sequence, the plant state, the step counter, and the learner (memory,
/// walk hint, statistics).
struct ControllerState {
  Vec U;
  Vec x;
  long k = 0;
  LearnerFacade learner;
};

/// Fresh state at the scenario's initial condition with U(0) = 0 and, when
/// configured, the memory seeded from the feasible polytope's vertices.
ControllerState make_controller_state(const Scenario& scenario);

/// One closed-loop step: applies u(k) = first input of U(k), computes the
/// warm starts at the nominal successor, selects the cheaper one, runs the
/// iteration budget, offers the result to the memory, and advances the
/// plant with the disturbance. Returns the step's record; the applied
/// input is record.u. Throws std::runtime_error when no warm start has a
/// finite cost.
StepRecord control_step(ControllerState& state, const Scenario& scenario);

/// Executes control_step for scenario.sim_steps steps. Throws
/// std::runtime_error (with the step index) when both warm starts are
/// non-finite.
RunRecord run_closed_loop(const Scenario& scenario, const RunOptions& options = {});

/// Order-sensitive digest of the numeric trace, for replay comparisons.
std::uint64_t run_fingerprint(const RunRecord& record);

}  // namespace rtmpc
