#pragma once

#include "rtmpc/cost.hpp"
#include "rtmpc/types.hpp"

namespace rtmpc {

/// Backtracking gradient-descent parameters. The initial trial step is
/// 1/c2, halved by rho until the Armijo test with constant c1 passes.
struct OptimizerConfig {
  double rho = 0.5;
  double c1 = 1e-3;
  double c2 = 0.999;
  int max_backtracks = 48;
  double oracle_grad_tol = 1e-8;
  long oracle_max_iterations = 100000;

  void validate() const;
};

/// Shift warm start: drop the first input, shift the rest forward, append a
/// tail input for the new final stage.
struct TemporalWarmStartPolicy {
  enum class Tail { local_gain, zero };

  Tail tail = Tail::zero;
  Mat gain;  // tail input = gain * (x_N - x_s(r)); used by Tail::local_gain
};

/// Warm start for the successor state f(x, u0): components 0..N-2 equal
/// components 1..N-1 of U, the tail comes from the policy evaluated at the
/// shifted trajectory's terminal state.
Vec temporal_warm_start(const TemporalWarmStartPolicy& policy, const CostModel& cost, const Vec& U,
                        const Vec& x, double r = 0.0);

struct OptimizerStep {
  Vec U;
  double cost_before = 0.0;
  double cost_after = 0.0;
  bool improved = false;   // an Armijo step was accepted
  int backtracks = 0;
};

/// One gradient-descent step with backtracking line search. Never increases
/// the cost: when no trial step passes the Armijo test (or the gradient is
/// non-finite) the input sequence is returned unchanged and flagged.
OptimizerStep optimizer_update(const OptimizerConfig& cfg, const CostModel& cost, const Vec& U,
                               const Vec& x, double r = 0.0);

/// Per-step optimization budget: fixed iteration count, or a wall-clock
/// budget (seconds) when wall_clock_seconds > 0. At least one update always
/// runs under a wall-clock budget.
struct IterationBudget {
  int count = 1;
  double wall_clock_seconds = 0.0;
};

struct IterateResult {
  Vec U;
  int iterations = 0;
  double cost_after = 0.0;
  int stalled_updates = 0;
  double worst_increase = 0.0;  // stays exactly 0 by construction
};

/// Runs the optimizer on the warm start at the successor state
/// f(x, u0(U_current)), exhausting the budget. Throws on an empty budget.
IterateResult iterate(const OptimizerConfig& cfg, const CostModel& cost, const Vec& U_current,
                      const Vec& x, const Vec& warm_start, const IterationBudget& budget,
                      double r = 0.0);

struct OracleSolution {
  Vec U;
  double cost = 0.0;
  double grad_norm = 0.0;
  long iterations = 0;
  bool converged = false;
};

/// High-accuracy reference solve: gradient descent iterated until the
/// gradient norm falls below cfg.oracle_grad_tol or the iteration cap. For
/// convex costs this approximates the optimal value at x.
OracleSolution oracle_solve(const OptimizerConfig& cfg, const CostModel& cost, const Vec& x,
                            const Vec& U_init, double r = 0.0);

}  // namespace rtmpc
