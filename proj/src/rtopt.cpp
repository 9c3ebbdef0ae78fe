#include "rtmpc/rtopt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace rtmpc {

void OptimizerConfig::validate() const {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("OptimizerConfig: rho must lie in (0,1)");
  }
  if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) {
    throw std::invalid_argument("OptimizerConfig: need 0 < c1 < c2 < 1");
  }
}

Vec temporal_warm_start(const TemporalWarmStartPolicy& policy, const CostModel& cost, const Vec& U,
                        const Vec& x, double r) {
  const int m = cost.input_dim();
  const int N = cost.horizon();
  if (U.size() != cost.input_sequence_dim()) {
    throw std::invalid_argument("temporal_warm_start: input sequence dimension mismatch");
  }
  Vec shifted(U.size());
  shifted.head((N - 1) * m) = U.tail((N - 1) * m);

  if (policy.tail == TemporalWarmStartPolicy::Tail::zero) {
    shifted.tail(m).setZero();
    return shifted;
  }

  // Terminal state of the shifted trajectory started at f(x, u0).
  Vec state = cost.plant().step(x, U.head(m));
  for (int j = 1; j < N; ++j) {
    state = cost.plant().step(state, U.segment(j * m, m));
  }
  Vec offset = Vec::Zero(cost.state_dim());
  if (const auto* quadratic = dynamic_cast<const QuadraticBarrierCost*>(&cost)) {
    offset = quadratic->steady_state(r);
  }
  shifted.tail(m) = policy.gain * (state - offset);
  return shifted;
}

namespace {

OptimizerStep descend(const OptimizerConfig& cfg, const CostModel& cost, const Vec& U,
                      const Vec& x, double r, double initial_step, Vec* gradient_out) {
  OptimizerStep step;
  step.U = U;
  step.cost_before = cost.total(U, x, r);
  step.cost_after = step.cost_before;
  if (!std::isfinite(step.cost_before)) {
    return step;
  }
  Vec grad;
  try {
    grad = cost.input_gradient(U, x, r);
  } catch (const std::domain_error&) {
    return step;
  }
  if (gradient_out != nullptr) {
    *gradient_out = grad;
  }
  const double grad_sq = grad.squaredNorm();
  if (grad_sq == 0.0) {
    return step;
  }
  double alpha = initial_step;
  for (int i = 0; i < cfg.max_backtracks; ++i) {
    const Vec trial = U - alpha * grad;
    const double trial_cost = cost.total(trial, x, r);
    if (trial_cost <= step.cost_before - cfg.c1 * alpha * grad_sq) {
      step.U = trial;
      step.cost_after = trial_cost;
      step.improved = true;
      step.backtracks = i;
      return step;
    }
    alpha *= cfg.rho;
  }
  step.backtracks = cfg.max_backtracks;
  return step;  // no improving step found; keep U so the cost cannot rise
}

}  // namespace

OptimizerStep optimizer_update(const OptimizerConfig& cfg, const CostModel& cost, const Vec& U,
                               const Vec& x, double r) {
  return descend(cfg, cost, U, x, r, 1.0 / cfg.c2, nullptr);
}

IterateResult iterate(const OptimizerConfig& cfg, const CostModel& cost, const Vec& U_current,
                      const Vec& x, const Vec& warm_start, const IterationBudget& budget,
                      double r) {
  const bool timed = budget.wall_clock_seconds > 0.0;
  if (!timed && budget.count < 1) {
    throw std::invalid_argument("iterate: budget must allow at least one update");
  }
  const Vec successor = cost.plant().step(x, U_current.head(cost.input_dim()));

  IterateResult result;
  result.U = warm_start;
  const auto start = std::chrono::steady_clock::now();
  while (true) {
    const OptimizerStep step = optimizer_update(cfg, cost, result.U, successor, r);
    result.U = step.U;
    result.cost_after = step.cost_after;
    result.worst_increase = std::max(result.worst_increase, step.cost_after - step.cost_before);
    if (!step.improved) {
      ++result.stalled_updates;
    }
    ++result.iterations;
    if (timed) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      if (elapsed.count() >= budget.wall_clock_seconds) {
        break;
      }
    } else if (result.iterations >= budget.count) {
      break;
    }
  }
  return result;
}

OracleSolution oracle_solve(const OptimizerConfig& cfg, const CostModel& cost, const Vec& x,
                            const Vec& U_init, double r) {
  OracleSolution sol;
  sol.U = U_init;
  sol.cost = cost.total(U_init, x, r);
  if (!std::isfinite(sol.cost)) {
    throw std::invalid_argument("oracle_solve: initial guess has non-finite cost");
  }
  // Same Armijo-guarded descent as the controller update, but with a
  // spectral (Barzilai-Borwein) initial step so ill-conditioned instances
  // reach tolerance in a practical number of iterations.
  double initial_step = 1.0 / cfg.c2;
  Vec prev_U;
  Vec prev_grad;
  int stagnant = 0;
  for (sol.iterations = 0; sol.iterations < cfg.oracle_max_iterations; ++sol.iterations) {
    Vec grad;
    const OptimizerStep step = descend(cfg, cost, sol.U, x, r, initial_step, &grad);
    sol.grad_norm = grad.size() == 0 ? kInfinity : grad.norm();
    if (sol.grad_norm <= cfg.oracle_grad_tol) {
      sol.converged = true;
      sol.cost = step.cost_before;
      return sol;
    }
    if (prev_U.size() > 0) {
      const Vec du = sol.U - prev_U;
      const Vec dg = grad - prev_grad;
      const double curvature = du.dot(dg);
      if (curvature > 0.0) {
        initial_step = std::clamp(du.squaredNorm() / curvature, 1e-8, 1e8);
      }
    }
    prev_U = sol.U;
    prev_grad = grad;
    sol.U = step.U;
    sol.cost = step.cost_after;
    if (!step.improved) {
      break;  // line search exhausted
    }
    // Decreases at the floating-point resolution of the cost no longer
    // carry information; the iterate sits at the numerical optimum.
    if (step.cost_before - step.cost_after <= 1e-14 * (1.0 + std::abs(step.cost_before))) {
      if (++stagnant >= 20) {
        break;
      }
    } else {
      stagnant = 0;
    }
  }
  sol.grad_norm = cost.input_gradient(sol.U, x, r).norm();
  // The achievable gradient norm scales with the cost's rounding noise.
  sol.converged = sol.grad_norm <= std::max(cfg.oracle_grad_tol, 1e-7 * (1.0 + std::abs(sol.cost)));
  return sol;
}

}  // namespace rtmpc
