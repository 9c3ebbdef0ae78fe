#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "rtmpc/rtopt.hpp"

using namespace rtmpc;

namespace {

// Scalar toy problem J(U) = U^2: one-stage plant x+ = u with terminal x^2.
struct ScalarSquareCost final : CostModel {
  ScalarSquareCost()
      : CostModel(
            [] {
              PlantModel plant;
              plant.state_dim = 1;
              plant.input_dim = 1;
              plant.step = [](const Vec&, const Vec& u) -> Vec { return u; };
              plant.jacobian_x = [](const Vec&, const Vec&) -> Mat { return Mat::Zero(1, 1); };
              plant.jacobian_u = [](const Vec&, const Vec&) -> Mat { return Mat::Ones(1, 1); };
              return plant;
            }(),
            1) {}
  double stage(const Vec&, const Vec&, double) const override { return 0.0; }
  Vec stage_grad_x(const Vec&, const Vec&, double) const override { return Vec::Zero(1); }
  Vec stage_grad_u(const Vec&, const Vec&, double) const override { return Vec::Zero(1); }
  double terminal(const Vec& x, double) const override { return x.squaredNorm(); }
  Vec terminal_grad(const Vec& x, double) const override { return 2.0 * x; }
  double lipschitz_bound(const Vec&) const override { return 1.0; }
};

}  // namespace

TEST_CASE("optimizer config validation") {
  OptimizerConfig bad;
  bad.c1 = 0.5;
  bad.c2 = 0.4;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = OptimizerConfig{};
  bad.rho = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_NOTHROW(OptimizerConfig{}.validate());
}

TEST_CASE("shift warm start drops the head and keeps the tail") {
  const Scenario scenario = testing::preset_scenario("unicycle");
  const CostModel& cost = *scenario.cost;
  std::mt19937 rng(2);
  const Vec U = testing::random_vec(rng, cost.input_sequence_dim(), -1.0, 1.0);
  const Vec x = testing::random_vec(rng, 3, -1.0, 1.0);
  const Vec shifted = temporal_warm_start(scenario.warm_start, cost, U, x);
  REQUIRE(shifted.size() == U.size());
  // Zero-tail policy appends zeros.
  CHECK(shifted.tail(2).norm() == 0.0);
  // Components 0..N-2 equal components 1..N-1 of the input, bitwise.
  CHECK((shifted.head(U.size() - 2) - U.tail(U.size() - 2)).cwiseAbs().maxCoeff() == 0.0);

  // Equilibrium is a fixed point for both policies.
  const Scenario di = testing::preset_scenario("double-integrator");
  const Vec zero = Vec::Zero(di.cost->input_sequence_dim());
  CHECK(temporal_warm_start(di.warm_start, *di.cost, zero, Vec::Zero(2)).norm() == 0.0);
  CHECK(temporal_warm_start(scenario.warm_start, cost, Vec::Zero(U.size()), Vec::Zero(3)).norm() ==
        0.0);
}

TEST_CASE("shift warm start achieves the one-step cost decrease") {
  // On the linear-quadratic barrier cost the shifted sequence with the
  // local-gain tail must decrease the cost by at least the first stage.
  const Scenario scenario = testing::preset_scenario("double-integrator");
  const CostModel& cost = *scenario.cost;
  std::mt19937 rng(31);
  int samples = 0;
  double worst = -kInfinity;
  for (int trial = 0; trial < 1000; ++trial) {
    Vec x(2);
    x << testing::random_vec(rng, 1, -2.0, 3.0)(0), testing::random_vec(rng, 1, -1.0, 1.0)(0);
    const Vec U = testing::random_vec(rng, cost.input_sequence_dim(), -1.0, 1.0);
    const Vec u0 = U.head(1);
    const Vec successor = cost.plant().step(x, u0);
    const Vec shifted = temporal_warm_start(scenario.warm_start, cost, U, x);
    const double slack =
        cost.total(shifted, successor) - (cost.total(U, x) - cost.stage(x, u0, 0.0));
    worst = std::max(worst, slack);
    ++samples;
  }
  CHECK(samples == 1000);
  CHECK(worst <= 1e-8);
}

TEST_CASE("optimizer update never increases the cost") {
  OptimizerConfig cfg;
  const ScalarSquareCost square;

  // Zero gradient: the sequence is already optimal and stays put.
  const OptimizerStep at_opt = optimizer_update(cfg, square, Vec::Zero(1), Vec::Zero(1));
  CHECK(at_opt.U.norm() == 0.0);
  CHECK_FALSE(at_opt.improved);

  // Hand-traced backtracking on J = U^2 from U = 1: gradient 2, first trial
  // alpha = 1/c2 overshoots, one halving lands at 1 - 2 * rho / c2.
  Vec U(1);
  U << 1.0;
  const OptimizerStep step = optimizer_update(cfg, square, U, Vec::Zero(1));
  CHECK(step.improved);
  CHECK(step.backtracks == 1);
  const double alpha = cfg.rho / cfg.c2;
  CHECK(step.U(0) == doctest::Approx(1.0 - 2.0 * alpha).epsilon(1e-15));
  CHECK(step.cost_after < step.cost_before);

  // Decrease property on the barrier cost, strict away from the optimum.
  const Scenario scenario = testing::preset_scenario("double-integrator");
  std::mt19937 rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec x = testing::random_vec(rng, 2, -1.0, 1.0);
    const Vec U0 = testing::random_vec(rng, scenario.cost->input_sequence_dim(), -1.0, 1.0);
    const OptimizerStep s = optimizer_update(cfg, *scenario.cost, U0, x);
    CHECK(s.cost_after <= s.cost_before);
    if (scenario.cost->input_gradient(U0, x).norm() > 1e-9) {
      CHECK(s.cost_after < s.cost_before);
    }
  }
}

TEST_CASE("iterate enforces the budget contract") {
  const Scenario scenario = testing::preset_scenario("double-integrator");
  const CostModel& cost = *scenario.cost;
  Vec x(2);
  x << 0.9, -0.9;
  const Vec U = Vec::Zero(cost.input_sequence_dim());
  const Vec warm = temporal_warm_start(scenario.warm_start, cost, U, x);

  IterationBudget zero;
  zero.count = 0;
  CHECK_THROWS_AS(iterate(scenario.optimizer, cost, U, x, warm, zero), std::invalid_argument);

  IterationBudget two;
  two.count = 2;
  const IterateResult result = iterate(scenario.optimizer, cost, U, x, warm, two);
  CHECK(result.iterations == 2);
  CHECK(result.worst_increase <= 0.0);
  const Vec successor = cost.plant().step(x, U.head(1));
  CHECK(result.cost_after == doctest::Approx(cost.total(result.U, successor)).epsilon(1e-14));
  CHECK(result.cost_after <= cost.total(warm, successor));

  // A wall-clock budget always performs at least one update.
  IterationBudget timed;
  timed.count = 0;
  timed.wall_clock_seconds = 1e-9;
  const IterateResult timed_result = iterate(scenario.optimizer, cost, U, x, warm, timed);
  CHECK(timed_result.iterations >= 1);

  // Already-optimal warm starts stay put.
  OptimizerConfig tight = scenario.optimizer;
  tight.oracle_grad_tol = 1e-12;
  const OracleSolution opt = oracle_solve(tight, cost, successor, warm);
  const IterateResult at_opt = iterate(scenario.optimizer, cost, U, x, opt.U, two);
  CHECK((at_opt.U - opt.U).norm() <= 1e-12);
}

TEST_CASE("iterate is deterministic with count budgets") {
  const Scenario scenario = testing::preset_scenario("double-integrator");
  const CostModel& cost = *scenario.cost;
  Vec x(2);
  x << 0.4, 0.2;
  Vec U = Vec::Constant(cost.input_sequence_dim(), 0.3);
  const Vec warm = temporal_warm_start(scenario.warm_start, cost, U, x);
  IterationBudget budget;
  budget.count = 3;
  const IterateResult a = iterate(scenario.optimizer, cost, U, x, warm, budget);
  const IterateResult b = iterate(scenario.optimizer, cost, U, x, warm, budget);
  CHECK((a.U - b.U).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.cost_after == b.cost_after);
}

TEST_CASE("oracle solve finds hand-computable optima") {
  OptimizerConfig cfg;
  const ScalarSquareCost square;
  const OracleSolution trivial = oracle_solve(cfg, square, Vec::Zero(1), Vec::Zero(1));
  CHECK(trivial.cost == 0.0);
  CHECK(trivial.converged);

  // One-stage problem J = q x^2 + r u^2 + p (a x + b u)^2 with the closed
  // form minimizer u* = -a b p x / (r + b^2 p).
  const double a = 0.8, b = 0.5, q = 1.0, r = 0.3, p = 2.0;
  PlantModel plant;
  plant.state_dim = 1;
  plant.input_dim = 1;
  plant.step = [a, b](const Vec& x, const Vec& u) -> Vec {
    Vec next(1);
    next(0) = a * x(0) + b * u(0);
    return next;
  };
  plant.jacobian_x = [a](const Vec&, const Vec&) -> Mat { return a * Mat::Ones(1, 1); };
  plant.jacobian_u = [b](const Vec&, const Vec&) -> Mat { return b * Mat::Ones(1, 1); };
  QuadraticBarrierCost::Params params;
  params.Q = q * Mat::Ones(1, 1);
  params.R = r * Mat::Ones(1, 1);
  params.terminal_P = p * Mat::Ones(1, 1);
  const QuadraticBarrierCost lqr(plant, 1, params);
  Vec x(1);
  x << 1.7;
  const double expected_u = -a * b * p * x(0) / (r + b * b * p);
  const OracleSolution sol = oracle_solve(cfg, lqr, x, Vec::Zero(1));
  CHECK(sol.converged);
  CHECK(sol.U(0) == doctest::Approx(expected_u).epsilon(1e-6));

  // Dominance: the oracle value lower-bounds every candidate's cost.
  const Scenario scenario = testing::preset_scenario("double-integrator");
  std::mt19937 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec xs = testing::random_vec(rng, 2, -1.0, 1.0);
    const Vec warm = testing::random_vec(rng, scenario.cost->input_sequence_dim(), -0.5, 0.5);
    const OracleSolution best = oracle_solve(scenario.optimizer, *scenario.cost, xs, warm);
    CHECK(best.converged);
    for (int cand = 0; cand < 5; ++cand) {
      const Vec U = testing::random_vec(rng, scenario.cost->input_sequence_dim(), -1.0, 1.0);
      CHECK(best.cost <= scenario.cost->total(U, xs) + 1e-8);
    }
  }
}
