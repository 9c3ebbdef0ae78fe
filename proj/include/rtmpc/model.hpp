#pragma once

#include <functional>
#include <utility>

#include "rtmpc/types.hpp"

namespace rtmpc {

/// Discrete-time plant x(k+1) = f(x(k), u(k)). Immutable after construction;
/// stepping is a pure function, safe to share across threads.
struct PlantModel {
  int state_dim = 0;
  int input_dim = 0;
  std::function<Vec(const Vec&, const Vec&)> step;
  std::function<Mat(const Vec&, const Vec&)> jacobian_x;
  std::function<Mat(const Vec&, const Vec&)> jacobian_u;
};

/// f(x,u) with dimension checks. Throws std::invalid_argument on mismatch.
Vec step_nominal(const PlantModel& plant, const Vec& x, const Vec& u);

PlantModel make_linear_plant(Mat A, Mat B);

/// Double integrator with A = [1 Ts; 0 1], B = [Ts^2; Ts].
PlantModel make_double_integrator_plant(double Ts);

/// Unicycle under forward Euler:
///   x+ = x + Ts * [u1 cos x3, u1 sin x3, u2].
PlantModel make_unicycle_plant(double Ts);

/// Exact zero-order-hold discretization of dx/dt = Ac x + Bc u via the
/// augmented-matrix exponential. Returns (A, B).
std::pair<Mat, Mat> discretize_zoh(const Mat& Ac, const Mat& Bc, double Ts);

/// External signal w(k) added to the plant state: x(k+1) = f(x,u) + w(k).
/// Deterministic in (k, x, u) so closed-loop runs replay exactly.
struct DisturbanceSignal {
  enum class Kind { none, quasiperiodic, reset_schedule };

  Kind kind = Kind::none;

  // quasiperiodic: w_i(k) = amplitude * sin(frequency*k*Ts + i*pi/2),
  // i.e. alternating sin/cos components.
  double amplitude = 0.0;
  double frequency = 1.0;
  double sample_time = 0.0;

  // reset_schedule: at k = reset_period, 2*reset_period, ... returns
  // reset_state - f(x,u) so the next state lands exactly on reset_state.
  long reset_period = 0;
  Vec reset_state;

  Vec at(long k, const Vec& x, const Vec& u, const PlantModel& plant) const;
};

/// Scalar reference r(k) tracked by the servo scenario.
struct ReferenceSignal {
  enum class Kind { none, periodic_step };

  Kind kind = Kind::none;
  long period = 0;        // full period in steps; +amplitude then -amplitude
  double amplitude = 0.0;

  double at(long k) const;
};

}  // namespace rtmpc
