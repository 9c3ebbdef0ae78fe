#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "rtmpc/model.hpp"
#include "rtmpc/types.hpp"

namespace rtmpc {

/// Relaxed logarithmic barrier: -ln(z) for z > delta, and below delta the
/// C1 convex quadratic extension 0.5*(((z-2d)/d)^2 - 1) - ln(d). Globally
/// defined for every real z.
double relaxed_log_barrier(double z, double delta);
double relaxed_log_barrier_deriv(double z, double delta);
double relaxed_log_barrier_curvature(double z, double delta);

/// Recentred barrier over the polytope {z : C z <= d}. Rows are normalized
/// to unit length at construction and each row gets its own relaxation
/// delta_i = min(delta, d_i/2), which keeps the barrier dominated by the
/// quadratic with curvature 1/delta_i^2 everywhere. Value and gradient
/// vanish at the origin.
class PolytopeBarrier {
 public:
  PolytopeBarrier() = default;
  PolytopeBarrier(Mat C, Vec d, double delta);

  double value(const Vec& z) const;
  Vec gradient(const Vec& z) const;

  /// Sum over rows of c_i c_i^T / delta_i^2; dominates the barrier Hessian.
  Mat curvature_bound() const;

  bool empty() const { return C_.rows() == 0; }
  int rows() const { return static_cast<int>(C_.rows()); }
  const Mat& normal_rows() const { return C_; }
  const Vec& offsets() const { return d_; }

 private:
  Mat C_;
  Vec d_;
  Vec delta_;
  Vec slope_at_margin_;  // derivative of the scalar barrier at z = d_i
  Vec value_at_margin_;
};

/// Finite-horizon cost J(U, x) = sum_j l(x_j, u_j) + F(x_N) rolled out over
/// the nominal plant. Evaluations are pure; instances are immutable and
/// shareable. The scalar r parameterizes tracking costs and is ignored by
/// regulation costs.
class CostModel {
 public:
  virtual ~CostModel() = default;

  int horizon() const { return horizon_; }
  int state_dim() const { return plant_.state_dim; }
  int input_dim() const { return plant_.input_dim; }
  int input_sequence_dim() const { return horizon_ * plant_.input_dim; }
  const PlantModel& plant() const { return plant_; }

  virtual double stage(const Vec& x, const Vec& u, double r) const = 0;
  virtual Vec stage_grad_x(const Vec& x, const Vec& u, double r) const = 0;
  virtual Vec stage_grad_u(const Vec& x, const Vec& u, double r) const = 0;
  virtual double terminal(const Vec& x, double r) const = 0;
  virtual Vec terminal_grad(const Vec& x, double r) const = 0;

  /// Lipschitz constant of x -> J(U, x) valid on the scenario's operating
  /// region (exact for costs that provide one, estimated otherwise).
  virtual double lipschitz_bound(const Vec& U) const = 0;

  /// Coordinate the warm-start memory is keyed by. Regulation costs use the
  /// state itself; tracking costs shift by the current set point so that
  /// recurrent operating points coincide across reference levels.
  virtual Vec memory_key(const Vec& x, double r) const {
    (void)r;
    return x;
  }

  /// Rollout cost; returns +infinity when the rollout leaves the finite
  /// range (divergent candidate input sequence).
  double total(const Vec& U, const Vec& x, double r = 0.0) const;

  /// Gradient of total() with respect to U via the backward adjoint
  /// recursion. Throws std::domain_error if the rollout is non-finite.
  Vec input_gradient(const Vec& U, const Vec& x, double r = 0.0) const;

  /// Gradient of total() with respect to the initial state x.
  Vec state_gradient(const Vec& U, const Vec& x, double r = 0.0) const;

 protected:
  CostModel(PlantModel plant, int horizon);

  PlantModel plant_;
  int horizon_ = 0;
};

/// Terminal weight P and local gain K (u = K x) from the Riccati equation of
/// the barrier-augmented weights Qbar = Q + (eps/2) * Hx, Rbar = R +
/// (eps/2) * Hu with Hx, Hu the barrier curvature bounds. Solved by
/// fixed-point iteration to residual <= 1e-10; throws if it fails to
/// converge within 1e4 sweeps.
struct TerminalDesign {
  Mat P;
  Mat K;
};
TerminalDesign design_terminal_weight(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                                      double epsilon, const PolytopeBarrier& state_barrier,
                                      const PolytopeBarrier& input_barrier);

/// Plain Riccati fixed-point solver; optional gain output (u = K x).
Mat solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, Mat* gain = nullptr,
               double tol = 1e-13, long max_sweeps = 10000);

/// Quadratic stage/terminal cost with recentred relaxed-barrier constraint
/// terms; the linear tracking variant measures the quadratic part against
/// x_s(r) = reference_direction * r.
class QuadraticBarrierCost final : public CostModel {
 public:
  struct Params {
    Mat Q;
    Mat R;
    double epsilon = 0.0;
    double delta = 0.1;
    Mat state_C;   // may be empty
    Vec state_d;
    Mat input_C;
    Vec input_d;
    Vec reference_direction;  // empty for regulation
    std::optional<Mat> terminal_P;  // overrides the Riccati design when set
  };

  QuadraticBarrierCost(PlantModel plant, int horizon, Params params);

  double stage(const Vec& x, const Vec& u, double r) const override;
  Vec stage_grad_x(const Vec& x, const Vec& u, double r) const override;
  Vec stage_grad_u(const Vec& x, const Vec& u, double r) const override;
  double terminal(const Vec& x, double r) const override;
  Vec terminal_grad(const Vec& x, double r) const override;
  double lipschitz_bound(const Vec& U) const override;

  const Mat& terminal_weight() const { return P_; }
  const Mat& local_gain() const { return K_; }
  const PolytopeBarrier& state_barrier() const { return state_barrier_; }
  const PolytopeBarrier& input_barrier() const { return input_barrier_; }
  Vec steady_state(double r) const;
  bool tracking() const { return reference_direction_.size() > 0; }
  Vec memory_key(const Vec& x, double r) const override { return x - steady_state(r); }

 private:
  Mat Q_, R_, P_, K_;
  double epsilon_ = 0.0;
  PolytopeBarrier state_barrier_, input_barrier_;
  Vec reference_direction_;
  std::vector<Vec> lipschitz_probes_;  // states where regional gradients are sampled
};

/// Nonlinear unicycle parking cost
///   l(x,u) = 0.1 sin^2(x3/2) + (1 + x1^2 + x2^2)^(1/4) - 1 + u1^8 + u2^8
/// with terminal F(x) = 100 l(x, 0).
class UnicycleCost final : public CostModel {
 public:
  UnicycleCost(PlantModel plant, int horizon, double Ts);

  double stage(const Vec& x, const Vec& u, double r) const override;
  Vec stage_grad_x(const Vec& x, const Vec& u, double r) const override;
  Vec stage_grad_u(const Vec& x, const Vec& u, double r) const override;
  double terminal(const Vec& x, double r) const override;
  Vec terminal_grad(const Vec& x, double r) const override;
  double lipschitz_bound(const Vec& U) const override;

 private:
  double Ts_ = 0.1;
};

/// Componentwise Lipschitz data for the unicycle cost: per-stage constant,
/// terminal constant, and the state-propagation factor of one Euler step.
double unicycle_stage_lipschitz();
double unicycle_dynamics_lipschitz(double u1, double Ts);

/// Lipschitz constant of x -> J(U, x) for the unicycle cost:
///   L(U) = sum_{i=0..N} (L_l + [i==N](L_F - L_l)) * prod_{j<i} L_f(u_j).
double unicycle_cost_lipschitz(const Vec& U, double Ts);

/// All vertices of the bounded polytope {x : C x <= d} by brute-force basis
/// enumeration. Intended for the small scenario polytopes (n <= 4).
std::vector<Vec> polytope_vertices(const Mat& C, const Vec& d, double tol = 1e-9);

}  // namespace rtmpc
