#include "rtmpc/cost.hpp"

#include <cmath>
#include <stdexcept>

namespace rtmpc {

namespace {

void require_positive_definite(const Mat& M, const char* name) {
  if (M.rows() != M.cols()) {
    throw std::invalid_argument(std::string(name) + " must be square");
  }
  Eigen::LLT<Mat> llt(M);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(std::string(name) + " must be positive definite");
  }
}

}  // namespace

double relaxed_log_barrier(double z, double delta) {
  if (z > delta) {
    return -std::log(z);
  }
  const double t = (z - 2.0 * delta) / delta;
  return 0.5 * (t * t - 1.0) - std::log(delta);
}

double relaxed_log_barrier_deriv(double z, double delta) {
  if (z > delta) {
    return -1.0 / z;
  }
  return (z - 2.0 * delta) / (delta * delta);
}

double relaxed_log_barrier_curvature(double z, double delta) {
  if (z > delta) {
    return 1.0 / (z * z);
  }
  return 1.0 / (delta * delta);
}

PolytopeBarrier::PolytopeBarrier(Mat C, Vec d, double delta) {
  if (C.rows() != d.size()) {
    throw std::invalid_argument("PolytopeBarrier: row count mismatch");
  }
  if (delta <= 0.0) {
    throw std::invalid_argument("PolytopeBarrier: delta must be positive");
  }
  C_ = std::move(C);
  d_ = std::move(d);
  delta_.resize(C_.rows());
  slope_at_margin_.resize(C_.rows());
  value_at_margin_.resize(C_.rows());
  for (int i = 0; i < C_.rows(); ++i) {
    const double norm = C_.row(i).norm();
    if (norm <= 0.0) {
      throw std::invalid_argument("PolytopeBarrier: zero constraint row");
    }
    C_.row(i) /= norm;
    d_(i) /= norm;
    if (d_(i) <= 0.0) {
      throw std::invalid_argument("PolytopeBarrier: origin must be strictly feasible");
    }
    delta_(i) = std::min(delta, 0.5 * d_(i));
    slope_at_margin_(i) = relaxed_log_barrier_deriv(d_(i), delta_(i));
    value_at_margin_(i) = relaxed_log_barrier(d_(i), delta_(i));
  }
}

double PolytopeBarrier::value(const Vec& z) const {
  double total = 0.0;
  for (int i = 0; i < C_.rows(); ++i) {
    const double t = C_.row(i).dot(z);
    total += relaxed_log_barrier(d_(i) - t, delta_(i)) - value_at_margin_(i) + slope_at_margin_(i) * t;
  }
  return total;
}

Vec PolytopeBarrier::gradient(const Vec& z) const {
  Vec g = Vec::Zero(z.size());
  for (int i = 0; i < C_.rows(); ++i) {
    const double t = C_.row(i).dot(z);
    const double slope = slope_at_margin_(i) - relaxed_log_barrier_deriv(d_(i) - t, delta_(i));
    g += slope * C_.row(i).transpose();
  }
  return g;
}

Mat PolytopeBarrier::curvature_bound() const {
  Mat H = Mat::Zero(C_.cols(), C_.cols());
  for (int i = 0; i < C_.rows(); ++i) {
    H += C_.row(i).transpose() * C_.row(i) / (delta_(i) * delta_(i));
  }
  return H;
}

CostModel::CostModel(PlantModel plant, int horizon) : plant_(std::move(plant)), horizon_(horizon) {
  if (horizon_ < 1) {
    throw std::invalid_argument("CostModel: horizon must be >= 1");
  }
}

double CostModel::total(const Vec& U, const Vec& x, double r) const {
  if (U.size() != input_sequence_dim() || x.size() != state_dim()) {
    throw std::invalid_argument("CostModel::total: dimension mismatch");
  }
  const int m = input_dim();
  Vec state = x;
  double sum = 0.0;
  for (int j = 0; j < horizon_; ++j) {
    const Vec u = U.segment(j * m, m);
    sum += stage(state, u, r);
    state = plant_.step(state, u);
    if (!state.allFinite() || !std::isfinite(sum)) {
      return kInfinity;
    }
  }
  sum += terminal(state, r);
  return std::isfinite(sum) ? sum : kInfinity;
}

Vec CostModel::input_gradient(const Vec& U, const Vec& x, double r) const {
  if (U.size() != input_sequence_dim() || x.size() != state_dim()) {
    throw std::invalid_argument("CostModel::input_gradient: dimension mismatch");
  }
  const int m = input_dim();
  std::vector<Vec> states(static_cast<size_t>(horizon_) + 1);
  states[0] = x;
  for (int j = 0; j < horizon_; ++j) {
    states[j + 1] = plant_.step(states[j], U.segment(j * m, m));
    if (!states[j + 1].allFinite()) {
      throw std::domain_error("CostModel::input_gradient: non-finite rollout");
    }
  }
  Vec grad(U.size());
  Vec adjoint = terminal_grad(states[static_cast<size_t>(horizon_)], r);
  for (int j = horizon_ - 1; j >= 0; --j) {
    const Vec u = U.segment(j * m, m);
    grad.segment(j * m, m) =
        stage_grad_u(states[j], u, r) + plant_.jacobian_u(states[j], u).transpose() * adjoint;
    adjoint = stage_grad_x(states[j], u, r) + plant_.jacobian_x(states[j], u).transpose() * adjoint;
  }
  if (!grad.allFinite()) {
    throw std::domain_error("CostModel::input_gradient: non-finite gradient");
  }
  return grad;
}

Vec CostModel::state_gradient(const Vec& U, const Vec& x, double r) const {
  const int m = input_dim();
  std::vector<Vec> states(static_cast<size_t>(horizon_) + 1);
  states[0] = x;
  for (int j = 0; j < horizon_; ++j) {
    states[j + 1] = plant_.step(states[j], U.segment(j * m, m));
  }
  Vec adjoint = terminal_grad(states[static_cast<size_t>(horizon_)], r);
  for (int j = horizon_ - 1; j >= 0; --j) {
    const Vec u = U.segment(j * m, m);
    adjoint = stage_grad_x(states[j], u, r) + plant_.jacobian_x(states[j], u).transpose() * adjoint;
  }
  return adjoint;
}

Mat solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, Mat* gain, double tol,
               long max_sweeps) {
  Mat P = Q;
  for (long sweep = 0; sweep < max_sweeps; ++sweep) {
    const Mat BtP = B.transpose() * P;
    const Mat gram = R + BtP * B;
    const Mat next = Q + A.transpose() * P * A -
                     A.transpose() * P * B * gram.ldlt().solve(BtP * A);
    const double change = (next - P).cwiseAbs().maxCoeff();
    P = 0.5 * (next + next.transpose());
    if (change <= tol) {
      if (gain != nullptr) {
        const Mat g = R + B.transpose() * P * B;
        *gain = -g.ldlt().solve(B.transpose() * P * A);
      }
      return P;
    }
  }
  throw std::runtime_error("solve_dare: fixed-point iteration did not converge");
}

TerminalDesign design_terminal_weight(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
                                      double epsilon, const PolytopeBarrier& state_barrier,
                                      const PolytopeBarrier& input_barrier) {
  Mat Qbar = Q;
  Mat Rbar = R;
  if (!state_barrier.empty()) {
    Qbar += 0.5 * epsilon * state_barrier.curvature_bound();
  }
  if (!input_barrier.empty()) {
    Rbar += 0.5 * epsilon * input_barrier.curvature_bound();
  }
  TerminalDesign design;
  design.P = solve_dare(A, B, Qbar, Rbar, &design.K);
  return design;
}

QuadraticBarrierCost::QuadraticBarrierCost(PlantModel plant, int horizon, Params params)
    : CostModel(std::move(plant), horizon) {
  require_positive_definite(params.Q, "Q");
  require_positive_definite(params.R, "R");
  if (params.Q.rows() != state_dim() || params.R.rows() != input_dim()) {
    throw std::invalid_argument("QuadraticBarrierCost: weight dimensions mismatch plant");
  }
  Q_ = params.Q;
  R_ = params.R;
  epsilon_ = params.epsilon;
  if (params.state_C.rows() > 0) {
    state_barrier_ = PolytopeBarrier(params.state_C, params.state_d, params.delta);
  }
  if (params.input_C.rows() > 0) {
    input_barrier_ = PolytopeBarrier(params.input_C, params.input_d, params.delta);
  }
  reference_direction_ = params.reference_direction;
  if (reference_direction_.size() > 0 && reference_direction_.size() != state_dim()) {
    throw std::invalid_argument("QuadraticBarrierCost: reference direction dimension mismatch");
  }

  const Mat A = plant_.jacobian_x(Vec::Zero(state_dim()), Vec::Zero(input_dim()));
  const Mat B = plant_.jacobian_u(Vec::Zero(state_dim()), Vec::Zero(input_dim()));
  if (params.terminal_P.has_value()) {
    P_ = *params.terminal_P;
    require_positive_definite(P_, "P");
    const Mat g = R_ + B.transpose() * P_ * B;
    K_ = -g.ldlt().solve(B.transpose() * P_ * A);
  } else {
    const TerminalDesign design =
        design_terminal_weight(A, B, Q_, R_, epsilon_, state_barrier_, input_barrier_);
    P_ = design.P;
    K_ = design.K;
  }

  // States where the regional Lipschitz estimate samples the cost gradient.
  lipschitz_probes_.push_back(Vec::Zero(state_dim()));
  std::vector<Vec> corners;
  if (!state_barrier_.empty()) {
    corners = polytope_vertices(state_barrier_.normal_rows(), state_barrier_.offsets());
  }
  if (corners.empty()) {
    corners.push_back(Vec::Ones(state_dim()));
    corners.push_back(-Vec::Ones(state_dim()));
  }
  for (const Vec& c : corners) {
    lipschitz_probes_.push_back(c);
    lipschitz_probes_.push_back(0.5 * c);
  }
}

Vec QuadraticBarrierCost::steady_state(double r) const {
  if (reference_direction_.size() == 0) {
    return Vec::Zero(state_dim());
  }
  return reference_direction_ * r;
}

double QuadraticBarrierCost::stage(const Vec& x, const Vec& u, double r) const {
  const Vec e = x - steady_state(r);
  double value = e.dot(Q_ * e) + u.dot(R_ * u);
  if (!state_barrier_.empty()) {
    value += epsilon_ * state_barrier_.value(x);
  }
  if (!input_barrier_.empty()) {
    value += epsilon_ * input_barrier_.value(u);
  }
  return value;
}

Vec QuadraticBarrierCost::stage_grad_x(const Vec& x, const Vec& u, double r) const {
  (void)u;
  const Vec e = x - steady_state(r);
  Vec g = 2.0 * Q_ * e;
  if (!state_barrier_.empty()) {
    g += epsilon_ * state_barrier_.gradient(x);
  }
  return g;
}

Vec QuadraticBarrierCost::stage_grad_u(const Vec& x, const Vec& u, double r) const {
  (void)x;
  (void)r;
  Vec g = 2.0 * R_ * u;
  if (!input_barrier_.empty()) {
    g += epsilon_ * input_barrier_.gradient(u);
  }
  return g;
}

double QuadraticBarrierCost::terminal(const Vec& x, double r) const {
  const Vec e = x - steady_state(r);
  return e.dot(P_ * e);
}

Vec QuadraticBarrierCost::terminal_grad(const Vec& x, double r) const {
  const Vec e = x - steady_state(r);
  return 2.0 * P_ * e;
}

double QuadraticBarrierCost::lipschitz_bound(const Vec& U) const {
  double bound = 0.0;
  for (const Vec& probe : lipschitz_probes_) {
    bound = std::max(bound, state_gradient(U, probe, 0.0).norm());
  }
  return 1.5 * bound + 1e-9;
}

UnicycleCost::UnicycleCost(PlantModel plant, int horizon, double Ts)
    : CostModel(std::move(plant), horizon), Ts_(Ts) {
  if (state_dim() != 3 || input_dim() != 2) {
    throw std::invalid_argument("UnicycleCost: expects the 3-state/2-input unicycle");
  }
}

namespace {

double unicycle_stage_value(const Vec& x, const Vec& u) {
  const double s = std::sin(0.5 * x(2));
  const double radial = std::pow(1.0 + x(0) * x(0) + x(1) * x(1), 0.25) - 1.0;
  const double u1p = std::pow(u(0), 8);
  const double u2p = std::pow(u(1), 8);
  return 0.1 * s * s + radial + u1p + u2p;
}

Vec unicycle_stage_grad_state(const Vec& x) {
  Vec g(3);
  const double root = std::pow(1.0 + x(0) * x(0) + x(1) * x(1), -0.75);
  g(0) = 0.5 * x(0) * root;
  g(1) = 0.5 * x(1) * root;
  g(2) = 0.05 * std::sin(x(2));
  return g;
}

}  // namespace

double UnicycleCost::stage(const Vec& x, const Vec& u, double) const {
  return unicycle_stage_value(x, u);
}

Vec UnicycleCost::stage_grad_x(const Vec& x, const Vec&, double) const {
  return unicycle_stage_grad_state(x);
}

Vec UnicycleCost::stage_grad_u(const Vec&, const Vec& u, double) const {
  Vec g(2);
  g(0) = 8.0 * std::pow(u(0), 7);
  g(1) = 8.0 * std::pow(u(1), 7);
  return g;
}

double UnicycleCost::terminal(const Vec& x, double) const {
  return 100.0 * unicycle_stage_value(x, Vec::Zero(2));
}

Vec UnicycleCost::terminal_grad(const Vec& x, double) const {
  return 100.0 * unicycle_stage_grad_state(x);
}

double UnicycleCost::lipschitz_bound(const Vec& U) const {
  return unicycle_cost_lipschitz(U, Ts_);
}

double unicycle_stage_lipschitz() { return std::sqrt(13.0 / 50.0); }

double unicycle_dynamics_lipschitz(double u1, double Ts) {
  const double a = Ts * std::abs(u1);
  return std::sqrt(1.0 + a * std::sqrt(1.0 + 0.25 * a * a) + 0.5 * a * a);
}

double unicycle_cost_lipschitz(const Vec& U, double Ts) {
  if (U.size() % 2 != 0 || U.size() == 0) {
    throw std::invalid_argument("unicycle_cost_lipschitz: input sequence must stack 2-vectors");
  }
  const int N = static_cast<int>(U.size() / 2);
  const double Ll = unicycle_stage_lipschitz();
  const double LF = 100.0 * Ll;
  double propagation = 1.0;
  double total = 0.0;
  for (int i = 0; i <= N; ++i) {
    total += (i == N ? LF : Ll) * propagation;
    if (i < N) {
      propagation *= unicycle_dynamics_lipschitz(U(2 * i), Ts);
    }
  }
  return total;
}

std::vector<Vec> polytope_vertices(const Mat& C, const Vec& d, double tol) {
  std::vector<Vec> vertices;
  const int n = static_cast<int>(C.cols());
  const int rows = static_cast<int>(C.rows());
  if (rows < n) {
    return vertices;
  }
  std::vector<int> pick(static_cast<size_t>(n));
  // Enumerate all row subsets of size n; keep feasible, well-conditioned
  // intersections.
  std::function<void(int, int)> recurse = [&](int start, int depth) {
    if (depth == n) {
      Mat M(n, n);
      Vec rhs(n);
      for (int i = 0; i < n; ++i) {
        M.row(i) = C.row(pick[static_cast<size_t>(i)]);
        rhs(i) = d(pick[static_cast<size_t>(i)]);
      }
      Eigen::FullPivLU<Mat> lu(M);
      if (!lu.isInvertible()) {
        return;
      }
      const Vec x = lu.solve(rhs);
      if (((C * x - d).array() > tol).any()) {
        return;
      }
      for (const Vec& v : vertices) {
        if ((v - x).norm() < 1e-7) {
          return;
        }
      }
      vertices.push_back(x);
      return;
    }
    for (int i = start; i < rows; ++i) {
      pick[static_cast<size_t>(depth)] = i;
      recurse(i + 1, depth + 1);
    }
  };
  recurse(0, 0);
  return vertices;
}

}  // namespace rtmpc
