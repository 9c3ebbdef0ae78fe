#include "rtmpc/model.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <stdexcept>

namespace rtmpc {

Vec step_nominal(const PlantModel& plant, const Vec& x, const Vec& u) {
  if (x.size() != plant.state_dim || u.size() != plant.input_dim) {
    throw std::invalid_argument("step_nominal: state/input dimension mismatch");
  }
  return plant.step(x, u);
}

PlantModel make_linear_plant(Mat A, Mat B) {
  if (A.rows() != A.cols() || B.rows() != A.rows()) {
    throw std::invalid_argument("make_linear_plant: inconsistent A/B shapes");
  }
  PlantModel plant;
  plant.state_dim = static_cast<int>(A.rows());
  plant.input_dim = static_cast<int>(B.cols());
  plant.step = [A, B](const Vec& x, const Vec& u) -> Vec { return A * x + B * u; };
  plant.jacobian_x = [A](const Vec&, const Vec&) -> Mat { return A; };
  plant.jacobian_u = [B](const Vec&, const Vec&) -> Mat { return B; };
  return plant;
}

PlantModel make_double_integrator_plant(double Ts) {
  Mat A(2, 2);
  A << 1.0, Ts, 0.0, 1.0;
  Mat B(2, 1);
  B << Ts * Ts, Ts;
  PlantModel plant = make_linear_plant(A, B);
  // Scalar closed form keeps the step bit-identical to p + Ts v + Ts^2 u.
  plant.step = [Ts](const Vec& x, const Vec& u) -> Vec {
    Vec next(2);
    next(0) = x(0) + Ts * x(1) + Ts * Ts * u(0);
    next(1) = x(1) + Ts * u(0);
    return next;
  };
  return plant;
}

PlantModel make_unicycle_plant(double Ts) {
  PlantModel plant;
  plant.state_dim = 3;
  plant.input_dim = 2;
  plant.step = [Ts](const Vec& x, const Vec& u) -> Vec {
    Vec next(3);
    next(0) = x(0) + Ts * u(0) * std::cos(x(2));
    next(1) = x(1) + Ts * u(0) * std::sin(x(2));
    next(2) = x(2) + Ts * u(1);
    return next;
  };
  plant.jacobian_x = [Ts](const Vec& x, const Vec& u) -> Mat {
    Mat J = Mat::Identity(3, 3);
    J(0, 2) = -Ts * u(0) * std::sin(x(2));
    J(1, 2) = Ts * u(0) * std::cos(x(2));
    return J;
  };
  plant.jacobian_u = [Ts](const Vec& x, const Vec&) -> Mat {
    Mat J = Mat::Zero(3, 2);
    J(0, 0) = Ts * std::cos(x(2));
    J(1, 0) = Ts * std::sin(x(2));
    J(2, 1) = Ts;
    return J;
  };
  return plant;
}

std::pair<Mat, Mat> discretize_zoh(const Mat& Ac, const Mat& Bc, double Ts) {
  if (Ac.rows() != Ac.cols() || Bc.rows() != Ac.rows() || Ts <= 0.0) {
    throw std::invalid_argument("discretize_zoh: bad arguments");
  }
  const long n = Ac.rows();
  const long m = Bc.cols();
  Mat aug = Mat::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = Ac;
  aug.topRightCorner(n, m) = Bc;
  const Mat phi = (aug * Ts).exp();
  return {phi.topLeftCorner(n, n), phi.topRightCorner(n, m)};
}

Vec DisturbanceSignal::at(long k, const Vec& x, const Vec& u, const PlantModel& plant) const {
  switch (kind) {
    case Kind::none:
      return Vec::Zero(plant.state_dim);
    case Kind::quasiperiodic: {
      Vec w(plant.state_dim);
      const double phase = frequency * static_cast<double>(k) * sample_time;
      for (int i = 0; i < plant.state_dim; ++i) {
        w(i) = amplitude * std::sin(phase + 0.5 * M_PI * static_cast<double>(i));
      }
      return w;
    }
    case Kind::reset_schedule: {
      if (reset_period > 0 && k > 0 && k % reset_period == 0) {
        return reset_state - plant.step(x, u);
      }
      return Vec::Zero(plant.state_dim);
    }
  }
  return Vec::Zero(plant.state_dim);
}

double ReferenceSignal::at(long k) const {
  if (kind == Kind::none || period <= 0) {
    return 0.0;
  }
  const long phase = k % period;
  return phase < period / 2 ? amplitude : -amplitude;
}

}  // namespace rtmpc
