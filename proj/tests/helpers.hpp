#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rtmpc/config.hpp"
#include "rtmpc/controller.hpp"

namespace rtmpc::testing {

inline Scenario preset_scenario(
    const std::string& name,
    const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  ConfigMap config = ConfigMap::parse(preset_config_text(name));
  for (const auto& [key, value] : overrides) {
    config.set(key, value);
  }
  return build_scenario(config);
}

/// Independent matrix exponential: plain scaled-and-squared Taylor series.
inline Mat series_expm(const Mat& M, int squarings = 20, int terms = 30) {
  const double scale = std::pow(2.0, squarings);
  const Mat S = M / scale;
  Mat result = Mat::Identity(M.rows(), M.cols());
  Mat term = Mat::Identity(M.rows(), M.cols());
  for (int i = 1; i <= terms; ++i) {
    term = term * S / static_cast<double>(i);
    result += term;
  }
  for (int i = 0; i < squarings; ++i) {
    result = result * result;
  }
  return result;
}

/// Central finite differences of the cost in the input sequence.
inline Vec finite_difference_gradient(const CostModel& cost, const Vec& U, const Vec& x,
                                      double r = 0.0, double h = 1e-6) {
  Vec grad(U.size());
  for (long i = 0; i < U.size(); ++i) {
    Vec hi = U;
    Vec lo = U;
    const double step = h * std::max(1.0, std::abs(U(i)));
    hi(i) += step;
    lo(i) -= step;
    grad(i) = (cost.total(hi, x, r) - cost.total(lo, x, r)) / (2.0 * step);
  }
  return grad;
}

inline Vec random_vec(std::mt19937& rng, long size, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Vec v(size);
  for (long i = 0; i < size; ++i) {
    v(i) = dist(rng);
  }
  return v;
}

}  // namespace rtmpc::testing
