#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "driveclone/error.hpp"
#include "driveclone/rng.hpp"

namespace driveclone::nn {

inline double log_sum_exp(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw ShapeMismatch("log_sum_exp of an empty vector");
  if (v.size() == 1) return v(0);
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

inline Eigen::VectorXd softmax(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  Eigen::VectorXd e = (v.array() - m).exp();
  return e / e.sum();
}

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// loss(params, grad_out): returns the loss and, when grad_out is set, fills the
// analytic gradient.
using LossFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

// Max relative error between the analytic gradient and central differences.
// max_coords > 0 checks a seeded random subset of coordinates.
inline double grad_check(const LossFn& loss, const Eigen::VectorXd& params, double eps = 1e-5,
                         std::size_t max_coords = 0, std::uint64_t seed = 0) {
  Eigen::VectorXd analytic;
  loss(params, &analytic);
  if (analytic.size() != params.size()) throw ShapeMismatch("gradient width differs from parameter width");
  std::vector<Eigen::Index> coords(static_cast<std::size_t>(params.size()));
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = static_cast<Eigen::Index>(i);
  if (max_coords > 0 && max_coords < coords.size()) {
    auto rng = make_rng(seed, 0x9c4eULL);
    shuffle(coords, rng);
    coords.resize(max_coords);
  }
  double worst = 0.0;
  Eigen::VectorXd p = params;
  for (auto i : coords) {
    const double orig = p(i);
    p(i) = orig + eps;
    const double up = loss(p, nullptr);
    p(i) = orig - eps;
    const double down = loss(p, nullptr);
    p(i) = orig;
    worst = std::max(worst, relative_error(analytic(i), (up - down) / (2.0 * eps)));
  }
  return worst;
}

}  // namespace driveclone::nn
