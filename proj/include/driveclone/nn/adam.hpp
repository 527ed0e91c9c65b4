#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "driveclone/error.hpp"

namespace driveclone::nn {

struct AdamHyper {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  AdamHyper hyper;
};

inline AdamState make_adam(Eigen::Index size, AdamHyper hyper = {}) {
  return {Eigen::VectorXd::Zero(size), Eigen::VectorXd::Zero(size), 0, hyper};
}

// In-place descent step (callers negate gradients to ascend).
inline void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& s) {
  if (grads.size() != params.size() || s.m.size() != params.size() || s.v.size() != params.size())
    throw ShapeMismatch("adam: " + std::to_string(params.size()) + " params, " + std::to_string(grads.size()) +
                        " grads, " + std::to_string(s.m.size()) + " moments");
  ++s.step;
  const auto& h = s.hyper;
  s.m = h.beta1 * s.m + (1.0 - h.beta1) * grads;
  s.v = h.beta2 * s.v + (1.0 - h.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.step));
  params.array() -= h.lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + h.epsilon);
}

}  // namespace driveclone::nn
