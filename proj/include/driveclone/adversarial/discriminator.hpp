#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "driveclone/bc/policy.hpp"
#include "driveclone/error.hpp"
#include "driveclone/nn/adam.hpp"
#include "driveclone/nn/checkpoint.hpp"
#include "driveclone/nn/mlp.hpp"
#include "driveclone/nn/numerics.hpp"
#include "driveclone/rng.hpp"
#include "driveclone/sim/kinematics.hpp"

namespace driveclone::adversarial {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kMaxReward = 20.0;

// (observation, action) columns. Actions are applied commands in m/s^2.
struct PairBatch {
  MatrixXd observations;
  MatrixXd actions;

  Eigen::Index size() const { return observations.cols(); }

  void check(int observation_width) const {
    if (observations.rows() != observation_width) throw ShapeMismatch("batch observation width");
    if (actions.rows() != bc::kActionDim || actions.cols() != observations.cols()) throw ShapeMismatch("batch actions");
  }
};

// Logit network over [observation; action / action scale].
struct Discriminator {
  nn::Mlp net;
  int observation_width = 0;
  sim::ActionBounds bounds;
};

inline Discriminator make_discriminator(int observation_width, const std::vector<int>& hidden, Rng& rng,
                                        sim::ActionBounds bounds = {}) {
  Discriminator d;
  d.observation_width = observation_width;
  d.bounds = bounds;
  d.net = nn::Mlp::random(bc::layer_widths(observation_width + bc::kActionDim, hidden, 1), nn::Activation::tanh,
                          nn::Activation::identity, rng);
  return d;
}

inline MatrixXd discriminator_input(const Discriminator& d, const PairBatch& b) {
  b.check(d.observation_width);
  MatrixXd in(d.observation_width + bc::kActionDim, b.size());
  in.topRows(d.observation_width) = b.observations;
  in.row(d.observation_width) = b.actions.row(0) / d.bounds.long_scale();
  in.row(d.observation_width + 1) = b.actions.row(1) / d.bounds.lat_scale();
  return in;
}

inline VectorXd logits(const Discriminator& d, const PairBatch& b) {
  return nn::forward(d.net, discriminator_input(d, b)).row(0).transpose();
}

inline double logit(const Discriminator& d, const VectorXd& obs, const sim::Action& a) {
  PairBatch b{MatrixXd(obs), MatrixXd(bc::from_action(a))};
  return logits(d, b)(0);
}

// -log(1 - D) = softplus(logit), clamped to [0, kMaxReward].
inline double surrogate_reward_from_logit(double l) { return std::clamp(nn::softplus(l), 0.0, kMaxReward); }

inline double surrogate_reward(const Discriminator& d, const VectorXd& obs, const sim::Action& a) {
  return surrogate_reward_from_logit(logit(d, obs, a));
}

inline VectorXd surrogate_rewards(const Discriminator& d, const PairBatch& b) {
  return logits(d, b).unaryExpr([](double l) { return surrogate_reward_from_logit(l); });
}

// Balanced accuracy: expert scored as expert (logit > 0), policy as policy.
inline double accuracy(const Discriminator& d, const PairBatch& expert, const PairBatch& policy) {
  const VectorXd le = logits(d, expert), lp = logits(d, policy);
  const double ae = (le.array() > 0.0).cast<double>().mean();
  const double ap = (lp.array() < 0.0).cast<double>().mean();
  return 0.5 * (ae + ap);
}

// Binary cross-entropy with expert = 1, policy = 0:
//   mean softplus(-l_expert) + mean softplus(l_policy)
// which is minus the discriminator's objective, so descent on it is ascent.
inline double discriminator_loss(const Discriminator& d, const PairBatch& expert, const PairBatch& policy,
                                 VectorXd* grad) {
  if (expert.size() == 0 || policy.size() == 0) throw EmptyBatch("discriminator needs expert and policy samples");
  const double ne = static_cast<double>(expert.size()), np = static_cast<double>(policy.size());
  nn::ForwardCache ce, cp;
  const MatrixXd le = nn::forward(d.net, discriminator_input(d, expert), &ce);
  const MatrixXd lp = nn::forward(d.net, discriminator_input(d, policy), &cp);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < le.cols(); ++i) loss += nn::softplus(-le(0, i)) / ne;
  for (Eigen::Index i = 0; i < lp.cols(); ++i) loss += nn::softplus(lp(0, i)) / np;
  if (grad) {
    const MatrixXd ge = le.unaryExpr([&](double l) { return -nn::sigmoid(-l) / ne; });
    const MatrixXd gp = lp.unaryExpr([&](double l) { return nn::sigmoid(l) / np; });
    *grad = nn::flatten(nn::backward(d.net, ce, ge)) + nn::flatten(nn::backward(d.net, cp, gp));
  }
  return loss;
}

// One Adam step on the discriminator. Returns the loss before the step.
inline double discriminator_update(Discriminator& d, const PairBatch& expert, const PairBatch& policy,
                                   nn::AdamState& adam) {
  VectorXd grad;
  const double loss = discriminator_loss(d, expert, policy, &grad);
  if (!std::isfinite(loss) || !grad.allFinite()) throw DivergedLoss("discriminator loss is not finite");
  VectorXd params = nn::flatten(d.net);
  if (adam.m.size() != params.size()) adam = nn::make_adam(params.size(), adam.hyper);
  nn::adam_step(params, grad, adam);
  nn::unflatten(d.net, params);
  return loss;
}

inline nn::Checkpoint to_checkpoint(const Discriminator& d, std::map<std::string, std::string> meta = {}) {
  nn::Checkpoint c;
  c.meta = std::move(meta);
  c.meta["kind"] = "discriminator";
  c.meta["observation_width"] = std::to_string(d.observation_width);
  c.nets.emplace_back("discriminator", d.net);
  return c;
}

}  // namespace driveclone::adversarial
