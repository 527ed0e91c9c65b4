#pragma once

#include <Eigen/Dense>
#include <limits>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "driveclone/bc/policy.hpp"
#include "driveclone/error.hpp"
#include "driveclone/nn/adam.hpp"
#include "driveclone/nn/mlp.hpp"
#include "driveclone/rng.hpp"

namespace driveclone::adversarial {

struct PpoHyper {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int epochs = 4;
  int minibatch = 64;
  double policy_lr = 3e-4;
  double discriminator_lr = 3e-4;
  double max_grad_norm = 0.5;
  double min_log_std = -5.0;
  double max_log_std = 1.0;

  void check() const {
    if (!(gamma > 0.0 && gamma <= 1.0) || !(gae_lambda > 0.0 && gae_lambda <= 1.0))
      throw InvalidConfig("gamma and gae_lambda must lie in (0, 1]");
    if (!(clip > 0.0 && clip < 1.0)) throw InvalidConfig("clip must lie in (0, 1)");
    if (entropy_coef < 0.0 || value_coef < 0.0) throw InvalidConfig("coefficients must be >= 0");
    if (epochs < 1 || minibatch < 1) throw InvalidConfig("epochs and minibatch must be positive");
    if (!(policy_lr > 0.0) || !(discriminator_lr > 0.0)) throw InvalidConfig("learning rates must be positive");
  }
};

// One environment step as seen by the learner. `action` is the sampled
// (unclamped) network action; `applied` the command the environment received.
struct Transition {
  VectorXd observation;
  VectorXd action;
  VectorXd applied;
  double log_prob = 0.0;
  double reward = 0.0;
  bool done = false;       // terminal: no bootstrap
  bool truncated = false;  // cut by horizon or batch end: bootstrap from bootstrap_value
  double value_estimate = 0.0;
  double bootstrap_value = 0.0;
  bool collision = false;
};

struct Gae {
  VectorXd advantages;  // raw
  VectorXd normalized;  // zero mean, unit variance over the batch
  VectorXd returns;     // advantages + value estimates
};

// Transitions must be episode-ordered; an episode ends at `done` or
// `truncated`, and the final transition of the list always ends one.
inline Gae compute_gae(const std::vector<Transition>& ts, double gamma, double lambda) {
  if (ts.empty()) throw EmptyBatch("no transitions");
  const auto n = static_cast<Eigen::Index>(ts.size());
  Gae g;
  g.advantages.resize(n);
  double running = 0.0;
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    const auto& t = ts[static_cast<std::size_t>(i)];
    const bool boundary = t.done || t.truncated || i == n - 1;
    double next_value;
    if (t.done) {
      next_value = 0.0;
      running = 0.0;
    } else if (boundary) {
      next_value = t.bootstrap_value;
      running = 0.0;
    } else {
      next_value = ts[static_cast<std::size_t>(i + 1)].value_estimate;
    }
    const double delta = t.reward + gamma * next_value - t.value_estimate;
    running = delta + gamma * lambda * running;
    g.advantages(i) = running;
  }
  g.returns.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) g.returns(i) = g.advantages(i) + ts[static_cast<std::size_t>(i)].value_estimate;
  const double mean = g.advantages.mean();
  const double var = (g.advantages.array() - mean).square().mean();
  g.normalized = (g.advantages.array() - mean) / (std::sqrt(var) + 1e-8);
  return g;
}

inline double ppo_clip_objective(double ratio, double advantage, double clip) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

inline double gaussian_log_prob(const VectorXd& mean, const VectorXd& log_std, const VectorXd& a) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double lp = 0.0;
  for (Eigen::Index d = 0; d < a.size(); ++d) {
    const double z = (a(d) - mean(d)) / std::exp(log_std(d));
    lp -= 0.5 * z * z + log_std(d) + half_log_2pi;
  }
  return lp;
}

// Closed-form diagonal-Gaussian entropy. The spread is state-free, so the
// batch average equals the per-state value; the batch only fixes the shape.
inline double entropy(const bc::Policy& p, const MatrixXd& obs_batch) {
  if (p.kind != bc::PolicyKind::gaussian) throw InvalidConfig("entropy needs a gaussian policy");
  if (obs_batch.rows() != p.observation_width) throw ShapeMismatch("observation width");
  const double per_axis = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);
  return static_cast<double>(p.log_std.size()) * per_axis + p.log_std.sum();
}

// Action sampled from the gaussian policy plus its log-probability and value.
struct ActSample {
  VectorXd action;
  double log_prob = 0.0;
  double value = 0.0;
};

inline ActSample act(const bc::Policy& p, const VectorXd& obs, Rng& rng) {
  ActSample s;
  const VectorXd x = bc::policy_input(p, obs);
  const VectorXd mean = nn::forward_one(p.backbone, x);
  s.action.resize(mean.size());
  for (Eigen::Index d = 0; d < mean.size(); ++d) s.action(d) = mean(d) + std::exp(p.log_std(d)) * standard_normal(rng);
  s.log_prob = gaussian_log_prob(mean, p.log_std, s.action);
  s.value = nn::forward_one(p.value, x)(0);
  return s;
}

inline double state_value(const bc::Policy& p, const VectorXd& obs) {
  return nn::forward_one(p.value, bc::policy_input(p, obs))(0);
}

// Optimizer state carried across updates.
struct PpoOptimizer {
  nn::AdamState policy;  // backbone parameters then log_std
  nn::AdamState value;
};

inline PpoOptimizer make_ppo_optimizer(const bc::Policy& p, const PpoHyper& h) {
  const auto np = static_cast<Eigen::Index>(p.backbone.parameter_count()) + p.log_std.size();
  return {nn::make_adam(np, {h.policy_lr}), nn::make_adam(static_cast<Eigen::Index>(p.value.parameter_count()),
                                                           {h.policy_lr})};
}

struct PpoStats {
  double policy_objective = 0.0;  // mean clipped surrogate in the last epoch
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double ratio_min = 1.0;
  double ratio_max = 1.0;
  double clipped_ratio_min = 1.0;  // ratio after clipping, always within [1 - clip, 1 + clip]
  double clipped_ratio_max = 1.0;
};

inline void clip_norm(VectorXd& g, double max_norm) {
  const double n = g.norm();
  if (max_norm > 0.0 && n > max_norm) g *= max_norm / n;
}

struct PolicyBatchStats {
  double objective_sum = 0.0;
  double kl_sum = 0.0;
  long clipped = 0;
  double ratio_min = std::numeric_limits<double>::infinity();
  double ratio_max = -std::numeric_limits<double>::infinity();
  double clipped_ratio_min = std::numeric_limits<double>::infinity();
  double clipped_ratio_max = -std::numeric_limits<double>::infinity();
};

// Policy term of one minibatch: -mean clipped surrogate - entropy_coef * H.
// `grad` is laid out as backbone parameters then log_std.
inline double ppo_policy_loss(const bc::Policy& p, const MatrixXd& x, const MatrixXd& a, const VectorXd& adv,
                              const VectorXd& old_log_prob, const PpoHyper& h, VectorXd* grad,
                              PolicyBatchStats* st = nullptr) {
  const int ad = bc::kActionDim;
  const auto b = x.cols();
  const double bd = static_cast<double>(b);
  PolicyBatchStats local;
  auto& s = st ? *st : local;
  nn::ForwardCache pc;
  const MatrixXd mean = nn::forward(p.backbone, bc::policy_input(p, x), &pc);
  const VectorXd sigma = p.log_std.array().exp();
  MatrixXd gmean(ad, b);
  VectorXd glog = VectorXd::Zero(ad);
  double obj_sum = 0.0;
  for (Eigen::Index k = 0; k < b; ++k) {
    const double lp = gaussian_log_prob(mean.col(k), p.log_std, a.col(k));
    const double ratio = std::exp(lp - old_log_prob(k));
    const double cr = std::clamp(ratio, 1.0 - h.clip, 1.0 + h.clip);
    const double obj = std::min(ratio * adv(k), cr * adv(k));
    obj_sum += obj;
    s.kl_sum += old_log_prob(k) - lp;
    s.ratio_min = std::min(s.ratio_min, ratio);
    s.ratio_max = std::max(s.ratio_max, ratio);
    s.clipped_ratio_min = std::min(s.clipped_ratio_min, cr);
    s.clipped_ratio_max = std::max(s.clipped_ratio_max, cr);
    // gradient flows only through the unclipped branch when it is the minimum
    const bool active = ratio * adv(k) <= cr * adv(k);
    if (!active) ++s.clipped;
    const double coef = active ? ratio * adv(k) : 0.0;  // d obj / d log_prob
    for (int d = 0; d < ad; ++d) {
      const double z = (a(d, k) - mean(d, k)) / sigma(d);
      gmean(d, k) = -coef * z / sigma(d) / bd;
      glog(d) += -coef * (z * z - 1.0) / bd;
    }
  }
  s.objective_sum += obj_sum;
  glog.array() -= h.entropy_coef;
  if (grad) {
    grad->resize(static_cast<Eigen::Index>(p.backbone.parameter_count()) + ad);
    *grad << nn::flatten(nn::backward(p.backbone, pc, gmean)), glog;
  }
  return -obj_sum / bd - h.entropy_coef * entropy(p, x);
}

// Clipped-ratio policy step plus value regression. Advantages are normalized
// per batch; returns come from the raw advantages.
inline PpoStats ppo_update(bc::Policy& p, const std::vector<Transition>& ts, const PpoHyper& h, PpoOptimizer& opt,
                           Rng& rng) {
  if (p.kind != bc::PolicyKind::gaussian) throw InvalidConfig("ppo needs a gaussian policy");
  h.check();
  const auto gae = compute_gae(ts, h.gamma, h.gae_lambda);
  const auto n = static_cast<Eigen::Index>(ts.size());
  const int w = p.observation_width;
  const int ad = bc::kActionDim;
  MatrixXd obs(w, n), acts(ad, n);
  VectorXd old_lp(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = ts[static_cast<std::size_t>(i)];
    if (t.observation.size() != w || t.action.size() != ad) throw ShapeMismatch("transition shape");
    obs.col(i) = t.observation;
    acts.col(i) = t.action;
    old_lp(i) = t.log_prob;
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  PpoStats stats;
  stats.ratio_min = std::numeric_limits<double>::infinity();
  stats.ratio_max = -std::numeric_limits<double>::infinity();
  stats.clipped_ratio_min = stats.ratio_min;
  stats.clipped_ratio_max = stats.ratio_max;
  for (int epoch = 0; epoch < h.epochs; ++epoch) {
    shuffle(order, rng);
    double obj_sum = 0.0, vloss_sum = 0.0, kl_sum = 0.0;
    long clipped = 0;
    for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(h.minibatch)) {
      const auto b = static_cast<Eigen::Index>(std::min<std::size_t>(h.minibatch, order.size() - s));
      MatrixXd x(w, b), a(ad, b);
      VectorXd adv(b), ret(b), olp(b);
      for (Eigen::Index k = 0; k < b; ++k) {
        const auto i = order[s + static_cast<std::size_t>(k)];
        x.col(k) = obs.col(i);
        a.col(k) = acts.col(i);
        adv(k) = gae.normalized(i);
        ret(k) = gae.returns(i);
        olp(k) = old_lp(i);
      }
      const double bd = static_cast<double>(b);

      // policy
      PolicyBatchStats bs;
      VectorXd grads;
      ppo_policy_loss(p, x, a, adv, olp, h, &grads, &bs);
      obj_sum += bs.objective_sum;
      kl_sum += bs.kl_sum;
      clipped += bs.clipped;
      stats.ratio_min = std::min(stats.ratio_min, bs.ratio_min);
      stats.ratio_max = std::max(stats.ratio_max, bs.ratio_max);
      stats.clipped_ratio_min = std::min(stats.clipped_ratio_min, bs.clipped_ratio_min);
      stats.clipped_ratio_max = std::max(stats.clipped_ratio_max, bs.clipped_ratio_max);
      if (!grads.allFinite()) throw DivergedLoss("policy gradient is not finite");
      clip_norm(grads, h.max_grad_norm);
      VectorXd params(grads.size());
      params << nn::flatten(p.backbone), p.log_std;
      nn::adam_step(params, grads, opt.policy);
      const auto nb = static_cast<Eigen::Index>(p.backbone.parameter_count());
      nn::unflatten(p.backbone, params.head(nb));
      p.log_std = params.tail(ad).cwiseMax(h.min_log_std).cwiseMin(h.max_log_std);

      // value
      nn::ForwardCache vc;
      const MatrixXd v = nn::forward(p.value, bc::policy_input(p, x), &vc);
      const MatrixXd r = v - ret.transpose();
      vloss_sum += r.squaredNorm();
      VectorXd vg = nn::flatten(nn::backward(p.value, vc, 2.0 * h.value_coef * r / bd));
      if (!vg.allFinite()) throw DivergedLoss("value gradient is not finite");
      clip_norm(vg, h.max_grad_norm);
      VectorXd vp = nn::flatten(p.value);
      nn::adam_step(vp, vg, opt.value);
      nn::unflatten(p.value, vp);
    }
    stats.policy_objective = obj_sum / static_cast<double>(n);
    stats.value_loss = vloss_sum / static_cast<double>(n);
    stats.approx_kl = kl_sum / static_cast<double>(n);
    stats.clip_fraction = static_cast<double>(clipped) / static_cast<double>(n);
  }
  stats.entropy = entropy(p, obs.leftCols(1));
  if (!std::isfinite(stats.policy_objective) || !std::isfinite(stats.value_loss))
    throw DivergedLoss("ppo losses are not finite");
  return stats;
}

}  // namespace driveclone::adversarial
