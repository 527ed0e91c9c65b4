#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "driveclone/adversarial/discriminator.hpp"
#include "driveclone/adversarial/ppo.hpp"
#include "driveclone/bc/policy.hpp"
#include "driveclone/bc/train.hpp"
#include "driveclone/data/demonstrations.hpp"
#include "driveclone/report.hpp"
#include "driveclone/rng.hpp"
#include "driveclone/sim/highway_env.hpp"

namespace driveclone::adversarial {

// (observation, applied action) pairs that preceded collisions. FIFO beyond
// capacity.
class NegativeBuffer {
 public:
  explicit NegativeBuffer(std::size_t capacity = 10000) : capacity_(capacity) {}

  void push(const VectorXd& obs, const VectorXd& action) {
    if (capacity_ == 0) return;
    if (items_.size() == capacity_) items_.pop_front();
    items_.emplace_back(obs, action);
    ++inserted_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t inserted() const { return inserted_; }
  bool empty() const { return items_.empty(); }
  const std::pair<VectorXd, VectorXd>& at(std::size_t i) const { return items_[i]; }

 private:
  std::size_t capacity_;
  std::size_t inserted_ = 0;
  std::deque<std::pair<VectorXd, VectorXd>> items_;
};

struct RolloutConfig {
  int steps_per_iter = 2048;  // env steps per iteration, summed over workers
  int workers = 1;
};

struct GailConfig {
  PpoHyper ppo;
  RolloutConfig rollout;
  long budget = 200000;  // total env steps
  std::uint64_t seed = 0;
  std::vector<int> hidden{64, 64};
  std::vector<int> discriminator_hidden{64, 64};
  double initial_log_std = std::log(0.5);
  int disc_batch = 256;
  int disc_steps = 4;  // discriminator steps per iteration
  // policy and critic see expert-standardized observations; the discriminator sees raw ones
  bool standardize_policy_inputs = false;
  double standardization_floor = 0.1;
};

struct PenaltyConfig {
  double penalty = -10.0;  // added to the reward of every colliding transition
  int history = 10;        // transitions before (and including) a collision that become negatives
  double negative_fraction = 0.25;
  std::size_t capacity = 10000;
};

struct GailResult {
  bc::Policy policy;
  Discriminator discriminator;
  TrainReport report;
  std::size_t negatives_inserted = 0;
};

namespace detail {

struct Worker {
  std::unique_ptr<sim::EpisodicEnv> env;
  Rng rng;
  VectorXd obs;
  bool need_reset = true;
  int episode_len = 0;
  std::deque<std::pair<VectorXd, VectorXd>> history;  // last K (obs, applied)
};

struct WorkerBatch {
  std::vector<Transition> transitions;
  std::vector<int> episode_lengths;  // completed episodes
  int collisions = 0;                // completed episodes ending in a collision
  std::vector<std::pair<VectorXd, VectorXd>> negatives;
};

inline VectorXd applied_action(const sim::ActionBounds& b, const VectorXd& raw) {
  return bc::from_action(b.clamp(bc::to_action(raw)));
}

// Steps one worker's env for `steps` transitions with the sampling policy. The
// final transition is marked truncated (with a bootstrap value) when the
// episode is still running; it continues in the next call.
inline WorkerBatch collect(Worker& w, const bc::Policy& p, int steps, int history) {
  WorkerBatch out;
  out.transitions.reserve(static_cast<std::size_t>(steps));
  const auto bounds = w.env->action_bounds();
  for (int s = 0; s < steps; ++s) {
    if (w.need_reset) {
      w.obs = w.env->reset(w.rng);
      w.need_reset = false;
      w.episode_len = 0;
      w.history.clear();
    }
    const auto a = act(p, w.obs, w.rng);
    Transition t;
    t.observation = w.obs;
    t.action = a.action;
    t.applied = applied_action(bounds, a.action);
    t.log_prob = a.log_prob;
    t.value_estimate = a.value;
    const auto step = w.env->step(bc::to_action(t.applied));
    t.reward = step.reward;
    t.collision = step.info.collision;
    t.done = step.info.done;
    t.truncated = step.truncated;
    ++w.episode_len;
    if (history > 0) {
      w.history.emplace_back(t.observation, t.applied);
      if (static_cast<int>(w.history.size()) > history) w.history.pop_front();
      if (t.collision) out.negatives.insert(out.negatives.end(), w.history.begin(), w.history.end());
    }
    if (t.done || t.truncated) {
      out.episode_lengths.push_back(w.episode_len);
      if (t.collision) ++out.collisions;
      w.need_reset = true;
      if (t.truncated) t.bootstrap_value = state_value(p, step.observation);
    } else {
      w.obs = step.observation;
      if (s == steps - 1) {
        t.truncated = true;  // batch cut; episode continues next iteration
        t.bootstrap_value = state_value(p, w.obs);
      }
    }
    out.transitions.push_back(std::move(t));
  }
  return out;
}

inline std::vector<WorkerBatch> collect_all(std::vector<Worker>& workers, const bc::Policy& p, int steps_per_iter,
                                            int history) {
  const int n = static_cast<int>(workers.size());
  std::vector<WorkerBatch> out(workers.size());
  auto share = [&](int i) { return steps_per_iter / n + (i < steps_per_iter % n ? 1 : 0); };
  if (n == 1) {
    out[0] = collect(workers[0], p, share(0), history);
    return out;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers.size());
  for (int i = 0; i < n; ++i) {
    threads.emplace_back([&, i] {
      try {
        out[static_cast<std::size_t>(i)] = collect(workers[static_cast<std::size_t>(i)], p, share(i), history);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline PairBatch expert_pairs(const std::vector<data::Demonstration>& demos, const sim::ActionBounds& bounds) {
  const auto m = bc::demonstrations_matrix(demos);
  PairBatch b{m.x, m.y};
  for (Eigen::Index c = 0; c < b.actions.cols(); ++c) b.actions.col(c) = applied_action(bounds, b.actions.col(c));
  return b;
}

inline PairBatch sample_pairs(const PairBatch& from, int n, Rng& rng) {
  PairBatch b{MatrixXd(from.observations.rows(), n), MatrixXd(from.actions.rows(), n)};
  for (int k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(from.size())));
    b.observations.col(k) = from.observations.col(i);
    b.actions.col(k) = from.actions.col(i);
  }
  return b;
}

}  // namespace detail

// Imitation reward replaces the env's own: surrogate, plus the penalty on
// colliding transitions.
inline void label_rewards(std::vector<Transition>& ts, const VectorXd& surrogate, double penalty) {
  if (surrogate.size() != static_cast<Eigen::Index>(ts.size())) throw ShapeMismatch("one reward per transition");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    ts[i].reward = surrogate(static_cast<Eigen::Index>(i));
    if (penalty != 0.0 && ts[i].collision) ts[i].reward += penalty;
  }
}

namespace detail {

// Shared loop. `penalty` is null for plain GAIL. A zero penalty and zero
// negative fraction take exactly the plain code path.
inline GailResult adversarial_imitation(const sim::EnvFactory& factory, const std::vector<data::Demonstration>& demos,
                                        const GailConfig& cfg, const PenaltyConfig* penalty) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.ppo.check();
  if (cfg.rollout.workers < 1 || cfg.rollout.steps_per_iter < cfg.rollout.workers)
    throw InvalidConfig("need workers >= 1 and steps_per_iter >= workers");
  if (cfg.budget < cfg.rollout.steps_per_iter) throw InvalidConfig("budget is smaller than one rollout batch");
  if (cfg.disc_batch < 1 || cfg.disc_steps < 0) throw InvalidConfig("disc_batch must be positive");
  if (penalty && (penalty->history < 0 || penalty->negative_fraction < 0.0 || penalty->negative_fraction > 1.0))
    throw InvalidConfig("history >= 0 and negative_fraction in [0, 1] required");
  if (demos.empty()) throw EmptyDataset("no expert demonstrations");

  std::vector<Worker> workers;
  for (int i = 0; i < cfg.rollout.workers; ++i) {
    const auto ws = derive_seed(cfg.seed, 0x3000ULL + static_cast<std::uint64_t>(i));
    workers.push_back({factory(ws), Rng(derive_seed(ws, 1)), {}, true, 0, {}});
  }
  const int w = workers.front().env->observation_width();
  const auto bounds = workers.front().env->action_bounds();
  const auto expert = expert_pairs(demos, bounds);
  if (expert.observations.rows() != w) throw ShapeMismatch("demonstration width differs from env observation width");

  auto init = make_rng(cfg.seed, 0x9a11ULL);
  GailResult r{bc::make_policy(bc::PolicyKind::gaussian, w, cfg.hidden, init, 1, 0, cfg.initial_log_std, bounds),
               make_discriminator(w, cfg.discriminator_hidden, init, bounds), {}, 0};
  if (cfg.standardize_policy_inputs)
    bc::fit_input_standardization(r.policy, expert.observations, cfg.standardization_floor);
  auto popt = make_ppo_optimizer(r.policy, cfg.ppo);
  auto dopt = nn::make_adam(static_cast<Eigen::Index>(r.discriminator.net.parameter_count()), {cfg.ppo.discriminator_lr});
  auto rng = make_rng(cfg.seed, 0x9a12ULL);

  const int history = penalty ? penalty->history : 0;
  const double rho = penalty ? penalty->negative_fraction : 0.0;
  const double pen = penalty ? penalty->penalty : 0.0;
  NegativeBuffer negatives(penalty ? penalty->capacity : 0);

  r.report.columns = {"iter", "disc_loss", "mean_surrogate_reward", "mean_episode_len", "collision_rate", "entropy"};
  r.report.seed = cfg.seed;
  r.report.hyperparameters = {{"budget", std::to_string(cfg.budget)},
                              {"steps_per_iter", std::to_string(cfg.rollout.steps_per_iter)},
                              {"workers", std::to_string(cfg.rollout.workers)},
                              {"gamma", text::exact(cfg.ppo.gamma)},
                              {"gae_lambda", text::exact(cfg.ppo.gae_lambda)},
                              {"clip", text::exact(cfg.ppo.clip)},
                              {"entropy_coef", text::exact(cfg.ppo.entropy_coef)},
                              {"epochs", std::to_string(cfg.ppo.epochs)},
                              {"minibatch", std::to_string(cfg.ppo.minibatch)},
                              {"policy_lr", text::exact(cfg.ppo.policy_lr)},
                              {"discriminator_lr", text::exact(cfg.ppo.discriminator_lr)},
                              {"disc_steps", std::to_string(cfg.disc_steps)},
                              {"initial_log_std", text::exact(cfg.initial_log_std)}};
  if (cfg.standardize_policy_inputs)
    r.report.hyperparameters["standardization_floor"] = text::exact(cfg.standardization_floor);
  if (penalty) {
    r.report.hyperparameters["penalty"] = text::exact(pen);
    r.report.hyperparameters["history"] = std::to_string(history);
    r.report.hyperparameters["negative_fraction"] = text::exact(rho);
  }

  const long iterations = cfg.budget / cfg.rollout.steps_per_iter;
  for (long iter = 1; iter <= iterations; ++iter) {
    auto batches = collect_all(workers, r.policy, cfg.rollout.steps_per_iter, history);
    std::vector<Transition> ts;
    std::vector<int> lengths;
    int collided = 0;
    for (auto& b : batches) {
      ts.insert(ts.end(), std::make_move_iterator(b.transitions.begin()), std::make_move_iterator(b.transitions.end()));
      lengths.insert(lengths.end(), b.episode_lengths.begin(), b.episode_lengths.end());
      collided += b.collisions;
      for (auto& [o, a] : b.negatives) negatives.push(o, a);
    }
    PairBatch rollout{MatrixXd(w, static_cast<Eigen::Index>(ts.size())),
                      MatrixXd(bc::kActionDim, static_cast<Eigen::Index>(ts.size()))};
    for (std::size_t i = 0; i < ts.size(); ++i) {
      rollout.observations.col(static_cast<Eigen::Index>(i)) = ts[i].observation;
      rollout.actions.col(static_cast<Eigen::Index>(i)) = ts[i].applied;
    }

    // discriminator first, then reward labeling with the updated D
    double dloss = 0.0;
    for (int k = 0; k < cfg.disc_steps; ++k) {
      const auto e = sample_pairs(expert, cfg.disc_batch, rng);
      const int n_neg = (rho > 0.0 && !negatives.empty()) ? static_cast<int>(std::lround(rho * cfg.disc_batch)) : 0;
      auto pb = sample_pairs(rollout, cfg.disc_batch - n_neg, rng);
      if (n_neg > 0) {
        PairBatch mixed{MatrixXd(w, cfg.disc_batch), MatrixXd(bc::kActionDim, cfg.disc_batch)};
        mixed.observations.leftCols(pb.size()) = pb.observations;
        mixed.actions.leftCols(pb.size()) = pb.actions;
        for (int j = 0; j < n_neg; ++j) {
          const auto& [o, a] = negatives.at(static_cast<std::size_t>(uniform_index(rng, negatives.size())));
          mixed.observations.col(pb.size() + j) = o;
          mixed.actions.col(pb.size() + j) = a;
        }
        pb = std::move(mixed);
      }
      dloss += discriminator_update(r.discriminator, e, pb, dopt) / cfg.disc_steps;
    }

    const VectorXd surrogate = surrogate_rewards(r.discriminator, rollout);
    label_rewards(ts, surrogate, pen);
    ppo_update(r.policy, ts, cfg.ppo, popt, rng);

    double mean_len = 0.0;
    for (int l : lengths) mean_len += l;
    mean_len = lengths.empty() ? static_cast<double>(cfg.rollout.steps_per_iter) / cfg.rollout.workers
                               : mean_len / static_cast<double>(lengths.size());
    const double crate = lengths.empty() ? 0.0 : static_cast<double>(collided) / static_cast<double>(lengths.size());
    r.report.add({static_cast<double>(iter), dloss, surrogate.mean(), mean_len, crate,
                  entropy(r.policy, rollout.observations.leftCols(1))});
  }
  r.negatives_inserted = negatives.inserted();
  r.report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace detail

inline GailResult gail_train(const sim::EnvFactory& factory, const std::vector<data::Demonstration>& demos,
                             const GailConfig& cfg) {
  return detail::adversarial_imitation(factory, demos, cfg, nullptr);
}

inline GailResult air_gail_train(const sim::EnvFactory& factory, const std::vector<data::Demonstration>& demos,
                                 const GailConfig& cfg, const PenaltyConfig& penalty = {}) {
  return detail::adversarial_imitation(factory, demos, cfg, &penalty);
}

// Policy-gradient training on the environment's own reward, no discriminator.
inline std::pair<bc::Policy, TrainReport> ppo_train(const sim::EnvFactory& factory, const GailConfig& cfg) {
  cfg.ppo.check();
  std::vector<detail::Worker> workers;
  for (int i = 0; i < cfg.rollout.workers; ++i) {
    const auto ws = derive_seed(cfg.seed, 0x3000ULL + static_cast<std::uint64_t>(i));
    workers.push_back({factory(ws), Rng(derive_seed(ws, 1)), {}, true, 0, {}});
  }
  const int w = workers.front().env->observation_width();
  auto init = make_rng(cfg.seed, 0x9a11ULL);
  auto policy = bc::make_policy(bc::PolicyKind::gaussian, w, cfg.hidden, init, 1, 0, cfg.initial_log_std,
                                workers.front().env->action_bounds());
  auto opt = make_ppo_optimizer(policy, cfg.ppo);
  auto rng = make_rng(cfg.seed, 0x9a12ULL);
  TrainReport report;
  report.columns = {"iter", "mean_reward", "mean_episode_len", "entropy"};
  report.seed = cfg.seed;
  const long iterations = cfg.budget / cfg.rollout.steps_per_iter;
  if (iterations < 1) throw InvalidConfig("budget is smaller than one rollout batch");
  for (long iter = 1; iter <= iterations; ++iter) {
    auto batches = detail::collect_all(workers, policy, cfg.rollout.steps_per_iter, 0);
    std::vector<Transition> ts;
    double len = 0.0;
    std::size_t eps = 0;
    for (auto& b : batches) {
      ts.insert(ts.end(), b.transitions.begin(), b.transitions.end());
      for (int l : b.episode_lengths) len += l;
      eps += b.episode_lengths.size();
    }
    double rew = 0.0;
    for (const auto& t : ts) rew += t.reward;
    const auto stats = ppo_update(policy, ts, cfg.ppo, opt, rng);
    report.add({static_cast<double>(iter), rew / static_cast<double>(ts.size()), eps ? len / static_cast<double>(eps) : 0.0,
                stats.entropy});
  }
  return {std::move(policy), std::move(report)};
}

// Mean surrogate reward per step and mean episode length of an actor under a
// fixed discriminator, over `episodes` episodes from a fresh env.
struct RolloutScore {
  double mean_surrogate_reward = 0.0;
  double mean_episode_len = 0.0;
  double collision_rate = 0.0;
};

using Actor = std::function<sim::Action(const VectorXd& obs, Rng& rng)>;

inline RolloutScore score_actor(const sim::EnvFactory& factory, const Actor& actor, const Discriminator& d,
                                int episodes, std::uint64_t seed) {
  auto env = factory(derive_seed(seed, 0x5c0eULL));
  auto rng = make_rng(seed, 0x5c0fULL);
  double reward = 0.0, len = 0.0;
  long steps = 0;
  int collisions = 0;
  for (int e = 0; e < episodes; ++e) {
    VectorXd obs = env->reset(rng);
    for (int k = 0;; ++k) {
      const auto a = actor(obs, rng);
      reward += surrogate_reward(d, obs, a);
      ++steps;
      const auto s = env->step(a);
      if (s.info.done || s.truncated) {
        len += k + 1;
        collisions += s.info.collision;
        break;
      }
      obs = s.observation;
    }
  }
  return {reward / static_cast<double>(std::max(1L, steps)), len / episodes, static_cast<double>(collisions) / episodes};
}

}  // namespace driveclone::adversarial
