#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include "driveclone/adversarial/discriminator.hpp"
#include "driveclone/bc/policy.hpp"
#include "driveclone/bc/train.hpp"
#include "driveclone/data/demonstrations.hpp"
#include "driveclone/nn/adam.hpp"
#include "driveclone/report.hpp"
#include "driveclone/rng.hpp"

namespace driveclone::adversarial {

struct GanConfig {
  int z_dim = 8;
  int steps = 3000;
  int batch = 64;
  double generator_lr = 2e-4;
  double discriminator_lr = 2e-3;  // D must outpace G or both chase each other at chance
  double beta1 = 0.5;  // Adam momentum for both players
  std::uint64_t seed = 0;
  std::vector<int> hidden{64, 64};
  bool non_saturating = false;  // generator maximizes log D instead of minimizing log(1 - D)
  int report_every = 100;
  double holdout_fraction = 0.1;
};

// Generated actions G(s, z) for a block of observations; z is drawn from rng
// (or zero when rng is null).
inline MatrixXd generate(const bc::Policy& g, const MatrixXd& obs, Rng* rng, MatrixXd* input = nullptr) {
  MatrixXd in = MatrixXd::Zero(g.backbone_input_width(), obs.cols());
  in.topRows(g.observation_width) = obs;
  if (rng)
    for (Eigen::Index c = 0; c < in.cols(); ++c)
      for (int k = 0; k < g.noise_dim; ++k) in(g.observation_width + k, c) = standard_normal(*rng);
  MatrixXd out = nn::forward(g.backbone, in);
  if (input) *input = std::move(in);
  return out;
}

inline PairBatch clamp_actions(PairBatch b, const sim::ActionBounds& bounds) {
  for (Eigen::Index c = 0; c < b.actions.cols(); ++c) {
    b.actions(0, c) = std::clamp(b.actions(0, c), bounds.min_long, bounds.max_long);
    b.actions(1, c) = std::clamp(b.actions(1, c), bounds.min_lat, bounds.max_lat);
  }
  return b;
}

inline PairBatch gather(const bc::Regression& data, const std::vector<Eigen::Index>& idx) {
  PairBatch b{MatrixXd(data.x.rows(), static_cast<Eigen::Index>(idx.size())),
              MatrixXd(data.y.rows(), static_cast<Eigen::Index>(idx.size()))};
  for (std::size_t k = 0; k < idx.size(); ++k) {
    b.observations.col(static_cast<Eigen::Index>(k)) = data.x.col(idx[k]);
    b.actions.col(static_cast<Eigen::Index>(k)) = data.y.col(idx[k]);
  }
  return b;
}

struct GanResult {
  bc::Policy generator;
  Discriminator discriminator;
  TrainReport report;
};

// Alternating updates on the conditional pair (s, G(s, z)) against expert
// (s, a). Report rows every `report_every` steps: mean losses over the
// interval and the balanced accuracy on held-out expert pairs against
// generated actions for the same held-out states.
inline GanResult gan_train(const std::vector<data::Demonstration>& demos, const GanConfig& cfg,
                           sim::ActionBounds bounds = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.z_dim < 1 || cfg.steps < 1 || cfg.batch < 1 || cfg.report_every < 1)
    throw InvalidConfig("z_dim, steps, batch and report_every must be positive");
  auto data = bc::demonstrations_matrix(demos);
  auto [train, held] = bc::holdout_split(data.size(), cfg.holdout_fraction);
  if (train.size() < static_cast<std::size_t>(cfg.batch))
    throw EmptyDataset(std::to_string(train.size()) + " training pairs, batch is " + std::to_string(cfg.batch));
  if (held.empty()) held = train;
  const int w = static_cast<int>(data.x.rows());

  auto init = make_rng(cfg.seed, 0x6a2eULL);
  GanResult r{bc::make_policy(bc::PolicyKind::gan, w, cfg.hidden, init, 1, cfg.z_dim, 0.0, bounds),
              make_discriminator(w, cfg.hidden, init, bounds), {}};
  auto& g = r.generator;
  auto& d = r.discriminator;
  auto rng = make_rng(cfg.seed, 0x6a2fULL);
  auto eval_rng_seed = derive_seed(cfg.seed, 0x6a30ULL);
  nn::AdamState dopt = nn::make_adam(static_cast<Eigen::Index>(d.net.parameter_count()), {cfg.discriminator_lr, cfg.beta1});
  nn::AdamState gopt = nn::make_adam(static_cast<Eigen::Index>(g.backbone.parameter_count()), {cfg.generator_lr, cfg.beta1});

  const auto held_expert = clamp_actions(gather(data, held), bounds);
  auto held_accuracy = [&]() {
    Rng er(eval_rng_seed);  // same noise every evaluation
    PairBatch fake{held_expert.observations, generate(g, held_expert.observations, &er)};
    return accuracy(d, held_expert, fake);
  };

  r.report.columns = {"step", "disc_loss", "gen_loss", "disc_accuracy"};
  r.report.seed = cfg.seed;
  r.report.hyperparameters = {{"z_dim", std::to_string(cfg.z_dim)},
                              {"steps", std::to_string(cfg.steps)},
                              {"batch", std::to_string(cfg.batch)},
                              {"generator_lr", text::exact(cfg.generator_lr)},
                              {"discriminator_lr", text::exact(cfg.discriminator_lr)},
                              {"non_saturating", cfg.non_saturating ? "1" : "0"}};

  double d_sum = 0.0, g_sum = 0.0;
  int in_interval = 0;
  std::size_t cursor = train.size();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(cfg.batch));
  for (int step = 1; step <= cfg.steps; ++step) {
    for (auto& i : idx) {
      if (cursor >= train.size()) {
        shuffle(train, rng);
        cursor = 0;
      }
      i = train[cursor++];
    }
    const auto expert = clamp_actions(gather(data, idx), bounds);

    // discriminator step
    {
      PairBatch fake{expert.observations, generate(g, expert.observations, &rng)};
      d_sum += discriminator_update(d, expert, fake, dopt);
    }
    // generator step: backprop through D into the action inputs, then into G
    {
      MatrixXd gin;
      nn::ForwardCache gc;
      MatrixXd noise_obs = expert.observations;
      generate(g, noise_obs, &rng, &gin);
      const MatrixXd raw = nn::forward(g.backbone, gin, &gc);
      PairBatch fake{noise_obs, raw};
      nn::ForwardCache dc;
      const MatrixXd l = nn::forward(d.net, discriminator_input(d, fake), &dc);
      const double n = static_cast<double>(l.cols());
      double loss = 0.0;
      MatrixXd dl(1, l.cols());
      for (Eigen::Index c = 0; c < l.cols(); ++c) {
        if (cfg.non_saturating) {
          loss += nn::softplus(-l(0, c)) / n;  // -log D
          dl(0, c) = -nn::sigmoid(-l(0, c)) / n;
        } else {
          loss += -nn::softplus(l(0, c)) / n;  // log(1 - D)
          dl(0, c) = -nn::sigmoid(l(0, c)) / n;
        }
      }
      const MatrixXd din = nn::backward(d.net, dc, dl).input;
      MatrixXd da(bc::kActionDim, l.cols());
      da.row(0) = din.row(w) / d.bounds.long_scale();
      da.row(1) = din.row(w + 1) / d.bounds.lat_scale();
      const VectorXd grads = nn::flatten(nn::backward(g.backbone, gc, da));
      if (!std::isfinite(loss) || !grads.allFinite()) throw DivergedLoss("generator loss at step " + std::to_string(step));
      VectorXd params = nn::flatten(g.backbone);
      nn::adam_step(params, grads, gopt);
      nn::unflatten(g.backbone, params);
      g_sum += loss;
    }
    ++in_interval;
    if (step % cfg.report_every == 0 || step == cfg.steps) {
      r.report.add({static_cast<double>(step), d_sum / in_interval, g_sum / in_interval, held_accuracy()});
      d_sum = g_sum = 0.0;
      in_interval = 0;
    }
  }
  r.report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace driveclone::adversarial
