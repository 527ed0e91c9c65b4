#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "driveclone/bc/policy.hpp"
#include "driveclone/data/demonstrations.hpp"
#include "driveclone/error.hpp"
#include "driveclone/mdn/mixture.hpp"
#include "driveclone/nn/adam.hpp"
#include "driveclone/nn/mlp.hpp"
#include "driveclone/report.hpp"
#include "driveclone/rng.hpp"
#include "driveclone/text.hpp"

namespace driveclone::bc {

struct BcConfig {
  int epochs = 50;
  int batch = 64;
  double lr = 3e-3;
  std::uint64_t seed = 0;
  std::vector<int> hidden{64, 64};
  int components = 5;  // mixture components, MDN only
  double validation_fraction = 0.1;
};

enum class Loss { mse, mixture_nll };

// Samples are columns of x (inputs) and y (targets).
struct Regression {
  MatrixXd x;
  MatrixXd y;
  Eigen::Index size() const { return x.cols(); }
};

inline Regression demonstrations_matrix(const std::vector<data::Demonstration>& demos) {
  if (demos.empty()) throw EmptyDataset("no demonstrations");
  Regression r;
  const auto w = demos.front().observation.size();
  r.x.resize(w, static_cast<Eigen::Index>(demos.size()));
  r.y.resize(kActionDim, static_cast<Eigen::Index>(demos.size()));
  for (std::size_t i = 0; i < demos.size(); ++i) {
    if (demos[i].observation.size() != w) throw ShapeMismatch("demonstrations differ in observation width");
    const auto c = static_cast<Eigen::Index>(i);
    r.x.col(c) = demos[i].observation;
    r.y(0, c) = demos[i].action.a_long;
    r.y(1, c) = demos[i].action.a_lat;
  }
  if (!r.y.allFinite() || !r.x.allFinite()) throw MalformedRow("non-finite demonstration");
  return r;
}

// Fixed hold-out: sample i validates when its index hash falls in the bottom
// `fraction` of the hash range. Independent of the run seed.
inline bool is_validation_index(std::size_t i, double fraction) {
  return static_cast<double>(mix_seed(static_cast<std::uint64_t>(i)) % 1000000ULL) < fraction * 1e6;
}

inline std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> holdout_split(Eigen::Index n, double fraction) {
  std::vector<Eigen::Index> train, val;
  for (Eigen::Index i = 0; i < n; ++i) (is_validation_index(static_cast<std::size_t>(i), fraction) ? val : train).push_back(i);
  return {train, val};
}

// Summed loss over columns and d loss / d output.
inline double batch_loss(Loss loss, int components, const MatrixXd& out, const MatrixXd& y, MatrixXd* grad) {
  if (loss == Loss::mse) {
    const MatrixXd r = out - y;
    if (grad) *grad = 2.0 * r;
    return r.squaredNorm();
  }
  const int d = static_cast<int>(y.rows());
  double total = 0.0;
  if (grad) grad->resize(out.rows(), out.cols());
  VectorXd g;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    total += mdn::mdn_nll_grad(out.col(c), components, d, y.col(c), grad ? &g : nullptr);
    if (grad) grad->col(c) = g;
  }
  return total;
}

// Mean loss per sample (MSE additionally averages over output dims).
inline double mean_loss(Loss loss, int components, const nn::Mlp& net, const Regression& data,
                        const std::vector<Eigen::Index>& idx) {
  if (idx.empty()) return 0.0;
  constexpr std::size_t kChunk = 4096;
  double total = 0.0;
  for (std::size_t s = 0; s < idx.size(); s += kChunk) {
    const std::size_t n = std::min(kChunk, idx.size() - s);
    MatrixXd x(data.x.rows(), static_cast<Eigen::Index>(n)), y(data.y.rows(), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      x.col(static_cast<Eigen::Index>(k)) = data.x.col(idx[s + k]);
      y.col(static_cast<Eigen::Index>(k)) = data.y.col(idx[s + k]);
    }
    total += batch_loss(loss, components, nn::forward(net, x), y, nullptr);
  }
  const double per = loss == Loss::mse ? static_cast<double>(data.y.rows()) : 1.0;
  return total / (static_cast<double>(idx.size()) * per);
}

// Minibatch Adam on `net`. Report rows: epoch 0 holds the losses before any
// update; epoch k the full train/validation loss after epoch k.
inline TrainReport fit(nn::Mlp& net, Loss loss, int components, const Regression& data, const BcConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (data.size() == 0) throw EmptyDataset("no samples");
  if (cfg.epochs < 1 || cfg.batch < 1 || !(cfg.lr > 0.0)) throw InvalidConfig("epochs, batch and lr must be positive");
  if (net.input_width() != data.x.rows()) throw ShapeMismatch("network input differs from sample width");
  const int d = static_cast<int>(data.y.rows());
  const int head = loss == Loss::mse ? d : mdn::raw_width(components, d);
  if (net.output_width() != head) throw ShapeMismatch("network output differs from head width");

  auto [train, val] = holdout_split(data.size(), cfg.validation_fraction);
  if (train.size() < static_cast<std::size_t>(cfg.batch))
    throw EmptyDataset(std::to_string(train.size()) + " training samples, batch is " + std::to_string(cfg.batch));

  TrainReport report;
  report.columns = {"epoch", "train_loss", "val_loss"};
  report.seed = cfg.seed;
  report.hyperparameters = {{"epochs", std::to_string(cfg.epochs)},
                            {"batch", std::to_string(cfg.batch)},
                            {"lr", text::exact(cfg.lr)},
                            {"loss", loss == Loss::mse ? "mse" : "mixture_nll"},
                            {"components", std::to_string(components)},
                            {"train_samples", std::to_string(train.size())},
                            {"val_samples", std::to_string(val.size())}};
  // an empty hold-out (tiny sets) reports the training loss in its place
  auto record = [&](int epoch) {
    const double tl = mean_loss(loss, components, net, data, train);
    const double vl = val.empty() ? tl : mean_loss(loss, components, net, data, val);
    if (!std::isfinite(tl) || !std::isfinite(vl)) throw DivergedLoss("epoch " + std::to_string(epoch));
    report.add({static_cast<double>(epoch), tl, vl});
  };
  record(0);

  auto rng = make_rng(cfg.seed, 0xbc5eULL);
  VectorXd params = nn::flatten(net);
  auto adam = nn::make_adam(params.size(), {cfg.lr});
  const double per = loss == Loss::mse ? static_cast<double>(d) : 1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(train, rng);
    for (std::size_t s = 0; s < train.size(); s += static_cast<std::size_t>(cfg.batch)) {
      const auto n = static_cast<Eigen::Index>(std::min<std::size_t>(cfg.batch, train.size() - s));
      MatrixXd x(data.x.rows(), n), y(d, n);
      for (Eigen::Index k = 0; k < n; ++k) {
        x.col(k) = data.x.col(train[s + static_cast<std::size_t>(k)]);
        y.col(k) = data.y.col(train[s + static_cast<std::size_t>(k)]);
      }
      nn::ForwardCache cache;
      const MatrixXd out = nn::forward(net, x, &cache);
      MatrixXd g;
      batch_loss(loss, components, out, y, &g);
      g /= static_cast<double>(n) * per;
      const VectorXd grads = nn::flatten(nn::backward(net, cache, g));
      if (!grads.allFinite()) throw DivergedLoss("non-finite gradient in epoch " + std::to_string(epoch));
      nn::adam_step(params, grads, adam);
      nn::unflatten(net, params);
    }
    record(epoch);
  }
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

inline std::pair<Policy, TrainReport> train_bc(const std::vector<data::Demonstration>& demos, const BcConfig& cfg,
                                               sim::ActionBounds bounds = {}) {
  if (demos.empty()) throw EmptyDataset("no demonstrations");
  const auto data = demonstrations_matrix(demos);
  auto rng = make_rng(cfg.seed, 0xbc1aULL);
  auto policy = make_policy(PolicyKind::ffn, static_cast<int>(data.x.rows()), cfg.hidden, rng, 1, 0, 0.0, bounds);
  auto report = fit(policy.backbone, Loss::mse, 1, data, cfg);
  return {std::move(policy), std::move(report)};
}

inline std::pair<Policy, TrainReport> train_bc_mdn(const std::vector<data::Demonstration>& demos, const BcConfig& cfg,
                                                   sim::ActionBounds bounds = {}) {
  if (demos.empty()) throw EmptyDataset("no demonstrations");
  const auto data = demonstrations_matrix(demos);
  auto rng = make_rng(cfg.seed, 0xbc1bULL);
  auto policy =
      make_policy(PolicyKind::mdn, static_cast<int>(data.x.rows()), cfg.hidden, rng, cfg.components, 0, 0.0, bounds);
  auto report = fit(policy.backbone, Loss::mixture_nll, cfg.components, data, cfg);
  return {std::move(policy), std::move(report)};
}

}  // namespace driveclone::bc
