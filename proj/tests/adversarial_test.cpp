#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "driveclone/adversarial/discriminator.hpp"
#include "driveclone/adversarial/gail.hpp"
#include "driveclone/adversarial/gan.hpp"
#include "driveclone/adversarial/ppo.hpp"
#include "driveclone/nn/numerics.hpp"

namespace {

using namespace driveclone;
using namespace driveclone::adversarial;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Random 3-wide observations; episodes last `length` steps. Applying a
// longitudinal command above `collide_above` counts as a collision and ends
// the episode.
class ToyEnv : public sim::EpisodicEnv {
 public:
  ToyEnv(std::uint64_t seed, int length, double collide_above) : rng_(seed), length_(length), collide_(collide_above) {}

  sim::Observation reset(Rng&) override {
    steps_ = 0;
    return draw();
  }

  sim::EnvStep step(const sim::Action& a) override {
    ++steps_;
    sim::StepInfo info;
    info.collision = a.a_long > collide_;
    info.done = info.collision;
    sim::EnvStep s{draw(), info, !info.done && steps_ >= length_, 0.0};
    return s;
  }

  int observation_width() const override { return 3; }
  sim::ActionBounds action_bounds() const override { return {}; }

 private:
  VectorXd draw() {
    VectorXd o(3);
    for (int i = 0; i < 3; ++i) o(i) = uniform(rng_, -1.0, 1.0);
    return o;
  }
  Rng rng_;
  int length_;
  double collide_;
  int steps_ = 0;
};

// One-step episodes with a constant observation and reward -|a|.
class BanditEnv : public sim::EpisodicEnv {
 public:
  sim::Observation reset(Rng&) override { return VectorXd::Ones(1); }
  sim::EnvStep step(const sim::Action& a) override {
    sim::StepInfo info;
    info.done = true;
    return {VectorXd::Ones(1), info, false, -(std::abs(a.a_long) + std::abs(a.a_lat))};
  }
  int observation_width() const override { return 1; }
  sim::ActionBounds action_bounds() const override { return {}; }
};

sim::EnvFactory toy_factory(int length = 16, double collide_above = 1e9) {
  return [=](std::uint64_t seed) { return std::make_unique<ToyEnv>(seed, length, collide_above); };
}

std::vector<data::Demonstration> constant_demos(int n, double a_long, double a_lat, std::uint64_t seed, int width = 3) {
  auto rng = make_rng(seed, 1);
  std::vector<data::Demonstration> out;
  for (int i = 0; i < n; ++i) {
    data::Demonstration d;
    d.observation = VectorXd(width);
    for (int k = 0; k < width; ++k) d.observation(k) = uniform(rng, -1.0, 1.0);
    d.action = {a_long, a_lat};
    out.push_back(d);
  }
  return out;
}

PairBatch random_pairs(int n, double a_long, double spread, Rng& rng) {
  PairBatch b{MatrixXd(3, n), MatrixXd(2, n)};
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) b.observations(k, i) = uniform(rng, -1.0, 1.0);
    b.actions(0, i) = a_long + uniform(rng, -spread, spread);
    b.actions(1, i) = uniform(rng, -spread, spread);
  }
  return b;
}

Discriminator zero_discriminator() {
  auto rng = make_rng(3);
  auto d = make_discriminator(3, {8}, rng);
  for (auto& l : d.net.layers) {
    l.weights.setZero();
    l.biases.setZero();
  }
  return d;
}

TEST(Discriminator, HalfEverywhereGivesTwoLn2) {
  auto rng = make_rng(1);
  const auto d = zero_discriminator();
  const auto e = random_pairs(32, 1.0, 0.5, rng), p = random_pairs(32, -1.0, 0.5, rng);
  EXPECT_NEAR(discriminator_loss(d, e, p, nullptr), 1.3863, 1e-4);
  EXPECT_NEAR(discriminator_loss(d, e, p, nullptr), -2.0 * std::log(0.5), 1e-12);
}

TEST(Discriminator, SeparableBatchesAreClassified) {
  auto rng = make_rng(2);
  auto d = make_discriminator(3, {32, 32}, rng);
  auto adam = nn::make_adam(static_cast<Eigen::Index>(d.net.parameter_count()), {1e-3});
  for (int s = 0; s < 200; ++s) discriminator_update(d, random_pairs(64, 2.0, 1.0, rng), random_pairs(64, -2.0, 1.0, rng), adam);
  EXPECT_GT(accuracy(d, random_pairs(500, 2.0, 1.0, rng), random_pairs(500, -2.0, 1.0, rng)), 0.95);
}

TEST(Discriminator, IndistinguishableBatchesConvergeToHalf) {
  auto rng = make_rng(4);
  auto d = make_discriminator(3, {16}, rng);
  auto adam = nn::make_adam(static_cast<Eigen::Index>(d.net.parameter_count()), {1e-3});
  const auto same = random_pairs(128, 0.0, 1.0, rng);
  for (int s = 0; s < 1500; ++s) discriminator_update(d, same, same, adam);
  const VectorXd l = logits(d, same);
  for (Eigen::Index i = 0; i < l.size(); ++i) EXPECT_NEAR(nn::sigmoid(l(i)), 0.5, 0.02);
  // held out, same distribution on both sides: per-side BCE near ln 2
  for (int s = 0; s < 1000; ++s) discriminator_update(d, random_pairs(64, 0.0, 1.0, rng), random_pairs(64, 0.0, 1.0, rng), adam);
  const double bce = discriminator_loss(d, random_pairs(2000, 0.0, 1.0, rng), random_pairs(2000, 0.0, 1.0, rng), nullptr);
  EXPECT_NEAR(bce / 2.0, std::log(2.0), 0.05);
}

TEST(Discriminator, GradientMatchesFiniteDifferences) {
  auto rng = make_rng(5);
  const auto base = make_discriminator(3, {6, 5}, rng);
  const auto e = random_pairs(7, 1.0, 1.0, rng), p = random_pairs(5, -1.0, 1.0, rng);
  const nn::LossFn loss = [&](const VectorXd& params, VectorXd* grad) {
    auto d = base;
    nn::unflatten(d.net, params);
    return discriminator_loss(d, e, p, grad);
  };
  EXPECT_LT(nn::grad_check(loss, nn::flatten(base.net)), 1e-4);
}

TEST(Discriminator, UpdateDescendsAndRejectsBadBatches) {
  auto rng = make_rng(6);
  auto d = make_discriminator(3, {8}, rng);
  auto adam = nn::make_adam(0, {1e-2});  // resized on first use
  const auto e = random_pairs(32, 1.0, 0.2, rng), p = random_pairs(32, -1.0, 0.2, rng);
  const double first = discriminator_update(d, e, p, adam);
  for (int s = 0; s < 20; ++s) discriminator_update(d, e, p, adam);
  EXPECT_LT(discriminator_loss(d, e, p, nullptr), first);
  PairBatch empty{MatrixXd(3, 0), MatrixXd(2, 0)};
  EXPECT_THROW(discriminator_update(d, e, empty, adam), EmptyBatch);
  PairBatch wide{MatrixXd::Zero(4, 2), MatrixXd::Zero(2, 2)};
  EXPECT_THROW(discriminator_update(d, e, wide, adam), ShapeMismatch);
}

TEST(SurrogateReward, ClosedFormsAndClamp) {
  EXPECT_NEAR(surrogate_reward_from_logit(0.0), 0.6931, 1e-4);
  EXPECT_NEAR(surrogate_reward_from_logit(0.0), std::log(2.0), 1e-15);
  EXPECT_LT(surrogate_reward_from_logit(-40.0), 1e-15);
  EXPECT_GE(surrogate_reward_from_logit(-1e300), 0.0);
  const double near_one = std::log((1.0 - 1e-12) / 1e-12);
  EXPECT_EQ(surrogate_reward_from_logit(near_one), 20.0);
  EXPECT_EQ(surrogate_reward_from_logit(1e300), 20.0);
  const auto d = zero_discriminator();
  EXPECT_NEAR(surrogate_reward(d, VectorXd::Zero(3), {1.0, 0.0}), std::log(2.0), 1e-15);
}

TEST(SurrogateReward, IncreasingAndBounded) {
  double prev = -1.0;
  for (double l = -30.0; l <= 19.5; l += 0.25) {
    const double r = surrogate_reward_from_logit(l);
    EXPECT_GT(r, prev);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, kMaxReward);
    prev = r;
  }
}

Transition tr(double reward, double value, bool done = false, bool truncated = false, double bootstrap = 0.0) {
  Transition t;
  t.reward = reward;
  t.value_estimate = value;
  t.done = done;
  t.truncated = truncated;
  t.bootstrap_value = bootstrap;
  return t;
}

TEST(Gae, ClosedForms) {
  const auto one = compute_gae({tr(2.5, 0.75, true)}, 0.99, 0.95);
  EXPECT_DOUBLE_EQ(one.advantages(0), 2.5 - 0.75);
  EXPECT_DOUBLE_EQ(one.returns(0), 2.5);
  const auto zero = compute_gae(std::vector<Transition>(6, tr(0.0, 0.0)), 0.99, 0.95);
  EXPECT_TRUE(zero.advantages.isZero(0.0));
  EXPECT_THROW(compute_gae({}, 0.99, 0.95), EmptyBatch);
}

// A_t = sum_k (gamma lambda)^k delta_{t+k} within the episode, summed directly.
double brute_advantage(const std::vector<Transition>& ts, std::size_t t, double g, double lam) {
  double a = 0.0, w = 1.0;
  for (std::size_t k = t; k < ts.size(); ++k) {
    const bool last = ts[k].done || ts[k].truncated || k + 1 == ts.size();
    const double next = ts[k].done ? 0.0 : (last ? ts[k].bootstrap_value : ts[k + 1].value_estimate);
    a += w * (ts[k].reward + g * next - ts[k].value_estimate);
    if (last) break;
    w *= g * lam;
  }
  return a;
}

TEST(Gae, MatchesDirectSumAcrossEpisodes) {
  auto rng = make_rng(8);
  std::vector<Transition> ts;
  for (int i = 0; i < 200; ++i) {
    const double u = uniform(rng, 0.0, 1.0);
    ts.push_back(tr(uniform(rng, -2.0, 2.0), uniform(rng, -1.0, 1.0), u < 0.05, u > 0.95, uniform(rng, -1.0, 1.0)));
  }
  ts.back().bootstrap_value = 0.4;
  const auto g = compute_gae(ts, 0.97, 0.9);
  for (std::size_t t = 0; t < ts.size(); ++t) {
    EXPECT_NEAR(g.advantages(static_cast<Eigen::Index>(t)), brute_advantage(ts, t, 0.97, 0.9), 1e-10);
    EXPECT_NEAR(g.returns(static_cast<Eigen::Index>(t)), g.advantages(static_cast<Eigen::Index>(t)) + ts[t].value_estimate,
                1e-12);
  }
  EXPECT_NEAR(g.normalized.mean(), 0.0, 1e-12);
  EXPECT_NEAR(std::sqrt(g.normalized.array().square().mean()), 1.0, 1e-6);
}

TEST(Ppo, ClipArithmetic) {
  EXPECT_DOUBLE_EQ(ppo_clip_objective(1.5, 1.0, 0.2), 1.2);
  EXPECT_DOUBLE_EQ(ppo_clip_objective(0.5, -1.0, 0.2), -0.8);
  EXPECT_DOUBLE_EQ(ppo_clip_objective(0.5, 1.0, 0.2), 0.5);
  EXPECT_DOUBLE_EQ(ppo_clip_objective(1.5, -1.0, 0.2), -1.5);
}

bc::Policy gaussian_policy(int width, double log_std, std::uint64_t seed = 1) {
  auto rng = make_rng(seed);
  return bc::make_policy(bc::PolicyKind::gaussian, width, {8}, rng, 1, 0, log_std);
}

TEST(Entropy, ClosedForms) {
  const MatrixXd obs = MatrixXd::Random(3, 5);
  const double unit = entropy(gaussian_policy(3, 0.0), obs);
  EXPECT_NEAR(unit, 2.83788, 1e-5);
  EXPECT_NEAR(unit, 2.0 * 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e), 1e-14);
  EXPECT_NEAR(entropy(gaussian_policy(3, std::log(2.0)), obs) - unit, 2.0 * std::log(2.0), 1e-12);
  auto rng = make_rng(1);
  EXPECT_THROW(entropy(bc::make_policy(bc::PolicyKind::ffn, 3, {8}, rng), obs), InvalidConfig);
}

TEST(Entropy, GradientMatchesFiniteDifferences) {
  auto p = gaussian_policy(3, 0.0);
  const MatrixXd obs = MatrixXd::Random(3, 4);
  const nn::LossFn h = [&](const VectorXd& log_std, VectorXd* grad) {
    auto q = p;
    q.log_std = log_std;
    if (grad) *grad = VectorXd::Ones(log_std.size());  // dH / d log sigma_d
    return entropy(q, obs);
  };
  EXPECT_LT(nn::grad_check(h, VectorXd::LinSpaced(2, -0.7, 0.3)), 1e-4);
}

TEST(Ppo, PolicyLossGradientMatchesFiniteDifferences) {
  auto rng = make_rng(12);
  auto base = gaussian_policy(3, std::log(0.7), 4);
  const int b = 6;
  const MatrixXd x = MatrixXd::Random(3, b), a = MatrixXd::Random(2, b);
  VectorXd adv(b), olp(b);
  for (int k = 0; k < b; ++k) {
    adv(k) = standard_normal(rng);
    // old log-probs near the current ones keep ratios off the clip kinks
    olp(k) = gaussian_log_prob(nn::forward_one(base.backbone, x.col(k)), base.log_std, a.col(k)) +
             0.05 * standard_normal(rng);
  }
  PpoHyper h;
  h.clip = 0.5;
  const auto nb = static_cast<Eigen::Index>(base.backbone.parameter_count());
  const nn::LossFn loss = [&](const VectorXd& params, VectorXd* grad) {
    auto q = base;
    nn::unflatten(q.backbone, params.head(nb));
    q.log_std = params.tail(2);
    return ppo_policy_loss(q, x, a, adv, olp, h, grad);
  };
  VectorXd params(nb + 2);
  params << nn::flatten(base.backbone), base.log_std;
  EXPECT_LT(nn::grad_check(loss, params), 1e-4);

  bc::fit_input_standardization(base, 0.2 * x, 0.05);
  EXPECT_LT(nn::grad_check(loss, params), 1e-4);
}

TEST(Ppo, GaussianLogProbAgreesWithDensity) {
  VectorXd mean(2), ls(2), a(2);
  mean << 0.3, -1.0;
  ls << std::log(0.5), std::log(2.0);
  a << 0.8, 0.5;
  double expected = 0.0;
  for (int d = 0; d < 2; ++d) {
    const double s = std::exp(ls(d)), z = (a(d) - mean(d)) / s;
    expected += std::log(std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi)));
  }
  EXPECT_NEAR(gaussian_log_prob(mean, ls, a), expected, 1e-12);
}

TEST(Ppo, UpdateReportsClippedRatiosWithinBounds) {
  auto env = BanditEnv();
  auto p = gaussian_policy(1, std::log(0.5));
  PpoHyper h;
  h.policy_lr = 1e-2;
  auto opt = make_ppo_optimizer(p, h);
  auto rng = make_rng(9);
  for (int it = 0; it < 5; ++it) {
    std::vector<Transition> ts;
    for (int i = 0; i < 128; ++i) {
      Rng r2 = rng;
      const auto s = act(p, env.reset(r2), rng);
      Transition t;
      t.observation = VectorXd::Ones(1);
      t.action = s.action;
      t.applied = s.action;
      t.log_prob = s.log_prob;
      t.value_estimate = s.value;
      t.reward = env.step(bc::to_action(s.action)).reward;
      t.done = true;
      ts.push_back(t);
    }
    const auto st = ppo_update(p, ts, h, opt, rng);
    EXPECT_GE(st.clipped_ratio_min, 1.0 - h.clip - 1e-12);
    EXPECT_LE(st.clipped_ratio_max, 1.0 + h.clip + 1e-12);
    EXPECT_TRUE(std::isfinite(st.value_loss));
  }
  auto ffn = bc::make_policy(bc::PolicyKind::ffn, 1, {4}, rng);
  EXPECT_THROW(ppo_update(ffn, {tr(0, 0, true)}, h, opt, rng), InvalidConfig);
  PpoHyper bad;
  bad.clip = 1.0;
  EXPECT_THROW(bad.check(), InvalidConfig);
}

TEST(Ppo, BanditConvergesToZeroAction) {
  GailConfig cfg;
  cfg.seed = 3;
  cfg.hidden = {16};
  cfg.rollout.steps_per_iter = 64;
  cfg.budget = 64 * 500;  // 500 updates
  cfg.ppo.policy_lr = 3e-3;
  const auto [policy, report] =
      ppo_train([](std::uint64_t) { return std::make_unique<BanditEnv>(); }, cfg);
  ASSERT_EQ(report.rows.size(), 500u);
  auto rng = make_rng(10);
  double mean_abs = 0.0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const auto a = policy.bounds.clamp(bc::to_action(act(policy, VectorXd::Ones(1), rng).action));
    mean_abs += 0.5 * (std::abs(a.a_long) + std::abs(a.a_lat)) / n;
  }
  EXPECT_LT(mean_abs, 0.1);
  EXPECT_GT(report.rows.back()[1], report.rows.front()[1]);
}

TEST(NegativeBuffer, FifoWithinCapacity) {
  NegativeBuffer b(3);
  for (int i = 0; i < 5; ++i) b.push(VectorXd::Constant(1, i), VectorXd::Zero(2));
  EXPECT_EQ(b.size(), 3u);
  EXPECT_EQ(b.inserted(), 5u);
  EXPECT_EQ(b.at(0).first(0), 2.0);
  EXPECT_EQ(b.at(2).first(0), 4.0);
  NegativeBuffer none(0);
  none.push(VectorXd::Zero(1), VectorXd::Zero(2));
  EXPECT_TRUE(none.empty());
}

GanConfig small_gan(std::uint64_t seed) {
  GanConfig g;
  g.seed = seed;
  g.steps = 3000;
  g.hidden = {32, 32};
  return g;
}

TEST(Gan, ConstantDemosAreMatched) {
  const auto demos = constant_demos(1000, 1.5, -0.5, 1);
  const auto r = gan_train(demos, small_gan(1));
  auto rng = make_rng(12);
  for (int i = 0; i < 200; ++i) {
    const auto a = bc::predict(r.generator, demos[static_cast<std::size_t>(i)].observation, bc::ActionMode::sample, &rng);
    EXPECT_NEAR(a.a_long, 1.5, 0.2);
    EXPECT_NEAR(a.a_lat, -0.5, 0.2);
  }
}

TEST(Gan, AccuracyDriftsDownAndRunsAreDeterministic) {
  // expert action depends on the state plus noise, offset from where an
  // untrained generator starts
  auto demos = constant_demos(2000, 0.0, 0.0, 2);
  auto rng = make_rng(13);
  for (auto& d : demos)
    d.action = {2.0 + d.observation(0) + 0.3 * standard_normal(rng), 0.5 * d.observation(1) - 0.5};
  const auto a = gan_train(demos, small_gan(4));
  const auto b = gan_train(demos, small_gan(4));
  EXPECT_EQ(a.report.to_csv(), b.report.to_csv());
  ASSERT_GE(a.report.rows.size(), 2u);
  EXPECT_LT(a.report.last("disc_accuracy"), a.report.rows.front()[3]);
  EXPECT_EQ(a.report.columns, (std::vector<std::string>{"step", "disc_loss", "gen_loss", "disc_accuracy"}));
}

TEST(Gan, Errors) {
  auto cfg = small_gan(1);
  cfg.batch = 2000;
  EXPECT_THROW(gan_train(constant_demos(100, 0, 0, 1), cfg), EmptyDataset);
  cfg = small_gan(1);
  cfg.z_dim = 0;
  EXPECT_THROW(gan_train(constant_demos(100, 0, 0, 1), cfg), InvalidConfig);
}

GailConfig small_gail(std::uint64_t seed, long budget) {
  GailConfig c;
  c.seed = seed;
  c.budget = budget;
  c.hidden = {32};
  c.discriminator_hidden = {32};
  c.rollout.steps_per_iter = 256;
  c.disc_batch = 128;
  c.disc_steps = 5;
  c.ppo.discriminator_lr = 3e-3;
  return c;
}

TEST(Gail, ConstantExpertIsImitated) {
  const auto demos = constant_demos(2000, 1.5, -0.5, 5);
  const auto r = gail_train(toy_factory(), demos, small_gail(5, 256 * 500));
  auto rng = make_rng(14);
  double lon = 0.0, lat = 0.0;
  for (int i = 0; i < 200; ++i) {
    VectorXd o(3);
    for (int k = 0; k < 3; ++k) o(k) = uniform(rng, -1.0, 1.0);
    const auto a = bc::predict(r.policy, o);
    lon += a.a_long / 200;
    lat += a.a_lat / 200;
  }
  EXPECT_NEAR(lon, 1.5, 0.3);
  EXPECT_NEAR(lat, -0.5, 0.3);

  // paired evaluation under the final discriminator
  const Actor trained = [&](const VectorXd& o, Rng&) { return bc::predict(r.policy, o); };
  const Actor random = [](const VectorXd&, Rng& g) {
    return sim::Action{uniform(g, -6.0, 4.0), uniform(g, -2.0, 2.0)};
  };
  const auto st = score_actor(toy_factory(), trained, r.discriminator, 20, 7);
  const auto sr = score_actor(toy_factory(), random, r.discriminator, 20, 7);
  EXPECT_GT(st.mean_surrogate_reward, sr.mean_surrogate_reward);
}

TEST(Gail, DeterministicReportAndColumns) {
  const auto demos = constant_demos(500, 1.0, 0.0, 6);
  auto cfg = small_gail(6, 256 * 4);
  const auto a = gail_train(toy_factory(), demos, cfg);
  const auto b = gail_train(toy_factory(), demos, cfg);
  EXPECT_EQ(a.report.to_csv(), b.report.to_csv());
  EXPECT_EQ(nn::flatten(a.policy.backbone), nn::flatten(b.policy.backbone));
  EXPECT_EQ(a.report.rows.size(), 4u);
  EXPECT_EQ(a.report.columns, (std::vector<std::string>{"iter", "disc_loss", "mean_surrogate_reward", "mean_episode_len",
                                                        "collision_rate", "entropy"}));
  EXPECT_DOUBLE_EQ(a.report.rows[0][3], 16.0);

  cfg.rollout.workers = 3;  // parallel collection is scheduling-independent
  const auto c = gail_train(toy_factory(), demos, cfg);
  const auto d = gail_train(toy_factory(), demos, cfg);
  EXPECT_EQ(c.report.to_csv(), d.report.to_csv());
}

TEST(Gail, StandardizationIsFittedOnExpertObservations) {
  auto demos = constant_demos(400, 1.0, 0.0, 8);
  for (auto& d : demos) d.observation = 4.0 * d.observation + VectorXd::Constant(3, 2.0);
  auto cfg = small_gail(8, 256 * 2);
  cfg.standardize_policy_inputs = true;
  cfg.standardization_floor = 0.5;
  const auto r = gail_train(toy_factory(), demos, cfg);
  MatrixXd obs(3, 400);
  for (int i = 0; i < 400; ++i) obs.col(i) = demos[static_cast<std::size_t>(i)].observation;
  ASSERT_EQ(r.policy.input_shift.size(), 3);
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(r.policy.input_shift(k), obs.row(k).mean(), 1e-12);
    EXPECT_GT(r.policy.input_scale(k), 2.0);
  }
  EXPECT_EQ(gail_train(toy_factory(), demos, small_gail(8, 256 * 2)).policy.input_shift.size(), 0);
}

TEST(Gail, Errors) {
  const auto demos = constant_demos(100, 1.0, 0.0, 6);
  EXPECT_THROW(gail_train(toy_factory(), demos, small_gail(1, 100)), InvalidConfig);
  EXPECT_THROW(gail_train(toy_factory(), {}, small_gail(1, 1000)), EmptyDataset);
  EXPECT_THROW(gail_train(toy_factory(), constant_demos(10, 0, 0, 1, 4), small_gail(1, 1000)), ShapeMismatch);
}

TEST(AirGail, ZeroPenaltyAndFractionReducesToGail) {
  const auto demos = constant_demos(500, 1.0, 0.0, 7);
  const auto cfg = small_gail(7, 256 * 4);
  PenaltyConfig off;
  off.penalty = 0.0;
  off.negative_fraction = 0.0;
  const auto g = gail_train(toy_factory(16, 0.5), demos, cfg);
  const auto a = air_gail_train(toy_factory(16, 0.5), demos, cfg, off);
  EXPECT_EQ(g.report.to_csv(), a.report.to_csv());
  EXPECT_EQ(nn::flatten(g.policy.backbone), nn::flatten(a.policy.backbone));
  EXPECT_EQ(nn::flatten(g.discriminator.net), nn::flatten(a.discriminator.net));
  EXPECT_GT(a.negatives_inserted, 0u);  // buffer fills even when unused
  EXPECT_GT(g.report.rows[0][4], 0.0);

  const auto on = air_gail_train(toy_factory(16, 0.5), demos, cfg);
  EXPECT_NE(on.report.to_csv(), g.report.to_csv());
}

TEST(AirGail, CollisionRewardIsSurrogatePlusPenalty) {
  std::vector<Transition> ts(3);
  ts[1].collision = true;
  ts[0].reward = 5.0;  // env reward is replaced
  VectorXd s(3);
  s << 0.3, 1.7, 0.0;
  label_rewards(ts, s, -10.0);
  EXPECT_EQ(ts[0].reward, 0.3);
  EXPECT_EQ(ts[1].reward, 1.7 + -10.0);
  EXPECT_EQ(ts[2].reward, 0.0);
  EXPECT_THROW(label_rewards(ts, VectorXd::Zero(2), -10.0), ShapeMismatch);
}

TEST(AirGail, HistoryEntersBufferOnCollision) {
  // every step collides at once: each collision adds the colliding pair only
  const auto demos = constant_demos(500, 1.0, 0.0, 8);
  PenaltyConfig pc;
  pc.history = 10;
  const auto r = air_gail_train(toy_factory(16, -1e9), demos, small_gail(8, 256), pc);
  EXPECT_EQ(r.negatives_inserted, 256u);
  EXPECT_DOUBLE_EQ(r.report.rows[0][4], 1.0);
  EXPECT_DOUBLE_EQ(r.report.rows[0][3], 1.0);
  PenaltyConfig bad;
  bad.negative_fraction = 1.5;
  EXPECT_THROW(air_gail_train(toy_factory(), demos, small_gail(8, 256), bad), InvalidConfig);
}

}  // namespace
