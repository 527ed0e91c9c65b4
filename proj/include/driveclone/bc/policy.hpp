#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "driveclone/error.hpp"
#include "driveclone/mdn/mixture.hpp"
#include "driveclone/nn/checkpoint.hpp"
#include "driveclone/nn/mlp.hpp"
#include "driveclone/rng.hpp"
#include "driveclone/sim/kinematics.hpp"
#include "driveclone/text.hpp"

namespace driveclone::bc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr int kActionDim = 2;

enum class PolicyKind { ffn, mdn, gaussian, gan };
enum class ActionMode { deterministic, sample };

inline std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::ffn: return "ffn";
    case PolicyKind::mdn: return "mdn";
    case PolicyKind::gaussian: return "gaussian";
    case PolicyKind::gan: return "gan";
  }
  return "ffn";
}

inline PolicyKind parse_policy_kind(const std::string& s) {
  if (s == "ffn") return PolicyKind::ffn;
  if (s == "mdn") return PolicyKind::mdn;
  if (s == "gaussian") return PolicyKind::gaussian;
  if (s == "gan") return PolicyKind::gan;
  throw InvalidConfig("unknown policy kind '" + s + "'");
}

// Observation -> (a_long, a_lat) in m/s^2.
//   ffn:      backbone output is the action
//   mdn:      backbone output is a raw mixture head of M components
//   gaussian: backbone output is the mean, exp(log_std) the state-free spread;
//             `value` is the critic used by policy-gradient training
//   gan:      backbone maps [observation; z] to the action, z ~ N(0, I)
struct Policy {
  PolicyKind kind = PolicyKind::ffn;
  nn::Mlp backbone;
  int components = 1;
  VectorXd log_std;
  nn::Mlp value;
  int noise_dim = 0;
  sim::ActionBounds bounds;
  int observation_width = 0;
  // optional per-feature standardization (obs - shift) / scale; empty means identity
  VectorXd input_shift;
  VectorXd input_scale;

  int backbone_input_width() const { return observation_width + (kind == PolicyKind::gan ? noise_dim : 0); }

  int head_width() const {
    return kind == PolicyKind::mdn ? mdn::raw_width(components, kActionDim) : kActionDim;
  }

  void check() const {
    backbone.check();
    if (backbone.input_width() != backbone_input_width()) throw ShapeMismatch("backbone input width");
    if (backbone.output_width() != head_width()) throw ShapeMismatch("backbone output width for " + to_string(kind));
    if (kind == PolicyKind::gaussian) {
      if (log_std.size() != kActionDim) throw ShapeMismatch("log_std width");
      if (value.input_width() != observation_width || value.output_width() != 1) throw ShapeMismatch("value network");
    }
    if (kind == PolicyKind::gan && noise_dim < 1) throw ShapeMismatch("generator needs noise_dim >= 1");
    if (input_shift.size() != input_scale.size() || (input_shift.size() && input_shift.size() != observation_width))
      throw ShapeMismatch("input standardization width");
    if (input_scale.size() && !(input_scale.array() > 0.0).all()) throw InvalidConfig("input scale must be positive");
  }
};

inline VectorXd policy_input(const Policy& p, const VectorXd& obs) {
  if (!p.input_shift.size()) return obs;
  return ((obs - p.input_shift).array() / p.input_scale.array()).matrix();
}

// Columns are observations.
inline MatrixXd policy_input(const Policy& p, const MatrixXd& obs) {
  if (!p.input_shift.size()) return obs;
  return ((obs.colwise() - p.input_shift).array().colwise() / p.input_scale.array()).matrix();
}

// Shift and scale from the mean and standard deviation of `obs` columns; scale is at least `floor`.
inline void fit_input_standardization(Policy& p, const MatrixXd& obs, double floor) {
  if (obs.rows() != p.observation_width || obs.cols() < 1) throw ShapeMismatch("standardization data width");
  if (!(floor > 0.0)) throw InvalidConfig("standardization floor must be positive");
  p.input_shift = obs.rowwise().mean();
  const MatrixXd c = obs.colwise() - p.input_shift;
  p.input_scale = (c.array().square().rowwise().sum() / static_cast<double>(obs.cols())).sqrt().cwiseMax(floor).matrix();
}

inline std::vector<int> layer_widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

inline Policy make_policy(PolicyKind kind, int observation_width, const std::vector<int>& hidden, Rng& rng,
                          int components = 1, int noise_dim = 0, double initial_log_std = std::log(0.5),
                          sim::ActionBounds bounds = {}) {
  Policy p;
  p.kind = kind;
  p.observation_width = observation_width;
  p.components = kind == PolicyKind::mdn ? components : 1;
  p.noise_dim = kind == PolicyKind::gan ? noise_dim : 0;
  p.bounds = bounds;
  if (p.components < 1) throw InvalidConfig("mixture components must be >= 1");
  p.backbone = nn::Mlp::random(layer_widths(p.backbone_input_width(), hidden, p.head_width()), nn::Activation::tanh,
                               nn::Activation::identity, rng);
  if (kind == PolicyKind::gaussian) {
    p.log_std = VectorXd::Constant(kActionDim, initial_log_std);
    p.value = nn::Mlp::random(layer_widths(observation_width, hidden, 1), nn::Activation::tanh,
                              nn::Activation::identity, rng);
  }
  p.check();
  return p;
}

inline sim::Action to_action(const VectorXd& v) { return {v(0), v(1)}; }

inline VectorXd from_action(const sim::Action& a) {
  VectorXd v(kActionDim);
  v << a.a_long, a.a_lat;
  return v;
}

// Network action before clamping. Sampling modes need rng.
inline VectorXd raw_action(const Policy& p, const VectorXd& obs, ActionMode mode, Rng* rng) {
  if (obs.size() != p.observation_width)
    throw ShapeMismatch("observation width " + std::to_string(obs.size()) + ", policy expects " +
                        std::to_string(p.observation_width));
  if (mode == ActionMode::sample && !rng) throw InvalidConfig("sampling needs an rng");
  const VectorXd x = policy_input(p, obs);
  switch (p.kind) {
    case PolicyKind::ffn: return nn::forward_one(p.backbone, x);
    case PolicyKind::mdn: {
      const auto mix = mdn::mdn_head(nn::forward_one(p.backbone, x), p.components, kActionDim);
      return mode == ActionMode::sample ? mdn::mdn_sample(mix, *rng) : mdn::mdn_mode(mix);
    }
    case PolicyKind::gaussian: {
      VectorXd mean = nn::forward_one(p.backbone, x);
      if (mode == ActionMode::sample)
        for (int d = 0; d < kActionDim; ++d) mean(d) += std::exp(p.log_std(d)) * standard_normal(*rng);
      return mean;
    }
    case PolicyKind::gan: {
      VectorXd in = VectorXd::Zero(p.backbone_input_width());
      in.head(p.observation_width) = x;
      if (mode == ActionMode::sample)
        for (int k = 0; k < p.noise_dim; ++k) in(p.observation_width + k) = standard_normal(*rng);
      return nn::forward_one(p.backbone, in);
    }
  }
  throw InvalidConfig("unknown policy kind");
}

inline sim::Action predict(const Policy& p, const VectorXd& obs, ActionMode mode = ActionMode::deterministic,
                           Rng* rng = nullptr) {
  const VectorXd a = raw_action(p, obs, mode, rng);
  sim::Action out = p.bounds.clamp(to_action(a));
  // non-finite network output maps to the nearest safe command
  if (!std::isfinite(out.a_long)) out.a_long = std::clamp(0.0, p.bounds.min_long, p.bounds.max_long);
  if (!std::isfinite(out.a_lat)) out.a_lat = std::clamp(0.0, p.bounds.min_lat, p.bounds.max_lat);
  return out;
}

inline nn::Checkpoint to_checkpoint(const Policy& p, std::map<std::string, std::string> meta = {}) {
  nn::Checkpoint c;
  c.meta = std::move(meta);
  c.meta["kind"] = to_string(p.kind);
  c.meta["components"] = std::to_string(p.components);
  c.meta["noise_dim"] = std::to_string(p.noise_dim);
  c.meta["observation_width"] = std::to_string(p.observation_width);
  c.meta["bounds"] = text::exact(p.bounds.min_long) + ';' + text::exact(p.bounds.max_long) + ';' +
                     text::exact(p.bounds.min_lat) + ';' + text::exact(p.bounds.max_lat);
  c.nets.emplace_back("backbone", p.backbone);
  if (p.kind == PolicyKind::gaussian) {
    c.nets.emplace_back("value", p.value);
    c.vectors.emplace_back("log_std", p.log_std);
  }
  if (p.input_shift.size()) {
    c.vectors.emplace_back("input_shift", p.input_shift);
    c.vectors.emplace_back("input_scale", p.input_scale);
  }
  return c;
}

inline Policy policy_from_checkpoint(const nn::Checkpoint& c) {
  auto integer = [&](const std::string& key) {
    const auto v = text::parse_int(c.meta_at(key));
    if (!v) throw CheckpointFormat("meta '" + key + "' is not an integer");
    return static_cast<int>(*v);
  };
  Policy p;
  try {
    p.kind = parse_policy_kind(c.meta_at("kind"));
  } catch (const InvalidConfig& e) {
    throw CheckpointFormat(e.what());
  }
  p.components = integer("components");
  p.noise_dim = integer("noise_dim");
  p.observation_width = integer("observation_width");
  const auto b = text::split(c.meta_at("bounds"), ';');
  if (b.size() != 4) throw CheckpointFormat("bounds needs four values");
  double v[4];
  for (int i = 0; i < 4; ++i) {
    const auto d = text::parse_double(b[i]);
    if (!d) throw CheckpointFormat("bad bound");
    v[i] = *d;
  }
  p.bounds = {v[0], v[1], v[2], v[3]};
  p.backbone = c.net("backbone");
  if (p.kind == PolicyKind::gaussian) {
    p.value = c.net("value");
    p.log_std = c.vector("log_std");
  }
  if (c.has_vector("input_shift")) {
    p.input_shift = c.vector("input_shift");
    p.input_scale = c.vector("input_scale");
  }
  try {
    p.check();
  } catch (const ShapeMismatch& e) {
    throw CheckpointFormat(e.what());
  }
  return p;
}

}  // namespace driveclone::bc
