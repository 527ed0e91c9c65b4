#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "driveclone/error.hpp"
#include "driveclone/rng.hpp"

namespace driveclone::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { tanh, relu, identity };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
  }
  return "identity";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw InvalidConfig("unknown activation '" + s + "'");
}

struct Layer {
  MatrixXd weights;  // out x in
  VectorXd biases;
  Activation activation = Activation::identity;

  int in() const { return static_cast<int>(weights.cols()); }
  int out() const { return static_cast<int>(weights.rows()); }
};

inline void apply_activation(Activation a, MatrixXd& z) {
  switch (a) {
    case Activation::tanh: z = z.array().tanh().matrix(); break;
    case Activation::relu: z = z.array().max(0.0).matrix(); break;
    case Activation::identity: break;
  }
}

// Derivative expressed through the activation output y.
inline MatrixXd activation_slope(Activation a, const MatrixXd& y) {
  switch (a) {
    case Activation::tanh: return (1.0 - y.array().square()).matrix();
    case Activation::relu: return (y.array() > 0.0).cast<double>().matrix();
    case Activation::identity: break;
  }
  return MatrixXd::Ones(y.rows(), y.cols());
}

class Mlp {
 public:
  std::vector<Layer> layers;

  Mlp() = default;
  explicit Mlp(std::vector<Layer> ls) : layers(std::move(ls)) { check(); }

  // widths = {in, h1, ..., out}; uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init.
  static Mlp random(const std::vector<int>& widths, Activation hidden, Activation output, Rng& rng) {
    if (widths.size() < 2) throw InvalidConfig("an MLP needs at least input and output widths");
    std::vector<Layer> ls;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      if (widths[i] < 1 || widths[i + 1] < 1) throw InvalidConfig("layer widths must be positive");
      Layer l;
      l.weights.resize(widths[i + 1], widths[i]);
      l.biases.resize(widths[i + 1]);
      const double bound = 1.0 / std::sqrt(static_cast<double>(widths[i]));
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) l.weights(r, c) = uniform(rng, -bound, bound);
      for (Eigen::Index r = 0; r < l.biases.size(); ++r) l.biases(r) = uniform(rng, -bound, bound);
      l.activation = i + 2 == widths.size() ? output : hidden;
      ls.push_back(std::move(l));
    }
    return Mlp(std::move(ls));
  }

  int input_width() const { return layers.empty() ? 0 : layers.front().in(); }
  int output_width() const { return layers.empty() ? 0 : layers.back().out(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
    return n;
  }

  void check() const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].biases.size() != layers[i].weights.rows()) throw ShapeMismatch("bias width, layer " + std::to_string(i));
      if (i > 0 && layers[i].in() != layers[i - 1].out()) throw ShapeMismatch("layer " + std::to_string(i) + " input");
    }
  }

  bool finite() const {
    for (const auto& l : layers)
      if (!l.weights.allFinite() || !l.biases.allFinite()) return false;
    return true;
  }
};

// activations[0] is the input batch, activations[i + 1] the output of layer i.
struct ForwardCache {
  std::vector<MatrixXd> activations;
  const MatrixXd& output() const { return activations.back(); }
};

struct Gradients {
  std::vector<MatrixXd> weights;
  std::vector<VectorXd> biases;
  MatrixXd input;  // d loss / d input, one column per sample
};

// Batch forward; samples are columns.
inline MatrixXd forward(const Mlp& net, const MatrixXd& input, ForwardCache* cache = nullptr) {
  if (net.layers.empty()) throw ShapeMismatch("empty network");
  if (input.rows() != net.input_width())
    throw ShapeMismatch("input width " + std::to_string(input.rows()) + ", expected " + std::to_string(net.input_width()));
  if (cache) {
    cache->activations.clear();
    cache->activations.reserve(net.layers.size() + 1);
    cache->activations.push_back(input);
  }
  MatrixXd x = input;
  for (const auto& l : net.layers) {
    MatrixXd z = l.weights * x;
    z.colwise() += l.biases;
    apply_activation(l.activation, z);
    x = std::move(z);
    if (cache) cache->activations.push_back(x);
  }
  return x;
}

// Single-sample convenience.
inline VectorXd forward_one(const Mlp& net, const VectorXd& input) {
  return forward(net, MatrixXd(input), nullptr).col(0);
}

// Gradients summed over the batch columns.
inline Gradients backward(const Mlp& net, const ForwardCache& cache, const MatrixXd& grad_output) {
  if (cache.activations.size() != net.layers.size() + 1) throw ShapeMismatch("cache does not match network");
  const auto& out = cache.output();
  if (grad_output.rows() != out.rows() || grad_output.cols() != out.cols()) throw ShapeMismatch("grad_output shape");
  Gradients g;
  g.weights.resize(net.layers.size());
  g.biases.resize(net.layers.size());
  MatrixXd delta = grad_output;
  for (std::size_t k = net.layers.size(); k-- > 0;) {
    const auto& l = net.layers[k];
    if (l.activation != Activation::identity)
      delta = (delta.array() * activation_slope(l.activation, cache.activations[k + 1]).array()).matrix();
    g.weights[k] = delta * cache.activations[k].transpose();
    g.biases[k] = delta.rowwise().sum();
    delta = l.weights.transpose() * delta;
  }
  g.input = std::move(delta);
  return g;
}

// Flat parameter layout: per layer, weights column-major then biases.
inline VectorXd flatten(const Mlp& net) {
  VectorXd p(static_cast<Eigen::Index>(net.parameter_count()));
  Eigen::Index o = 0;
  for (const auto& l : net.layers) {
    p.segment(o, l.weights.size()) = l.weights.reshaped();
    o += l.weights.size();
    p.segment(o, l.biases.size()) = l.biases;
    o += l.biases.size();
  }
  return p;
}

inline VectorXd flatten(const Gradients& g) {
  Eigen::Index n = 0;
  for (std::size_t k = 0; k < g.weights.size(); ++k) n += g.weights[k].size() + g.biases[k].size();
  VectorXd p(n);
  Eigen::Index o = 0;
  for (std::size_t k = 0; k < g.weights.size(); ++k) {
    p.segment(o, g.weights[k].size()) = g.weights[k].reshaped();
    o += g.weights[k].size();
    p.segment(o, g.biases[k].size()) = g.biases[k];
    o += g.biases[k].size();
  }
  return p;
}

inline void unflatten(Mlp& net, const VectorXd& p) {
  if (static_cast<std::size_t>(p.size()) != net.parameter_count())
    throw ShapeMismatch("parameter vector of " + std::to_string(p.size()) + ", network has " +
                        std::to_string(net.parameter_count()));
  Eigen::Index o = 0;
  for (auto& l : net.layers) {
    l.weights.reshaped() = p.segment(o, l.weights.size());
    o += l.weights.size();
    l.biases = p.segment(o, l.biases.size());
    o += l.biases.size();
  }
}

}  // namespace driveclone::nn
