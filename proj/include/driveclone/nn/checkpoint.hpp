#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "driveclone/error.hpp"
#include "driveclone/nn/mlp.hpp"
#include "driveclone/text.hpp"

namespace driveclone::nn {

inline constexpr const char* kCheckpointMagic = "DCNN1";

// Named networks and vectors plus free-form metadata. Layout:
//   DCNN1
//   meta <key>=<value>
//   net <name> <layer count>
//   layer <in> <out> <activation>
//   vector <name> <length>
//   params <N>
//   one value per line, networks first then vectors, in declaration order
//   end
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Mlp>> nets;
  std::vector<std::pair<std::string, Eigen::VectorXd>> vectors;

  const Mlp& net(const std::string& name) const {
    for (const auto& [n, m] : nets)
      if (n == name) return m;
    throw CheckpointFormat("no network named '" + name + "'");
  }
  const Eigen::VectorXd& vector(const std::string& name) const {
    for (const auto& [n, v] : vectors)
      if (n == name) return v;
    throw CheckpointFormat("no vector named '" + name + "'");
  }
  bool has_vector(const std::string& name) const {
    for (const auto& [n, v] : vectors)
      if (n == name) return true;
    return false;
  }
  bool has_net(const std::string& name) const {
    for (const auto& [n, m] : nets)
      if (n == name) return true;
    return false;
  }
  std::string meta_at(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw CheckpointFormat("missing meta key '" + key + "'");
    return it->second;
  }
};

inline std::string serialize_checkpoint(const Checkpoint& c) {
  std::string out = std::string(kCheckpointMagic) + '\n';
  for (const auto& [k, v] : c.meta) {
    if (k.find_first_of("= \n") != std::string::npos || v.find('\n') != std::string::npos)
      throw CheckpointFormat("meta entries must be single-line and keys free of '=' and spaces");
    out += "meta " + k + '=' + v + '\n';
  }
  std::size_t total = 0;
  for (const auto& [name, net] : c.nets) {
    out += "net " + name + ' ' + std::to_string(net.layers.size()) + '\n';
    for (const auto& l : net.layers)
      out += "layer " + std::to_string(l.in()) + ' ' + std::to_string(l.out()) + ' ' + to_string(l.activation) + '\n';
    total += net.parameter_count();
  }
  for (const auto& [name, v] : c.vectors) {
    out += "vector " + name + ' ' + std::to_string(v.size()) + '\n';
    total += static_cast<std::size_t>(v.size());
  }
  out += "params " + std::to_string(total) + '\n';
  for (const auto& [name, net] : c.nets) {
    const auto p = flatten(net);
    for (Eigen::Index i = 0; i < p.size(); ++i) out += text::exact(p(i)) + '\n';
  }
  for (const auto& [name, v] : c.vectors)
    for (Eigen::Index i = 0; i < v.size(); ++i) out += text::exact(v(i)) + '\n';
  out += "end\n";
  return out;
}

inline Checkpoint parse_checkpoint(std::string_view body) {
  const auto ls = text::lines(body);
  std::size_t i = 0;
  auto fail = [&](const std::string& why) -> CheckpointFormat {
    return CheckpointFormat("line " + std::to_string(i + 1) + ": " + why);
  };
  auto words = [](const std::string& line) {
    std::vector<std::string> w;
    for (auto part : text::split(line, ' '))
      if (!part.empty()) w.emplace_back(part);
    return w;
  };
  auto count = [&](const std::string& s) {
    auto n = text::parse_int(s);
    if (!n || *n < 0) throw fail("bad count '" + s + "'");
    return static_cast<std::size_t>(*n);
  };
  if (ls.empty() || ls[0] != kCheckpointMagic) throw CheckpointFormat("missing DCNN1 magic");
  Checkpoint c;
  for (i = 1; i < ls.size(); ++i) {
    const auto& line = ls[i];
    if (line.rfind("meta ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw fail("meta without '='");
      c.meta[line.substr(5, eq - 5)] = line.substr(eq + 1);
      continue;
    }
    const auto w = words(line);
    if (w.empty()) throw fail("blank header line");
    if (w[0] == "net" && w.size() == 3) {
      const auto n_layers = count(w[2]);
      std::vector<Layer> layers;
      for (std::size_t k = 0; k < n_layers; ++k) {
        ++i;
        if (i >= ls.size()) throw fail("truncated layer list");
        const auto lw = words(ls[i]);
        if (lw.size() != 4 || lw[0] != "layer") throw fail("expected 'layer <in> <out> <activation>'");
        Layer l;
        const auto in = count(lw[1]), out = count(lw[2]);
        l.weights = MatrixXd::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
        l.biases = VectorXd::Zero(static_cast<Eigen::Index>(out));
        try {
          l.activation = parse_activation(lw[3]);
        } catch (const InvalidConfig& e) {
          throw fail(e.what());
        }
        layers.push_back(std::move(l));
      }
      try {
        c.nets.emplace_back(w[1], Mlp(std::move(layers)));
      } catch (const ShapeMismatch& e) {
        throw fail(e.what());
      }
    } else if (w[0] == "vector" && w.size() == 3) {
      c.vectors.emplace_back(w[1], VectorXd::Zero(static_cast<Eigen::Index>(count(w[2]))));
    } else if (w[0] == "params" && w.size() == 2) {
      break;
    } else {
      throw fail("unexpected '" + line + "'");
    }
  }
  if (i >= ls.size()) throw CheckpointFormat("missing params section");
  const auto total = count(words(ls[i])[1]);
  std::size_t expected = 0;
  for (const auto& [n, net] : c.nets) expected += net.parameter_count();
  for (const auto& [n, v] : c.vectors) expected += static_cast<std::size_t>(v.size());
  if (total != expected) throw fail("params " + std::to_string(total) + " but shapes need " + std::to_string(expected));
  if (ls.size() < i + 1 + total + 1) throw CheckpointFormat("truncated parameter list");
  VectorXd flat(static_cast<Eigen::Index>(total));
  for (std::size_t k = 0; k < total; ++k) {
    const auto v = text::parse_double(ls[i + 1 + k]);
    if (!v) throw CheckpointFormat("line " + std::to_string(i + 2 + k) + ": bad number");
    flat(static_cast<Eigen::Index>(k)) = *v;
  }
  if (ls[i + 1 + total] != "end") throw CheckpointFormat("missing end marker");
  Eigen::Index o = 0;
  for (auto& [n, net] : c.nets) {
    const auto sz = static_cast<Eigen::Index>(net.parameter_count());
    unflatten(net, flat.segment(o, sz));
    o += sz;
  }
  for (auto& [n, v] : c.vectors) {
    v = flat.segment(o, v.size());
    o += v.size();
  }
  return c;
}

}  // namespace driveclone::nn
