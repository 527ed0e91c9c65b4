#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>

#include "driveclone/error.hpp"
#include "driveclone/nn/numerics.hpp"
#include "driveclone/rng.hpp"

namespace driveclone::mdn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kSigmaFloor = 1e-3;

// Diagonal Gaussian mixture; row i of means/scales belongs to component i.
struct MixtureParams {
  VectorXd weights;
  MatrixXd means;
  MatrixXd scales;

  int components() const { return static_cast<int>(weights.size()); }
  int output_dim() const { return static_cast<int>(means.cols()); }
};

// Raw head layout: [logits (M) | means (M*D, component-major) | log scales (M*D)].
inline int raw_width(int components, int output_dim) { return components * (1 + 2 * output_dim); }

inline MixtureParams mdn_head(const VectorXd& raw, int components, int output_dim) {
  if (components < 1 || output_dim < 1) throw ShapeMismatch("mixture needs M >= 1 and output_dim >= 1");
  if (raw.size() != raw_width(components, output_dim))
    throw ShapeMismatch("head width " + std::to_string(raw.size()) + ", expected " +
                        std::to_string(raw_width(components, output_dim)));
  const int m = components, d = output_dim;
  MixtureParams p;
  p.weights = nn::softmax(raw.head(m));
  p.means.resize(m, d);
  p.scales.resize(m, d);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) {
      p.means(i, j) = raw(m + i * d + j);
      p.scales(i, j) = std::exp(raw(m + m * d + i * d + j)) + kSigmaFloor;
    }
  return p;
}

inline bool valid(const MixtureParams& p, double tol = 1e-9) {
  if (p.weights.size() == 0 || std::abs(p.weights.sum() - 1.0) > tol) return false;
  if ((p.weights.array() < 0.0).any()) return false;
  return (p.scales.array() >= kSigmaFloor).all() && p.means.allFinite();
}

// log(alpha_i) + log N(y; mu_i, diag sigma_i^2) for every component.
inline VectorXd component_log_densities(const MixtureParams& p, const VectorXd& y) {
  if (y.size() != p.output_dim()) throw ShapeMismatch("target width differs from mixture output_dim");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  VectorXd out(p.components());
  for (int i = 0; i < p.components(); ++i) {
    double s = std::log(p.weights(i));
    for (int j = 0; j < p.output_dim(); ++j) {
      const double z = (y(j) - p.means(i, j)) / p.scales(i, j);
      s -= half_log_2pi + std::log(p.scales(i, j)) + 0.5 * z * z;
    }
    out(i) = s;
  }
  return out;
}

inline double mdn_log_pdf(const MixtureParams& p, const VectorXd& y) {
  return nn::log_sum_exp(component_log_densities(p, y));
}

inline double mdn_pdf(const MixtureParams& p, const VectorXd& y) { return std::exp(mdn_log_pdf(p, y)); }

inline double mdn_nll(const MixtureParams& p, const VectorXd& y) { return -mdn_log_pdf(p, y); }

// NLL and its gradient with respect to the raw head output.
inline double mdn_nll_grad(const VectorXd& raw, int components, int output_dim, const VectorXd& y, VectorXd* grad) {
  const auto p = mdn_head(raw, components, output_dim);
  const VectorXd logc = component_log_densities(p, y);
  const double lse = nn::log_sum_exp(logc);
  if (grad) {
    const int m = components, d = output_dim;
    grad->setZero(raw.size());
    const VectorXd resp = (logc.array() - lse).exp();
    for (int i = 0; i < m; ++i) {
      (*grad)(i) = p.weights(i) - resp(i);
      for (int j = 0; j < d; ++j) {
        const double s = p.scales(i, j);
        const double r = y(j) - p.means(i, j);
        (*grad)(m + i * d + j) = -resp(i) * r / (s * s);
        // d sigma / d raw = exp(raw) = sigma - floor
        (*grad)(m + m * d + i * d + j) = resp(i) * (1.0 / s - r * r / (s * s * s)) * (s - kSigmaFloor);
      }
    }
  }
  return -lse;
}

inline VectorXd mdn_sample(const MixtureParams& p, Rng& rng) {
  const double u = uniform(rng, 0.0, 1.0);
  int k = p.components() - 1;
  double acc = 0.0;
  for (int i = 0; i < p.components(); ++i) {
    acc += p.weights(i);
    if (u < acc) {
      k = i;
      break;
    }
  }
  while (k > 0 && p.weights(k) <= 0.0) --k;  // never land on a zero-weight tail from rounding
  VectorXd y(p.output_dim());
  for (int j = 0; j < p.output_dim(); ++j) y(j) = p.means(k, j) + p.scales(k, j) * standard_normal(rng);
  return y;
}

inline VectorXd mdn_mode(const MixtureParams& p) {
  int best = 0;
  for (int i = 1; i < p.components(); ++i)
    if (p.weights(i) > p.weights(best)) best = i;
  return p.means.row(best).transpose();
}

}  // namespace driveclone::mdn
