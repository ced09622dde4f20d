#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "rode/core/tensor.hpp"

namespace rode {

/// RMSProp over a fixed parameter list: E <- a*E + (1-a)*g^2,
/// p <- p - lr*g / (sqrt(E) + 1e-5). No momentum, no weight decay.
/// Gradients are optionally clipped by global norm before the update and are
/// always zeroed afterward.
class Rmsprop {
 public:
  Rmsprop(std::vector<Tensor> params, double lr = 5e-4, double alpha = 0.99,
          double grad_clip_norm = 10.0)
      : params_(std::move(params)), lr_(lr), alpha_(alpha), clip_(grad_clip_norm) {
    for (const Tensor& p : params_) {
      if (!p.requires_grad())
        throw std::runtime_error("Rmsprop: parameter does not track gradients");
      sq_avg_.emplace_back(p.numel(), 0.0);
    }
  }

  /// Root of the summed squared gradients across all parameters.
  double grad_global_norm() const {
    double sq = 0.0;
    for (const Tensor& p : params_) {
      const double* g = p.grad();
      for (std::size_t i = 0; i < p.numel(); ++i) sq += g[i] * g[i];
    }
    return std::sqrt(sq);
  }

  void step() {
    double scale = 1.0;
    if (clip_ > 0.0) {
      const double norm = grad_global_norm();
      if (norm > clip_) scale = clip_ / norm;
    }
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& p = params_[k];
      std::vector<double>& E = sq_avg_[k];
      double* w = p.data();
      double* g = p.grad();
      for (std::size_t i = 0; i < p.numel(); ++i) {
        const double gi = g[i] * scale;
        E[i] = alpha_ * E[i] + (1.0 - alpha_) * gi * gi;
        w[i] -= lr_ * gi / (std::sqrt(E[i]) + 1e-5);
        g[i] = 0.0;
      }
    }
  }

  void zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
  }

  const std::vector<Tensor>& params() const { return params_; }
  std::vector<std::vector<double>>& state() { return sq_avg_; }
  double lr() const { return lr_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> sq_avg_;
  double lr_;
  double alpha_;
  double clip_;  // <= 0 disables clipping
};

}  // namespace rode
