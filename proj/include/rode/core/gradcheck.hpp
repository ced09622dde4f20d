#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "rode/core/tensor.hpp"

namespace rode {

/// Compares reverse-mode gradients of `loss_fn` (a scalar function of the
/// given parameters) against central finite differences with step h.
/// Returns the worst relative error max|ad - fd| / max(1, |fd|) over all
/// parameter entries, or +infinity if any value involved is non-finite.
inline double finite_diff_check(const std::function<Tensor()>& loss_fn,
                                std::vector<Tensor> params, double h = 1e-5) {
  for (Tensor& p : params) p.zero_grad();
  Tensor loss = loss_fn();
  loss.backward();
  if (!std::isfinite(loss.value())) return std::numeric_limits<double>::infinity();

  std::vector<std::vector<double>> analytic;
  for (const Tensor& p : params) {
    analytic.emplace_back(p.grad(), p.grad() + p.numel());
  }

  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double orig = p.at(i);
      p.at(i) = orig + h;
      const double up = loss_fn().value();
      p.at(i) = orig - h;
      const double dn = loss_fn().value();
      p.at(i) = orig;
      const double fd = (up - dn) / (2.0 * h);
      const double ad = analytic[k][i];
      if (!std::isfinite(fd) || !std::isfinite(ad))
        return std::numeric_limits<double>::infinity();
      const double rel = std::fabs(ad - fd) / std::max(1.0, std::fabs(fd));
      if (rel > worst) worst = rel;
    }
  }
  return worst;
}

}  // namespace rode
