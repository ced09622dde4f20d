#pragma once

#include <string>
#include <vector>

#include "rode/core/rng.hpp"
#include "rode/core/tensor.hpp"
#include "rode/nets/layers.hpp"

namespace rode {

/// State-conditioned monotonic mixing network. Per-agent utilities q (one row
/// per sample) are combined as
///
///   Q_tot = w2(s)^T ReLU(W1(s) q + b1(s)) + b2(s)
///
/// where W1 and w2 come out of an absolute-value map, making every entry
/// nonnegative and Q_tot nondecreasing in each q_i by construction. W1 and w2
/// are emitted by single linear hypernetworks of the state, b1 by a linear
/// map, and b2 by a two-layer ReLU network.
class MonotonicMixer {
 public:
  MonotonicMixer() = default;
  MonotonicMixer(int n_agents, int state_dim, Rng& rng, int embed_dim = 32)
      : hyper_w1_(state_dim, embed_dim * n_agents, rng),
        hyper_b1_(state_dim, embed_dim, rng),
        hyper_w2_(state_dim, embed_dim, rng),
        hyper_b2_({state_dim, embed_dim, 1}, rng),
        n_agents_(n_agents),
        embed_dim_(embed_dim) {}

  int n_agents() const { return n_agents_; }

  /// q [B, n_agents], state [B, state_dim] -> [B, 1].
  Tensor forward(const Tensor& q, const Tensor& state) const {
    if (q.ndim() != 2 || q.cols() != n_agents_)
      throw ShapeError("MonotonicMixer: expected q with " + std::to_string(n_agents_) +
                       " columns");
    if (state.ndim() != 2 || state.rows() != q.rows())
      throw ShapeError("MonotonicMixer: state/q batch mismatch");
    Tensor w1 = absval(hyper_w1_.forward(state));           // [B, embed*n]
    Tensor b1 = hyper_b1_.forward(state);                   // [B, embed]
    Tensor hidden = relu(add(rowwise_matvec(w1, q, embed_dim_), b1));
    Tensor w2 = absval(hyper_w2_.forward(state));           // [B, embed]
    Tensor b2 = hyper_b2_.forward(state);                   // [B, 1]
    return add(sum_cols(mul(hidden, w2)), b2);
  }

  NamedParams named_params() const {
    NamedParams p;
    append_named(p, "hw1", hyper_w1_.named_params());
    append_named(p, "hb1", hyper_b1_.named_params());
    append_named(p, "hw2", hyper_w2_.named_params());
    append_named(p, "hb2", hyper_b2_.named_params());
    return p;
  }

 private:
  Linear hyper_w1_;
  Linear hyper_b1_;
  Linear hyper_w2_;
  Mlp hyper_b2_;
  int n_agents_ = 0;
  int embed_dim_ = 32;
};

}  // namespace rode
