#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "rode/core/rng.hpp"
#include "rode/core/tensor.hpp"

namespace rode {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

inline void append_named(NamedParams& out, const std::string& prefix, const NamedParams& sub) {
  for (const auto& [name, t] : sub) out.emplace_back(prefix + "." + name, t);
}

inline std::vector<Tensor> values_of(const NamedParams& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

/// Copies source parameter values into destination (shapes must agree);
/// used for target-network synchronization.
inline void copy_params(const NamedParams& dst, const NamedParams& src) {
  if (dst.size() != src.size())
    throw std::runtime_error("copy_params: parameter count mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const Tensor& s = src[i].second;
    const Tensor& d = dst[i].second;
    if (s.shape() != d.shape())
      throw std::runtime_error("copy_params: shape mismatch at " + src[i].first);
    std::copy(s.data(), s.data() + s.numel(), const_cast<double*>(d.data()));
  }
}

/// Fills a tensor with U(-bound, bound), bound = 1/sqrt(fan_in).
inline void init_uniform_fanin(Tensor& t, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.numel(); ++i) t.at(i) = rng.uniform(-bound, bound);
}

/// Affine map y = xW + b with W stored [in, out].
class Linear {
 public:
  Linear() = default;
  Linear(int in_dim, int out_dim, Rng& rng, bool bias = true)
      : w_(Tensor::zeros({in_dim, out_dim}, true)),
        has_bias_(bias) {
    init_uniform_fanin(w_, in_dim, rng);
    if (bias) {
      b_ = Tensor::zeros({out_dim}, true);
      init_uniform_fanin(b_, in_dim, rng);
    }
  }

  Tensor forward(const Tensor& x) const {
    Tensor y = matmul(x, w_);
    return has_bias_ ? add_rowvec(y, b_) : y;
  }

  int in_dim() const { return w_.rows(); }
  int out_dim() const { return w_.cols(); }

  NamedParams named_params() const {
    NamedParams p{{"w", w_}};
    if (has_bias_) p.emplace_back("b", b_);
    return p;
  }

 private:
  Tensor w_;
  Tensor b_;
  bool has_bias_ = true;
};

/// Fully connected stack with ReLU between layers and a linear final layer.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<int>& dims, Rng& rng) {
    if (dims.size() < 2) throw std::runtime_error("Mlp: need at least input and output dims");
    for (std::size_t i = 0; i + 1 < dims.size(); ++i)
      layers_.emplace_back(dims[i], dims[i + 1], rng);
  }

  Tensor forward(const Tensor& x) const {
    Tensor h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i].forward(h);
      if (i + 1 < layers_.size()) h = relu(h);
    }
    return h;
  }

  NamedParams named_params() const {
    NamedParams p;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      append_named(p, "fc" + std::to_string(i), layers_[i].named_params());
    return p;
  }

 private:
  std::vector<Linear> layers_;
};

/// Gated recurrent unit cell:
///   r = sigmoid(x Wr + h Ur + br)
///   u = sigmoid(x Wu + h Uu + bu)
///   n = tanh(x Wn + bn + r * (h Un + un))
///   h' = (1 - u) * n + u * h
/// The candidate is tanh-bounded and mixed convexly with the previous hidden
/// state, so components stay in (-1, 1) once the initial state does.
class GruCell {
 public:
  GruCell() = default;
  GruCell(int input_dim, int hidden_dim, Rng& rng)
      : wr_(input_dim, hidden_dim, rng, false),
        ur_(hidden_dim, hidden_dim, rng, true),
        wu_(input_dim, hidden_dim, rng, false),
        uu_(hidden_dim, hidden_dim, rng, true),
        wn_(input_dim, hidden_dim, rng, true),
        un_(hidden_dim, hidden_dim, rng, true),
        hidden_dim_(hidden_dim) {}

  int hidden_dim() const { return hidden_dim_; }

  /// One step for a batch of rows: x [B, in], h [B, hidden] -> [B, hidden].
  Tensor forward(const Tensor& x, const Tensor& h) const {
    if (x.ndim() != 2 || h.ndim() != 2 || x.rows() != h.rows() || h.cols() != hidden_dim_)
      throw ShapeError("GruCell: bad input shapes");
    Tensor r = sigmoid(add(wr_.forward(x), ur_.forward(h)));
    Tensor u = sigmoid(add(wu_.forward(x), uu_.forward(h)));
    Tensor n = tanh_op(add(wn_.forward(x), mul(r, un_.forward(h))));
    return add(mul(affine(u, -1.0, 1.0), n), mul(u, h));
  }

  NamedParams named_params() const {
    NamedParams p;
    append_named(p, "wr", wr_.named_params());
    append_named(p, "ur", ur_.named_params());
    append_named(p, "wu", wu_.named_params());
    append_named(p, "uu", uu_.named_params());
    append_named(p, "wn", wn_.named_params());
    append_named(p, "un", un_.named_params());
    return p;
  }

 private:
  Linear wr_, ur_, wu_, uu_, wn_, un_;
  int hidden_dim_ = 0;
};

}  // namespace rode
