#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace rode {

/// Thrown when operand shapes do not conform to an op's arity rules.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

struct Node {
  // Parents kept alive for graph traversal; backprop closures capture the
  // buffers they need directly.
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backprop;
};

}  // namespace detail

/// Dense tensor of 64-bit reals with define-by-run reverse-mode autodiff.
///
/// Copies are shallow: they share data, gradient, and graph node. A tensor
/// either tracks gradients (leaf parameter or op output with tracked inputs)
/// or is plain data; detach() produces an untracked view of the same buffer.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    return Tensor(std::move(shape), 0.0, requires_grad);
  }

  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false) {
    return Tensor(std::move(shape), value, requires_grad);
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return Tensor({1}, value, requires_grad);
  }

  static Tensor from_vector(std::vector<int> shape, std::vector<double> values,
                            bool requires_grad = false) {
    Tensor t(std::move(shape), 0.0, requires_grad);
    if (values.size() != t.numel()) {
      throw ShapeError("from_vector: " + std::to_string(values.size()) +
                       " values for shape " + detail::shape_str(t.shape()));
    }
    *t.data_ = std::move(values);
    return t;
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::size_t numel() const {
    std::size_t n = 1;
    for (int d : shape_) n *= static_cast<std::size_t>(d);
    return shape_.empty() ? 0 : n;
  }
  // 2-D accessors; rank checked by the ops that require them.
  int rows() const { return shape_.at(0); }
  int cols() const { return shape_.at(1); }

  bool defined() const { return data_ != nullptr; }
  bool requires_grad() const { return requires_grad_; }

  double* data() { return data_->data(); }
  const double* data() const { return data_->data(); }
  double at(std::size_t i) const { return (*data_)[i]; }
  double& at(std::size_t i) { return (*data_)[i]; }

  double* grad() { return grad_ ? grad_->data() : nullptr; }
  const double* grad() const { return grad_ ? grad_->data() : nullptr; }

  /// Scalar read; rejects tensors with more than one element.
  double value() const {
    if (numel() != 1) {
      throw ShapeError("value(): tensor has shape " + detail::shape_str(shape_));
    }
    return (*data_)[0];
  }

  /// Untracked tensor sharing this tensor's data buffer.
  Tensor detach() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = data_;
    return t;
  }

  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
  }

  void fill(double v) { std::fill(data_->begin(), data_->end(), v); }

  /// Reverse-mode sweep from a scalar. Gradients accumulate into every
  /// tracked tensor reachable from this one; call zero_grad on parameters
  /// between optimization steps.
  void backward() const {
    if (numel() != 1) {
      throw ShapeError("backward(): loss must be a scalar, got shape " +
                       detail::shape_str(shape_));
    }
    if (!requires_grad_) return;
    (*grad_)[0] += 1.0;
    if (!node_) return;

    // Iterative post-order DFS; reversed it is a topological order, so each
    // node's output gradient is complete before its backprop runs.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        detail::Node* p = node->parents[next++].get();
        if (p && !seen.count(p)) {
          seen.insert(p);
          stack.emplace_back(p, 0);
        }
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if ((*it)->backprop) (*it)->backprop();
    }
  }

  // --- internals shared with the op layer -----------------------------------
  std::shared_ptr<std::vector<double>> data_ptr() const { return data_; }
  std::shared_ptr<std::vector<double>> grad_ptr() const { return grad_; }
  std::shared_ptr<detail::Node> node() const { return node_; }

  static Tensor make_tracked(std::vector<int> shape,
                             std::vector<std::shared_ptr<detail::Node>> parents) {
    Tensor t(std::move(shape), 0.0, true);
    t.node_ = std::make_shared<detail::Node>();
    t.node_->parents = std::move(parents);
    return t;
  }
  void set_backprop(std::function<void()> fn) { node_->backprop = std::move(fn); }

 private:
  Tensor(std::vector<int> shape, double value, bool requires_grad)
      : shape_(std::move(shape)), requires_grad_(requires_grad) {
    for (int d : shape_) {
      if (d <= 0) throw ShapeError("non-positive dimension in shape " + detail::shape_str(shape_));
    }
    data_ = std::make_shared<std::vector<double>>(numel(), value);
    if (requires_grad_) grad_ = std::make_shared<std::vector<double>>(numel(), 0.0);
  }

  std::vector<int> shape_;
  std::shared_ptr<std::vector<double>> data_;
  std::shared_ptr<std::vector<double>> grad_;
  std::shared_ptr<detail::Node> node_;
  bool requires_grad_ = false;
};

namespace detail {

inline bool any_tracked(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts)
    if (t->requires_grad()) return true;
  return false;
}

inline Tensor make_output(std::vector<int> shape, std::initializer_list<const Tensor*> inputs) {
  if (!any_tracked(inputs)) return Tensor::zeros(std::move(shape));
  std::vector<std::shared_ptr<Node>> parents;
  for (const Tensor* t : inputs)
    if (t->requires_grad() && t->node()) parents.push_back(t->node());
  Tensor out = Tensor::make_tracked(std::move(shape), std::move(parents));
  return out;
}

}  // namespace detail

// Every op follows the same pattern: shape checks, plain forward loop over the
// raw buffers, then a closure that scatters the output gradient to the inputs.
// Closures capture buffer shared_ptrs, never whole tensors, so graphs cannot
// form ownership cycles.

namespace ops {

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + detail::shape_str(a.shape()) +
                     " vs " + detail::shape_str(b.shape()));
  }
}

}  // namespace ops

// Leaf tensors carry no node: their gradients are written directly by the
// consuming op's closure and read only by the optimizer after the sweep, so
// they impose no ordering constraint on the traversal.

inline Tensor add(const Tensor& a, const Tensor& b) {
  ops::check_same_shape(a, b, "add");
  Tensor out = detail::make_output(a.shape(), {&a, &b});
  const std::size_t n = out.numel();
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto ga = a.requires_grad() ? a.grad_ptr() : nullptr;
    auto gb = b.requires_grad() ? b.grad_ptr() : nullptr;
    out.set_backprop([og, ga, gb, n] {
      if (ga)
        for (std::size_t i = 0; i < n; ++i) (*ga)[i] += (*og)[i];
      if (gb)
        for (std::size_t i = 0; i < n; ++i) (*gb)[i] += (*og)[i];
    });
  }
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  ops::check_same_shape(a, b, "sub");
  Tensor out = detail::make_output(a.shape(), {&a, &b});
  const std::size_t n = out.numel();
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto ga = a.requires_grad() ? a.grad_ptr() : nullptr;
    auto gb = b.requires_grad() ? b.grad_ptr() : nullptr;
    out.set_backprop([og, ga, gb, n] {
      if (ga)
        for (std::size_t i = 0; i < n; ++i) (*ga)[i] += (*og)[i];
      if (gb)
        for (std::size_t i = 0; i < n; ++i) (*gb)[i] -= (*og)[i];
    });
  }
  return out;
}

/// Elementwise product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  ops::check_same_shape(a, b, "mul");
  Tensor out = detail::make_output(a.shape(), {&a, &b});
  const std::size_t n = out.numel();
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto da = a.data_ptr();
    auto db = b.data_ptr();
    auto ga = a.requires_grad() ? a.grad_ptr() : nullptr;
    auto gb = b.requires_grad() ? b.grad_ptr() : nullptr;
    out.set_backprop([og, da, db, ga, gb, n] {
      if (ga)
        for (std::size_t i = 0; i < n; ++i) (*ga)[i] += (*og)[i] * (*db)[i];
      if (gb)
        for (std::size_t i = 0; i < n; ++i) (*gb)[i] += (*og)[i] * (*da)[i];
    });
  }
  return out;
}

/// Elementwise scalar map a*x + b; covers scaling, negation, and 1-x.
inline Tensor affine(const Tensor& x, double a, double b) {
  Tensor out = detail::make_output(x.shape(), {&x});
  const std::size_t n = out.numel();
  const double* px = x.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = a * px[i] + b;
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto gx = x.grad_ptr();
    out.set_backprop([og, gx, a, n] {
      for (std::size_t i = 0; i < n; ++i) (*gx)[i] += a * (*og)[i];
    });
  }
  return out;
}

inline Tensor scale(const Tensor& x, double a) { return affine(x, a, 0.0); }

inline Tensor relu(const Tensor& x) {
  Tensor out = detail::make_output(x.shape(), {&x});
  const std::size_t n = out.numel();
  const double* px = x.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = px[i] > 0.0 ? px[i] : 0.0;
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto gx = x.grad_ptr();
    auto dx = x.data_ptr();
    out.set_backprop([og, gx, dx, n] {
      for (std::size_t i = 0; i < n; ++i)
        if ((*dx)[i] > 0.0) (*gx)[i] += (*og)[i];
    });
  }
  return out;
}

inline Tensor sigmoid(const Tensor& x) {
  Tensor out = detail::make_output(x.shape(), {&x});
  const std::size_t n = out.numel();
  const double* px = x.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = 1.0 / (1.0 + std::exp(-px[i]));
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto gx = x.grad_ptr();
    auto dy = out.data_ptr();
    out.set_backprop([og, gx, dy, n] {
      for (std::size_t i = 0; i < n; ++i) {
        const double y = (*dy)[i];
        (*gx)[i] += (*og)[i] * y * (1.0 - y);
      }
    });
  }
  return out;
}

inline Tensor tanh_op(const Tensor& x) {
  Tensor out = detail::make_output(x.shape(), {&x});
  const std::size_t n = out.numel();
  const double* px = x.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = std::tanh(px[i]);
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto gx = x.grad_ptr();
    auto dy = out.data_ptr();
    out.set_backprop([og, gx, dy, n] {
      for (std::size_t i = 0; i < n; ++i) {
        const double y = (*dy)[i];
        (*gx)[i] += (*og)[i] * (1.0 - y * y);
      }
    });
  }
  return out;
}

/// Elementwise absolute value; subgradient 0 at the origin.
inline Tensor absval(const Tensor& x) {
  Tensor out = detail::make_output(x.shape(), {&x});
  const std::size_t n = out.numel();
  const double* px = x.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) po[i] = std::fabs(px[i]);
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto gx = x.grad_ptr();
    auto dx = x.data_ptr();
    out.set_backprop([og, gx, dx, n] {
      for (std::size_t i = 0; i < n; ++i) {
        const double v = (*dx)[i];
        if (v > 0.0)
          (*gx)[i] += (*og)[i];
        else if (v < 0.0)
          (*gx)[i] -= (*og)[i];
      }
    });
  }
  return out;
}

inline Tensor sum(const Tensor& x) {
  Tensor out = detail::make_output({1}, {&x});
  const std::size_t n = x.numel();
  const double* px = x.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += px[i];
  out.at(0) = acc;
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto gx = x.grad_ptr();
    out.set_backprop([og, gx, n] {
      const double g = (*og)[0];
      for (std::size_t i = 0; i < n; ++i) (*gx)[i] += g;
    });
  }
  return out;
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

/// Row sums of a matrix: [R,C] -> [R,1].
inline Tensor sum_cols(const Tensor& x) {
  if (x.ndim() != 2) throw ShapeError("sum_cols: expected matrix, got " + detail::shape_str(x.shape()));
  const int R = x.rows(), C = x.cols();
  Tensor out = detail::make_output({R, 1}, {&x});
  const double* px = x.data();
  double* po = out.data();
  for (int r = 0; r < R; ++r) {
    double acc = 0.0;
    const double* row = px + static_cast<std::size_t>(r) * C;
    for (int c = 0; c < C; ++c) acc += row[c];
    po[r] = acc;
  }
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto gx = x.grad_ptr();
    out.set_backprop([og, gx, R, C] {
      for (int r = 0; r < R; ++r) {
        const double g = (*og)[static_cast<std::size_t>(r)];
        double* grow = gx->data() + static_cast<std::size_t>(r) * C;
        for (int c = 0; c < C; ++c) grow[c] += g;
      }
    });
  }
  return out;
}

/// Plain 2-D matrix product [M,K] x [K,N] -> [M,N].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: incompatible shapes " + detail::shape_str(a.shape()) + " x " +
                     detail::shape_str(b.shape()));
  }
  const int M = a.rows(), K = a.cols(), N = b.cols();
  Tensor out = detail::make_output({M, N}, {&a, &b});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int m = 0; m < M; ++m) {
    double* crow = po + static_cast<std::size_t>(m) * N;
    const double* arow = pa + static_cast<std::size_t>(m) * K;
    for (int k = 0; k < K; ++k) {
      const double av = arow[k];
      if (av == 0.0) continue;
      const double* brow = pb + static_cast<std::size_t>(k) * N;
      for (int n = 0; n < N; ++n) crow[n] += av * brow[n];
    }
  }
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto da = a.data_ptr();
    auto db = b.data_ptr();
    auto ga = a.requires_grad() ? a.grad_ptr() : nullptr;
    auto gb = b.requires_grad() ? b.grad_ptr() : nullptr;
    out.set_backprop([og, da, db, ga, gb, M, K, N] {
      const double* g = og->data();
      if (ga) {
        // dA[m,k] += sum_n dC[m,n] * B[k,n]
        for (int m = 0; m < M; ++m) {
          const double* grow = g + static_cast<std::size_t>(m) * N;
          double* garow = ga->data() + static_cast<std::size_t>(m) * K;
          for (int k = 0; k < K; ++k) {
            const double* brow = db->data() + static_cast<std::size_t>(k) * N;
            double acc = 0.0;
            for (int n = 0; n < N; ++n) acc += grow[n] * brow[n];
            garow[k] += acc;
          }
        }
      }
      if (gb) {
        // dB[k,n] += sum_m A[m,k] * dC[m,n]
        for (int m = 0; m < M; ++m) {
          const double* arow = da->data() + static_cast<std::size_t>(m) * K;
          const double* grow = g + static_cast<std::size_t>(m) * N;
          for (int k = 0; k < K; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            double* gbrow = gb->data() + static_cast<std::size_t>(k) * N;
            for (int n = 0; n < N; ++n) gbrow[n] += av * grow[n];
          }
        }
      }
    });
  }
  return out;
}

/// Broadcast-add a row vector ([C] or [1,C]) to every row of [R,C].
inline Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  if (m.ndim() != 2 || static_cast<std::size_t>(m.cols()) != v.numel()) {
    throw ShapeError("add_rowvec: " + detail::shape_str(m.shape()) + " + " +
                     detail::shape_str(v.shape()));
  }
  const int R = m.rows(), C = m.cols();
  Tensor out = detail::make_output({R, C}, {&m, &v});
  const double* pm = m.data();
  const double* pv = v.data();
  double* po = out.data();
  for (int r = 0; r < R; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * C;
    for (int c = 0; c < C; ++c) po[off + c] = pm[off + c] + pv[c];
  }
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto gm = m.requires_grad() ? m.grad_ptr() : nullptr;
    auto gv = v.requires_grad() ? v.grad_ptr() : nullptr;
    out.set_backprop([og, gm, gv, R, C] {
      if (gm)
        for (std::size_t i = 0; i < static_cast<std::size_t>(R) * C; ++i) (*gm)[i] += (*og)[i];
      if (gv) {
        for (int r = 0; r < R; ++r) {
          const double* grow = og->data() + static_cast<std::size_t>(r) * C;
          for (int c = 0; c < C; ++c) (*gv)[c] += grow[c];
        }
      }
    });
  }
  return out;
}

/// Column-wise concatenation of matrices with equal row counts.
inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  if (parts[0].ndim() != 2) throw ShapeError("concat_cols: rank != 2");
  const int R = parts[0].rows();
  int C = 0;
  for (const Tensor& p : parts) {
    if (p.ndim() != 2 || p.rows() != R)
      throw ShapeError("concat_cols: row mismatch " + detail::shape_str(p.shape()));
    C += p.cols();
  }
  bool tracked = false;
  std::vector<std::shared_ptr<detail::Node>> parents;
  for (const Tensor& p : parts) {
    if (p.requires_grad()) {
      tracked = true;
      if (p.node()) parents.push_back(p.node());
    }
  }
  Tensor out = tracked ? Tensor::make_tracked({R, C}, std::move(parents)) : Tensor::zeros({R, C});
  double* po = out.data();
  int col = 0;
  for (const Tensor& p : parts) {
    const int pc = p.cols();
    const double* pp = p.data();
    for (int r = 0; r < R; ++r)
      std::copy(pp + static_cast<std::size_t>(r) * pc, pp + static_cast<std::size_t>(r + 1) * pc,
                po + static_cast<std::size_t>(r) * C + col);
    col += pc;
  }
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    struct Slot {
      std::shared_ptr<std::vector<double>> grad;
      int offset;
      int width;
    };
    std::vector<Slot> slots;
    col = 0;
    for (const Tensor& p : parts) {
      if (p.requires_grad()) slots.push_back({p.grad_ptr(), col, p.cols()});
      col += p.cols();
    }
    out.set_backprop([og, slots, R, C] {
      for (const Slot& s : slots) {
        for (int r = 0; r < R; ++r) {
          const double* grow = og->data() + static_cast<std::size_t>(r) * C + s.offset;
          double* drow = s.grad->data() + static_cast<std::size_t>(r) * s.width;
          for (int c = 0; c < s.width; ++c) drow[c] += grow[c];
        }
      }
    });
  }
  return out;
}

/// Column slice [R, off..off+len) of a matrix.
inline Tensor slice_cols(const Tensor& x, int offset, int len) {
  if (x.ndim() != 2 || offset < 0 || len <= 0 || offset + len > x.cols()) {
    throw ShapeError("slice_cols: invalid slice [" + std::to_string(offset) + "," +
                     std::to_string(offset + len) + ") of " + detail::shape_str(x.shape()));
  }
  const int R = x.rows(), C = x.cols();
  Tensor out = detail::make_output({R, len}, {&x});
  const double* px = x.data();
  double* po = out.data();
  for (int r = 0; r < R; ++r)
    std::copy(px + static_cast<std::size_t>(r) * C + offset,
              px + static_cast<std::size_t>(r) * C + offset + len,
              po + static_cast<std::size_t>(r) * len);
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto gx = x.grad_ptr();
    out.set_backprop([og, gx, R, C, offset, len] {
      for (int r = 0; r < R; ++r) {
        const double* grow = og->data() + static_cast<std::size_t>(r) * len;
        double* drow = gx->data() + static_cast<std::size_t>(r) * C + offset;
        for (int c = 0; c < len; ++c) drow[c] += grow[c];
      }
    });
  }
  return out;
}

/// Row gather: out[i,:] = m[idx[i],:]. Repeated indices accumulate gradient.
inline Tensor gather_rows(const Tensor& m, const std::vector<int>& idx) {
  if (m.ndim() != 2) throw ShapeError("gather_rows: expected matrix");
  const int N = m.rows(), C = m.cols();
  for (int i : idx) {
    if (i < 0 || i >= N)
      throw ShapeError("gather_rows: index " + std::to_string(i) + " out of range [0," +
                       std::to_string(N) + ")");
  }
  const int R = static_cast<int>(idx.size());
  Tensor out = detail::make_output({R, C}, {&m});
  const double* pm = m.data();
  double* po = out.data();
  for (int r = 0; r < R; ++r)
    std::copy(pm + static_cast<std::size_t>(idx[r]) * C,
              pm + static_cast<std::size_t>(idx[r] + 1) * C, po + static_cast<std::size_t>(r) * C);
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto gm = m.grad_ptr();
    auto ids = std::make_shared<std::vector<int>>(idx);
    out.set_backprop([og, gm, ids, C] {
      for (std::size_t r = 0; r < ids->size(); ++r) {
        const double* grow = og->data() + r * C;
        double* drow = gm->data() + static_cast<std::size_t>((*ids)[r]) * C;
        for (int c = 0; c < C; ++c) drow[c] += grow[c];
      }
    });
  }
  return out;
}

/// Per-row element pick: out[r,0] = m[r, idx[r]].
inline Tensor take_per_row(const Tensor& m, const std::vector<int>& idx) {
  if (m.ndim() != 2 || static_cast<int>(idx.size()) != m.rows())
    throw ShapeError("take_per_row: need one index per row of " + detail::shape_str(m.shape()));
  const int R = m.rows(), C = m.cols();
  for (int i : idx) {
    if (i < 0 || i >= C)
      throw ShapeError("take_per_row: column " + std::to_string(i) + " out of range");
  }
  Tensor out = detail::make_output({R, 1}, {&m});
  const double* pm = m.data();
  double* po = out.data();
  for (int r = 0; r < R; ++r) po[r] = pm[static_cast<std::size_t>(r) * C + idx[r]];
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto gm = m.grad_ptr();
    auto ids = std::make_shared<std::vector<int>>(idx);
    out.set_backprop([og, gm, ids, C] {
      for (std::size_t r = 0; r < ids->size(); ++r)
        (*gm)[r * C + static_cast<std::size_t>((*ids)[r])] += (*og)[r];
    });
  }
  return out;
}

/// Per-row matrix-vector product: w holds R stacked (out x in) matrices
/// flattened row-major; y[r,:] = W_r x[r,:].
inline Tensor rowwise_matvec(const Tensor& w, const Tensor& x, int out_dim) {
  if (w.ndim() != 2 || x.ndim() != 2 || w.rows() != x.rows())
    throw ShapeError("rowwise_matvec: row mismatch");
  const int R = x.rows(), in_dim = x.cols();
  if (w.cols() != out_dim * in_dim)
    throw ShapeError("rowwise_matvec: weight width " + std::to_string(w.cols()) + " != " +
                     std::to_string(out_dim) + "*" + std::to_string(in_dim));
  Tensor out = detail::make_output({R, out_dim}, {&w, &x});
  const double* pw = w.data();
  const double* px = x.data();
  double* po = out.data();
  for (int r = 0; r < R; ++r) {
    const double* wr = pw + static_cast<std::size_t>(r) * out_dim * in_dim;
    const double* xr = px + static_cast<std::size_t>(r) * in_dim;
    double* yr = po + static_cast<std::size_t>(r) * out_dim;
    for (int o = 0; o < out_dim; ++o) {
      double acc = 0.0;
      const double* wrow = wr + static_cast<std::size_t>(o) * in_dim;
      for (int i = 0; i < in_dim; ++i) acc += wrow[i] * xr[i];
      yr[o] = acc;
    }
  }
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto dw = w.data_ptr();
    auto dx = x.data_ptr();
    auto gw = w.requires_grad() ? w.grad_ptr() : nullptr;
    auto gx = x.requires_grad() ? x.grad_ptr() : nullptr;
    out.set_backprop([og, dw, dx, gw, gx, R, in_dim, out_dim] {
      for (int r = 0; r < R; ++r) {
        const double* gyr = og->data() + static_cast<std::size_t>(r) * out_dim;
        const double* wr = dw->data() + static_cast<std::size_t>(r) * out_dim * in_dim;
        const double* xr = dx->data() + static_cast<std::size_t>(r) * in_dim;
        if (gw) {
          double* gwr = gw->data() + static_cast<std::size_t>(r) * out_dim * in_dim;
          for (int o = 0; o < out_dim; ++o) {
            const double g = gyr[o];
            if (g == 0.0) continue;
            double* gwrow = gwr + static_cast<std::size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) gwrow[i] += g * xr[i];
          }
        }
        if (gx) {
          double* gxr = gx->data() + static_cast<std::size_t>(r) * in_dim;
          for (int o = 0; o < out_dim; ++o) {
            const double g = gyr[o];
            if (g == 0.0) continue;
            const double* wrow = wr + static_cast<std::size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) gxr[i] += g * wrow[i];
          }
        }
      }
    });
  }
  return out;
}

/// Same data, new shape (element count must match); gradient passes through
/// one-to-one.
inline Tensor reshape(const Tensor& x, std::vector<int> new_shape) {
  std::size_t numel = 1;
  for (int d : new_shape) {
    if (d <= 0) throw ShapeError("reshape: nonpositive dimension");
    numel *= static_cast<std::size_t>(d);
  }
  if (numel != x.numel())
    throw ShapeError("reshape: cannot view " + detail::shape_str(x.shape()) + " as " +
                     detail::shape_str(new_shape));
  Tensor out = detail::make_output(std::move(new_shape), {&x});
  std::copy(x.data(), x.data() + x.numel(), out.data());
  if (out.requires_grad()) {
    auto og = out.grad_ptr();
    auto gx = x.grad_ptr();
    const std::size_t n = x.numel();
    out.set_backprop([og, gx, n] {
      for (std::size_t i = 0; i < n; ++i) (*gx)[i] += (*og)[i];
    });
  }
  return out;
}

/// Sum of elementwise squared differences (a scalar).
inline Tensor squared_error(const Tensor& a, const Tensor& b) {
  Tensor d = sub(a, b);
  return sum(mul(d, d));
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace rode
