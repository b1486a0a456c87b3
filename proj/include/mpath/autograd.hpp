#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mpath/tensor.hpp"

namespace mpath {

inline constexpr double kLayerNormEps = 1e-5;

enum class Op {
  kMatmul,
  kAdd,
  kAddRow,
  kScale,
  kRelu,
  kSoftmax,
  kLayerNorm,
  kEmbedding,
  kReshape,
  kConcatRows,
  kConcatCols,
  kSliceCols,
  kTranspose,
  kMean,
  kCrossEntropy,
  kBceLogits,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::kMatmul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kAddRow: return "add_row";
    case Op::kScale: return "scale";
    case Op::kRelu: return "relu";
    case Op::kSoftmax: return "softmax";
    case Op::kLayerNorm: return "layer_norm";
    case Op::kEmbedding: return "embedding";
    case Op::kReshape: return "reshape";
    case Op::kConcatRows: return "concat_rows";
    case Op::kConcatCols: return "concat_cols";
    case Op::kSliceCols: return "slice_cols";
    case Op::kTranspose: return "transpose";
    case Op::kMean: return "mean";
    case Op::kCrossEntropy: return "cross_entropy";
    case Op::kBceLogits: return "bce_logits";
  }
  return "unknown";
}

// Non-tensor arguments of primitives.
struct OpAttrs {
  Shape shape;                 // reshape target
  std::vector<int32_t> ids;    // embedding lookups / cross-entropy targets
  std::vector<float> targets;  // bce_logits targets
  int64_t begin = 0, end = 0;  // slice_cols column range
  double scalar = 1.0;         // scale factor
  int32_t ignore_id = -1;      // cross-entropy: target id excluded from the mean
};

enum class GradMode { kGrad, kNoGrad };

namespace detail {

// C(m,n) = A(m,k) @ B(k,n), C pre-zeroed
template <typename T>
void matmul_acc(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// GA(m,k) += G(m,n) @ B(k,n)^T
template <typename T>
void matmul_grad_a(const T* g, const T* b, T* ga, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* grow = g + i * n;
    T* garow = ga + i * k;
    for (int64_t p = 0; p < k; ++p) {
      const T* brow = b + p * n;
      T s = T(0);
      for (int64_t j = 0; j < n; ++j) s += grow[j] * brow[j];
      garow[p] += s;
    }
  }
}

// GB(k,n) += A(m,k)^T @ G(m,n)
template <typename T>
void matmul_grad_b(const T* a, const T* g, T* gb, int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* grow = g + i * n;
    for (int64_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      T* gbrow = gb + p * n;
      for (int64_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
    }
  }
}

}  // namespace detail

// Dynamic single-use tape: nodes are recorded in application order while a
// forward pass runs, replayed once in reverse by backward(), then freed.
template <typename T>
class Graph {
 public:
  explicit Graph(GradMode mode = GradMode::kGrad) : mode_(mode) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  size_t node_count() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  Tensor<T> apply_primitive(Op op, const std::vector<Tensor<T>>& inputs, OpAttrs attrs = {}) {
    switch (op) {
      case Op::kMatmul: return do_matmul(inputs);
      case Op::kAdd: return do_add(inputs);
      case Op::kAddRow: return do_add_row(inputs);
      case Op::kScale: return do_scale(inputs, attrs.scalar);
      case Op::kRelu: return do_relu(inputs);
      case Op::kSoftmax: return do_softmax(inputs);
      case Op::kLayerNorm: return do_layer_norm(inputs);
      case Op::kEmbedding: return do_embedding(inputs, attrs.ids);
      case Op::kReshape: return do_reshape(inputs, attrs.shape);
      case Op::kConcatRows: return do_concat_rows(inputs);
      case Op::kConcatCols: return do_concat_cols(inputs);
      case Op::kSliceCols: return do_slice_cols(inputs, attrs.begin, attrs.end);
      case Op::kTranspose: return do_transpose(inputs);
      case Op::kMean: return do_mean(inputs);
      case Op::kCrossEntropy: return do_cross_entropy(inputs, attrs.ids, attrs.ignore_id);
      case Op::kBceLogits: return do_bce_logits(inputs, attrs.targets);
    }
    throw std::invalid_argument("apply_primitive: unknown primitive id " +
                                std::to_string(static_cast<int>(op)));
  }

  // ---- typed wrappers ----------------------------------------------------

  Tensor<T> matmul(Tensor<T> a, Tensor<T> b) { return do_matmul({a, b}); }
  Tensor<T> add(Tensor<T> a, Tensor<T> b) { return do_add({a, b}); }
  Tensor<T> add_row(Tensor<T> x, Tensor<T> v) { return do_add_row({x, v}); }
  Tensor<T> scale(Tensor<T> x, double s) { return do_scale({x}, s); }
  Tensor<T> relu(Tensor<T> x) { return do_relu({x}); }
  Tensor<T> softmax_rows(Tensor<T> x) { return do_softmax({x}); }
  Tensor<T> layer_norm(Tensor<T> x, Tensor<T> gain, Tensor<T> bias) {
    return do_layer_norm({x, gain, bias});
  }
  Tensor<T> embedding(Tensor<T> table, const std::vector<int32_t>& ids) {
    return do_embedding({table}, ids);
  }
  Tensor<T> reshape(Tensor<T> x, Shape shape) { return do_reshape({x}, std::move(shape)); }
  Tensor<T> concat_rows(Tensor<T> a, Tensor<T> b) { return do_concat_rows({a, b}); }
  Tensor<T> concat_cols(Tensor<T> a, Tensor<T> b) { return do_concat_cols({a, b}); }
  Tensor<T> slice_cols(Tensor<T> x, int64_t begin, int64_t end) {
    return do_slice_cols({x}, begin, end);
  }
  Tensor<T> transpose(Tensor<T> x) { return do_transpose({x}); }
  Tensor<T> mean_all(Tensor<T> x) { return do_mean({x}); }
  Tensor<T> cross_entropy(Tensor<T> logits, const std::vector<int32_t>& targets,
                          int32_t ignore_id = -1) {
    return do_cross_entropy({logits}, targets, ignore_id);
  }
  Tensor<T> bce_logits(Tensor<T> logits, const std::vector<float>& targets) {
    return do_bce_logits({logits}, targets);
  }

  // Populates grads of every requires_grad leaf reachable from `loss`.
  // Single-shot: the tape is freed afterwards.
  void backward(Tensor<T> loss) {
    if (loss.numel() != 1) {
      throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                  shape_str(loss.shape()));
    }
    if (consumed_) {
      throw std::logic_error("backward: graph already consumed by a previous backward");
    }
    if (!loss.requires_grad()) {
      throw std::invalid_argument("backward: loss does not require grad (no-grad graph?)");
    }
    loss.ensure_grad();
    loss.grad()[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (it->output.has_grad()) it->back();
    }
    consumed_ = true;
    nodes_.clear();
  }

 private:
  struct Node {
    Op op;
    Tensor<T> output;
    std::function<void()> back;
  };

  static void require(bool ok, Op op, const std::string& msg) {
    if (!ok) throw std::invalid_argument(std::string(op_name(op)) + ": " + msg);
  }

  bool tracked(const std::vector<Tensor<T>>& inputs) const {
    if (mode_ == GradMode::kNoGrad || consumed_) return false;
    for (const auto& t : inputs) {
      if (t.requires_grad()) return true;
    }
    return false;
  }

  void record(Op op, Tensor<T>& out, std::function<void()> back) {
    out.set_requires_grad(true);
    nodes_.push_back(Node{op, out, std::move(back)});
  }

  static void accumulate(Tensor<T> dst, std::span<const T> g) {
    dst.ensure_grad();
    auto acc = dst.grad();
    for (size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
  }

  // ---- primitives ---------------------------------------------------------

  Tensor<T> do_matmul(std::vector<Tensor<T>> in) {
    require(in.size() == 2, Op::kMatmul, "expects 2 inputs");
    Tensor<T> a = in[0], b = in[1];
    require(a.ndim() == 2 && b.ndim() == 2, Op::kMatmul,
            "expects 2-D operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    require(b.shape()[0] == k, Op::kMatmul,
            "inner dimensions differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<T> out = Tensor<T>::zeros({m, n});
    detail::matmul_acc(a.data().data(), b.data().data(), out.data().data(), m, k, n);
    if (tracked(in)) {
      record(Op::kMatmul, out, [a, b, out, m, k, n]() mutable {
        auto g = out.grad();
        if (a.requires_grad()) {
          a.ensure_grad();
          detail::matmul_grad_a(g.data(), b.data().data(), a.grad().data(), m, k, n);
        }
        if (b.requires_grad()) {
          b.ensure_grad();
          detail::matmul_grad_b(a.data().data(), g.data(), b.grad().data(), m, k, n);
        }
      });
    }
    return out;
  }

  Tensor<T> do_add(std::vector<Tensor<T>> in) {
    require(in.size() == 2, Op::kAdd, "expects 2 inputs");
    Tensor<T> a = in[0], b = in[1];
    require(a.shape() == b.shape(), Op::kAdd,
            "shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    auto ad = a.data(), bd = b.data();
    auto od = out.data();
    for (size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + bd[i];
    if (tracked(in)) {
      record(Op::kAdd, out, [a, b, out]() mutable {
        auto g = out.grad();
        if (a.requires_grad()) accumulate(a, g);
        if (b.requires_grad()) accumulate(b, g);
      });
    }
    return out;
  }

  Tensor<T> do_add_row(std::vector<Tensor<T>> in) {
    require(in.size() == 2, Op::kAddRow, "expects 2 inputs");
    Tensor<T> x = in[0], v = in[1];
    require(x.ndim() == 2, Op::kAddRow, "matrix operand must be 2-D, got " + shape_str(x.shape()));
    require(v.ndim() == 1, Op::kAddRow, "row operand must be 1-D, got " + shape_str(v.shape()));
    const int64_t m = x.shape()[0], n = x.shape()[1];
    require(v.shape()[0] == n, Op::kAddRow,
            "row length " + shape_str(v.shape()) + " does not match columns of " +
                shape_str(x.shape()));
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    auto xd = x.data(), vd = v.data();
    auto od = out.data();
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t j = 0; j < n; ++j) od[i * n + j] = xd[i * n + j] + vd[j];
    }
    if (tracked(in)) {
      record(Op::kAddRow, out, [x, v, out, m, n]() mutable {
        auto g = out.grad();
        if (x.requires_grad()) accumulate(x, g);
        if (v.requires_grad()) {
          v.ensure_grad();
          auto vg = v.grad();
          for (int64_t i = 0; i < m; ++i) {
            for (int64_t j = 0; j < n; ++j) vg[j] += g[i * n + j];
          }
        }
      });
    }
    return out;
  }

  Tensor<T> do_scale(std::vector<Tensor<T>> in, double s) {
    require(in.size() == 1, Op::kScale, "expects 1 input");
    Tensor<T> x = in[0];
    const T c = static_cast<T>(s);
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (size_t i = 0; i < od.size(); ++i) od[i] = c * xd[i];
    if (tracked(in)) {
      record(Op::kScale, out, [x, out, c]() mutable {
        if (!x.requires_grad()) return;
        x.ensure_grad();
        auto g = out.grad();
        auto xg = x.grad();
        for (size_t i = 0; i < g.size(); ++i) xg[i] += c * g[i];
      });
    }
    return out;
  }

  Tensor<T> do_relu(std::vector<Tensor<T>> in) {
    require(in.size() == 1, Op::kRelu, "expects 1 input");
    Tensor<T> x = in[0];
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (size_t i = 0; i < od.size(); ++i) od[i] = xd[i] > T(0) ? xd[i] : T(0);
    if (tracked(in)) {
      record(Op::kRelu, out, [x, out]() mutable {
        if (!x.requires_grad()) return;
        x.ensure_grad();
        auto g = out.grad();
        auto xd2 = x.data();
        auto xg = x.grad();
        for (size_t i = 0; i < g.size(); ++i) {
          if (xd2[i] > T(0)) xg[i] += g[i];
        }
      });
    }
    return out;
  }

  Tensor<T> do_softmax(std::vector<Tensor<T>> in) {
    require(in.size() == 1, Op::kSoftmax, "expects 1 input");
    Tensor<T> x = in[0];
    require(x.ndim() == 1 || x.ndim() == 2, Op::kSoftmax,
            "expects 1-D or 2-D input, got " + shape_str(x.shape()));
    const int64_t m = x.rows(), n = x.cols();
    require(n > 0, Op::kSoftmax, "rows must be non-empty");
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    auto xd = x.data();
    auto od = out.data();
    for (int64_t i = 0; i < m; ++i) {
      const T* row = xd.data() + i * n;
      T* orow = od.data() + i * n;
      T mx = row[0];
      for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
      T sum = T(0);
      for (int64_t j = 0; j < n; ++j) {
        orow[j] = std::exp(row[j] - mx);
        sum += orow[j];
      }
      const T inv = T(1) / sum;
      for (int64_t j = 0; j < n; ++j) orow[j] *= inv;
    }
    if (tracked(in)) {
      record(Op::kSoftmax, out, [x, out, m, n]() mutable {
        if (!x.requires_grad()) return;
        x.ensure_grad();
        auto g = out.grad();
        auto y = out.data();
        auto xg = x.grad();
        for (int64_t i = 0; i < m; ++i) {
          const T* grow = g.data() + i * n;
          const T* yrow = y.data() + i * n;
          T dot = T(0);
          for (int64_t j = 0; j < n; ++j) dot += grow[j] * yrow[j];
          T* xgrow = xg.data() + i * n;
          for (int64_t j = 0; j < n; ++j) xgrow[j] += yrow[j] * (grow[j] - dot);
        }
      });
    }
    return out;
  }

  Tensor<T> do_layer_norm(std::vector<Tensor<T>> in) {
    require(in.size() == 3, Op::kLayerNorm, "expects (x, gain, bias)");
    Tensor<T> x = in[0], gain = in[1], bias = in[2];
    require(x.ndim() == 2, Op::kLayerNorm, "x must be 2-D, got " + shape_str(x.shape()));
    const int64_t m = x.shape()[0], n = x.shape()[1];
    require(gain.ndim() == 1 && gain.shape()[0] == n, Op::kLayerNorm,
            "gain shape " + shape_str(gain.shape()) + " does not match columns of " +
                shape_str(x.shape()));
    require(bias.ndim() == 1 && bias.shape()[0] == n, Op::kLayerNorm,
            "bias shape " + shape_str(bias.shape()) + " does not match columns of " +
                shape_str(x.shape()));
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    // saved for backward
    auto xhat = std::make_shared<std::vector<T>>(static_cast<size_t>(m * n));
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(m));
    auto xd = x.data();
    auto gd = gain.data();
    auto bd = bias.data();
    auto od = out.data();
    for (int64_t i = 0; i < m; ++i) {
      const T* row = xd.data() + i * n;
      T mean = T(0);
      for (int64_t j = 0; j < n; ++j) mean += row[j];
      mean /= static_cast<T>(n);
      T var = T(0);
      for (int64_t j = 0; j < n; ++j) {
        const T c = row[j] - mean;
        var += c * c;
      }
      var /= static_cast<T>(n);
      const T inv = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
      (*inv_std)[i] = inv;
      for (int64_t j = 0; j < n; ++j) {
        const T xh = (row[j] - mean) * inv;
        (*xhat)[i * n + j] = xh;
        od[i * n + j] = xh * gd[j] + bd[j];
      }
    }
    if (tracked(in)) {
      record(Op::kLayerNorm, out, [x, gain, bias, out, xhat, inv_std, m, n]() mutable {
        auto g = out.grad();
        auto gd2 = gain.data();
        if (x.requires_grad()) {
          x.ensure_grad();
          auto xg = x.grad();
          for (int64_t i = 0; i < m; ++i) {
            const T* grow = g.data() + i * n;
            const T* xh = xhat->data() + i * n;
            T m1 = T(0), m2 = T(0);
            for (int64_t j = 0; j < n; ++j) {
              const T dxh = grow[j] * gd2[j];
              m1 += dxh;
              m2 += dxh * xh[j];
            }
            m1 /= static_cast<T>(n);
            m2 /= static_cast<T>(n);
            const T inv = (*inv_std)[i];
            T* xgrow = xg.data() + i * n;
            for (int64_t j = 0; j < n; ++j) {
              const T dxh = grow[j] * gd2[j];
              xgrow[j] += inv * (dxh - m1 - xh[j] * m2);
            }
          }
        }
        if (gain.requires_grad()) {
          gain.ensure_grad();
          auto gg = gain.grad();
          for (int64_t i = 0; i < m; ++i) {
            for (int64_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * (*xhat)[i * n + j];
          }
        }
        if (bias.requires_grad()) {
          bias.ensure_grad();
          auto bg = bias.grad();
          for (int64_t i = 0; i < m; ++i) {
            for (int64_t j = 0; j < n; ++j) bg[j] += g[i * n + j];
          }
        }
      });
    }
    return out;
  }

  Tensor<T> do_embedding(std::vector<Tensor<T>> in, const std::vector<int32_t>& ids) {
    require(in.size() == 1, Op::kEmbedding, "expects 1 input (table)");
    Tensor<T> table = in[0];
    require(table.ndim() == 2, Op::kEmbedding,
            "table must be 2-D, got " + shape_str(table.shape()));
    const int64_t v = table.shape()[0], d = table.shape()[1];
    for (int32_t id : ids) {
      require(id >= 0 && id < v, Op::kEmbedding,
              "id " + std::to_string(id) + " out of range for table " + shape_str(table.shape()));
    }
    const int64_t s = static_cast<int64_t>(ids.size());
    Tensor<T> out = Tensor<T>::zeros({s, d});
    auto td = table.data();
    auto od = out.data();
    for (int64_t i = 0; i < s; ++i) {
      const T* src = td.data() + static_cast<int64_t>(ids[i]) * d;
      std::copy(src, src + d, od.data() + i * d);
    }
    if (tracked(in)) {
      auto ids_copy = std::make_shared<std::vector<int32_t>>(ids);
      record(Op::kEmbedding, out, [table, out, ids_copy, d]() mutable {
        if (!table.requires_grad()) return;
        table.ensure_grad();
        auto g = out.grad();
        auto tg = table.grad();
        for (size_t i = 0; i < ids_copy->size(); ++i) {
          T* dst = tg.data() + static_cast<int64_t>((*ids_copy)[i]) * d;
          const T* src = g.data() + static_cast<int64_t>(i) * d;
          for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
        }
      });
    }
    return out;
  }

  Tensor<T> do_reshape(std::vector<Tensor<T>> in, Shape shape) {
    require(in.size() == 1, Op::kReshape, "expects 1 input");
    Tensor<T> x = in[0];
    require(numel_of(shape) == x.numel(), Op::kReshape,
            "cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
    Tensor<T> out = Tensor<T>::from_vector(shape, {x.data().begin(), x.data().end()});
    if (tracked(in)) {
      record(Op::kReshape, out, [x, out]() mutable {
        if (x.requires_grad()) accumulate(x, out.grad());
      });
    }
    return out;
  }

  Tensor<T> do_concat_rows(std::vector<Tensor<T>> in) {
    require(in.size() == 2, Op::kConcatRows, "expects 2 inputs");
    Tensor<T> a = in[0], b = in[1];
    require(a.ndim() == 2 && b.ndim() == 2, Op::kConcatRows, "expects 2-D operands");
    const int64_t n = a.shape()[1];
    require(b.shape()[1] == n, Op::kConcatRows,
            "column mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const int64_t ma = a.shape()[0], mb = b.shape()[0];
    Tensor<T> out = Tensor<T>::zeros({ma + mb, n});
    auto od = out.data();
    std::copy(a.data().begin(), a.data().end(), od.begin());
    std::copy(b.data().begin(), b.data().end(), od.begin() + ma * n);
    if (tracked(in)) {
      record(Op::kConcatRows, out, [a, b, out, ma, n]() mutable {
        auto g = out.grad();
        if (a.requires_grad()) accumulate(a, g.subspan(0, static_cast<size_t>(ma * n)));
        if (b.requires_grad()) accumulate(b, g.subspan(static_cast<size_t>(ma * n)));
      });
    }
    return out;
  }

  Tensor<T> do_concat_cols(std::vector<Tensor<T>> in) {
    require(in.size() == 2, Op::kConcatCols, "expects 2 inputs");
    Tensor<T> a = in[0], b = in[1];
    require(a.ndim() == 2 && b.ndim() == 2, Op::kConcatCols, "expects 2-D operands");
    const int64_t m = a.shape()[0];
    require(b.shape()[0] == m, Op::kConcatCols,
            "row mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const int64_t na = a.shape()[1], nb = b.shape()[1];
    Tensor<T> out = Tensor<T>::zeros({m, na + nb});
    auto ad = a.data(), bd = b.data();
    auto od = out.data();
    for (int64_t i = 0; i < m; ++i) {
      std::copy(ad.begin() + i * na, ad.begin() + (i + 1) * na, od.begin() + i * (na + nb));
      std::copy(bd.begin() + i * nb, bd.begin() + (i + 1) * nb,
                od.begin() + i * (na + nb) + na);
    }
    if (tracked(in)) {
      record(Op::kConcatCols, out, [a, b, out, m, na, nb]() mutable {
        auto g = out.grad();
        if (a.requires_grad()) {
          a.ensure_grad();
          auto ag = a.grad();
          for (int64_t i = 0; i < m; ++i) {
            for (int64_t j = 0; j < na; ++j) ag[i * na + j] += g[i * (na + nb) + j];
          }
        }
        if (b.requires_grad()) {
          b.ensure_grad();
          auto bg = b.grad();
          for (int64_t i = 0; i < m; ++i) {
            for (int64_t j = 0; j < nb; ++j) bg[i * nb + j] += g[i * (na + nb) + na + j];
          }
        }
      });
    }
    return out;
  }

  Tensor<T> do_slice_cols(std::vector<Tensor<T>> in, int64_t begin, int64_t end) {
    require(in.size() == 1, Op::kSliceCols, "expects 1 input");
    Tensor<T> x = in[0];
    require(x.ndim() == 2, Op::kSliceCols, "expects 2-D input, got " + shape_str(x.shape()));
    const int64_t m = x.shape()[0], n = x.shape()[1];
    require(begin >= 0 && begin < end && end <= n, Op::kSliceCols,
            "invalid column range [" + std::to_string(begin) + "," + std::to_string(end) +
                ") for " + shape_str(x.shape()));
    const int64_t w = end - begin;
    Tensor<T> out = Tensor<T>::zeros({m, w});
    auto xd = x.data();
    auto od = out.data();
    for (int64_t i = 0; i < m; ++i) {
      std::copy(xd.begin() + i * n + begin, xd.begin() + i * n + end, od.begin() + i * w);
    }
    if (tracked(in)) {
      record(Op::kSliceCols, out, [x, out, begin, m, n, w]() mutable {
        if (!x.requires_grad()) return;
        x.ensure_grad();
        auto g = out.grad();
        auto xg = x.grad();
        for (int64_t i = 0; i < m; ++i) {
          for (int64_t j = 0; j < w; ++j) xg[i * n + begin + j] += g[i * w + j];
        }
      });
    }
    return out;
  }

  Tensor<T> do_transpose(std::vector<Tensor<T>> in) {
    require(in.size() == 1, Op::kTranspose, "expects 1 input");
    Tensor<T> x = in[0];
    require(x.ndim() == 2, Op::kTranspose, "expects 2-D input, got " + shape_str(x.shape()));
    const int64_t m = x.shape()[0], n = x.shape()[1];
    Tensor<T> out = Tensor<T>::zeros({n, m});
    auto xd = x.data();
    auto od = out.data();
    for (int64_t i = 0; i < m; ++i) {
      for (int64_t j = 0; j < n; ++j) od[j * m + i] = xd[i * n + j];
    }
    if (tracked(in)) {
      record(Op::kTranspose, out, [x, out, m, n]() mutable {
        if (!x.requires_grad()) return;
        x.ensure_grad();
        auto g = out.grad();
        auto xg = x.grad();
        for (int64_t i = 0; i < m; ++i) {
          for (int64_t j = 0; j < n; ++j) xg[i * n + j] += g[j * m + i];
        }
      });
    }
    return out;
  }

  Tensor<T> do_mean(std::vector<Tensor<T>> in) {
    require(in.size() == 1, Op::kMean, "expects 1 input");
    Tensor<T> x = in[0];
    require(x.numel() > 0, Op::kMean, "mean of empty tensor");
    T sum = T(0);
    for (T v : x.data()) sum += v;
    const T scale = T(1) / static_cast<T>(x.numel());
    Tensor<T> out = Tensor<T>::scalar(sum * scale);
    if (tracked(in)) {
      record(Op::kMean, out, [x, out, scale]() mutable {
        if (!x.requires_grad()) return;
        x.ensure_grad();
        const T g = out.grad()[0] * scale;
        for (auto& v : x.grad()) v += g;
      });
    }
    return out;
  }

  // mean over non-ignored rows of (logsumexp(row) - row[target])
  Tensor<T> do_cross_entropy(std::vector<Tensor<T>> in, const std::vector<int32_t>& targets,
                             int32_t ignore_id) {
    require(in.size() == 1, Op::kCrossEntropy, "expects 1 input (logits)");
    Tensor<T> logits = in[0];
    require(logits.ndim() == 2, Op::kCrossEntropy,
            "logits must be 2-D, got " + shape_str(logits.shape()));
    const int64_t m = logits.shape()[0], n = logits.shape()[1];
    require(static_cast<int64_t>(targets.size()) == m, Op::kCrossEntropy,
            "got " + std::to_string(targets.size()) + " targets for " + std::to_string(m) +
                " rows");
    int64_t count = 0;
    for (int32_t t : targets) {
      if (t == ignore_id) continue;
      require(t >= 0 && t < n, Op::kCrossEntropy,
              "target " + std::to_string(t) + " out of range for " + std::to_string(n) +
                  " classes");
      ++count;
    }
    require(count > 0, Op::kCrossEntropy, "all targets ignored");
    auto ld = logits.data();
    T total = T(0);
    for (int64_t i = 0; i < m; ++i) {
      if (targets[i] == ignore_id) continue;
      const T* row = ld.data() + i * n;
      T mx = row[0];
      for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
      T sum = T(0);
      for (int64_t j = 0; j < n; ++j) sum += std::exp(row[j] - mx);
      total += mx + std::log(sum) - row[targets[i]];
    }
    Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(count));
    if (tracked(in)) {
      auto tgt = std::make_shared<std::vector<int32_t>>(targets);
      record(Op::kCrossEntropy, out, [logits, out, tgt, ignore_id, m, n, count]() mutable {
        if (!logits.requires_grad()) return;
        logits.ensure_grad();
        const T g = out.grad()[0] / static_cast<T>(count);
        auto ld2 = logits.data();
        auto lg = logits.grad();
        for (int64_t i = 0; i < m; ++i) {
          if ((*tgt)[i] == ignore_id) continue;
          const T* row = ld2.data() + i * n;
          T* grow = lg.data() + i * n;
          T mx = row[0];
          for (int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
          T sum = T(0);
          for (int64_t j = 0; j < n; ++j) sum += std::exp(row[j] - mx);
          const T inv = T(1) / sum;
          for (int64_t j = 0; j < n; ++j) {
            grow[j] += g * std::exp(row[j] - mx) * inv;
          }
          grow[(*tgt)[i]] -= g;
        }
      });
    }
    return out;
  }

  // mean over elements of max(x,0) - x*t + log1p(exp(-|x|))
  Tensor<T> do_bce_logits(std::vector<Tensor<T>> in, const std::vector<float>& targets) {
    require(in.size() == 1, Op::kBceLogits, "expects 1 input (logits)");
    Tensor<T> logits = in[0];
    const int64_t n = logits.numel();
    require(static_cast<int64_t>(targets.size()) == n, Op::kBceLogits,
            "got " + std::to_string(targets.size()) + " targets for " + std::to_string(n) +
                " logits");
    require(n > 0, Op::kBceLogits, "empty logits");
    auto ld = logits.data();
    T total = T(0);
    for (int64_t i = 0; i < n; ++i) {
      const T x = ld[i];
      const T t = static_cast<T>(targets[i]);
      total += std::max(x, T(0)) - x * t + std::log1p(std::exp(-std::abs(x)));
    }
    Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(n));
    if (tracked(in)) {
      auto tgt = std::make_shared<std::vector<float>>(targets);
      record(Op::kBceLogits, out, [logits, out, tgt, n]() mutable {
        if (!logits.requires_grad()) return;
        logits.ensure_grad();
        const T g = out.grad()[0] / static_cast<T>(n);
        auto ld2 = logits.data();
        auto lg = logits.grad();
        for (int64_t i = 0; i < n; ++i) {
          const T sig = T(1) / (T(1) + std::exp(-ld2[i]));
          lg[i] += g * (sig - static_cast<T>((*tgt)[i]));
        }
      });
    }
    return out;
  }

  std::vector<Node> nodes_;
  GradMode mode_;
  bool consumed_ = false;
};

using GraphF = Graph<float>;
using GraphD = Graph<double>;

}  // namespace mpath
