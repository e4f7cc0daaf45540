/* Copyright 2026 The clasp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef CLASP_AUTODIFF_HPP_
#define CLASP_AUTODIFF_HPP_

#include <cassert>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "clasp/kernels.hpp"
#include "clasp/tensor.hpp"

// Reverse-mode automatic differentiation over Tensor<T>. Ops build a graph
// of shared Node pointers; backward() walks it once in reverse topological
// order. With gradients globally disabled (NoGradGuard) ops compute values
// only and retain no graph, which is what evaluation and planning use.
namespace clasp::ad {

bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
  NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev_); }

 private:
  bool prev_;
};

template <class T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // allocated on first use during backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> inputs;
  std::function<void(Node<T>&)> backprop;

  void ensure_grad() {
    if (!grad.defined()) grad = Tensor<T>::zeros(value.shape());
  }
};

template <class T>
class Value {
 public:
  Value() = default;
  explicit Value(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  static Value leaf(Tensor<T> t, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(t);
    n->requires_grad = requires_grad;
    return Value(std::move(n));
  }

  static Value constant(Tensor<T> t) { return leaf(std::move(t), false); }

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& tensor() const { return node_->value; }
  Tensor<T>& tensor() { return node_->value; }
  Tensor<T>& grad() { return node_->grad; }
  const std::vector<int>& shape() const { return node_->value.shape(); }
  size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void zero_grad() { node_->grad = Tensor<T>(); }

  std::shared_ptr<Node<T>>& node() { return node_; }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

  T item() const {
    assert(size() == 1);
    return tensor()[0];
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Builds an op node. `back` is invoked with the finished node during the
// reverse sweep; it must accumulate (+=) into the inputs' grads.
template <class T, class F>
Value<T> make_op(Tensor<T> out, std::vector<Value<T>> ins, F&& back) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(out);
  if (grad_enabled()) {
    bool needs = false;
    for (const auto& v : ins) needs = needs || v.requires_grad();
    if (needs) {
      n->requires_grad = true;
      n->inputs.reserve(ins.size());
      for (auto& v : ins) n->inputs.push_back(v.node());
      n->backprop = std::forward<F>(back);
    }
  }
  return Value<T>(std::move(n));
}

// Reverse sweep from a scalar loss. Seeds d(loss)/d(loss) = 1.
template <class T>
void backward(const Value<T>& loss) {
  assert(loss.size() == 1);
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<Node<T>*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node<T>* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  loss.node()->ensure_grad();
  loss.node()->grad.fill(T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backprop && n->grad.defined()) n->backprop(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <class T>
Value<T> add(const Value<T>& a, const Value<T>& b) {
  assert(a.size() == b.size());
  Tensor<T> out(a.shape());
  const T* pa = a.tensor().data();
  const T* pb = b.tensor().data();
  T* po = out.data();
  kern::for_each_index(out.size(), [=](size_t i) { po[i] = pa[i] + pb[i]; });
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    for (int s = 0; s < 2; ++s) {
      auto& in = *n.inputs[s];
      if (!in.requires_grad) continue;
      in.ensure_grad();
      T* g = in.grad.data();
      const T* go = n.grad.data();
      for (size_t i = 0; i < n.grad.size(); ++i) g[i] += go[i];
    }
  });
}

template <class T>
Value<T> sub(const Value<T>& a, const Value<T>& b) {
  assert(a.size() == b.size());
  Tensor<T> out(a.shape());
  const T* pa = a.tensor().data();
  const T* pb = b.tensor().data();
  T* po = out.data();
  kern::for_each_index(out.size(), [=](size_t i) { po[i] = pa[i] - pb[i]; });
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    const T* go = n.grad.data();
    if (n.inputs[0]->requires_grad) {
      n.inputs[0]->ensure_grad();
      T* g = n.inputs[0]->grad.data();
      for (size_t i = 0; i < n.grad.size(); ++i) g[i] += go[i];
    }
    if (n.inputs[1]->requires_grad) {
      n.inputs[1]->ensure_grad();
      T* g = n.inputs[1]->grad.data();
      for (size_t i = 0; i < n.grad.size(); ++i) g[i] -= go[i];
    }
  });
}

template <class T>
Value<T> mul(const Value<T>& a, const Value<T>& b) {
  assert(a.size() == b.size());
  Tensor<T> out(a.shape());
  const T* pa = a.tensor().data();
  const T* pb = b.tensor().data();
  T* po = out.data();
  kern::for_each_index(out.size(), [=](size_t i) { po[i] = pa[i] * pb[i]; });
  Tensor<T> av = a.tensor(), bv = b.tensor();
  return make_op<T>(std::move(out), {a, b}, [av, bv](Node<T>& n) {
    const T* go = n.grad.data();
    if (n.inputs[0]->requires_grad) {
      n.inputs[0]->ensure_grad();
      T* g = n.inputs[0]->grad.data();
      const T* pb2 = bv.data();
      for (size_t i = 0; i < n.grad.size(); ++i) g[i] += go[i] * pb2[i];
    }
    if (n.inputs[1]->requires_grad) {
      n.inputs[1]->ensure_grad();
      T* g = n.inputs[1]->grad.data();
      const T* pa2 = av.data();
      for (size_t i = 0; i < n.grad.size(); ++i) g[i] += go[i] * pa2[i];
    }
  });
}

template <class T>
Value<T> scale(const Value<T>& a, T s) {
  Tensor<T> out(a.shape());
  const T* pa = a.tensor().data();
  T* po = out.data();
  kern::for_each_index(out.size(), [=](size_t i) { po[i] = pa[i] * s; });
  return make_op<T>(std::move(out), {a}, [s](Node<T>& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    T* g = n.inputs[0]->grad.data();
    const T* go = n.grad.data();
    for (size_t i = 0; i < n.grad.size(); ++i) g[i] += go[i] * s;
  });
}

template <class T>
Value<T> add_scalar(const Value<T>& a, T s) {
  Tensor<T> out(a.shape());
  const T* pa = a.tensor().data();
  T* po = out.data();
  kern::for_each_index(out.size(), [=](size_t i) { po[i] = pa[i] + s; });
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    T* g = n.inputs[0]->grad.data();
    const T* go = n.grad.data();
    for (size_t i = 0; i < n.grad.size(); ++i) g[i] += go[i];
  });
}

template <class T>
Value<T> square(const Value<T>& a) {
  return mul(a, a);
}

template <class T>
Value<T> exp_op(const Value<T>& a) {
  Tensor<T> out(a.shape());
  const T* pa = a.tensor().data();
  T* po = out.data();
  kern::for_each_index(out.size(), [=](size_t i) { po[i] = std::exp(pa[i]); });
  Tensor<T> saved = out;
  return make_op<T>(std::move(out), {a}, [saved](Node<T>& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    T* g = n.inputs[0]->grad.data();
    const T* go = n.grad.data();
    const T* y = saved.data();
    for (size_t i = 0; i < n.grad.size(); ++i) g[i] += go[i] * y[i];
  });
}

template <class T>
Value<T> tanh_op(const Value<T>& a) {
  Tensor<T> out(a.shape());
  const T* pa = a.tensor().data();
  T* po = out.data();
  kern::for_each_index(out.size(), [=](size_t i) { po[i] = std::tanh(pa[i]); });
  Tensor<T> saved = out;
  return make_op<T>(std::move(out), {a}, [saved](Node<T>& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    T* g = n.inputs[0]->grad.data();
    const T* go = n.grad.data();
    const T* y = saved.data();
    for (size_t i = 0; i < n.grad.size(); ++i) g[i] += go[i] * (T(1) - y[i] * y[i]);
  });
}

template <class T>
Value<T> sigmoid(const Value<T>& a) {
  Tensor<T> out(a.shape());
  const T* pa = a.tensor().data();
  T* po = out.data();
  kern::for_each_index(out.size(), [=](size_t i) { po[i] = T(1) / (T(1) + std::exp(-pa[i])); });
  Tensor<T> saved = out;
  return make_op<T>(std::move(out), {a}, [saved](Node<T>& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    T* g = n.inputs[0]->grad.data();
    const T* go = n.grad.data();
    const T* y = saved.data();
    for (size_t i = 0; i < n.grad.size(); ++i) g[i] += go[i] * y[i] * (T(1) - y[i]);
  });
}

template <class T>
Value<T> leaky_relu(const Value<T>& a, T slope) {
  Tensor<T> out(a.shape());
  const T* pa = a.tensor().data();
  T* po = out.data();
  kern::for_each_index(out.size(), [=](size_t i) { po[i] = pa[i] > T(0) ? pa[i] : slope * pa[i]; });
  Tensor<T> saved = a.tensor();
  return make_op<T>(std::move(out), {a}, [saved, slope](Node<T>& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    T* g = n.inputs[0]->grad.data();
    const T* go = n.grad.data();
    const T* x = saved.data();
    for (size_t i = 0; i < n.grad.size(); ++i) g[i] += go[i] * (x[i] > T(0) ? T(1) : slope);
  });
}

// Differentiable clamp: gradient passes inside the interval, zero outside.
template <class T>
Value<T> clamp(const Value<T>& a, T lo, T hi) {
  Tensor<T> out(a.shape());
  const T* pa = a.tensor().data();
  T* po = out.data();
  kern::for_each_index(out.size(), [=](size_t i) { po[i] = pa[i] < lo ? lo : (pa[i] > hi ? hi : pa[i]); });
  Tensor<T> saved = a.tensor();
  return make_op<T>(std::move(out), {a}, [saved, lo, hi](Node<T>& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    T* g = n.inputs[0]->grad.data();
    const T* go = n.grad.data();
    const T* x = saved.data();
    for (size_t i = 0; i < n.grad.size(); ++i)
      if (x[i] >= lo && x[i] <= hi) g[i] += go[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <class T>
Value<T> sum(const Value<T>& a) {
  T acc = T(0);
  const T* pa = a.tensor().data();
  for (size_t i = 0; i < a.size(); ++i) acc += pa[i];
  return make_op<T>(Tensor<T>::scalar(acc), {a}, [](Node<T>& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    T* g = n.inputs[0]->grad.data();
    const T go = n.grad[0];
    for (size_t i = 0; i < n.inputs[0]->grad.size(); ++i) g[i] += go;
  });
}

// Sum of squared differences against a constant target.
template <class T>
Value<T> sse(const Value<T>& a, const Tensor<T>& target) {
  assert(a.size() == target.size());
  T acc = T(0);
  const T* pa = a.tensor().data();
  const T* pt = target.data();
  for (size_t i = 0; i < a.size(); ++i) {
    const T d = pa[i] - pt[i];
    acc += d * d;
  }
  Tensor<T> av = a.tensor();
  return make_op<T>(Tensor<T>::scalar(acc), {a}, [av, target](Node<T>& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    T* g = n.inputs[0]->grad.data();
    const T go = n.grad[0];
    const T* x = av.data();
    const T* t = target.data();
    for (size_t i = 0; i < n.inputs[0]->grad.size(); ++i) g[i] += go * T(2) * (x[i] - t[i]);
  });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <class T>
Value<T> reshape(const Value<T>& a, std::vector<int> shape) {
  Tensor<T> out = a.tensor().reshaped(std::move(shape));
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    T* g = n.inputs[0]->grad.data();
    const T* go = n.grad.data();
    for (size_t i = 0; i < n.grad.size(); ++i) g[i] += go[i];
  });
}

// Concatenation along the last (feature) axis of 2-D [B, F] values.
template <class T>
Value<T> concat_cols(const std::vector<Value<T>>& parts) {
  assert(!parts.empty());
  const int b = parts[0].shape()[0];
  int total = 0;
  for (const auto& p : parts) {
    assert(p.shape()[0] == b);
    total += p.shape()[1];
  }
  Tensor<T> out({b, total});
  int off = 0;
  for (const auto& p : parts) {
    const int f = p.shape()[1];
    const T* src = p.tensor().data();
    for (int r = 0; r < b; ++r)
      for (int c = 0; c < f; ++c) out[static_cast<size_t>(r) * total + off + c] = src[static_cast<size_t>(r) * f + c];
    off += f;
  }
  std::vector<int> widths;
  for (const auto& p : parts) widths.push_back(p.shape()[1]);
  return make_op<T>(std::move(out), parts, [b, total, widths](Node<T>& n) {
    const T* go = n.grad.data();
    int off2 = 0;
    for (size_t s = 0; s < n.inputs.size(); ++s) {
      const int f = widths[s];
      auto& in = *n.inputs[s];
      if (in.requires_grad) {
        in.ensure_grad();
        T* g = in.grad.data();
        for (int r = 0; r < b; ++r)
          for (int c = 0; c < f; ++c) g[static_cast<size_t>(r) * f + c] += go[static_cast<size_t>(r) * total + off2 + c];
      }
      off2 += f;
    }
  });
}

// Contiguous slice along dim 0, any rank.
template <class T>
Value<T> slice_dim0(const Value<T>& a, int start, int len) {
  const auto& s = a.shape();
  assert(start >= 0 && start + len <= s[0]);
  size_t stride = 1;
  for (size_t i = 1; i < s.size(); ++i) stride *= s[i];
  std::vector<int> out_shape = s;
  out_shape[0] = len;
  Tensor<T> out(out_shape);
  const T* src = a.tensor().data() + static_cast<size_t>(start) * stride;
  std::copy(src, src + static_cast<size_t>(len) * stride, out.data());
  return make_op<T>(std::move(out), {a}, [start, stride](Node<T>& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    T* g = n.inputs[0]->grad.data() + static_cast<size_t>(start) * stride;
    const T* go = n.grad.data();
    for (size_t i = 0; i < n.grad.size(); ++i) g[i] += go[i];
  });
}

template <class T>
Value<T> slice_cols(const Value<T>& a, int start, int len) {
  const int b = a.shape()[0];
  const int f = a.shape()[1];
  assert(start >= 0 && start + len <= f);
  Tensor<T> out({b, len});
  const T* src = a.tensor().data();
  for (int r = 0; r < b; ++r)
    for (int c = 0; c < len; ++c) out[static_cast<size_t>(r) * len + c] = src[static_cast<size_t>(r) * f + start + c];
  return make_op<T>(std::move(out), {a}, [b, f, start, len](Node<T>& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    T* g = n.inputs[0]->grad.data();
    const T* go = n.grad.data();
    for (int r = 0; r < b; ++r)
      for (int c = 0; c < len; ++c) g[static_cast<size_t>(r) * f + start + c] += go[static_cast<size_t>(r) * len + c];
  });
}

// ---------------------------------------------------------------------------
// Linear algebra ops
// ---------------------------------------------------------------------------

// y[B,O] = x[B,I] * w[I,O] + bias[O]
template <class T>
Value<T> linear(const Value<T>& x, const Value<T>& w, const Value<T>& bias) {
  const int b = x.shape()[0], in = x.shape()[1], out_f = w.shape()[1];
  assert(w.shape()[0] == in && bias.shape()[0] == out_f);
  Tensor<T> out({b, out_f});
  kern::matmul_nn(x.tensor().data(), w.tensor().data(), out.data(), b, in, out_f);
  {
    T* po = out.data();
    const T* pb = bias.tensor().data();
    for (int r = 0; r < b; ++r)
      for (int c = 0; c < out_f; ++c) po[static_cast<size_t>(r) * out_f + c] += pb[c];
  }
  Tensor<T> xv = x.tensor(), wv = w.tensor();
  return make_op<T>(std::move(out), {x, w, bias}, [b, in, out_f, xv, wv](Node<T>& n) {
    const T* go = n.grad.data();
    if (n.inputs[0]->requires_grad) {  // dx = dy * w^T
      n.inputs[0]->ensure_grad();
      Tensor<T> wt({out_f, in});
      kern::transpose(wv.data(), wt.data(), in, out_f);
      Tensor<T> dx({b, in});
      kern::matmul_nn(go, wt.data(), dx.data(), b, out_f, in);
      T* g = n.inputs[0]->grad.data();
      for (size_t i = 0; i < dx.size(); ++i) g[i] += dx[i];
    }
    if (n.inputs[1]->requires_grad) {  // dw = x^T * dy
      n.inputs[1]->ensure_grad();
      Tensor<T> dw({in, out_f});
      kern::matmul_tn(xv.data(), go, dw.data(), in, b, out_f);
      T* g = n.inputs[1]->grad.data();
      for (size_t i = 0; i < dw.size(); ++i) g[i] += dw[i];
    }
    if (n.inputs[2]->requires_grad) {  // db = column sums of dy
      n.inputs[2]->ensure_grad();
      T* g = n.inputs[2]->grad.data();
      for (int r = 0; r < b; ++r)
        for (int c = 0; c < out_f; ++c) g[c] += go[static_cast<size_t>(r) * out_f + c];
    }
  });
}

// y[M,N] = a[M,K] * b[K,N]
template <class T>
Value<T> matmul(const Value<T>& a, const Value<T>& b) {
  const int m = a.shape()[0], k = a.shape()[1], n2 = b.shape()[1];
  assert(b.shape()[0] == k);
  Tensor<T> out({m, n2});
  kern::matmul_nn(a.tensor().data(), b.tensor().data(), out.data(), m, k, n2);
  Tensor<T> av = a.tensor(), bv = b.tensor();
  return make_op<T>(std::move(out), {a, b}, [m, k, n2, av, bv](Node<T>& n) {
    const T* go = n.grad.data();
    if (n.inputs[0]->requires_grad) {
      n.inputs[0]->ensure_grad();
      Tensor<T> bt({n2, k});
      kern::transpose(bv.data(), bt.data(), k, n2);
      Tensor<T> da({m, k});
      kern::matmul_nn(go, bt.data(), da.data(), m, n2, k);
      T* g = n.inputs[0]->grad.data();
      for (size_t i = 0; i < da.size(); ++i) g[i] += da[i];
    }
    if (n.inputs[1]->requires_grad) {
      n.inputs[1]->ensure_grad();
      Tensor<T> db({k, n2});
      kern::matmul_tn(av.data(), go, db.data(), k, m, n2);
      T* g = n.inputs[1]->grad.data();
      for (size_t i = 0; i < db.size(); ++i) g[i] += db[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Convolution (NCHW, square kernel) and upsampling
// ---------------------------------------------------------------------------

// x[B,C,H,W], w[OC,C,k,k], bias[OC] -> y[B,OC,OH,OW]
template <class T>
Value<T> conv2d(const Value<T>& x, const Value<T>& w, const Value<T>& bias, int stride, int pad) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  kern::ConvGeom g{xs[0], xs[1], xs[2], xs[3], ws[2], stride, pad};
  assert(ws[1] == xs[1]);
  const int oc = ws[0], oh = g.out_h(), ow = g.out_w();
  const size_t rows = g.col_rows(), cols = g.col_cols();

  Tensor<T> col({static_cast<int>(rows), static_cast<int>(cols)});
  kern::im2col(x.tensor().data(), col.data(), g);
  // Flatten weights to [cols, oc] so the product is a plain matmul.
  Tensor<T> wt({static_cast<int>(cols), oc});
  kern::transpose(w.tensor().data(), wt.data(), oc, static_cast<int>(cols));
  Tensor<T> rows_out({static_cast<int>(rows), oc});
  kern::matmul_nn(col.data(), wt.data(), rows_out.data(), static_cast<int>(rows), static_cast<int>(cols), oc);

  // [B*OH*OW, OC] -> [B, OC, OH, OW], adding bias.
  Tensor<T> out({g.batch, oc, oh, ow});
  {
    const T* src = rows_out.data();
    const T* pb = bias.tensor().data();
    T* dst = out.data();
    kern::for_each_index(static_cast<size_t>(g.batch) * oc * oh * ow, [=](size_t i) {
      const size_t per_img = static_cast<size_t>(oc) * oh * ow;
      const size_t b = i / per_img;
      const size_t rem = i % per_img;
      const size_t c = rem / (static_cast<size_t>(oh) * ow);
      const size_t pix = rem % (static_cast<size_t>(oh) * ow);
      dst[i] = src[(b * oh * ow + pix) * oc + c] + pb[c];
    });
  }

  return make_op<T>(std::move(out), {x, w, bias}, [g, oc, oh, ow, col, wt](Node<T>& n) {
    const size_t rows2 = g.col_rows(), cols2 = g.col_cols();
    // Rearrange dy to row-major [rows, oc].
    Tensor<T> dy_rows({static_cast<int>(rows2), oc});
    {
      const T* go = n.grad.data();
      T* dst = dy_rows.data();
      kern::for_each_index(rows2 * static_cast<size_t>(oc), [=](size_t i) {
        const size_t r = i / oc, c = i % oc;
        const size_t b = r / (static_cast<size_t>(oh) * ow);
        const size_t pix = r % (static_cast<size_t>(oh) * ow);
        dst[i] = go[(b * oc + c) * oh * ow + pix];
      });
    }
    if (n.inputs[0]->requires_grad) {  // dx = col2im(dy_rows * wt^T)
      n.inputs[0]->ensure_grad();
      Tensor<T> wtt({oc, static_cast<int>(cols2)});
      kern::transpose(wt.data(), wtt.data(), static_cast<int>(cols2), oc);
      Tensor<T> dcol({static_cast<int>(rows2), static_cast<int>(cols2)});
      kern::matmul_nn(dy_rows.data(), wtt.data(), dcol.data(), static_cast<int>(rows2), oc, static_cast<int>(cols2));
      kern::col2im(dcol.data(), n.inputs[0]->grad.data(), g);
    }
    if (n.inputs[1]->requires_grad) {  // dw^T = col^T * dy_rows
      n.inputs[1]->ensure_grad();
      Tensor<T> dwt({static_cast<int>(cols2), oc});
      kern::matmul_tn(col.data(), dy_rows.data(), dwt.data(), static_cast<int>(cols2), static_cast<int>(rows2), oc);
      T* g2 = n.inputs[1]->grad.data();
      // Transpose back into [oc, cols].
      for (size_t c = 0; c < cols2; ++c)
        for (int o = 0; o < oc; ++o) g2[static_cast<size_t>(o) * cols2 + c] += dwt[c * static_cast<size_t>(oc) + o];
    }
    if (n.inputs[2]->requires_grad) {  // db = sums over rows
      n.inputs[2]->ensure_grad();
      T* g2 = n.inputs[2]->grad.data();
      const T* src = dy_rows.data();
      for (size_t r = 0; r < rows2; ++r)
        for (int c = 0; c < oc; ++c) g2[c] += src[r * oc + c];
    }
  });
}

template <class T>
Value<T> upsample2x(const Value<T>& x) {
  const auto& s = x.shape();
  const int planes = s[0] * s[1], h = s[2], w = s[3];
  Tensor<T> out({s[0], s[1], 2 * h, 2 * w});
  kern::upsample2x(x.tensor().data(), out.data(), planes, h, w);
  return make_op<T>(std::move(out), {x}, [planes, h, w](Node<T>& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    kern::upsample2x_grad(n.grad.data(), n.inputs[0]->grad.data(), planes, h, w);
  });
}

// Concatenation along the channel axis of 4-D [B,C,H,W] values.
template <class T>
Value<T> concat_channels(const Value<T>& a, const Value<T>& b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  assert(as[0] == bs[0] && as[2] == bs[2] && as[3] == bs[3]);
  const int bn = as[0], ca = as[1], cb = bs[1], h = as[2], w = as[3];
  const size_t plane = static_cast<size_t>(h) * w;
  Tensor<T> out({bn, ca + cb, h, w});
  const T* pa = a.tensor().data();
  const T* pb = b.tensor().data();
  T* po = out.data();
  for (int i = 0; i < bn; ++i) {
    std::copy(pa + static_cast<size_t>(i) * ca * plane, pa + static_cast<size_t>(i + 1) * ca * plane,
              po + static_cast<size_t>(i) * (ca + cb) * plane);
    std::copy(pb + static_cast<size_t>(i) * cb * plane, pb + static_cast<size_t>(i + 1) * cb * plane,
              po + static_cast<size_t>(i) * (ca + cb) * plane + static_cast<size_t>(ca) * plane);
  }
  return make_op<T>(std::move(out), {a, b}, [bn, ca, cb, plane](Node<T>& n) {
    const T* go = n.grad.data();
    if (n.inputs[0]->requires_grad) {
      n.inputs[0]->ensure_grad();
      T* g = n.inputs[0]->grad.data();
      for (int i = 0; i < bn; ++i)
        for (size_t j = 0; j < static_cast<size_t>(ca) * plane; ++j)
          g[static_cast<size_t>(i) * ca * plane + j] += go[static_cast<size_t>(i) * (ca + cb) * plane + j];
    }
    if (n.inputs[1]->requires_grad) {
      n.inputs[1]->ensure_grad();
      T* g = n.inputs[1]->grad.data();
      for (int i = 0; i < bn; ++i)
        for (size_t j = 0; j < static_cast<size_t>(cb) * plane; ++j)
          g[static_cast<size_t>(i) * cb * plane + j] +=
              go[static_cast<size_t>(i) * (ca + cb) * plane + static_cast<size_t>(ca) * plane + j];
    }
  });
}

}  // namespace clasp::ad

#endif  // CLASP_AUTODIFF_HPP_
