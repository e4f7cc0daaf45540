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
#ifndef CLASP_NN_HPP_
#define CLASP_NN_HPP_

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "clasp/autodiff.hpp"
#include "clasp/common.hpp"
#include "clasp/rng.hpp"
#include "clasp/tensor.hpp"

namespace clasp::nn {

constexpr double kLeakySlope = 0.2;

// Ordered collection of named trainable leaves. Construction order is the
// serialization order, so model wiring must be deterministic.
template <class T>
class ParamRegistry {
 public:
  struct Entry {
    std::string name;
    ad::Value<T> value;
  };

  ad::Value<T> add(std::string name, Tensor<T> init) {
    for (const auto& e : entries_)
      if (e.name == name) throw ConfigError("duplicate parameter name: " + name);
    auto v = ad::Value<T>::leaf(std::move(init), true);
    entries_.push_back({std::move(name), v});
    return v;
  }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  ad::Value<T>* find(const std::string& name) {
    for (auto& e : entries_)
      if (e.name == name) return &e.value;
    return nullptr;
  }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) e.value.zero_grad();
  }

 private:
  std::vector<Entry> entries_;
};

// Fan-in uniform init, bound = 1/sqrt(fan_in).
template <class T>
Tensor<T> fan_in_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
  const T bound = T(1) / std::sqrt(T(fan_in));
  return Tensor<T>::uniform(std::move(shape), rng, -bound, bound);
}

template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(ParamRegistry<T>& reg, const std::string& name, int in, int out, Rng& rng) {
    w_ = reg.add(name + ".w", fan_in_uniform<T>({in, out}, in, rng));
    b_ = reg.add(name + ".b", fan_in_uniform<T>({out}, in, rng));
  }

  ad::Value<T> forward(const ad::Value<T>& x) const { return ad::linear(x, w_, b_); }

 private:
  ad::Value<T> w_, b_;
};

template <class T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamRegistry<T>& reg, const std::string& name, int in_c, int out_c, int kernel, int stride, int pad,
         Rng& rng)
      : stride_(stride), pad_(pad) {
    const int fan_in = in_c * kernel * kernel;
    w_ = reg.add(name + ".w", fan_in_uniform<T>({out_c, in_c, kernel, kernel}, fan_in, rng));
    b_ = reg.add(name + ".b", fan_in_uniform<T>({out_c}, fan_in, rng));
  }

  ad::Value<T> forward(const ad::Value<T>& x) const { return ad::conv2d(x, w_, b_, stride_, pad_); }

 private:
  ad::Value<T> w_, b_;
  int stride_ = 1, pad_ = 0;
};

// Fully connected stack with leaky-ReLU between layers and a linear head.
template <class T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamRegistry<T>& reg, const std::string& name, int in, const std::vector<int>& hidden, int out, Rng& rng) {
    int prev = in;
    for (size_t i = 0; i < hidden.size(); ++i) {
      layers_.emplace_back(reg, name + ".fc" + std::to_string(i), prev, hidden[i], rng);
      prev = hidden[i];
    }
    head_ = Linear<T>(reg, name + ".head", prev, out, rng);
  }

  ad::Value<T> forward(const ad::Value<T>& x) const {
    ad::Value<T> h = x;
    for (const auto& l : layers_) h = ad::leaky_relu(l.forward(h), T(kLeakySlope));
    return head_.forward(h);
  }

 private:
  std::vector<Linear<T>> layers_;
  Linear<T> head_;
};

// Single LSTM cell with fused gates, order [i, f, g, o]. Forget-gate bias
// starts at 1 so early training does not flush the cell state.
template <class T>
class LstmCell {
 public:
  struct State {
    ad::Value<T> h, c;
  };

  LstmCell() = default;
  LstmCell(ParamRegistry<T>& reg, const std::string& name, int input, int hidden, Rng& rng) : hidden_(hidden) {
    wx_ = reg.add(name + ".wx", fan_in_uniform<T>({input, 4 * hidden}, hidden, rng));
    wh_ = reg.add(name + ".wh", fan_in_uniform<T>({hidden, 4 * hidden}, hidden, rng));
    Tensor<T> b = Tensor<T>::zeros({4 * hidden});
    for (int i = hidden; i < 2 * hidden; ++i) b[i] = T(1);
    b_ = reg.add(name + ".b", std::move(b));
  }

  State initial_state(int batch) const {
    return {ad::Value<T>::constant(Tensor<T>::zeros({batch, hidden_})),
            ad::Value<T>::constant(Tensor<T>::zeros({batch, hidden_}))};
  }

  State step(const ad::Value<T>& x, const State& s) const {
    auto gates = ad::add(ad::linear(x, wx_, b_), ad::matmul(s.h, wh_));
    auto i = ad::sigmoid(ad::slice_cols(gates, 0, hidden_));
    auto f = ad::sigmoid(ad::slice_cols(gates, hidden_, hidden_));
    auto g = ad::tanh_op(ad::slice_cols(gates, 2 * hidden_, hidden_));
    auto o = ad::sigmoid(ad::slice_cols(gates, 3 * hidden_, hidden_));
    auto c = ad::add(ad::mul(f, s.c), ad::mul(i, g));
    auto h = ad::mul(o, ad::tanh_op(c));
    return {h, c};
  }

  int hidden_size() const { return hidden_; }

 private:
  ad::Value<T> wx_, wh_, b_;
  int hidden_ = 0;
};

// Adam with bias correction. Moment buffers are created lazily on the first
// step so a freshly restored registry can adopt checkpointed state first.
template <class T>
class Adam {
 public:
  explicit Adam(ParamRegistry<T>& reg, T lr, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
      : reg_(&reg), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step() {
    auto& entries = reg_->entries();
    if (m_.empty()) {
      for (auto& e : entries) {
        m_.push_back(Tensor<T>::zeros(e.value.shape()));
        v_.push_back(Tensor<T>::zeros(e.value.shape()));
      }
    }
    ++t_;
    const T bc1 = T(1) - std::pow(beta1_, T(t_));
    const T bc2 = T(1) - std::pow(beta2_, T(t_));
    for (size_t p = 0; p < entries.size(); ++p) {
      auto& val = entries[p].value;
      if (!val.grad().defined()) continue;
      T* w = val.tensor().data();
      const T* g = val.grad().data();
      T* m = m_[p].data();
      T* v = v_[p].data();
      const size_t n = val.size();
      for (size_t i = 0; i < n; ++i) {
        m[i] = beta1_ * m[i] + (T(1) - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (T(1) - beta2_) * g[i] * g[i];
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  void zero_grad() { reg_->zero_grad(); }

  int64_t t() const { return t_; }
  void set_t(int64_t t) { t_ = t; }
  std::vector<Tensor<T>>& m() { return m_; }
  std::vector<Tensor<T>>& v() { return v_; }
  T lr() const { return lr_; }

 private:
  ParamRegistry<T>* reg_;
  T lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace clasp::nn

#endif  // CLASP_NN_HPP_
