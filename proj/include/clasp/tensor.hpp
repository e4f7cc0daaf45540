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
#ifndef CLASP_TENSOR_HPP_
#define CLASP_TENSOR_HPP_

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <vector>

#include "clasp/rng.hpp"

namespace clasp {

// Dense row-major tensor. Copies are shallow (shared storage); use clone()
// for a deep copy. reshaped() aliases the same storage.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<T>>(count(shape_), T(0))) {}

  Tensor(std::vector<int> shape, std::vector<T> values)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<T>>(std::move(values))) {
    assert(data_->size() == count(shape_));
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, T value) {
    Tensor t(std::move(shape));
    for (auto& v : *t.data_) v = value;
    return t;
  }

  static Tensor scalar(T value) { return full({1}, value); }

  // i.i.d. uniform in [lo, hi).
  static Tensor uniform(std::vector<int> shape, Rng& rng, T lo, T hi) {
    Tensor t(std::move(shape));
    for (auto& v : *t.data_) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }

  static Tensor normal(std::vector<int> shape, Rng& rng, T mean = T(0), T stddev = T(1)) {
    Tensor t(std::move(shape));
    for (auto& v : *t.data_) v = static_cast<T>(rng.normal(mean, stddev));
    return t;
  }

  bool defined() const { return static_cast<bool>(data_); }
  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  size_t size() const { return data_ ? data_->size() : 0; }

  T* data() { return data_->data(); }
  const T* data() const { return data_->data(); }
  T& operator[](size_t i) { return (*data_)[i]; }
  const T& operator[](size_t i) const { return (*data_)[i]; }

  // Aliases the same storage under a new shape of equal element count.
  Tensor reshaped(std::vector<int> shape) const {
    assert(count(shape) == size());
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = std::make_shared<std::vector<T>>(*data_);
    return t;
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> t(shape_);
    for (size_t i = 0; i < size(); ++i) t[i] = static_cast<U>((*data_)[i]);
    return t;
  }

  void fill(T value) {
    for (auto& v : *data_) v = value;
  }

  bool same_storage(const Tensor& other) const { return data_ == other.data_; }

  static size_t count(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return n;
  }

 private:
  std::vector<int> shape_;
  std::shared_ptr<std::vector<T>> data_;

  template <class U>
  friend class Tensor;
};

}  // namespace clasp

#endif  // CLASP_TENSOR_HPP_
