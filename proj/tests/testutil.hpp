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
#ifndef CLASP_TESTS_TESTUTIL_HPP_
#define CLASP_TESTS_TESTUTIL_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "clasp/autodiff.hpp"
#include "clasp/tensor.hpp"

namespace clasp::testutil {

// Central-difference gradient check in double precision. `forward` must
// rebuild the graph from the given leaves on every call. Returns the worst
// relative error across all leaf elements.
inline double grad_check(const std::function<ad::Value<double>()>& forward,
                         std::vector<ad::Value<double>> leaves, double h = 1e-5) {
  auto loss = forward();
  for (auto& l : leaves) l.zero_grad();
  ad::backward(loss);

  double worst = 0.0;
  for (auto& leaf : leaves) {
    Tensor<double>& t = leaf.tensor();
    const Tensor<double>& g = leaf.grad();
    for (size_t i = 0; i < t.size(); ++i) {
      const double orig = t[i];
      t[i] = orig + h;
      const double fp = forward().item();
      t[i] = orig - h;
      const double fm = forward().item();
      t[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = g.defined() ? g[i] : 0.0;
      const double rel = std::fabs(analytic - numeric) / std::max({1.0, std::fabs(numeric), std::fabs(analytic)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace clasp::testutil

#endif  // CLASP_TESTS_TESTUTIL_HPP_
