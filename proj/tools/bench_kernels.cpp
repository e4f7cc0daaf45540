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
// Times the parallel kernels against their serial reference implementations
// on training-shaped workloads and reports the speedup per kernel.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "clasp/kernels.hpp"
#include "clasp/rng.hpp"
#include "clasp/tensor.hpp"

namespace {

using clasp::Rng;
using clasp::Tensor;
namespace kern = clasp::kern;

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

struct Case {
  std::string name;
  std::function<void()> serial;
  std::function<void()> parallel;
  int reps;
};

}  // namespace

int main() {
  Rng rng(7);
  std::vector<Case> cases;

  // Encoder-sized matmul: flattened conv output against the fc weights.
  {
    const int m = 16 * 15, k = 256, n = 128;
    auto a = Tensor<float>::uniform({m, k}, rng, -1.f, 1.f);
    auto b = Tensor<float>::uniform({k, n}, rng, -1.f, 1.f);
    auto c = Tensor<float>::zeros({m, n});
    cases.push_back({"matmul_nn 240x256x128",
                     [=]() mutable { kern::matmul_nn_serial(a.data(), b.data(), c.data(), m, k, n); },
                     [=]() mutable { kern::matmul_nn_omp(a.data(), b.data(), c.data(), m, k, n); }, 50});
  }

  // LSTM-sized matmul.
  {
    const int m = 16, k = 256, n = 1024;
    auto a = Tensor<float>::uniform({m, k}, rng, -1.f, 1.f);
    auto b = Tensor<float>::uniform({k, n}, rng, -1.f, 1.f);
    auto c = Tensor<float>::zeros({m, n});
    cases.push_back({"matmul_nn 16x256x1024",
                     [=]() mutable { kern::matmul_nn_serial(a.data(), b.data(), c.data(), m, k, n); },
                     [=]() mutable { kern::matmul_nn_omp(a.data(), b.data(), c.data(), m, k, n); }, 50});
  }

  // Weight-gradient matmul.
  {
    const int m = 256, k = 240, n = 128;
    auto a = Tensor<float>::uniform({k, m}, rng, -1.f, 1.f);
    auto b = Tensor<float>::uniform({k, n}, rng, -1.f, 1.f);
    auto c = Tensor<float>::zeros({m, n});
    cases.push_back({"matmul_tn 256x240x128",
                     [=]() mutable { kern::matmul_tn_serial(a.data(), b.data(), c.data(), m, k, n); },
                     [=]() mutable { kern::matmul_tn_omp(a.data(), b.data(), c.data(), m, k, n); }, 50});
  }

  // First conv layer of the frame encoder at batch 16.
  {
    kern::ConvGeom g{16, 3, 32, 32, 3, 2, 1};
    auto x = Tensor<float>::uniform({16, 3, 32, 32}, rng, 0.f, 1.f);
    auto col = Tensor<float>::zeros({static_cast<int>(g.col_rows()), static_cast<int>(g.col_cols())});
    cases.push_back({"im2col 16x3x32x32 k3s2",
                     [=]() mutable { kern::im2col_serial(x.data(), col.data(), g); },
                     [=]() mutable { kern::im2col_omp(x.data(), col.data(), g); }, 50});
    auto dx = Tensor<float>::zeros({16, 3, 32, 32});
    cases.push_back({"col2im 16x3x32x32 k3s2",
                     [=]() mutable { kern::col2im_serial(col.data(), dx.data(), g); },
                     [=]() mutable { kern::col2im_omp(col.data(), dx.data(), g); }, 50});
  }

  // Decoder upsampling at batch 16.
  {
    const int planes = 16 * 32, h = 8, w = 8;
    auto x = Tensor<float>::uniform({planes, h, w}, rng, -1.f, 1.f);
    auto y = Tensor<float>::zeros({planes, 2 * h, 2 * w});
    cases.push_back({"upsample2x 512x8x8",
                     [=]() mutable { kern::upsample2x_serial(x.data(), y.data(), planes, h, w); },
                     [=]() mutable { kern::upsample2x_omp(x.data(), y.data(), planes, h, w); }, 200});
  }

  std::printf("threads: %d\n", kern::thread_count());
  std::printf("%-24s %12s %12s %9s\n", "kernel", "serial(ms)", "parallel(ms)", "speedup");
  for (auto& c : cases) {
    const double ts = time_ms(c.serial, c.reps);
    const double tp = time_ms(c.parallel, c.reps);
    std::printf("%-24s %12.3f %12.3f %8.2fx\n", c.name.c_str(), ts, tp, ts / tp);
  }
  return 0;
}
