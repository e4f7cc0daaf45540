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
#include "clasp/kernels.hpp"

#include <cmath>
#include <cstring>
#include <vector>

#include "clasp/rng.hpp"
#include "clasp/tensor.hpp"
#include "doctest.h"

using clasp::Rng;
using clasp::Tensor;
namespace kern = clasp::kern;

namespace {

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
  return worst;
}

// Direct convolution, written independently of the im2col path.
void conv_naive(const Tensor<double>& x, const Tensor<double>& w, Tensor<double>& y, const kern::ConvGeom& g,
                int out_c) {
  const int oh = g.out_h(), ow = g.out_w();
  for (int b = 0; b < g.batch; ++b)
    for (int oc = 0; oc < out_c; ++oc)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          for (int c = 0; c < g.in_c; ++c)
            for (int ky = 0; ky < g.kernel; ++ky)
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int iy = oy * g.stride - g.pad + ky;
                const int ix = ox * g.stride - g.pad + kx;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                const double xv = x[((static_cast<size_t>(b) * g.in_c + c) * g.in_h + iy) * g.in_w + ix];
                const double wv = w[((static_cast<size_t>(oc) * g.in_c + c) * g.kernel + ky) * g.kernel + kx];
                acc += xv * wv;
              }
          y[((static_cast<size_t>(b) * out_c + oc) * oh + oy) * ow + ox] = acc;
        }
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

TEST_CASE("matmul omp matches serial") {
  Rng rng(23);
  const int m = 17, k = 31, n = 23;
  auto a = Tensor<double>::uniform({m, k}, rng, -1.0, 1.0);
  auto b = Tensor<double>::uniform({k, n}, rng, -1.0, 1.0);
  auto cs = Tensor<double>::zeros({m, n});
  auto cp = Tensor<double>::zeros({m, n});
  kern::matmul_nn_serial(a.data(), b.data(), cs.data(), m, k, n);
  kern::matmul_nn_omp(a.data(), b.data(), cp.data(), m, k, n);
  CHECK(max_abs_diff(cs, cp) < 1e-12);
}

TEST_CASE("matmul_tn omp matches serial and the explicit transpose") {
  Rng rng(29);
  const int m = 13, k = 19, n = 11;
  auto a = Tensor<double>::uniform({k, m}, rng, -1.0, 1.0);
  auto b = Tensor<double>::uniform({k, n}, rng, -1.0, 1.0);
  auto cs = Tensor<double>::zeros({m, n});
  auto cp = Tensor<double>::zeros({m, n});
  kern::matmul_tn_serial(a.data(), b.data(), cs.data(), m, k, n);
  kern::matmul_tn_omp(a.data(), b.data(), cp.data(), m, k, n);
  CHECK(max_abs_diff(cs, cp) < 1e-12);

  auto at = Tensor<double>::zeros({m, k});
  kern::transpose_serial(a.data(), at.data(), k, m);
  auto ref = Tensor<double>::zeros({m, n});
  kern::matmul_nn_serial(at.data(), b.data(), ref.data(), m, k, n);
  CHECK(max_abs_diff(cs, ref) < 1e-12);
}

TEST_CASE("transpose round trips") {
  Rng rng(31);
  const int m = 7, n = 12;
  auto a = Tensor<double>::uniform({m, n}, rng, -1.0, 1.0);
  auto t = Tensor<double>::zeros({n, m});
  auto back = Tensor<double>::zeros({m, n});
  kern::transpose(a.data(), t.data(), m, n);
  kern::transpose(t.data(), back.data(), n, m);
  CHECK(max_abs_diff(a, back) == 0.0);
  CHECK(t[0 * m + 3] == a[3 * n + 0]);
}

TEST_CASE("im2col matmul equals direct convolution") {
  Rng rng(37);
  for (const auto& [stride, pad] : std::vector<std::pair<int, int>>{{1, 0}, {1, 1}, {2, 1}}) {
    kern::ConvGeom g{2, 3, 8, 8, 3, stride, pad};
    const int oc = 4;
    auto x = Tensor<double>::uniform({2, 3, 8, 8}, rng, -1.0, 1.0);
    auto w = Tensor<double>::uniform({oc, 3, 3, 3}, rng, -1.0, 1.0);

    auto want = Tensor<double>::zeros({2, oc, g.out_h(), g.out_w()});
    conv_naive(x, w, want, g, oc);

    const int rows = static_cast<int>(g.col_rows()), cols = static_cast<int>(g.col_cols());
    auto col = Tensor<double>::zeros({rows, cols});
    kern::im2col(x.data(), col.data(), g);
    auto wt = Tensor<double>::zeros({cols, oc});
    kern::transpose(w.data(), wt.data(), oc, cols);
    auto out_rows = Tensor<double>::zeros({rows, oc});
    kern::matmul_nn(col.data(), wt.data(), out_rows.data(), rows, cols, oc);

    double worst = 0.0;
    const int oh = g.out_h(), ow = g.out_w();
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < oc; ++c)
        for (int p = 0; p < oh * ow; ++p) {
          const double got = out_rows[(static_cast<size_t>(b) * oh * ow + p) * oc + c];
          const double ref = want[(static_cast<size_t>(b) * oc + c) * oh * ow + p];
          worst = std::max(worst, std::fabs(got - ref));
        }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("col2im is the adjoint of im2col") {
  Rng rng(41);
  kern::ConvGeom g{2, 3, 6, 6, 3, 2, 1};
  const int rows = static_cast<int>(g.col_rows()), cols = static_cast<int>(g.col_cols());
  auto x = Tensor<double>::uniform({2, 3, 6, 6}, rng, -1.0, 1.0);
  auto dcol = Tensor<double>::uniform({rows, cols}, rng, -1.0, 1.0);

  auto col = Tensor<double>::zeros({rows, cols});
  kern::im2col(x.data(), col.data(), g);
  auto dx = Tensor<double>::zeros({2, 3, 6, 6});
  kern::col2im(dcol.data(), dx.data(), g);

  CHECK(dot(col, dcol) == doctest::Approx(dot(x, dx)).epsilon(1e-12));
}

TEST_CASE("col2im accumulates into the output") {
  Rng rng(43);
  kern::ConvGeom g{1, 1, 4, 4, 3, 1, 1};
  const int rows = static_cast<int>(g.col_rows()), cols = static_cast<int>(g.col_cols());
  auto dcol = Tensor<double>::uniform({rows, cols}, rng, -1.0, 1.0);
  auto once = Tensor<double>::zeros({1, 1, 4, 4});
  kern::col2im(dcol.data(), once.data(), g);
  auto twice = once.clone();
  kern::col2im(dcol.data(), twice.data(), g);
  for (size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
}

TEST_CASE("upsample2x replicates pixels and its grad is the adjoint") {
  Rng rng(47);
  const int planes = 3, h = 4, w = 5;
  auto x = Tensor<double>::uniform({planes, h, w}, rng, -1.0, 1.0);
  auto y = Tensor<double>::zeros({planes, 2 * h, 2 * w});
  kern::upsample2x(x.data(), y.data(), planes, h, w);
  for (int p = 0; p < planes; ++p)
    for (int i = 0; i < 2 * h; ++i)
      for (int j = 0; j < 2 * w; ++j) {
        const double got = y[(static_cast<size_t>(p) * 2 * h + i) * 2 * w + j];
        const double ref = x[(static_cast<size_t>(p) * h + i / 2) * w + j / 2];
        CHECK(got == ref);
      }

  auto dy = Tensor<double>::uniform({planes, 2 * h, 2 * w}, rng, -1.0, 1.0);
  auto dx = Tensor<double>::zeros({planes, h, w});
  kern::upsample2x_grad(dy.data(), dx.data(), planes, h, w);
  CHECK(dot(y, dy) == doctest::Approx(dot(x, dx)).epsilon(1e-12));

  auto dx2 = dx.clone();
  kern::upsample2x_grad(dy.data(), dx2.data(), planes, h, w);
  for (size_t i = 0; i < dx.size(); ++i) CHECK(dx2[i] == doctest::Approx(2.0 * dx[i]).epsilon(1e-12));
}

TEST_CASE("conv geometry") {
  kern::ConvGeom g{1, 3, 32, 32, 3, 2, 1};
  CHECK(g.out_h() == 16);
  CHECK(g.out_w() == 16);
  kern::ConvGeom same{1, 8, 16, 16, 3, 1, 1};
  CHECK(same.out_h() == 16);
  kern::ConvGeom valid{1, 1, 7, 9, 3, 1, 0};
  CHECK(valid.out_h() == 5);
  CHECK(valid.out_w() == 7);
}

TEST_CASE("omp kernels are bit-identical across thread counts") {
  const int saved = kern::thread_count();
  Rng rng(53);
  const int m = 64, k = 96, n = 80;
  auto a = Tensor<float>::uniform({m, k}, rng, -1.f, 1.f);
  auto b = Tensor<float>::uniform({k, n}, rng, -1.f, 1.f);
  auto c1 = Tensor<float>::zeros({m, n});
  auto c4 = Tensor<float>::zeros({m, n});

  kern::set_thread_count(1);
  kern::matmul_nn_omp(a.data(), b.data(), c1.data(), m, k, n);
  kern::set_thread_count(4);
  kern::matmul_nn_omp(a.data(), b.data(), c4.data(), m, k, n);
  CHECK(std::memcmp(c1.data(), c4.data(), sizeof(float) * c1.size()) == 0);

  kern::ConvGeom g{4, 3, 16, 16, 3, 2, 1};
  const int rows = static_cast<int>(g.col_rows()), cols = static_cast<int>(g.col_cols());
  auto x = Tensor<float>::uniform({4, 3, 16, 16}, rng, -1.f, 1.f);
  auto col1 = Tensor<float>::zeros({rows, cols});
  auto col4 = Tensor<float>::zeros({rows, cols});
  kern::set_thread_count(1);
  kern::im2col_omp(x.data(), col1.data(), g);
  kern::set_thread_count(4);
  kern::im2col_omp(x.data(), col4.data(), g);
  CHECK(std::memcmp(col1.data(), col4.data(), sizeof(float) * col1.size()) == 0);

  auto dx1 = Tensor<float>::zeros({4, 3, 16, 16});
  auto dx4 = Tensor<float>::zeros({4, 3, 16, 16});
  kern::set_thread_count(1);
  kern::col2im_omp(col1.data(), dx1.data(), g);
  kern::set_thread_count(4);
  kern::col2im_omp(col1.data(), dx4.data(), g);
  CHECK(std::memcmp(dx1.data(), dx4.data(), sizeof(float) * dx1.size()) == 0);

  kern::set_thread_count(saved);
}

TEST_CASE("serial dispatch honours the runtime flag") {
  const bool saved = kern::parallel_enabled();
  kern::set_parallel(false);
  CHECK(!kern::parallel_enabled());
  Rng rng(59);
  const int m = 5, k = 6, n = 7;
  auto a = Tensor<double>::uniform({m, k}, rng, -1.0, 1.0);
  auto b = Tensor<double>::uniform({k, n}, rng, -1.0, 1.0);
  auto c = Tensor<double>::zeros({m, n});
  auto ref = Tensor<double>::zeros({m, n});
  kern::matmul_nn(a.data(), b.data(), c.data(), m, k, n);
  kern::matmul_nn_serial(a.data(), b.data(), ref.data(), m, k, n);
  CHECK(max_abs_diff(c, ref) == 0.0);
  kern::set_parallel(saved);
}
