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
#ifndef CLASP_KERNELS_HPP_
#define CLASP_KERNELS_HPP_

#include <cstddef>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

// Compute kernels behind the autodiff ops. Each kernel has two
// implementations:
//   *_serial — textbook reference, kept for tests and --kernels=serial runs;
//   *_omp    — OpenMP variant. The parallel loops run over independent
//              output elements and every element is accumulated in the same
//              order as a single-threaded run, so results are bit-identical
//              for any thread count.
// The un-suffixed entry points dispatch on the runtime flag.
namespace clasp::kern {

bool parallel_enabled();
void set_parallel(bool on);
int thread_count();
void set_thread_count(int n);

// Work-size floor below which the omp variants skip spawning a team.
inline constexpr size_t kParallelGrain = 1 << 15;

// ---------------------------------------------------------------------------
// matmul_nn: C[M,N] = A[M,K] * B[K,N]
// ---------------------------------------------------------------------------

template <class T>
void matmul_nn_serial(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

template <class T>
void matmul_nn_omp(const T* a, const T* b, T* c, int m, int k, int n) {
  const size_t work = static_cast<size_t>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelGrain)
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = T(0);
    for (int p = 0; p < k; ++p) {
      const T av = a[static_cast<size_t>(i) * k + p];
      const T* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
void matmul_nn(const T* a, const T* b, T* c, int m, int k, int n) {
  if (parallel_enabled()) {
    matmul_nn_omp(a, b, c, m, k, n);
  } else {
    matmul_nn_serial(a, b, c, m, k, n);
  }
}

// ---------------------------------------------------------------------------
// matmul_tn: C[M,N] = A^T * B with A[K,M], B[K,N]
// ---------------------------------------------------------------------------

template <class T>
void matmul_tn_serial(const T* a, const T* b, T* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

template <class T>
void matmul_tn_omp(const T* a, const T* b, T* c, int m, int k, int n) {
  const size_t work = static_cast<size_t>(m) * k * n;
#pragma omp parallel for schedule(static) if (work > kParallelGrain)
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = T(0);
    for (int p = 0; p < k; ++p) {
      const T av = a[static_cast<size_t>(p) * m + i];
      const T* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T>
void matmul_tn(const T* a, const T* b, T* c, int m, int k, int n) {
  if (parallel_enabled()) {
    matmul_tn_omp(a, b, c, m, k, n);
  } else {
    matmul_tn_serial(a, b, c, m, k, n);
  }
}

// ---------------------------------------------------------------------------
// transpose: B[N,M] = A[M,N]^T
// ---------------------------------------------------------------------------

template <class T>
void transpose_serial(const T* a, T* b, int m, int n) {
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) b[static_cast<size_t>(j) * m + i] = a[static_cast<size_t>(i) * n + j];
}

template <class T>
void transpose_omp(const T* a, T* b, int m, int n) {
  const size_t work = static_cast<size_t>(m) * n;
#pragma omp parallel for schedule(static) if (work > kParallelGrain)
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) b[static_cast<size_t>(j) * m + i] = a[static_cast<size_t>(i) * n + j];
}

template <class T>
void transpose(const T* a, T* b, int m, int n) {
  if (parallel_enabled()) {
    transpose_omp(a, b, m, n);
  } else {
    transpose_serial(a, b, m, n);
  }
}

// ---------------------------------------------------------------------------
// im2col / col2im for 2-D convolution, NCHW, square kernel.
// col has one row per output pixel: [B*OH*OW, C*KH*KW].
// ---------------------------------------------------------------------------

struct ConvGeom {
  int batch, in_c, in_h, in_w;
  int kernel, stride, pad;
  int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
  size_t col_rows() const { return static_cast<size_t>(batch) * out_h() * out_w(); }
  size_t col_cols() const { return static_cast<size_t>(in_c) * kernel * kernel; }
};

template <class T>
void im2col_row(const T* img, T* row, const ConvGeom& g, int oy, int ox) {
  const int k = g.kernel;
  size_t idx = 0;
  for (int c = 0; c < g.in_c; ++c) {
    const T* plane = img + static_cast<size_t>(c) * g.in_h * g.in_w;
    for (int ky = 0; ky < k; ++ky) {
      const int iy = oy * g.stride - g.pad + ky;
      for (int kx = 0; kx < k; ++kx) {
        const int ix = ox * g.stride - g.pad + kx;
        const bool inside = iy >= 0 && iy < g.in_h && ix >= 0 && ix < g.in_w;
        row[idx++] = inside ? plane[static_cast<size_t>(iy) * g.in_w + ix] : T(0);
      }
    }
  }
}

template <class T>
void im2col_serial(const T* x, T* col, const ConvGeom& g) {
  const int oh = g.out_h(), ow = g.out_w();
  const size_t cc = g.col_cols();
  for (int b = 0; b < g.batch; ++b) {
    const T* img = x + static_cast<size_t>(b) * g.in_c * g.in_h * g.in_w;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const size_t r = (static_cast<size_t>(b) * oh + oy) * ow + ox;
        im2col_row(img, col + r * cc, g, oy, ox);
      }
  }
}

template <class T>
void im2col_omp(const T* x, T* col, const ConvGeom& g) {
  const int oh = g.out_h(), ow = g.out_w();
  const size_t cc = g.col_cols();
  const int rows = g.batch * oh * ow;
#pragma omp parallel for schedule(static) if (static_cast<size_t>(rows) * cc > kParallelGrain)
  for (int r = 0; r < rows; ++r) {
    const int b = r / (oh * ow);
    const int oy = (r / ow) % oh;
    const int ox = r % ow;
    const T* img = x + static_cast<size_t>(b) * g.in_c * g.in_h * g.in_w;
    im2col_row(img, col + static_cast<size_t>(r) * cc, g, oy, ox);
  }
}

template <class T>
void im2col(const T* x, T* col, const ConvGeom& g) {
  if (parallel_enabled()) {
    im2col_omp(x, col, g);
  } else {
    im2col_serial(x, col, g);
  }
}

// Scatter-add of a col buffer back into image space. Within one batch image
// the accumulation is sequential; parallelism is across images.
template <class T>
void col2im_image(const T* col, T* img, const ConvGeom& g, int b) {
  const int oh = g.out_h(), ow = g.out_w(), k = g.kernel;
  const size_t cc = g.col_cols();
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      const size_t r = (static_cast<size_t>(b) * oh + oy) * ow + ox;
      const T* row = col + r * cc;
      size_t idx = 0;
      for (int c = 0; c < g.in_c; ++c) {
        T* plane = img + static_cast<size_t>(c) * g.in_h * g.in_w;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (iy >= 0 && iy < g.in_h && ix >= 0 && ix < g.in_w)
              plane[static_cast<size_t>(iy) * g.in_w + ix] += row[idx];
            ++idx;
          }
        }
      }
    }
}

template <class T>
void col2im_serial(const T* col, T* x, const ConvGeom& g) {
  for (int b = 0; b < g.batch; ++b)
    col2im_image(col, x + static_cast<size_t>(b) * g.in_c * g.in_h * g.in_w, g, b);
}

template <class T>
void col2im_omp(const T* col, T* x, const ConvGeom& g) {
#pragma omp parallel for schedule(static) if (g.col_rows() * g.col_cols() > kParallelGrain)
  for (int b = 0; b < g.batch; ++b)
    col2im_image(col, x + static_cast<size_t>(b) * g.in_c * g.in_h * g.in_w, g, b);
}

template <class T>
void col2im(const T* col, T* x, const ConvGeom& g) {
  if (parallel_enabled()) {
    col2im_omp(col, x, g);
  } else {
    col2im_serial(col, x, g);
  }
}

// ---------------------------------------------------------------------------
// Nearest-neighbour 2x upsampling, NCHW.
// ---------------------------------------------------------------------------

template <class T>
void upsample2x_serial(const T* x, T* y, int planes, int h, int w) {
  for (int p = 0; p < planes; ++p) {
    const T* src = x + static_cast<size_t>(p) * h * w;
    T* dst = y + static_cast<size_t>(p) * 4 * h * w;
    for (int i = 0; i < 2 * h; ++i)
      for (int j = 0; j < 2 * w; ++j)
        dst[static_cast<size_t>(i) * 2 * w + j] = src[static_cast<size_t>(i / 2) * w + j / 2];
  }
}

template <class T>
void upsample2x_omp(const T* x, T* y, int planes, int h, int w) {
#pragma omp parallel for schedule(static) if (static_cast<size_t>(planes) * h * w * 4 > kParallelGrain)
  for (int p = 0; p < planes; ++p) {
    const T* src = x + static_cast<size_t>(p) * h * w;
    T* dst = y + static_cast<size_t>(p) * 4 * h * w;
    for (int i = 0; i < 2 * h; ++i)
      for (int j = 0; j < 2 * w; ++j)
        dst[static_cast<size_t>(i) * 2 * w + j] = src[static_cast<size_t>(i / 2) * w + j / 2];
  }
}

template <class T>
void upsample2x(const T* x, T* y, int planes, int h, int w) {
  if (parallel_enabled()) {
    upsample2x_omp(x, y, planes, h, w);
  } else {
    upsample2x_serial(x, y, planes, h, w);
  }
}

// Gradient of 2x nearest upsampling: each input cell gathers its 4 outputs.
template <class T>
void upsample2x_grad_serial(const T* gy, T* gx, int planes, int h, int w) {
  for (int p = 0; p < planes; ++p) {
    const T* src = gy + static_cast<size_t>(p) * 4 * h * w;
    T* dst = gx + static_cast<size_t>(p) * h * w;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const size_t r0 = static_cast<size_t>(2 * i) * 2 * w + 2 * j;
        const size_t r1 = static_cast<size_t>(2 * i + 1) * 2 * w + 2 * j;
        dst[static_cast<size_t>(i) * w + j] += src[r0] + src[r0 + 1] + src[r1] + src[r1 + 1];
      }
  }
}

template <class T>
void upsample2x_grad_omp(const T* gy, T* gx, int planes, int h, int w) {
#pragma omp parallel for schedule(static) if (static_cast<size_t>(planes) * h * w * 4 > kParallelGrain)
  for (int p = 0; p < planes; ++p) {
    const T* src = gy + static_cast<size_t>(p) * 4 * h * w;
    T* dst = gx + static_cast<size_t>(p) * h * w;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const size_t r0 = static_cast<size_t>(2 * i) * 2 * w + 2 * j;
        const size_t r1 = static_cast<size_t>(2 * i + 1) * 2 * w + 2 * j;
        dst[static_cast<size_t>(i) * w + j] += src[r0] + src[r0 + 1] + src[r1] + src[r1 + 1];
      }
  }
}

template <class T>
void upsample2x_grad(const T* gy, T* gx, int planes, int h, int w) {
  if (parallel_enabled()) {
    upsample2x_grad_omp(gy, gx, planes, h, w);
  } else {
    upsample2x_grad_serial(gy, gx, planes, h, w);
  }
}

// ---------------------------------------------------------------------------
// Elementwise map over n values: y[i] = f(i). The functor reads whatever
// inputs it captured; each index is independent.
// ---------------------------------------------------------------------------

template <class F>
void for_each_index(size_t n, F&& f) {
  if (parallel_enabled() && n > kParallelGrain) {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(n); ++i) f(static_cast<size_t>(i));
  } else {
    for (size_t i = 0; i < n; ++i) f(i);
  }
}

}  // namespace clasp::kern

#endif  // CLASP_KERNELS_HPP_
