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
#include "clasp/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "clasp/common.hpp"

namespace clasp::img {

namespace {

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace

Tensor<float> to_gray(const Tensor<uint8_t>& rgb) {
  const int h = rgb.dim(0), w = rgb.dim(1);
  Tensor<float> out({h, w});
  const uint8_t* src = rgb.data();
  for (size_t i = 0; i < out.size(); ++i) {
    const float r = src[3 * i], g = src[3 * i + 1], b = src[3 * i + 2];
    out[i] = (0.299f * r + 0.587f * g + 0.114f * b) / 255.f;
  }
  return out;
}

Tensor<float> sobel_magnitude(const Tensor<float>& gray) {
  const int h = gray.dim(0), w = gray.dim(1);
  Tensor<float> out({h, w});
  auto at = [&](int y, int x) { return gray[static_cast<size_t>(clampi(y, 0, h - 1)) * w + clampi(x, 0, w - 1)]; };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const float gx = -at(y - 1, x - 1) + at(y - 1, x + 1) - 2.f * at(y, x - 1) + 2.f * at(y, x + 1) -
                       at(y + 1, x - 1) + at(y + 1, x + 1);
      const float gy = -at(y - 1, x - 1) - 2.f * at(y - 1, x) - at(y - 1, x + 1) + at(y + 1, x - 1) +
                       2.f * at(y + 1, x) + at(y + 1, x + 1);
      out[static_cast<size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
    }
  return out;
}

float otsu_threshold(const Tensor<float>& img) {
  float lo = img[0], hi = img[0];
  for (size_t i = 0; i < img.size(); ++i) {
    lo = std::min(lo, img[i]);
    hi = std::max(hi, img[i]);
  }
  if (hi <= lo) return lo;

  constexpr int kBins = 256;
  std::array<int64_t, kBins> hist{};
  const float scale = (kBins - 1) / (hi - lo);
  for (size_t i = 0; i < img.size(); ++i) ++hist[static_cast<int>((img[i] - lo) * scale)];

  const int64_t total = static_cast<int64_t>(img.size());
  double sum_all = 0.0;
  for (int b = 0; b < kBins; ++b) sum_all += static_cast<double>(b) * hist[b];

  int64_t w0 = 0;
  double sum0 = 0.0, best = -1.0;
  int best_bin = 0;
  for (int b = 0; b < kBins - 1; ++b) {
    w0 += hist[b];
    if (w0 == 0) continue;
    const int64_t w1 = total - w0;
    if (w1 == 0) break;
    sum0 += static_cast<double>(b) * hist[b];
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = static_cast<double>(w0) * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = b;
    }
  }
  return lo + (best_bin + 0.5f) / scale;
}

Tensor<uint8_t> binarize(const Tensor<float>& img, float threshold) {
  Tensor<uint8_t> out(img.shape());
  for (size_t i = 0; i < img.size(); ++i) out[i] = img[i] > threshold ? 1 : 0;
  return out;
}

Tensor<uint8_t> erode3(const Tensor<uint8_t>& mask) {
  const int h = mask.dim(0), w = mask.dim(1);
  Tensor<uint8_t> out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      uint8_t v = 1;
      for (int dy = -1; dy <= 1 && v; ++dy)
        for (int dx = -1; dx <= 1 && v; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w || !mask[static_cast<size_t>(yy) * w + xx]) v = 0;
        }
      out[static_cast<size_t>(y) * w + x] = v;
    }
  return out;
}

Tensor<uint8_t> dilate3(const Tensor<uint8_t>& mask) {
  const int h = mask.dim(0), w = mask.dim(1);
  Tensor<uint8_t> out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      uint8_t v = 0;
      for (int dy = -1; dy <= 1 && !v; ++dy)
        for (int dx = -1; dx <= 1 && !v; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w && mask[static_cast<size_t>(yy) * w + xx]) v = 1;
        }
      out[static_cast<size_t>(y) * w + x] = v;
    }
  return out;
}

Tensor<uint8_t> resize_bilinear(const Tensor<uint8_t>& rgb, int out_h, int out_w) {
  const int h = rgb.dim(0), w = rgb.dim(1);
  Tensor<uint8_t> out({out_h, out_w, 3});
  const float sy = static_cast<float>(h) / out_h;
  const float sx = static_cast<float>(w) / out_w;
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      const float fy = (y + 0.5f) * sy - 0.5f;
      const float fx = (x + 0.5f) * sx - 0.5f;
      const int y0 = clampi(static_cast<int>(std::floor(fy)), 0, h - 1);
      const int x0 = clampi(static_cast<int>(std::floor(fx)), 0, w - 1);
      const int y1 = clampi(y0 + 1, 0, h - 1);
      const int x1 = clampi(x0 + 1, 0, w - 1);
      const float ay = clampi(static_cast<int>((fy - y0) * 256), 0, 256) / 256.f;
      const float ax = clampi(static_cast<int>((fx - x0) * 256), 0, 256) / 256.f;
      for (int c = 0; c < 3; ++c) {
        const float v00 = rgb[(static_cast<size_t>(y0) * w + x0) * 3 + c];
        const float v01 = rgb[(static_cast<size_t>(y0) * w + x1) * 3 + c];
        const float v10 = rgb[(static_cast<size_t>(y1) * w + x0) * 3 + c];
        const float v11 = rgb[(static_cast<size_t>(y1) * w + x1) * 3 + c];
        const float v = (1 - ay) * ((1 - ax) * v00 + ax * v01) + ay * ((1 - ax) * v10 + ax * v11);
        out[(static_cast<size_t>(y) * out_w + x) * 3 + c] = static_cast<uint8_t>(std::lround(v));
      }
    }
  return out;
}

namespace {

void put_u32_be(std::vector<uint8_t>& buf, uint32_t v) {
  buf.push_back(static_cast<uint8_t>(v >> 24));
  buf.push_back(static_cast<uint8_t>(v >> 16));
  buf.push_back(static_cast<uint8_t>(v >> 8));
  buf.push_back(static_cast<uint8_t>(v));
}

void append_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
  put_u32_be(out, static_cast<uint32_t>(data.size()));
  const size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uint32_t crc =
      crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
  put_u32_be(out, crc);
}

}  // namespace

void write_png(const std::string& path, const Tensor<uint8_t>& rgb) {
  const int h = rgb.dim(0), w = rgb.dim(1);
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(h) * (1 + 3 * w));
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);  // filter type: none
    const uint8_t* row = rgb.data() + static_cast<size_t>(y) * w * 3;
    raw.insert(raw.end(), row, row + static_cast<size_t>(w) * 3);
  }
  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("png compression failed for " + path);
  comp.resize(comp_len);

  std::vector<uint8_t> file{0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  std::vector<uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<uint32_t>(w));
  put_u32_be(ihdr, static_cast<uint32_t>(h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  append_chunk(file, "IHDR", ihdr);
  append_chunk(file, "IDAT", comp);
  append_chunk(file, "IEND", {});

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
  if (!f) throw IoError("short write to " + path);
}

Tensor<uint8_t> read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw IoError(path + ": not a binary PPM");
  auto next_int = [&]() {
    for (;;) {
      int c = f.peek();
      if (c == '#') {
        std::string line;
        std::getline(f, line);
      } else if (std::isspace(c)) {
        f.get();
      } else {
        break;
      }
    }
    int v;
    f >> v;
    return v;
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  if (maxval != 255) throw IoError(path + ": unsupported maxval");
  f.get();  // single whitespace before pixel data
  Tensor<uint8_t> out({h, w, 3});
  f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (f.gcount() != static_cast<std::streamsize>(out.size())) throw IoError(path + ": truncated pixel data");
  return out;
}

void write_ppm(const std::string& path, const Tensor<uint8_t>& rgb) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << "P6\n" << rgb.dim(1) << " " << rgb.dim(0) << "\n255\n";
  f.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!f) throw IoError("short write to " + path);
}

}  // namespace clasp::img
