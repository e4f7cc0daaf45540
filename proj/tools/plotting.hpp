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
#ifndef CLASP_TOOLS_PLOTTING_HPP_
#define CLASP_TOOLS_PLOTTING_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "clasp/common.hpp"
#include "clasp/tensor.hpp"

namespace clasp::plotting {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

namespace detail {

constexpr int kWidth = 640, kHeight = 480;
constexpr int kLeft = 64, kRight = 24, kTop = 40, kBottom = 52;

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Axis {
  double lo = 0, hi = 1;
  void fit(const std::vector<double>& values) {
    for (double v : values) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void finish() {
    if (!(hi > lo)) hi = lo + 1;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

inline Axis fit_axis(const std::vector<const std::vector<double>*>& columns) {
  Axis a{std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest()};
  bool any = false;
  for (const auto* c : columns)
    for (double v : *c)
      if (std::isfinite(v)) {
        a.lo = std::min(a.lo, v);
        a.hi = std::max(a.hi, v);
        any = true;
      }
  if (!any) a = {0, 1};
  a.finish();
  return a;
}

inline double px(double v, const Axis& a) {
  return kLeft + (v - a.lo) / (a.hi - a.lo) * (kWidth - kLeft - kRight);
}
inline double py(double v, const Axis& a) {
  return kHeight - kBottom - (v - a.lo) / (a.hi - a.lo) * (kHeight - kTop - kBottom);
}

inline const char* palette(size_t i) {
  static const char* colors[] = {"#2266cc", "#cc5522", "#22aa66", "#aa22aa", "#888822", "#cc2244"};
  return colors[i % 6];
}

// Two-stop color ramp for scalar-colored scatter points.
inline std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(59 + t * (204 - 59)));
  const int g = static_cast<int>(std::lround(76 + t * (85 - 76)));
  const int b = static_cast<int>(std::lround(192 + t * (34 - 192)));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

inline void open_svg(std::string& s, const std::string& title, const std::string& xlabel,
                     const std::string& ylabel, const Axis& xa, const Axis& ya) {
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kWidth) +
       "\" height=\"" + std::to_string(kHeight) + "\" font-family=\"sans-serif\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + std::to_string(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
       title + "</text>\n";
  // frame
  s += "<rect x=\"" + std::to_string(kLeft) + "\" y=\"" + std::to_string(kTop) + "\" width=\"" +
       std::to_string(kWidth - kLeft - kRight) + "\" height=\"" +
       std::to_string(kHeight - kTop - kBottom) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xa.lo + (xa.hi - xa.lo) * i / 4.0;
    const double yv = ya.lo + (ya.hi - ya.lo) * i / 4.0;
    s += "<text x=\"" + fmt(px(xv, xa)) + "\" y=\"" + std::to_string(kHeight - kBottom + 18) +
         "\" text-anchor=\"middle\" font-size=\"11\">" + fmt(xv) + "</text>\n";
    s += "<text x=\"" + std::to_string(kLeft - 6) + "\" y=\"" + fmt(py(yv, ya) + 4) +
         "\" text-anchor=\"end\" font-size=\"11\">" + fmt(yv) + "</text>\n";
    s += "<line x1=\"" + fmt(px(xv, xa)) + "\" y1=\"" + std::to_string(kTop) + "\" x2=\"" +
         fmt(px(xv, xa)) + "\" y2=\"" + std::to_string(kHeight - kBottom) +
         "\" stroke=\"#ddd\"/>\n";
    s += "<line x1=\"" + std::to_string(kLeft) + "\" y1=\"" + fmt(py(yv, ya)) + "\" x2=\"" +
         std::to_string(kWidth - kRight) + "\" y2=\"" + fmt(py(yv, ya)) + "\" stroke=\"#ddd\"/>\n";
  }
  s += "<text x=\"" + std::to_string(kWidth / 2) + "\" y=\"" + std::to_string(kHeight - 12) +
       "\" text-anchor=\"middle\" font-size=\"13\">" + xlabel + "</text>\n";
  s += "<text x=\"16\" y=\"" + std::to_string(kHeight / 2) +
       "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 " +
       std::to_string(kHeight / 2) + ")\">" + ylabel + "</text>\n";
}

inline void save(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + path);
  out << body << "</svg>\n";
}

}  // namespace detail

// Scatter with per-point scalar coloring (low: blue, high: orange).
inline void write_svg_scatter(const std::string& path, const std::vector<double>& x,
                              const std::vector<double>& y, const std::vector<double>& color,
                              const std::string& title, const std::string& xlabel,
                              const std::string& ylabel) {
  using namespace detail;
  const Axis xa = fit_axis({&x}), ya = fit_axis({&y});
  double clo = 0, chi = 1;
  if (!color.empty()) {
    clo = *std::min_element(color.begin(), color.end());
    chi = *std::max_element(color.begin(), color.end());
    if (!(chi > clo)) chi = clo + 1;
  }
  std::string s;
  open_svg(s, title, xlabel, ylabel, xa, ya);
  for (size_t i = 0; i < x.size() && i < y.size(); ++i) {
    const std::string c = color.empty() ? "#2266cc" : ramp((color[i] - clo) / (chi - clo));
    s += "<circle cx=\"" + fmt(px(x[i], xa)) + "\" cy=\"" + fmt(py(y[i], ya)) +
         "\" r=\"3\" fill=\"" + c + "\" fill-opacity=\"0.8\"/>\n";
  }
  save(path, s);
}

inline void write_svg_lines(const std::string& path, const std::vector<Series>& series,
                            const std::string& title, const std::string& xlabel,
                            const std::string& ylabel) {
  using namespace detail;
  std::vector<const std::vector<double>*> xs, ys;
  for (const auto& sr : series) {
    xs.push_back(&sr.x);
    ys.push_back(&sr.y);
  }
  const Axis xa = fit_axis(xs), ya = fit_axis(ys);
  std::string s;
  open_svg(s, title, xlabel, ylabel, xa, ya);
  for (size_t k = 0; k < series.size(); ++k) {
    const auto& sr = series[k];
    std::string pts;
    for (size_t i = 0; i < sr.x.size() && i < sr.y.size(); ++i)
      pts += fmt(px(sr.x[i], xa)) + "," + fmt(py(sr.y[i], ya)) + " ";
    s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + std::string(palette(k)) +
         "\" stroke-width=\"2\"/>\n";
    for (size_t i = 0; i < sr.x.size() && i < sr.y.size(); ++i)
      s += "<circle cx=\"" + fmt(px(sr.x[i], xa)) + "\" cy=\"" + fmt(py(sr.y[i], ya)) +
           "\" r=\"3\" fill=\"" + std::string(palette(k)) + "\"/>\n";
    const int ly = kTop + 16 + static_cast<int>(k) * 16;
    s += "<rect x=\"" + std::to_string(kWidth - kRight - 150) + "\" y=\"" + std::to_string(ly - 9) +
         "\" width=\"10\" height=\"10\" fill=\"" + std::string(palette(k)) + "\"/>\n";
    s += "<text x=\"" + std::to_string(kWidth - kRight - 136) + "\" y=\"" + std::to_string(ly) +
         "\" font-size=\"12\">" + sr.label + "</text>\n";
  }
  save(path, s);
}

inline Tensor<uint8_t> upscale_nearest(const Tensor<uint8_t>& rgb, int factor) {
  const int h = rgb.dim(0), w = rgb.dim(1);
  Tensor<uint8_t> out({h * factor, w * factor, 3});
  for (int y = 0; y < h * factor; ++y)
    for (int x = 0; x < w * factor; ++x)
      for (int c = 0; c < 3; ++c)
        out[(static_cast<size_t>(y) * w * factor + x) * 3 + c] =
            rgb[(static_cast<size_t>(y / factor) * w + x / factor) * 3 + c];
  return out;
}

// Rows of same-sized frames tiled into one image with thin separators.
inline Tensor<uint8_t> tile_rows(const std::vector<std::vector<Tensor<uint8_t>>>& rows, int gap = 2) {
  if (rows.empty() || rows[0].empty()) throw ConfigError("nothing to tile");
  const int s = rows[0][0].dim(0);
  size_t cols = 0;
  for (const auto& r : rows) cols = std::max(cols, r.size());
  const int out_h = static_cast<int>(rows.size()) * (s + gap) - gap;
  const int out_w = static_cast<int>(cols) * (s + gap) - gap;
  Tensor<uint8_t> out = Tensor<uint8_t>::full({out_h, out_w, 3}, uint8_t(255));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c) {
      const auto& f = rows[r][c];
      if (f.dim(0) != s || f.dim(1) != s) throw ConfigError("tile frames must share a size");
      const int oy = static_cast<int>(r) * (s + gap), ox = static_cast<int>(c) * (s + gap);
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
          for (int ch = 0; ch < 3; ++ch)
            out[(static_cast<size_t>(oy + y) * out_w + ox + x) * 3 + ch] =
                f[(static_cast<size_t>(y) * s + x) * 3 + ch];
    }
  return out;
}

}  // namespace clasp::plotting

#endif  // CLASP_TOOLS_PLOTTING_HPP_
