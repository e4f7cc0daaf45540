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
#include "clasp/evalkit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "clasp/common.hpp"
#include "clasp/image.hpp"
#include "json.hpp"

namespace clasp::evalkit {

AngleEstimate detect_angle(const Tensor<uint8_t>& frame, double arm_length_px) {
  const int h = frame.dim(0), w = frame.dim(1);
  const Tensor<float> gray = img::to_gray(frame);
  const Tensor<float> mag = img::sobel_magnitude(gray);
  const float thr = img::otsu_threshold(mag);
  Tensor<uint8_t> mask = img::binarize(mag, thr);
  // Opening removes speckle noise. When it deletes most of the map it has
  // eaten structure instead (edge bands are thin at these resolutions), so
  // the raw map is kept in that case.
  {
    Tensor<uint8_t> opened = img::open3(mask);
    size_t raw_n = 0, open_n = 0;
    for (size_t i = 0; i < mask.size(); ++i) {
      raw_n += mask[i];
      open_n += opened[i];
    }
    if (2 * open_n >= raw_n) mask = opened;
  }

  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  AngleEstimate est;
  double best = 1e30;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask[static_cast<size_t>(y) * w + x]) continue;
      best = std::min(best, std::fabs(std::hypot(x - cx, y - cy) - arm_length_px));
    }
  if (best == 1e30) return est;  // no arm pixels

  // The tip candidates are all edge pixels whose center distance is within a
  // pixel of the best match; their circular mean cancels the spread across
  // the arm's width.
  double sx = 0.0, sy = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask[static_cast<size_t>(y) * w + x]) continue;
      const double d = std::hypot(x - cx, y - cy);
      if (std::fabs(d - arm_length_px) > best + 1.0) continue;
      ++est.confidence;
      const double a = std::atan2(-(y - cy), x - cx);
      sx += std::cos(a);
      sy += std::sin(a);
    }

  est.valid = true;
  double a = std::atan2(sy, sx) * 180.0 / M_PI;
  if (a < 0) a += 360.0;
  if (a >= 360.0) a -= 360.0;
  est.angle_deg = a;
  return est;
}

double angular_error(double a_deg, double b_deg) {
  double d = std::fmod(std::fabs(a_deg - b_deg), 360.0);
  return std::min(d, 360.0 - d);
}

double circular_mean(const std::vector<double>& angles_deg) {
  if (angles_deg.empty()) return 0.0;
  double sx = 0.0, sy = 0.0;
  for (double a : angles_deg) {
    sx += std::cos(a * M_PI / 180.0);
    sy += std::sin(a * M_PI / 180.0);
  }
  double m = std::atan2(sy, sx) * 180.0 / M_PI;
  if (m < 0) m += 360.0;
  if (m >= 360.0) m -= 360.0;
  return m;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.count;
  double acc = 0.0;
  for (double v : values) acc += (v - s.mean) * (v - s.mean);
  s.stddev = s.count > 1 ? std::sqrt(acc / (s.count - 1)) : 0.0;
  return s;
}

void EvalReport::add(const std::string& metric, double value) { per_item[metric].push_back(value); }

void EvalReport::finalize_aggregates() {
  for (const auto& [metric, values] : per_item) aggregate[metric] = summarize(values);
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["experiment"] = experiment;
  j["identifiers"] = identifiers;
  for (const auto& [metric, values] : per_item) j["per_item"][metric] = values;
  for (const auto& [metric, s] : aggregate)
    j["aggregate"][metric] = {{"mean", s.mean}, {"stddev", s.stddev}, {"count", s.count}};
  return j.dump(1);
}

void EvalReport::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write report " + path);
  f << to_json() << "\n";
}

EvalReport EvalReport::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ArtifactError("cannot read report " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError("malformed report " + path + ": " + e.what());
  }
  EvalReport r;
  r.experiment = j.value("experiment", "");
  if (j.contains("identifiers"))
    for (const auto& [k, v] : j["identifiers"].items()) r.identifiers[k] = v.get<std::string>();
  if (j.contains("per_item"))
    for (const auto& [k, v] : j["per_item"].items()) r.per_item[k] = v.get<std::vector<double>>();
  if (j.contains("aggregate"))
    for (const auto& [k, v] : j["aggregate"].items())
      r.aggregate[k] = Summary{v.value("mean", 0.0), v.value("stddev", 0.0), v.value("count", 0)};
  return r;
}

PcaResult pca(const Tensor<double>& rows, int top_k) {
  const int n = rows.dim(0), d = rows.dim(1);
  if (n < 2) throw ConfigError("pca needs at least 2 rows");
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = rows[static_cast<size_t>(i) * d + j];
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericalError("pca eigendecomposition failed");

  // Eigen returns ascending eigenvalues; flip to descending.
  Eigen::VectorXd evals = solver.eigenvalues().reverse();
  Eigen::MatrixXd evecs = solver.eigenvectors().rowwise().reverse();

  PcaResult res;
  const double total = std::max(evals.sum(), 1e-300);
  res.explained_variance_ratio.resize(d);
  for (int j = 0; j < d; ++j) res.explained_variance_ratio[j] = std::max(evals(j), 0.0) / total;

  top_k = std::min(top_k, d);
  res.components = Tensor<double>::zeros({top_k, d});
  for (int k = 0; k < top_k; ++k)
    for (int j = 0; j < d; ++j) res.components[static_cast<size_t>(k) * d + j] = evecs(j, k);
  const Eigen::MatrixXd proj = x * evecs.leftCols(top_k);
  res.projections = Tensor<double>::zeros({n, top_k});
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < top_k; ++k) res.projections[static_cast<size_t>(i) * top_k + k] = proj(i, k);
  return res;
}

double rank_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ConfigError("rank_correlation needs equal-sized inputs");
  const int n = static_cast<int>(a.size());
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int i, int j) { return v[i] < v[j]; });
    std::vector<double> r(n);
    for (int i = 0; i < n;) {
      int j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (i + j) / 2.0;
      for (int k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double mean = (n - 1) / 2.0;
  double num = 0.0, da = 0.0, db = 0.0;
  for (int i = 0; i < n; ++i) {
    num += (ra[i] - mean) * (rb[i] - mean);
    da += (ra[i] - mean) * (ra[i] - mean);
    db += (rb[i] - mean) * (rb[i] - mean);
  }
  return num / std::sqrt(std::max(da * db, 1e-300));
}

}  // namespace clasp::evalkit
