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
#ifndef CLASP_EVALKIT_HPP_
#define CLASP_EVALKIT_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "clasp/tensor.hpp"

namespace clasp::evalkit {

struct AngleEstimate {
  bool valid = false;
  double angle_deg = 0.0;  // [0, 360)
  int confidence = 0;      // number of tip-candidate pixels
};

// Arm-angle recovery from a rendered frame: luminance gradient magnitude,
// Otsu threshold, 3x3 morphological opening, then the edge pixel whose
// distance to the image center is closest to arm_length_px wins.
AngleEstimate detect_angle(const Tensor<uint8_t>& frame, double arm_length_px);

// Circular distance in degrees, in [0, 180].
double angular_error(double a_deg, double b_deg);

// Mean of angles on the circle (degrees); undefined input lengths return 0.
double circular_mean(const std::vector<double>& angles_deg);

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;
};

Summary summarize(const std::vector<double>& values);

// One evaluation artifact: per-item records plus aggregates recomputed from
// them, serializable as JSON.
struct EvalReport {
  std::string experiment;
  std::map<std::string, std::string> identifiers;           // seeds, checkpoints, dataset
  std::map<std::string, std::vector<double>> per_item;      // metric -> per-sequence values
  std::map<std::string, Summary> aggregate;                 // metric -> summary

  void add(const std::string& metric, double value);
  void finalize_aggregates();
  std::string to_json() const;
  void save(const std::string& path) const;
  static EvalReport load(const std::string& path);
};

struct PcaResult {
  Tensor<double> components;   // [k, d] row-major principal axes
  Tensor<double> projections;  // [n, k]
  std::vector<double> explained_variance_ratio;  // length d, non-increasing
};

// PCA of mean-centered rows [n, d]; keeps the top-k projections.
PcaResult pca(const Tensor<double>& rows, int top_k);

// Spearman rank correlation.
double rank_correlation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace clasp::evalkit

#endif  // CLASP_EVALKIT_HPP_
