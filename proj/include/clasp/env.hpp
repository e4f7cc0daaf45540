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
#ifndef CLASP_ENV_HPP_
#define CLASP_ENV_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "clasp/tensor.hpp"

// Procedural 1-DOF reacher: a filled rotated rectangle anchored at the image
// center. Angle 0 points along +x and positive rotation is counter-clockwise
// on screen (y grows downward, so the direction vector is (cos a, -sin a)).
namespace clasp::env {

struct AgentConfig {
  double arm_length = 0.75;  // fraction of the image half-width
  double arm_width = 8.0;    // pixels
  std::array<uint8_t, 3> arm_color{235, 170, 40};
  int image_size = 64;
};

// The reference agent; arm width scales with resolution.
AgentConfig default_agent(int image_size);

inline double arm_length_px(const AgentConfig& a) { return a.arm_length * a.image_size / 2.0; }

// Training grid for the varied-agent datasets: 8 lengths x 9 widths, none of
// which equals the held-out default agent used for the test split.
std::vector<AgentConfig> agent_grid(int image_size);

struct BackgroundSpec {
  enum class Kind : uint8_t { kUniform = 0, kProceduralTexture = 1, kExternalImage = 2 };
  Kind kind = Kind::kUniform;
  uint64_t seed = 0;
  std::array<uint8_t, 3> color{60, 95, 190};
  std::string image_path;  // kExternalImage only
};

struct EnvState {
  double angle_deg = 0.0;  // [0, 360)
};

struct Action {
  double u_deg = 0.0;  // relative counter-clockwise rotation
};

inline EnvState step(const EnvState& s, const Action& a) {
  double v = std::fmod(s.angle_deg + a.u_deg, 360.0);
  if (v < 0.0) v += 360.0;
  return {v};
}

Tensor<uint8_t> render_background(const BackgroundSpec& bg, int image_size);

// Composites the arm over a pre-rendered background (borrowed, not modified).
Tensor<uint8_t> render_over(const EnvState& s, const AgentConfig& agent, const Tensor<uint8_t>& background);

inline Tensor<uint8_t> render(const EnvState& s, const AgentConfig& agent, const BackgroundSpec& bg) {
  return render_over(s, agent, render_background(bg, agent.image_size));
}

enum class Variant { kPlain, kVariedBg, kVariedAgent };
Variant parse_variant(const std::string& name);  // throws ConfigError
std::string variant_name(Variant v);

struct VideoSequence {
  Tensor<uint8_t> frames;  // [T, S, S, 3]
  bool has_actions = true;
  std::vector<double> actions;  // T-1 rotations in degrees
  AgentConfig agent;
  BackgroundSpec bg;
  double init_angle = 0.0;
  uint64_t seed = 0;

  int len() const { return frames.dim(0); }
  int image_size() const { return frames.dim(1); }
  Tensor<uint8_t> frame(int t) const;  // copy, [S, S, 3]
};

struct GenConfig {
  int image_size = 64;
  int seq_len = 15;
  Variant variant = Variant::kPlain;
  std::string background_dir;  // external images for varied_bg (PPM files)
  double action_lo = 0.0;
  double action_hi = 40.0;
};

// Deterministic per (master_seed, stream). Test-split sequences use a
// disjoint stream range and, for varied_agent, the held-out default agent.
VideoSequence generate_sequence(const GenConfig& cfg, uint64_t master_seed, uint64_t index, bool test_split);

// Writes num_train + num_test sequences through the dataset writer.
void generate_dataset(const GenConfig& cfg, uint64_t master_seed, int num_train, int num_test,
                      const std::string& out_dir);

// External background images under dir, split by filename hash (roughly
// 80/20). Sorted for determinism. PPM only.
std::vector<std::string> list_backgrounds(const std::string& dir, bool test_split);

}  // namespace clasp::env

#endif  // CLASP_ENV_HPP_
