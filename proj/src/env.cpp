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
#include "clasp/env.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>

#include "clasp/common.hpp"
#include "clasp/dataio.hpp"
#include "clasp/image.hpp"
#include "clasp/rng.hpp"

namespace clasp::env {

namespace fs = std::filesystem;

AgentConfig default_agent(int image_size) {
  AgentConfig a;
  a.image_size = image_size;
  a.arm_width = 8.0 * image_size / 64.0;
  return a;
}

std::vector<AgentConfig> agent_grid(int image_size) {
  // The default (0.75, 8px) sits in neither list, so the grid never contains
  // the held-out test agent.
  static constexpr double kLengths[] = {0.55, 0.60, 0.65, 0.70, 0.80, 0.85, 0.90, 0.95};
  static constexpr double kWidths64[] = {4, 5, 6, 7, 9, 10, 11, 12, 13};
  std::vector<AgentConfig> grid;
  grid.reserve(72);
  for (double len : kLengths)
    for (double w : kWidths64) {
      AgentConfig a = default_agent(image_size);
      a.arm_length = len;
      a.arm_width = w * image_size / 64.0;
      grid.push_back(a);
    }
  return grid;
}

Tensor<uint8_t> render_background(const BackgroundSpec& bg, int image_size) {
  const int s = image_size;
  switch (bg.kind) {
    case BackgroundSpec::Kind::kUniform: {
      Tensor<uint8_t> out({s, s, 3});
      for (int i = 0; i < s * s; ++i)
        for (int c = 0; c < 3; ++c) out[static_cast<size_t>(i) * 3 + c] = bg.color[c];
      return out;
    }
    case BackgroundSpec::Kind::kProceduralTexture: {
      // Low-frequency value noise: a 5x5 lattice per channel, bilinearly
      // interpolated. Values stay below the arm's luminance so the arm
      // silhouette keeps the dominant edges.
      constexpr int kLattice = 5;
      Rng rng(bg.seed);
      double lattice[3][kLattice][kLattice];
      for (auto& ch : lattice)
        for (auto& row : ch)
          for (auto& v : row) v = rng.uniform(0.08, 0.42);
      Tensor<uint8_t> out({s, s, 3});
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
          const double fy = static_cast<double>(y) / (s - 1) * (kLattice - 1);
          const double fx = static_cast<double>(x) / (s - 1) * (kLattice - 1);
          const int y0 = std::min(static_cast<int>(fy), kLattice - 2);
          const int x0 = std::min(static_cast<int>(fx), kLattice - 2);
          const double ay = fy - y0, ax = fx - x0;
          for (int c = 0; c < 3; ++c) {
            const double v = (1 - ay) * ((1 - ax) * lattice[c][y0][x0] + ax * lattice[c][y0][x0 + 1]) +
                             ay * ((1 - ax) * lattice[c][y0 + 1][x0] + ax * lattice[c][y0 + 1][x0 + 1]);
            out[(static_cast<size_t>(y) * s + x) * 3 + c] = static_cast<uint8_t>(std::lround(v * 255.0));
          }
        }
      return out;
    }
    case BackgroundSpec::Kind::kExternalImage: {
      Tensor<uint8_t> im = img::read_ppm(bg.image_path);
      if (im.dim(0) != s || im.dim(1) != s) im = img::resize_bilinear(im, s, s);
      return im;
    }
  }
  throw ConfigError("unknown background kind");
}

Tensor<uint8_t> render_over(const EnvState& s, const AgentConfig& agent, const Tensor<uint8_t>& background) {
  const int n = agent.image_size;
  Tensor<uint8_t> out = background.clone();
  const double cx = (n - 1) / 2.0, cy = (n - 1) / 2.0;
  const double len = agent.arm_length * n / 2.0;
  const double half_w = agent.arm_width / 2.0;
  const double a = s.angle_deg * M_PI / 180.0;
  const double dirx = std::cos(a), diry = -std::sin(a);  // y grows downward

  // Anti-aliased coverage from the signed distance to the arm rectangle.
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double px = x - cx, py = y - cy;
      const double along = px * dirx + py * diry;
      const double perp = px * -diry + py * dirx;
      const double qx = std::max(-along, along - len);
      const double qy = std::fabs(perp) - half_w;
      double sdf;
      if (qx > 0.0 && qy > 0.0) {
        sdf = std::sqrt(qx * qx + qy * qy);
      } else {
        sdf = std::max(qx, qy);
      }
      const double cov = std::clamp(0.5 - sdf, 0.0, 1.0);
      if (cov <= 0.0) continue;
      uint8_t* px8 = out.data() + (static_cast<size_t>(y) * n + x) * 3;
      for (int c = 0; c < 3; ++c)
        px8[c] = static_cast<uint8_t>(std::lround(px8[c] * (1.0 - cov) + agent.arm_color[c] * cov));
    }
  return out;
}

Variant parse_variant(const std::string& name) {
  if (name == "plain") return Variant::kPlain;
  if (name == "varied_bg") return Variant::kVariedBg;
  if (name == "varied_agent") return Variant::kVariedAgent;
  throw ConfigError("unknown variant: " + name);
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kPlain: return "plain";
    case Variant::kVariedBg: return "varied_bg";
    case Variant::kVariedAgent: return "varied_agent";
  }
  return "?";
}

Tensor<uint8_t> VideoSequence::frame(int t) const {
  const int s = image_size();
  Tensor<uint8_t> out({s, s, 3});
  std::memcpy(out.data(), frames.data() + static_cast<size_t>(t) * s * s * 3, static_cast<size_t>(s) * s * 3);
  return out;
}

std::vector<std::string> list_backgrounds(const std::string& dir, bool test_split) {
  std::vector<std::string> all;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ppm") all.push_back(e.path().string());
  std::sort(all.begin(), all.end());
  std::vector<std::string> out;
  for (const auto& p : all) {
    // FNV-1a over the basename decides the split.
    const std::string name = fs::path(p).filename().string();
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : name) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    const bool is_test = h % 10 >= 8;
    if (is_test == test_split) out.push_back(p);
  }
  return out;
}

namespace {
// Test sequences draw from a stream range disjoint from training.
constexpr uint64_t kTestStreamBase = 1ULL << 40;
}  // namespace

VideoSequence generate_sequence(const GenConfig& cfg, uint64_t master_seed, uint64_t index, bool test_split) {
  if (cfg.seq_len < 2) throw ConfigError("seq_len must be >= 2");
  const uint64_t stream = (test_split ? kTestStreamBase : 0) + index;
  Rng rng = Rng(master_seed).split(stream);

  VideoSequence seq;
  seq.seed = stream;
  seq.agent = default_agent(cfg.image_size);
  seq.bg.kind = BackgroundSpec::Kind::kUniform;

  // Draw order is fixed: (1) agent/background, (2) initial angle, (3) actions.
  switch (cfg.variant) {
    case Variant::kPlain:
      break;
    case Variant::kVariedBg:
      if (cfg.background_dir.empty()) {
        seq.bg.kind = BackgroundSpec::Kind::kProceduralTexture;
        seq.bg.seed = rng.next_u64();
      } else {
        const auto files = list_backgrounds(cfg.background_dir, test_split);
        if (files.empty()) throw ArtifactError("no .ppm backgrounds for this split in " + cfg.background_dir);
        seq.bg.kind = BackgroundSpec::Kind::kExternalImage;
        seq.bg.image_path = files[rng.below(files.size())];
      }
      break;
    case Variant::kVariedAgent:
      if (!test_split) {
        const auto grid = agent_grid(cfg.image_size);
        seq.agent = grid[rng.below(grid.size())];
      }
      break;
  }

  seq.init_angle = rng.uniform(0.0, 360.0);
  seq.actions.resize(cfg.seq_len - 1);
  for (auto& u : seq.actions) u = rng.uniform(cfg.action_lo, cfg.action_hi);

  const int s = cfg.image_size;
  seq.frames = Tensor<uint8_t>::zeros({cfg.seq_len, s, s, 3});
  const Tensor<uint8_t> bg_frame = render_background(seq.bg, s);
  EnvState state{seq.init_angle};
  for (int t = 0; t < cfg.seq_len; ++t) {
    if (t > 0) state = step(state, {seq.actions[t - 1]});
    const Tensor<uint8_t> f = render_over(state, seq.agent, bg_frame);
    std::memcpy(seq.frames.data() + static_cast<size_t>(t) * s * s * 3, f.data(), static_cast<size_t>(s) * s * 3);
  }
  return seq;
}

void generate_dataset(const GenConfig& cfg, uint64_t master_seed, int num_train, int num_test,
                      const std::string& out_dir) {
  dataio::DatasetWriter writer(out_dir, cfg.image_size, cfg.seq_len, variant_name(cfg.variant));
  for (int i = 0; i < num_train; ++i) writer.append("train", generate_sequence(cfg, master_seed, i, false));
  for (int i = 0; i < num_test; ++i) writer.append("test", generate_sequence(cfg, master_seed, i, true));
  writer.finalize();
}

}  // namespace clasp::env
