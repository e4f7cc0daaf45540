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
#include <unistd.h>

#include <cstring>
#include <filesystem>

#include <doctest.h>

#include "clasp/checkpoint.hpp"
#include "clasp/composer.hpp"
#include "clasp/env.hpp"
#include "clasp/grounding.hpp"

using namespace clasp;
using namespace clasp::model;

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("clasp-ground-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

PredictorConfig micro_cfg() {
  PredictorConfig c;
  c.image_size = 8;
  c.enc_levels = 2;
  c.enc_base = 2;
  c.enc_dim = 8;
  c.latent_dim = 2;
  c.lstm_hidden = 8;
  c.infer_h1 = 8;
  c.infer_h2 = 8;
  c.comp_hidden = 4;
  c.act_embed_hidden = 4;
  c.cond_frames = 2;
  c.seq_len = 6;
  c.comp_chunk = 2;
  return c;
}

const std::string& micro_dataset() {
  static TempDir dir("data");
  static bool built = false;
  static std::string root;
  if (!built) {
    env::GenConfig gc;
    gc.image_size = 8;
    gc.seq_len = 6;
    root = (dir.path / "ds").string();
    env::generate_dataset(gc, 505, 16, 4, root);
    built = true;
  }
  return root;
}

GroundingConfig quick_cfg() {
  GroundingConfig gc;
  gc.max_steps = 200;
  gc.eval_every = 20;
  gc.patience = 5;
  gc.batch = 32;
  return gc;
}

}  // namespace

TEST_CASE("grounding fit produces a usable bidirectional map") {
  Clasp<real> m(micro_cfg(), 3);
  dataio::DatasetReader reader(micro_dataset());
  const auto labeled = dataio::labeled_subset(reader.count("train"), 8, 1);
  Grounding g = fit_grounding(m.pred, param_checksum(m.reg), reader, labeled, quick_cfg());

  CHECK(g.pair_count() == 8 * 5);
  CHECK(g.latent_dim() == 2);
  CHECK(std::isfinite(g.val_mse_latent()));
  CHECK(std::isfinite(g.val_mse_action()));
  CHECK(g.action_min() >= 0.0);
  CHECK(g.action_max() <= 40.0);
  CHECK(g.action_min() < g.action_max());

  Tensor<real> z = g.act_to_latent({0.0, 10.0, 20.0, 40.0});
  REQUIRE(z.shape() == std::vector<int>{4, 2});
  auto back = g.latent_to_act(z);
  REQUIRE(back.size() == 4);
  for (const auto& est : back) {
    CHECK(est.u_deg >= g.action_min());
    CHECK(est.u_deg <= g.action_max());
  }

  SUBCASE("predictor identity is pinned") {
    CHECK_NOTHROW(g.check_predictor(param_checksum(m.reg)));
    CHECK_THROWS_AS(g.check_predictor(param_checksum(m.reg) + 1), ArtifactError);
  }

  SUBCASE("artifact round trip preserves behavior bit for bit") {
    TempDir dir("artifact");
    const std::string path = (dir.path / "ground.json").string();
    g.save(path);
    Grounding loaded = Grounding::load(path);
    CHECK(loaded.pair_count() == g.pair_count());
    CHECK(loaded.predictor_crc() == g.predictor_crc());
    CHECK(loaded.action_min() == g.action_min());
    CHECK(loaded.action_max() == g.action_max());

    Tensor<real> z2 = loaded.act_to_latent({0.0, 10.0, 20.0, 40.0});
    CHECK(std::memcmp(z.data(), z2.data(), z.size() * sizeof(real)) == 0);
    auto back2 = loaded.latent_to_act(z2);
    for (size_t i = 0; i < back.size(); ++i) {
      CHECK(back2[i].u_deg == back[i].u_deg);
      CHECK(back2[i].extrapolated == back[i].extrapolated);
    }
  }

  SUBCASE("latent batch shape is validated") {
    Rng rng(2);
    Tensor<real> bad = Tensor<real>::uniform({3, 5}, rng, -1.f, 1.f);
    CHECK_THROWS_AS(g.latent_to_act(bad), ConfigError);
  }
}

TEST_CASE("grounding rejects bad inputs") {
  Clasp<real> m(micro_cfg(), 3);
  dataio::DatasetReader reader(micro_dataset());
  CHECK_THROWS_AS(fit_grounding(m.pred, 0, reader, {}, quick_cfg()), ConfigError);

  Grounding unfitted;
  CHECK_THROWS_AS(unfitted.act_to_latent({1.0}), ArtifactError);
  CHECK_THROWS_AS(Grounding::load("/nonexistent/ground.json"), ArtifactError);
}
