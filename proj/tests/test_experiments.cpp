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

#include <cmath>
#include <filesystem>
#include <set>

#include <doctest.h>

#include "clasp/experiments.hpp"

using namespace clasp;
using namespace clasp::experiments;

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("clasp-exp-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

model::PredictorConfig micro_cfg() {
  model::PredictorConfig c;
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
    env::generate_dataset(gc, 707, 12, 4, root);
    built = true;
  }
  return root;
}

model::GroundingConfig quick_ground_cfg() {
  model::GroundingConfig gc;
  gc.max_steps = 60;
  gc.eval_every = 20;
  gc.patience = 3;
  gc.batch = 16;
  return gc;
}

void check_aggregates(const evalkit::EvalReport& r) {
  for (const auto& [metric, values] : r.per_item) {
    const auto sum = evalkit::summarize(values);
    const auto& agg = r.aggregate.at(metric);
    CHECK(agg.count == sum.count);
    CHECK(agg.mean == doctest::Approx(sum.mean));
    CHECK(agg.stddev == doctest::Approx(sum.stddev));
  }
}

}  // namespace

TEST_CASE("frame conversion and circular deltas") {
  Rng rng(3);
  Tensor<uint8_t> img({4, 4, 3});
  for (size_t i = 0; i < img.size(); ++i) img[i] = static_cast<uint8_t>(rng.below(256));
  env::VideoSequence seq;
  seq.frames = Tensor<uint8_t>::zeros({1, 4, 4, 3});
  std::copy_n(img.data(), img.size(), seq.frames.data());
  Tensor<real> ft = dataio::frames_tensor(seq);
  Tensor<uint8_t> back = frame_to_u8(ft.reshaped({3, 4, 4}));
  for (size_t i = 0; i < img.size(); ++i) CHECK(back[i] == img[i]);

  CHECK(signed_delta_deg(10.0, 350.0) == doctest::Approx(20.0));
  CHECK(signed_delta_deg(350.0, 10.0) == doctest::Approx(-20.0));
  CHECK(signed_delta_deg(90.0, 90.0) == doctest::Approx(0.0));
  CHECK(signed_delta_deg(180.0, 0.0) == doctest::Approx(180.0));
  CHECK(signed_delta_deg(0.0, 180.0) == doctest::Approx(180.0));

  CHECK_THROWS_AS(frame_to_u8(Tensor<real>::zeros({4, 4})), ConfigError);
}

TEST_CASE("action-conditioned evaluation report") {
  model::Clasp<real> m(micro_cfg(), 31);
  dataio::DatasetReader reader(micro_dataset());
  const auto labeled = dataio::labeled_subset(reader.count("train"), 6, 1);
  model::Grounding g =
      fit_grounding(m.pred, model::param_checksum(m.reg), reader, labeled, quick_ground_cfg());

  PredEvalConfig cfg;
  cfg.max_sequences = 3;
  evalkit::EvalReport rep = eval_action_conditioned(m, &g, reader, cfg);
  CHECK(rep.experiment == "action_conditioned");
  CHECK(rep.identifiers.at("latent_source") == "grounding");
  REQUIRE(rep.per_item.at("pred_err").size() == 3);
  REQUIRE(rep.per_item.at("random_err").size() == 3);
  REQUIRE(rep.per_item.at("start_state_err").size() == 3);
  check_aggregates(rep);
  for (double v : rep.per_item.at("random_err")) {
    CHECK(v >= 0.0);
    CHECK(v <= 180.0);
  }
  // Uniform rotations in [0, 40] move the arm; holding the start pose keeps
  // a visible error against the true trajectory.
  CHECK(rep.aggregate.at("start_state_err").mean > 1.0);

  SUBCASE("supervised variant uses the action embedding") {
    evalkit::EvalReport sup = eval_action_conditioned(m, nullptr, reader, cfg);
    CHECK(sup.identifiers.at("latent_source") == "action_embedding");
    CHECK(sup.per_item.at("pred_err").size() == 3);
  }

  SUBCASE("deterministic given the same config") {
    evalkit::EvalReport a = eval_action_conditioned(m, &g, reader, cfg);
    evalkit::EvalReport b = eval_action_conditioned(m, &g, reader, cfg);
    CHECK(a.per_item.at("pred_err") == b.per_item.at("pred_err"));
    CHECK(a.per_item.at("random_err") == b.per_item.at("random_err"));
  }

  SUBCASE("image-size mismatch is rejected") {
    model::PredictorConfig big = micro_cfg();
    big.image_size = 16;
    model::Clasp<real> m16(big, 32);
    CHECK_THROWS_AS(eval_action_conditioned(m16, nullptr, reader, cfg), ConfigError);
  }
}

TEST_CASE("transplant mechanics") {
  model::Clasp<real> m(micro_cfg(), 33);
  dataio::DatasetReader reader(micro_dataset());
  const env::VideoSequence donor = reader.read("test", 0);
  const env::VideoSequence recipient = reader.read("test", 1);

  TransplantResult res = transplant(m.pred, donor, recipient);
  const int horizon = micro_cfg().seq_len - micro_cfg().cond_frames;
  REQUIRE(static_cast<int>(res.frames.size()) == horizon);
  for (const auto& f : res.frames) {
    REQUIRE(f.shape() == std::vector<int>{3, 8, 8});
    for (size_t i = 0; i < f.size(); ++i) {
      CHECK(f[i] >= 0.0f);
      CHECK(f[i] <= 1.0f);
    }
  }
  CHECK(static_cast<int>(res.delta_err.size()) + res.detect_failures == horizon);
  CHECK(res.donor_delta.size() == res.pred_delta.size());
  CHECK(res.donor_delta.size() == res.delta_err.size());
  for (size_t i = 0; i < res.delta_err.size(); ++i)
    CHECK(res.delta_err[i] ==
          doctest::Approx(evalkit::angular_error(res.donor_delta[i], res.pred_delta[i])));

  SUBCASE("identity transplant runs on the donor itself") {
    TransplantResult self = transplant(m.pred, donor, donor);
    CHECK(static_cast<int>(self.frames.size()) == horizon);
  }

  SUBCASE("aggregated pairs") {
    evalkit::EvalReport rep = eval_transplant(m.pred, reader, reader, 3, 9);
    CHECK(rep.per_item.at("fail_rate").size() == 3);
    check_aggregates(rep);
    CHECK(rep.identifiers.at("donor_variant") == "plain");
  }
}

TEST_CASE("grounding round trip report") {
  model::Clasp<real> m(micro_cfg(), 35);
  dataio::DatasetReader reader(micro_dataset());
  const auto labeled = dataio::labeled_subset(reader.count("train"), 6, 1);
  model::Grounding g =
      fit_grounding(m.pred, model::param_checksum(m.reg), reader, labeled, quick_ground_cfg());

  evalkit::EvalReport rep = eval_round_trip(g, 16, 77);
  REQUIRE(rep.per_item.at("round_trip_err").size() == 16);
  check_aggregates(rep);
  for (double e : rep.per_item.at("round_trip_err")) {
    CHECK(e >= 0.0);
    CHECK(e <= g.action_max() - g.action_min() + 1e-9);
  }
  CHECK_THROWS_AS(eval_round_trip(g, 0, 77), ConfigError);
}

TEST_CASE("latent PCA summary") {
  model::Clasp<real> m(micro_cfg(), 34);
  dataio::DatasetReader reader(micro_dataset());

  LatentPca res = pca_latents(m.pred, reader, "train", 30);
  REQUIRE(res.pca.projections.shape() == std::vector<int>{30, 2});
  REQUIRE(res.actions.size() == 30);
  const auto& evr = res.pca.explained_variance_ratio;
  REQUIRE(static_cast<int>(evr.size()) == micro_cfg().latent_dim);
  double total = 0;
  for (size_t i = 0; i < evr.size(); ++i) {
    total += evr[i];
    if (i > 0) CHECK(evr[i] <= evr[i - 1] + 1e-12);
  }
  CHECK(total == doctest::Approx(1.0));
  CHECK(res.pc1_ratio == doctest::Approx(evr[0]));
  CHECK(std::fabs(res.pc1_rank_corr) <= 1.0);

  SUBCASE("zero requests every transition") {
    LatentPca all = pca_latents(m.pred, reader, "test", 0);
    CHECK(all.pca.projections.dim(0) == reader.count("test") * (micro_cfg().seq_len - 1));
  }
}

TEST_CASE("servo episode sampling per variant") {
  Rng rng(55);
  std::set<uint64_t> bg_seeds;
  for (int i = 0; i < 8; ++i) {
    const auto plain = sample_episode(8, env::Variant::kPlain, "", rng);
    CHECK(plain.bg.kind == env::BackgroundSpec::Kind::kUniform);
    CHECK(plain.agent.image_size == 8);
    CHECK(plain.start_deg >= 0.0);
    CHECK(plain.start_deg < 360.0);
    double gap = std::fmod(plain.goal_deg - plain.start_deg + 360.0, 360.0);
    CHECK(gap >= 60.0);
    CHECK(gap <= 140.0);

    const auto varied = sample_episode(8, env::Variant::kVariedBg, "", rng);
    CHECK(varied.bg.kind == env::BackgroundSpec::Kind::kProceduralTexture);
    bg_seeds.insert(varied.bg.seed);

    const auto agent = sample_episode(8, env::Variant::kVariedAgent, "", rng);
    CHECK(agent.agent.arm_length == doctest::Approx(env::default_agent(8).arm_length));
  }
  CHECK(bg_seeds.size() == 8);
}

TEST_CASE("servo evaluation aggregates episodes") {
  model::Clasp<real> m(micro_cfg(), 36);
  ServoEvalConfig cfg;
  cfg.episodes = 3;
  cfg.policy = plan::Policy::kRandom;
  cfg.planner.servo_steps = 2;
  cfg.planner.cem.samples = 4;
  cfg.planner.cem.elites = 2;
  cfg.planner.cem.iters = 1;
  cfg.planner.cem.horizon = 2;

  evalkit::EvalReport rep = eval_servo(m, nullptr, cfg);
  CHECK(rep.experiment == "servo");
  CHECK(rep.identifiers.at("policy") == "random");
  REQUIRE(rep.per_item.at("final_error").size() == 3);
  check_aggregates(rep);
  for (double s : rep.per_item.at("steps_used")) CHECK(s <= 2.0);
  for (double e : rep.per_item.at("start_error")) {
    CHECK(e >= 60.0 - 1e-9);
    CHECK(e <= 140.0 + 1e-9);
  }

  SUBCASE("same seed reproduces the run") {
    evalkit::EvalReport again = eval_servo(m, nullptr, cfg);
    CHECK(again.per_item.at("final_error") == rep.per_item.at("final_error"));
  }
}

TEST_CASE("data-efficiency sweep over nested budgets") {
  TempDir work("sweep");
  model::Clasp<real> m(micro_cfg(), 37);
  dataio::DatasetReader reader(micro_dataset());

  SweepConfig cfg;
  cfg.budgets = {4, 8};
  cfg.ground = quick_ground_cfg();
  cfg.pred_eval.max_sequences = 2;
  cfg.servo.episodes = 1;
  cfg.servo.planner.servo_steps = 1;
  cfg.servo.planner.cem.samples = 4;
  cfg.servo.planner.cem.elites = 2;
  cfg.servo.planner.cem.iters = 1;
  cfg.servo.planner.cem.horizon = 2;
  cfg.supervised.steps = 12;
  cfg.supervised.batch_size = 2;
  cfg.supervised.lr = 1e-3;
  cfg.supervised.ckpt_every = 1000;
  cfg.supervised.log_every = 50;
  cfg.supervised.quiet = true;

  evalkit::EvalReport rep =
      data_efficiency_sweep(m, reader, micro_dataset(), work.path.string(), cfg);
  for (int b : cfg.budgets) {
    const std::string tag = "@" + std::to_string(b);
    REQUIRE(rep.per_item.at("clasp_pred_err" + tag).size() == 2);
    REQUIRE(rep.per_item.at("sup_pred_err" + tag).size() == 2);
    REQUIRE(rep.per_item.at("clasp_servo" + tag).size() == 1);
    REQUIRE(rep.per_item.at("sup_servo" + tag).size() == 1);
    REQUIRE(rep.per_item.at("grounding_val_mse" + tag).size() == 1);
  }
  check_aggregates(rep);
  CHECK(fs::exists(work.path / "sup-4" / "ckpt-final.bin"));
  CHECK(fs::exists(work.path / "sup-8" / "ckpt-final.bin"));

  SUBCASE("budget larger than the split is rejected") {
    cfg.budgets = {999};
    CHECK_THROWS_AS(data_efficiency_sweep(m, reader, micro_dataset(), work.path.string(), cfg),
                    ConfigError);
  }
}
