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
#include "clasp/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "clasp/checkpoint.hpp"
#include "clasp/dataio.hpp"

namespace clasp::model {

namespace fs = std::filesystem;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

void check_finite(double v, int step) {
  if (!std::isfinite(v))
    throw NumericalError("non-finite loss at step " + std::to_string(step));
}

}  // namespace

TrainResult train(const PredictorConfig& model_cfg, const TrainConfig& tc,
                  const std::function<void(const StepStats&)>& observer) {
  model_cfg.validate();
  if (tc.steps < 1) throw ConfigError("steps must be positive");
  if (tc.out_dir.empty()) throw ConfigError("out_dir is required");
  fs::create_directories(tc.out_dir);

  dataio::DatasetReader reader(tc.data_dir);
  if (reader.manifest().image_size != model_cfg.image_size)
    throw ConfigError("dataset image size does not match the model config");
  if (reader.manifest().seq_len < model_cfg.seq_len)
    throw ConfigError("dataset sequences shorter than the model's seq_len");

  std::vector<int> subset;
  if (tc.labeled > 0)
    subset = dataio::labeled_subset(reader.count("train"), tc.labeled, tc.seed);
  dataio::BatchIterator batches(reader, "train", tc.batch_size, model_cfg.seq_len,
                                Rng::splitmix_of(tc.seed ^ 0xDA7Aull), subset);

  Clasp<real> m(model_cfg, tc.seed);
  nn::Adam<real> opt(m.reg, static_cast<real>(tc.lr));
  Rng noise = Rng(tc.seed).split(0x4015E);

  std::ofstream metrics(fs::path(tc.out_dir) / "metrics.jsonl", std::ios::app);
  if (!metrics) throw IoError("cannot open metrics.jsonl under " + tc.out_dir);

  TrainResult result;
  const double t0 = now_seconds();
  const double beta_z_full = model_cfg.beta_z;
  for (int step = 1; step <= tc.steps; ++step) {
    if (tc.kl_warmup > 0)
      m.cfg.beta_z = beta_z_full * std::min(1.0, static_cast<double>(step) / tc.kl_warmup);
    dataio::Batch batch = batches.next();
    m.reg.zero_grad();
    auto loss = loss_total(m, batch.frames, batch.actions, tc.mode, noise);
    const double total = static_cast<double>(loss.total.item());
    check_finite(total, step);
    ad::backward(loss.total);
    opt.step();

    StepStats st;
    st.step = step;
    st.total = total;
    st.recon = loss.recon;
    st.kl_z = loss.kl_z;
    st.comp_recon = loss.comp_recon;
    st.kl_nu = loss.kl_nu;
    st.seconds = now_seconds() - t0;
    if (step == 1) result.first = st;
    result.last = st;
    if (observer) observer(st);

    if (step % tc.log_every == 0 || step == 1 || step == tc.steps) {
      nlohmann::json line = {{"step", st.step},           {"total", st.total},
                             {"recon", st.recon},         {"kl_z", st.kl_z},
                             {"comp_recon", st.comp_recon}, {"kl_nu", st.kl_nu},
                             {"seconds", st.seconds},     {"epoch", batches.epoch()}};
      metrics << line.dump() << "\n";
      metrics.flush();
      if (!tc.quiet)
        std::printf("step %6d/%d  total %.4f  recon %.4f  kl_z %.4f  comp %.4f  (%.1fs)\n", step,
                    tc.steps, st.total, st.recon, st.kl_z, st.comp_recon, st.seconds);
    }

    if (step % tc.ckpt_every == 0 || step == tc.steps) {
      CheckpointMeta meta;
      meta.cfg = model_cfg;
      meta.mode = train_mode_name(tc.mode);
      meta.step = step;
      meta.seed = tc.seed;
      meta.rng_state = noise.save_state();
      char name[64];
      std::snprintf(name, sizeof(name), "ckpt-%06d.bin", step);
      save_checkpoint(fs::path(tc.out_dir) / name, m, &opt, meta);
      save_checkpoint(fs::path(tc.out_dir) / "ckpt-final.bin", m, &opt, meta);
      result.checkpoint_path = (fs::path(tc.out_dir) / "ckpt-final.bin").string();
    }
  }
  result.param_crc = param_checksum(m.reg);
  return result;
}

std::unique_ptr<Clasp<real>> load_model(const std::string& checkpoint_path, CheckpointMeta* meta_out) {
  CheckpointMeta meta = peek_checkpoint(checkpoint_path);
  auto m = std::make_unique<Clasp<real>>(meta.cfg, meta.seed);
  load_checkpoint(checkpoint_path, *m);
  if (meta_out) *meta_out = meta;
  return m;
}

}  // namespace clasp::model
