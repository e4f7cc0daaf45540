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
#ifndef CLASP_TRAIN_HPP_
#define CLASP_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "clasp/checkpoint.hpp"
#include "clasp/common.hpp"
#include "clasp/composer.hpp"

namespace clasp::model {

struct TrainConfig {
  TrainMode mode = TrainMode::kClasp;
  int steps = 3000;
  int batch_size = 16;
  double lr = 2e-4;
  uint64_t seed = 1;
  std::string data_dir;        // dataset root (must exist)
  std::string out_dir;         // run directory for checkpoints and metrics
  int log_every = 25;
  int ckpt_every = 1000;
  int labeled = 0;             // >0: train only on this many labeled sequences
  bool quiet = false;          // suppress stdout progress lines

  // Ramp the latent KL weight linearly from 0 to its configured value over
  // this many steps. Deep stochastic predictors otherwise tend to collapse
  // the posterior before the decoder is good enough for the latent to pay
  // for its code length; the final objective is unchanged.
  int kl_warmup = 0;
};

struct StepStats {
  int step = 0;
  double total = 0, recon = 0, kl_z = 0, comp_recon = 0, kl_nu = 0;
  double seconds = 0;
};

struct TrainResult {
  std::string checkpoint_path;   // final checkpoint
  StepStats first, last;
  uint32_t param_crc = 0;
};

// Runs the full optimization loop against a dataset on disk, writing
// metrics.jsonl and periodic checkpoints under out_dir. The optional
// observer sees every step's stats (used by tests to watch convergence).
TrainResult train(const PredictorConfig& model_cfg, const TrainConfig& train_cfg,
                  const std::function<void(const StepStats&)>& observer = nullptr);

// Loads a checkpoint into a freshly constructed model bundle.
std::unique_ptr<Clasp<real>> load_model(const std::string& checkpoint_path, CheckpointMeta* meta = nullptr);

}  // namespace clasp::model

#endif  // CLASP_TRAIN_HPP_
