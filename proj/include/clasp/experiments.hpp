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
#ifndef CLASP_EXPERIMENTS_HPP_
#define CLASP_EXPERIMENTS_HPP_

#include <string>
#include <vector>

#include "clasp/composer.hpp"
#include "clasp/dataio.hpp"
#include "clasp/env.hpp"
#include "clasp/evalkit.hpp"
#include "clasp/grounding.hpp"
#include "clasp/planner.hpp"
#include "clasp/train.hpp"

namespace clasp::experiments {

// Float CHW frame in [0, 1] -> uint8 HWC render, for the angle detector.
Tensor<uint8_t> frame_to_u8(const Tensor<real>& chw);

// Signed circular difference a - b wrapped to (-180, 180].
double signed_delta_deg(double a, double b);

struct PredEvalConfig {
  std::string split = "test";
  int max_sequences = 0;   // 0: the whole split
  double action_lo = 0.0;  // replay range for the random-action control
  double action_hi = 40.0;
  uint64_t seed = 99;      // random-control stream
};

// Action-conditioned prediction: map the true actions into latents (through
// the grounding map, or through the model's own action embedding when
// `grounding` is null), roll out from the conditioning prefix, and score the
// detector angle of each predicted frame against the real frame. Also
// reports a hold-the-start-pose control and a random-action replay through
// the simulator.
// Per-item metrics: pred_err, start_state_err, random_err, detect_failures.
evalkit::EvalReport eval_action_conditioned(const model::Clasp<real>& m,
                                            const model::Grounding* grounding,
                                            const dataio::DatasetReader& reader,
                                            const PredEvalConfig& cfg);

struct TransplantResult {
  std::vector<Tensor<real>> frames;  // predicted frames K..T-1, each [3, S, S]
  std::vector<double> donor_delta;   // per-step detector angle deltas of the donor
  std::vector<double> pred_delta;    // same steps on the transplanted prediction
  std::vector<double> delta_err;     // circular |donor_delta - pred_delta|
  int detect_failures = 0;           // steps dropped because detection failed
};

// Infer per-step latents from the donor (posterior means) and roll them out
// on the recipient's conditioning frames. Motion agreement is measured on
// frame-to-frame angle deltas, since the absolute poses differ on purpose.
TransplantResult transplant(const model::Predictor<real>& pred, const env::VideoSequence& donor,
                            const env::VideoSequence& recipient);

// Aggregates transplant() over randomly paired donor/recipient test
// sequences. Per-item metrics: delta_err (per step), fail_rate (per pair).
evalkit::EvalReport eval_transplant(const model::Predictor<real>& pred,
                                    const dataio::DatasetReader& donors,
                                    const dataio::DatasetReader& recipients, int n_pairs,
                                    uint64_t seed);

// Maps actions sampled uniformly over the grounded range through
// act_to_latent then latent_to_act. Per-item metric: round_trip_err.
evalkit::EvalReport eval_round_trip(const model::Grounding& g, int n, uint64_t seed);

struct LatentPca {
  evalkit::PcaResult pca;       // top-2 axes over posterior means
  std::vector<double> actions;  // aligned with the projection rows
  double pc1_ratio = 0.0;
  double pc1_rank_corr = 0.0;   // Spearman(PC1 coordinate, action)
};

// Posterior means over up to n_points frame transitions, mean-centered PCA.
LatentPca pca_latents(const model::Predictor<real>& pred, const dataio::DatasetReader& reader,
                      const std::string& split, int n_points);

struct ServoEvalConfig {
  int episodes = 50;
  plan::Policy policy = plan::Policy::kPlanned;
  plan::PlannerConfig planner;
  env::Variant variant = env::Variant::kPlain;
  std::string background_dir;  // varied_bg external images (held-out split)
  uint64_t seed = 123;
};

// Draws the scene the way the matching dataset's held-out split does:
// default agent, plain or procedural/external background, start angle
// uniform on the circle, goal 60-140 degrees counter-clockwise of it.
plan::ServoEpisodeSpec sample_episode(int image_size, env::Variant variant,
                                      const std::string& background_dir, Rng& rng);

// Per-item metrics: final_error, start_error, steps_used, early_stop.
evalkit::EvalReport eval_servo(const model::Clasp<real>& m, const model::Grounding* grounding,
                               const ServoEvalConfig& cfg);

struct SweepConfig {
  std::vector<int> budgets{50, 200, 1000};
  uint64_t label_seed = 1;  // must match the grounding fits being compared
  model::GroundingConfig ground;
  PredEvalConfig pred_eval;
  ServoEvalConfig servo;
  model::TrainConfig supervised;  // template; labeled/out_dir are set per budget
  bool run_servo = true;
  bool run_supervised = true;
};

// Label-budget sweep over nested subsets: per budget, refit the grounding of
// the given model and evaluate; optionally retrain the supervised variant on
// the same labeled subset for contrast. Metric keys carry an @<budget>
// suffix, e.g. clasp_pred_err@50, sup_servo@200.
evalkit::EvalReport data_efficiency_sweep(const model::Clasp<real>& m,
                                          const dataio::DatasetReader& reader,
                                          const std::string& data_dir,
                                          const std::string& work_dir, const SweepConfig& cfg);

}  // namespace clasp::experiments

#endif  // CLASP_EXPERIMENTS_HPP_
