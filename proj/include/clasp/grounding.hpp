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
#ifndef CLASP_GROUNDING_HPP_
#define CLASP_GROUNDING_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "clasp/common.hpp"
#include "clasp/dataio.hpp"
#include "clasp/model.hpp"
#include "clasp/nn.hpp"

namespace clasp::model {

struct GroundingConfig {
  int hidden = 32;           // both mapping MLPs: two hidden layers this wide
  int batch = 256;
  double lr = 1e-3;
  int max_steps = 5000;
  int eval_every = 50;
  int patience = 20;         // consecutive non-improving evals before stopping
  double val_fraction = 0.1;
  uint64_t seed = 7;
};

// Bidirectional maps between physical actions (degrees) and the predictor's
// transition latents, fit by regression on a small labeled set against a
// frozen predictor. Actions are standardized internally; the inverse map
// clamps to the action range seen during fitting and reports when it had to.
class Grounding {
 public:
  Grounding() = default;

  int latent_dim() const { return latent_dim_; }
  uint32_t predictor_crc() const { return predictor_crc_; }
  int64_t pair_count() const { return pairs_; }
  double val_mse_latent() const { return val_lat_; }
  double val_mse_action() const { return val_act_; }
  double action_min() const { return u_min_; }
  double action_max() const { return u_max_; }

  // Latents the predictor should execute for the given actions: [n, d].
  Tensor<real> act_to_latent(const std::vector<double>& u_deg) const;

  struct ActionEstimate {
    double u_deg = 0;
    bool extrapolated = false;  // raw output fell outside the fitted range
  };

  // Action readout for each row of a latent batch [n, d].
  std::vector<ActionEstimate> latent_to_act(const Tensor<real>& z) const;

  void save(const std::string& path) const;
  static Grounding load(const std::string& path);

  // Fails when the artifact was fit against different predictor weights.
  void check_predictor(uint32_t crc) const;

  friend Grounding fit_grounding(const Predictor<real>& pred, uint32_t predictor_crc,
                                 const dataio::DatasetReader& reader,
                                 const std::vector<int>& labeled_indices,
                                 const GroundingConfig& cfg);

 private:
  struct Net {
    nn::ParamRegistry<real> reg;
    nn::Mlp<real> mlp;
  };

  int latent_dim_ = 0;
  int hidden_ = 0;
  Net lat_;  // standardized action -> latent
  Net act_;  // latent -> standardized action
  double u_mean_ = 0, u_std_ = 1, u_min_ = 0, u_max_ = 0;
  double val_lat_ = 0, val_act_ = 0;
  int64_t pairs_ = 0;
  uint32_t predictor_crc_ = 0;
};

// Collects (action, posterior-mean latent) pairs from every consecutive
// frame pair of the labeled sequences and fits both maps.
Grounding fit_grounding(const Predictor<real>& pred, uint32_t predictor_crc,
                        const dataio::DatasetReader& reader, const std::vector<int>& labeled_indices,
                        const GroundingConfig& cfg = {});

}  // namespace clasp::model

#endif  // CLASP_GROUNDING_HPP_
