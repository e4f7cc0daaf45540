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
#ifndef CLASP_COMPOSER_HPP_
#define CLASP_COMPOSER_HPP_

#include <string>
#include <vector>

#include "clasp/model.hpp"

namespace clasp::model {

// Learns to merge two transition latents into one that spans both
// transitions. Chains of merges let a single recurrent step stand in for a
// whole block of frames, which is what forces the per-step latents to carry
// composable (action-like) content.
template <class T>
class Composer {
 public:
  Composer(const PredictorConfig& cfg, nn::ParamRegistry<T>& reg, Rng& rng) : cfg_(cfg) {
    const int d = cfg.latent_dim, h = cfg.comp_hidden;
    fc1_ = nn::Linear<T>(reg, "comp.fc0", 2 * d, h, rng);
    fc2_ = nn::Linear<T>(reg, "comp.fc1", h, h, rng);
    mean_ = nn::Linear<T>(reg, "comp.mean", h, d, rng);
    logstd_ = nn::Linear<T>(reg, "comp.logstd", h, d, rng);
  }

  // q(nu | a, b): the distribution over a latent equivalent to applying a
  // then b.
  Gaussian<T> compose(const ad::Value<T>& a, const ad::Value<T>& b) const {
    auto h = ad::leaky_relu(fc1_.forward(ad::concat_cols<T>({a, b})), T(nn::kLeakySlope));
    h = ad::leaky_relu(fc2_.forward(h), T(nn::kLeakySlope));
    return {mean_.forward(h), ad::clamp(logstd_.forward(h), T(kLogStdMin), T(kLogStdMax))};
  }

  struct Chain {
    ad::Value<T> nu;    // folded latent covering all inputs
    Gaussian<T> last;   // distribution of the final merge, for the KL term
  };

  // Left fold over the block's latents. With an rng each intermediate is a
  // reparameterized sample; without, the fold follows the means.
  Chain compose_chain(const std::vector<ad::Value<T>>& zs, Rng* rng) const {
    assert(zs.size() >= 2);
    Chain out;
    ad::Value<T> cur = zs[0];
    const int batch = zs[0].shape()[0];
    for (size_t i = 1; i < zs.size(); ++i) {
      out.last = compose(cur, zs[i]);
      cur = rng ? out.last.sample(draw_normal<T>({batch, cfg_.latent_dim}, *rng))
                : out.last.mean;
    }
    out.nu = cur;
    return out;
  }

 private:
  PredictorConfig cfg_;
  nn::Linear<T> fc1_, fc2_, mean_, logstd_;
};

enum class TrainMode { kClasp, kNoComposability, kSupervised };

inline const char* train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::kClasp: return "clasp";
    case TrainMode::kNoComposability: return "no_comp";
    case TrainMode::kSupervised: return "supervised";
  }
  return "clasp";
}

inline TrainMode parse_train_mode(const std::string& s) {
  if (s == "clasp") return TrainMode::kClasp;
  if (s == "no_comp") return TrainMode::kNoComposability;
  if (s == "supervised") return TrainMode::kSupervised;
  throw ConfigError("unknown train mode: " + s);
}

// The full trainable bundle. Parameter creation order is fixed (predictor,
// composer, action embedding) and all three draw from one init stream, so a
// given seed yields identical predictor weights in every mode.
template <class T>
struct Clasp {
  PredictorConfig cfg;
  nn::ParamRegistry<T> reg;
  Rng init_rng;  // consumed during construction only
  Predictor<T> pred;
  Composer<T> comp;
  nn::Mlp<T> act_embed;  // scaled action -> latent, for the supervised baseline

  Clasp(const PredictorConfig& c, uint64_t seed)
      : cfg(c),
        init_rng(Rng(seed).split(0xC1A5)),
        pred(cfg, reg, init_rng),
        comp(cfg, reg, init_rng),
        act_embed(reg, "act.embed", 1, {c.act_embed_hidden, c.act_embed_hidden}, c.latent_dim,
                  init_rng) {}

  Clasp(const Clasp&) = delete;
  Clasp& operator=(const Clasp&) = delete;
};

// Composed-block objective terms. Blocks tile the predicted span: block j
// folds the latents of transitions K+jC .. K+(j+1)C-1 (1-indexed), and one
// core step under indicator 1 must reproduce the block's final frame. The
// recurrent context is rebuilt from the conditioning transitions with the
// same latent samples the prediction pass used; later blocks consume the
// previous block's output token, never a re-encoded pixel frame.
template <class T>
struct CompTerms {
  ad::Value<T> recon_sum;
  ad::Value<T> kl_sum;
};

template <class T>
CompTerms<T> composed_loss(const Predictor<T>& pred, const Composer<T>& comp,
                           const typename Predictor<T>::PredPass& p, const Tensor<T>& frames_tm,
                           int batch, Rng* rng, TraceLog* trace = nullptr) {
  const auto& cfg = pred.config();
  const int k = cfg.cond_frames, c = cfg.comp_chunk, blocks = cfg.comp_blocks();
  if (blocks < 1) throw ConfigError("sequence too short for any composed block");
  typename Predictor<T>::CoreState state = pred.initial_state(batch);
  for (int t = 1; t < k; ++t) {
    if (trace) trace->push_back({t, true, 0});
    pred.core_step(state, p.se.enc[t - 1], p.z[t - 1], 0);
  }
  CompTerms<T> out;
  ad::Value<T> prev_out;
  for (int j = 0; j < blocks; ++j) {
    std::vector<ad::Value<T>> zs(p.z.begin() + (k - 1 + j * c), p.z.begin() + (k - 1 + (j + 1) * c));
    auto chain = comp.compose_chain(zs, rng);
    const bool use_gt = j == 0;
    const int target = k - 1 + (j + 1) * c;
    if (trace) trace->push_back({target, use_gt, 1});
    auto tok = pred.core_step(state, use_gt ? p.se.enc[k - 1] : prev_out, chain.nu, 1);
    auto err = ad::sse(pred.decode(tok, p.se.skips), rows_of(frames_tm, target * batch, batch));
    out.recon_sum = out.recon_sum.node() ? ad::add(out.recon_sum, err) : err;
    auto kl = chain.last.kl_to_prior_sum();
    out.kl_sum = out.kl_sum.node() ? ad::add(out.kl_sum, kl) : kl;
    prev_out = tok;
  }
  return out;
}

template <class T>
struct LossParts {
  ad::Value<T> total;
  double recon = 0;       // prediction-pass SSE, batch mean
  double kl_z = 0;        // per-step latent KL, batch mean
  double comp_recon = 0;  // composed-block SSE, batch mean
  double kl_nu = 0;       // composed latent KL, batch mean
};

// Mode-dependent training objective. Noise is always drawn in the same
// order (per-step latents first, composition noise after), so disabling the
// composability term consumes a prefix of the same stream and matches a
// plain prediction-only run bit for bit.
template <class T>
LossParts<T> loss_total(const Clasp<T>& m, const Tensor<T>& frames_bt, const Tensor<T>& actions,
                        TrainMode mode, Rng& rng, TraceLog* trace = nullptr) {
  const int batch = frames_bt.dim(0), seq_len = frames_bt.dim(1);
  const auto& cfg = m.cfg;
  Tensor<T> tm = to_time_major(frames_bt);
  const T inv_b = T(1) / T(batch);
  LossParts<T> out;

  if (mode == TrainMode::kSupervised) {
    if (!actions.defined() || actions.dim(0) != batch || actions.dim(1) != seq_len - 1)
      throw ConfigError("supervised mode needs per-transition actions");
    auto se = m.pred.encode_sequence(tm, batch, seq_len);
    std::vector<ad::Value<T>> latents;
    for (int t = 1; t < seq_len; ++t) {
      Tensor<T> u({batch, 1});
      for (int i = 0; i < batch; ++i)
        u[i] = actions.data()[static_cast<size_t>(i) * (seq_len - 1) + (t - 1)] /
               static_cast<T>(cfg.action_max);
      latents.push_back(m.act_embed.forward(ad::Value<T>::constant(u)));
    }
    auto recon = m.pred.rollout_recon(se, tm, batch, latents, trace, 0);
    out.total = ad::scale(recon, T(0.5) * inv_b);
    out.recon = static_cast<double>(recon.item()) / batch;
    return out;
  }

  auto p = m.pred.predict_pass(tm, batch, seq_len, rng, trace);
  out.total = ad::add(ad::scale(p.recon_sum, T(0.5) * inv_b),
                      ad::scale(p.kl_sum, T(cfg.beta_z) * inv_b));
  out.recon = static_cast<double>(p.recon_sum.item()) / batch;
  out.kl_z = static_cast<double>(p.kl_sum.item()) / batch;

  if (mode == TrainMode::kClasp) {
    auto ct = composed_loss(m.pred, m.comp, p, tm, batch, &rng, trace);
    out.total = ad::add(out.total, ad::add(ad::scale(ct.recon_sum, T(0.5) * inv_b),
                                           ad::scale(ct.kl_sum, T(cfg.beta_nu) * inv_b)));
    out.comp_recon = static_cast<double>(ct.recon_sum.item()) / batch;
    out.kl_nu = static_cast<double>(ct.kl_sum.item()) / batch;
  }
  return out;
}

}  // namespace clasp::model

#endif  // CLASP_COMPOSER_HPP_
