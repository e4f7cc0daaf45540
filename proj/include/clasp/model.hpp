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
#ifndef CLASP_MODEL_HPP_
#define CLASP_MODEL_HPP_

#include <cmath>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "clasp/autodiff.hpp"
#include "clasp/common.hpp"
#include "clasp/nn.hpp"
#include "clasp/rng.hpp"
#include "clasp/tensor.hpp"

namespace clasp::model {

// Log-std clamp bounds shared by every Gaussian head. The lower bound keeps
// the KL term finite when a unit collapses; the upper keeps sampled noise
// from blowing up activations early in training.
constexpr double kLogStdMin = -13.815510557964274;  // ln 1e-6
constexpr double kLogStdMax = 6.907755278982137;    // ln 1e3

struct PredictorConfig {
  int image_size = 32;
  int channels = 3;
  int enc_levels = 4;   // stride-2 conv stages; level i has enc_base<<i filters
  int enc_base = 8;
  int enc_dim = 128;    // frame embedding width, also the recurrent token width
  int latent_dim = 10;
  int lstm_hidden = 256;
  int infer_h1 = 256;
  int infer_h2 = 128;
  int comp_hidden = 32;       // composition MLP, two hidden layers this wide
  int act_embed_hidden = 32;  // supervised action-embedding MLP hidden width
  int cond_frames = 5;        // frames whose ground-truth encodings feed the core
  int seq_len = 15;           // frames per training sequence
  int comp_chunk = 4;         // latents composed into one block transition
  double beta_z = 1e-2;
  double beta_nu = 1e-8;
  double action_max = 40.0;       // input scaling for the supervised embedding
  bool skip_connections = false;  // pass encoder features of the last
                                  // conditioning frame into the decoder

  int bottom_size() const { return image_size >> enc_levels; }
  int top_channels() const { return enc_base << (enc_levels - 1); }
  int flat_size() const { return top_channels() * bottom_size() * bottom_size(); }
  int comp_blocks() const { return (seq_len - cond_frames) / comp_chunk; }

  void validate() const {
    if (image_size <= 0 || (image_size & (image_size - 1)) != 0)
      throw ConfigError("image_size must be a positive power of two");
    if (enc_levels < 1 || bottom_size() < 2)
      throw ConfigError("enc_levels leaves no spatial extent at the bottleneck");
    if (cond_frames < 2) throw ConfigError("need at least two conditioning frames");
    if (seq_len <= cond_frames) throw ConfigError("seq_len must exceed cond_frames");
    if (comp_chunk < 2) throw ConfigError("comp_chunk must be at least 2");
    if (latent_dim < 1 || enc_dim < 1 || lstm_hidden < 1) throw ConfigError("bad model widths");
  }
};

// Diagonal Gaussian over a latent batch, parameterized by graph values so
// gradients flow through both heads.
template <class T>
struct Gaussian {
  ad::Value<T> mean;     // [B, d]
  ad::Value<T> log_std;  // [B, d], already clamped

  // z = mu + sigma * eps with externally supplied noise.
  ad::Value<T> sample(const Tensor<T>& eps) const {
    return ad::add(mean, ad::mul(ad::exp_op(log_std), ad::Value<T>::constant(eps)));
  }

  // Closed-form KL(q || N(0, I)) summed over batch and dimensions:
  // 1/2 * sum(sigma^2 + mu^2 - 1 - 2 log sigma).
  ad::Value<T> kl_to_prior_sum() const {
    auto var = ad::exp_op(ad::scale(log_std, T(2)));
    auto quad = ad::add(var, ad::square(mean));
    auto half = ad::scale(ad::sub(quad, ad::scale(log_std, T(2))), T(0.5));
    return ad::add_scalar(ad::sum(half), T(-0.5) * T(mean.size()));
  }
};

// One recurrent-core invocation, recorded so tests can assert the input
// scheduling discipline (which steps saw ground-truth encodings, and which
// latent kind each step consumed).
struct CoreEvent {
  int step;                     // transition index t, predicts frame t
  bool ground_truth_encoding;   // true: encoder output of a real frame
  int indicator;                // 0 = per-step latent, 1 = composed latent
};
using TraceLog = std::vector<CoreEvent>;

// Reorders [B, T, C, H, W] into [T*B, C, H, W] so each timestep is a
// contiguous row block.
template <class T>
Tensor<T> to_time_major(const Tensor<T>& frames) {
  const int b = frames.dim(0), t = frames.dim(1);
  const size_t fsz = static_cast<size_t>(frames.dim(2)) * frames.dim(3) * frames.dim(4);
  Tensor<T> out({t * b, frames.dim(2), frames.dim(3), frames.dim(4)});
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < t; ++j)
      std::memcpy(out.data() + (static_cast<size_t>(j) * b + i) * fsz,
                  frames.data() + (static_cast<size_t>(i) * t + j) * fsz, fsz * sizeof(T));
  return out;
}

// Copies a contiguous row block out of a host tensor (no graph involvement).
template <class T>
Tensor<T> rows_of(const Tensor<T>& src, int start, int len) {
  size_t stride = 1;
  for (int i = 1; i < src.rank(); ++i) stride *= src.dim(i);
  std::vector<int> shape = src.shape();
  shape[0] = len;
  Tensor<T> out(shape);
  std::memcpy(out.data(), src.data() + static_cast<size_t>(start) * stride,
              static_cast<size_t>(len) * stride * sizeof(T));
  return out;
}

template <class T>
Tensor<T> draw_normal(std::vector<int> shape, Rng& rng) {
  Tensor<T> out(std::move(shape));
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(rng.normal());
  return out;
}

// Frame-predictive core: convolutional frame encoder, an LSTM that advances
// on (frame embedding, latent, indicator) triples, a convolutional decoder,
// and a Gaussian inference head over consecutive frame embeddings. The 128-d
// recurrent output doubles as the next step's input embedding when rolling
// out, so long horizons never re-encode their own pixel output.
template <class T>
class Predictor {
 public:
  Predictor(const PredictorConfig& cfg, nn::ParamRegistry<T>& reg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    int in_c = cfg.channels;
    for (int i = 0; i < cfg.enc_levels; ++i) {
      const int out_c = cfg.enc_base << i;
      enc_convs_.emplace_back(reg, "enc.conv" + std::to_string(i), in_c, out_c, 3, 2, 1, rng);
      in_c = out_c;
    }
    enc_fc_ = nn::Linear<T>(reg, "enc.fc", cfg.flat_size(), cfg.enc_dim, rng);
    lstm_ = nn::LstmCell<T>(reg, "core.lstm", cfg.enc_dim + cfg.latent_dim + 1, cfg.lstm_hidden, rng);
    core_fc_ = nn::Linear<T>(reg, "core.fc", cfg.lstm_hidden, cfg.enc_dim, rng);
    dec_fc_ = nn::Linear<T>(reg, "dec.fc", cfg.enc_dim, cfg.flat_size(), rng);
    for (int i = cfg.enc_levels - 1; i >= 1; --i) {
      const int skip_c = cfg.skip_connections ? (cfg.enc_base << (i - 1)) : 0;
      dec_convs_.emplace_back(reg, "dec.conv" + std::to_string(i), (cfg.enc_base << i) + skip_c,
                              cfg.enc_base << (i - 1), 3, 1, 1, rng);
    }
    dec_out_ = nn::Conv2d<T>(reg, "dec.out", cfg.enc_base, cfg.channels, 3, 1, 1, rng);
    infer_fc1_ = nn::Linear<T>(reg, "infer.fc0", 2 * cfg.enc_dim, cfg.infer_h1, rng);
    infer_fc2_ = nn::Linear<T>(reg, "infer.fc1", cfg.infer_h1, cfg.infer_h2, rng);
    infer_mean_ = nn::Linear<T>(reg, "infer.mean", cfg.infer_h2, cfg.latent_dim, rng);
    infer_logstd_ = nn::Linear<T>(reg, "infer.logstd", cfg.infer_h2, cfg.latent_dim, rng);
  }

  const PredictorConfig& config() const { return cfg_; }

  struct Encoded {
    ad::Value<T> h;                    // [N, enc_dim], tanh-bounded
    std::vector<ad::Value<T>> feats;   // per-level conv activations
  };

  Encoded encode(const ad::Value<T>& frames) const {
    Encoded out;
    ad::Value<T> x = frames;
    for (const auto& conv : enc_convs_) {
      x = ad::leaky_relu(conv.forward(x), T(nn::kLeakySlope));
      out.feats.push_back(x);
    }
    const int n = x.shape()[0];
    out.h = ad::tanh_op(enc_fc_.forward(ad::reshape(x, {n, cfg_.flat_size()})));
    return out;
  }

  // skips: encoder features of a reference frame, outermost level first, or
  // empty. Returns sigmoid pixels [N, C, S, S].
  ad::Value<T> decode(const ad::Value<T>& h, const std::vector<ad::Value<T>>& skips) const {
    const int n = h.shape()[0];
    auto x = ad::leaky_relu(dec_fc_.forward(h), T(nn::kLeakySlope));
    x = ad::reshape(x, {n, cfg_.top_channels(), cfg_.bottom_size(), cfg_.bottom_size()});
    for (size_t j = 0; j < dec_convs_.size(); ++j) {
      const int level = cfg_.enc_levels - 1 - static_cast<int>(j);
      x = ad::upsample2x(x);
      if (cfg_.skip_connections) {
        assert(static_cast<int>(skips.size()) >= level);
        x = ad::concat_channels(x, skips[level - 1]);
      }
      x = ad::leaky_relu(dec_convs_[j].forward(x), T(nn::kLeakySlope));
    }
    return ad::sigmoid(dec_out_.forward(ad::upsample2x(x)));
  }

  // q(z_t | x_t, x_{t-1}) from the two frame embeddings.
  Gaussian<T> infer_latent(const ad::Value<T>& enc_t, const ad::Value<T>& enc_prev) const {
    auto h = ad::leaky_relu(infer_fc1_.forward(ad::concat_cols<T>({enc_t, enc_prev})), T(nn::kLeakySlope));
    h = ad::leaky_relu(infer_fc2_.forward(h), T(nn::kLeakySlope));
    return {infer_mean_.forward(h),
            ad::clamp(infer_logstd_.forward(h), T(kLogStdMin), T(kLogStdMax))};
  }

  using CoreState = typename nn::LstmCell<T>::State;

  CoreState initial_state(int batch) const { return lstm_.initial_state(batch); }

  // Advances the core one transition; returns the 128-d output token that
  // both decodes to the predicted frame and feeds the next step.
  ad::Value<T> core_step(CoreState& state, const ad::Value<T>& enc, const ad::Value<T>& latent,
                         int indicator) const {
    const int b = enc.shape()[0];
    auto flag = ad::Value<T>::constant(Tensor<T>::full({b, 1}, T(indicator)));
    state = lstm_.step(ad::concat_cols<T>({enc, latent, flag}), state);
    return ad::tanh_op(core_fc_.forward(state.h));
  }

  // Per-frame embeddings of a time-major frame stack, plus decoder skip
  // features of the last conditioning frame when enabled.
  struct SeqEncoding {
    std::vector<ad::Value<T>> enc;     // seq_len entries, each [B, enc_dim]
    std::vector<ad::Value<T>> skips;   // empty unless skip_connections
  };

  SeqEncoding encode_sequence(const Tensor<T>& frames_tm, int batch, int seq_len) const {
    SeqEncoding out;
    Encoded all = encode(ad::Value<T>::constant(frames_tm));
    for (int t = 0; t < seq_len; ++t) out.enc.push_back(ad::slice_dim0(all.h, t * batch, batch));
    if (cfg_.skip_connections) {
      const int k = cfg_.cond_frames - 1;
      for (const auto& f : all.feats) out.skips.push_back(ad::slice_dim0(f, k * batch, batch));
    }
    return out;
  }

  // Scheduled-input reconstruction pass: predicts frame t from transition
  // latents for t = 1..T-1, feeding ground-truth embeddings while t-1 is a
  // conditioning frame and the core's own output afterwards. Returns the
  // summed squared error against the target frames.
  ad::Value<T> rollout_recon(const SeqEncoding& se, const Tensor<T>& frames_tm, int batch,
                             const std::vector<ad::Value<T>>& latents, TraceLog* trace,
                             int indicator = 0) const {
    const int t_total = static_cast<int>(se.enc.size());
    assert(static_cast<int>(latents.size()) == t_total - 1);
    CoreState state = initial_state(batch);
    ad::Value<T> prev_out;
    ad::Value<T> recon;
    for (int t = 1; t < t_total; ++t) {
      const bool use_gt = t - 1 < cfg_.cond_frames;
      if (trace) trace->push_back({t, use_gt, indicator});
      auto out = core_step(state, use_gt ? se.enc[t - 1] : prev_out, latents[t - 1], indicator);
      auto frame = decode(out, se.skips);
      auto err = ad::sse(frame, rows_of(frames_tm, t * batch, batch));
      recon = recon.node() ? ad::add(recon, err) : err;
      prev_out = out;
    }
    return recon;
  }

  // Variational pass shared by training and ablations: per-transition
  // posteriors, reparameterized samples, reconstruction and KL sums.
  struct PredPass {
    ad::Value<T> recon_sum;
    ad::Value<T> kl_sum;
    SeqEncoding se;
    std::vector<Gaussian<T>> q;       // transition t stored at index t-1
    std::vector<ad::Value<T>> z;
  };

  PredPass predict_pass(const Tensor<T>& frames_tm, int batch, int seq_len, Rng& rng,
                        TraceLog* trace = nullptr) const {
    PredPass p;
    p.se = encode_sequence(frames_tm, batch, seq_len);
    for (int t = 1; t < seq_len; ++t) {
      p.q.push_back(infer_latent(p.se.enc[t], p.se.enc[t - 1]));
      p.z.push_back(p.q.back().sample(draw_normal<T>({batch, cfg_.latent_dim}, rng)));
    }
    p.recon_sum = rollout_recon(p.se, frames_tm, batch, p.z, trace, 0);
    for (const auto& q : p.q) {
      auto kl = q.kl_to_prior_sum();
      p.kl_sum = p.kl_sum.node() ? ad::add(p.kl_sum, kl) : kl;
    }
    return p;
  }

  // Batch-mean frame-prediction objective:
  //   (1/B) * sum_t [ 1/2 * SSE(x_hat_t, x_t) + beta_z * KL(q_t || N(0,I)) ].
  struct PredLoss {
    ad::Value<T> total;
    double recon = 0, kl = 0;  // logged components, batch means
    PredPass pass;
  };

  PredLoss loss_pred(const Tensor<T>& frames_bt, Rng& rng, TraceLog* trace = nullptr) const {
    const int batch = frames_bt.dim(0), seq_len = frames_bt.dim(1);
    Tensor<T> tm = to_time_major(frames_bt);
    PredLoss out;
    out.pass = predict_pass(tm, batch, seq_len, rng, trace);
    const T inv_b = T(1) / T(batch);
    out.total = ad::add(ad::scale(out.pass.recon_sum, T(0.5) * inv_b),
                        ad::scale(out.pass.kl_sum, T(cfg_.beta_z) * inv_b));
    out.recon = static_cast<double>(out.pass.recon_sum.item()) / batch;
    out.kl = static_cast<double>(out.pass.kl_sum.item()) / batch;
    return out;
  }

  // Gradient-free mean rollout for evaluation and planning. cond holds the
  // conditioning frames [B, K, C, H, W]; latents supplies one [B, d] tensor
  // per transition t = 1..total_len-1. Returns the decoded mean frame for
  // every transition (entries below cond_frames are warm-up predictions).
  // Transitions before decode_from skip the decoder and leave an undefined
  // tensor in the result; the recurrence itself is unaffected.
  std::vector<Tensor<T>> rollout_frames(const Tensor<T>& cond, const std::vector<Tensor<T>>& latents,
                                        int total_len, int decode_from = 1) const {
    ad::NoGradGuard ng;
    const int batch = cond.dim(0), k = cond.dim(1);
    if (k != cfg_.cond_frames) throw ConfigError("conditioning frame count mismatch");
    if (static_cast<int>(latents.size()) != total_len - 1)
      throw ConfigError("rollout needs one latent per transition");
    Tensor<T> tm = to_time_major(cond);
    SeqEncoding se = encode_sequence(tm, batch, k);
    CoreState state = initial_state(batch);
    ad::Value<T> prev_out;
    std::vector<Tensor<T>> frames;
    for (int t = 1; t < total_len; ++t) {
      const bool use_gt = t - 1 < k;
      auto lat = ad::Value<T>::constant(latents[t - 1]);
      auto out = core_step(state, use_gt ? se.enc[t - 1] : prev_out, lat, 0);
      frames.push_back(t >= decode_from ? decode(out, se.skips).tensor() : Tensor<T>());
      prev_out = out;
    }
    return frames;
  }

  // Posterior means for every consecutive pair of a frame sequence
  // [B, T, C, H, W]; entry t-1 describes the transition into frame t.
  std::vector<Tensor<T>> posterior_means(const Tensor<T>& frames_bt) const {
    ad::NoGradGuard ng;
    const int batch = frames_bt.dim(0), seq_len = frames_bt.dim(1);
    Tensor<T> tm = to_time_major(frames_bt);
    SeqEncoding se = encode_sequence(tm, batch, seq_len);
    std::vector<Tensor<T>> out;
    for (int t = 1; t < seq_len; ++t)
      out.push_back(infer_latent(se.enc[t], se.enc[t - 1]).mean.tensor());
    return out;
  }

 private:
  PredictorConfig cfg_;
  std::vector<nn::Conv2d<T>> enc_convs_;
  nn::Linear<T> enc_fc_;
  nn::LstmCell<T> lstm_;
  nn::Linear<T> core_fc_;
  nn::Linear<T> dec_fc_;
  std::vector<nn::Conv2d<T>> dec_convs_;
  nn::Conv2d<T> dec_out_;
  nn::Linear<T> infer_fc1_, infer_fc2_, infer_mean_, infer_logstd_;
};

}  // namespace clasp::model

#endif  // CLASP_MODEL_HPP_
