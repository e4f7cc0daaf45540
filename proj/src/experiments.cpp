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
#include "clasp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "clasp/checkpoint.hpp"

namespace clasp::experiments {

using model::Clasp;
using model::Grounding;
using model::Predictor;

Tensor<uint8_t> frame_to_u8(const Tensor<real>& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) throw ConfigError("expected a [3, S, S] frame");
  const int s = chw.dim(1);
  Tensor<uint8_t> out({s, s, 3});
  const size_t plane = static_cast<size_t>(s) * s;
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = static_cast<double>(chw[static_cast<size_t>(c) * plane + static_cast<size_t>(y) * s + x]);
        out[(static_cast<size_t>(y) * s + x) * 3 + c] =
            static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
  return out;
}

double signed_delta_deg(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Conditioning prefix [1, K, 3, S, S] out of a [T, 3, S, S] sequence tensor.
Tensor<real> cond_prefix(const Tensor<real>& ft, int k) {
  const int c = ft.dim(1), s = ft.dim(2);
  Tensor<real> cond({1, k, c, s, s});
  std::copy_n(ft.data(), cond.size(), cond.data());
  return cond;
}

std::vector<Tensor<real>> rows_as_latents(const Tensor<real>& mat) {
  std::vector<Tensor<real>> out;
  const int d = mat.dim(1);
  for (int i = 0; i < mat.dim(0); ++i) {
    Tensor<real> row({1, d});
    std::copy_n(mat.data() + static_cast<size_t>(i) * d, d, row.data());
    out.push_back(std::move(row));
  }
  return out;
}

// Latents for the supervised variant: the model's own action embedding.
std::vector<Tensor<real>> embedded_actions(const Clasp<real>& m, const std::vector<double>& u) {
  ad::NoGradGuard ng;
  Tensor<real> in({static_cast<int>(u.size()), 1});
  for (size_t i = 0; i < u.size(); ++i) in[i] = static_cast<real>(u[i] / m.cfg.action_max);
  return rows_as_latents(m.act_embed.forward(ad::Value<real>::constant(in)).tensor());
}

void check_dataset_shape(const model::PredictorConfig& cfg, const dataio::DatasetReader& reader) {
  if (reader.manifest().image_size != cfg.image_size)
    throw ConfigError("dataset image size does not match the model");
  if (reader.manifest().seq_len < cfg.seq_len)
    throw ConfigError("dataset sequences are shorter than the model's horizon");
}

}  // namespace

evalkit::EvalReport eval_action_conditioned(const Clasp<real>& m, const Grounding* grounding,
                                            const dataio::DatasetReader& reader,
                                            const PredEvalConfig& cfg) {
  check_dataset_shape(m.cfg, reader);
  if (grounding && grounding->latent_dim() != m.cfg.latent_dim)
    throw ConfigError("grounding latent width does not match the model");
  const int total = reader.count(cfg.split);
  const int n = cfg.max_sequences > 0 ? std::min(cfg.max_sequences, total) : total;
  const int k = m.cfg.cond_frames, t_len = m.cfg.seq_len;

  evalkit::EvalReport report;
  report.experiment = "action_conditioned";
  report.identifiers["split"] = cfg.split;
  report.identifiers["sequences"] = std::to_string(n);
  report.identifiers["latent_source"] = grounding ? "grounding" : "action_embedding";

  Rng rng(cfg.seed);
  for (int i = 0; i < n; ++i) {
    const env::VideoSequence seq = reader.read(cfg.split, i);
    if (!seq.has_actions) throw ConfigError("evaluation split is missing actions");
    const double arm = env::arm_length_px(seq.agent);
    Tensor<real> ft = dataio::frames_tensor(seq);
    std::vector<double> acts(seq.actions.begin(), seq.actions.begin() + (t_len - 1));

    std::vector<Tensor<real>> latents =
        grounding ? rows_as_latents(grounding->act_to_latent(acts)) : embedded_actions(m, acts);
    const auto rollout = m.pred.rollout_frames(cond_prefix(ft, k), latents, t_len, k);

    const evalkit::AngleEstimate ref = evalkit::detect_angle(seq.frame(k - 1), arm);
    std::vector<double> err, err_ss;
    int fails = 0;
    for (int t = k; t < t_len; ++t) {
      const auto gt = evalkit::detect_angle(seq.frame(t), arm);
      const auto pd = evalkit::detect_angle(frame_to_u8(rollout[t - 1].reshaped({3, ft.dim(2), ft.dim(3)})), arm);
      if (gt.valid && pd.valid)
        err.push_back(evalkit::angular_error(gt.angle_deg, pd.angle_deg));
      else
        ++fails;
      if (gt.valid && ref.valid) err_ss.push_back(evalkit::angular_error(gt.angle_deg, ref.angle_deg));
    }

    // Random control: replay uniform actions through the simulator itself.
    double truth = seq.init_angle;
    for (int t = 0; t < k - 1; ++t) truth = env::step({truth}, {seq.actions[t]}).angle_deg;
    double walker = truth;
    std::vector<double> err_rand;
    for (int t = k; t < t_len; ++t) {
      truth = env::step({truth}, {seq.actions[t - 1]}).angle_deg;
      walker = env::step({walker}, {rng.uniform(cfg.action_lo, cfg.action_hi)}).angle_deg;
      err_rand.push_back(evalkit::angular_error(truth, walker));
    }

    report.add("pred_err", mean_of(err));
    report.add("start_state_err", mean_of(err_ss));
    report.add("random_err", mean_of(err_rand));
    report.add("detect_failures", fails);
  }
  report.finalize_aggregates();
  return report;
}

TransplantResult transplant(const Predictor<real>& pred, const env::VideoSequence& donor,
                            const env::VideoSequence& recipient) {
  if (donor.image_size() != pred.config().image_size ||
      recipient.image_size() != pred.config().image_size)
    throw ConfigError("transplant frames do not match the model's image size");
  const int t_len = pred.config().seq_len;
  if (donor.len() < t_len || recipient.len() < t_len)
    throw ConfigError("transplant needs full-length sequences");
  const int k = pred.config().cond_frames;

  Tensor<real> donor_ft = dataio::frames_tensor(donor);
  const int c = donor_ft.dim(1), s = donor_ft.dim(2);
  const auto latents =
      pred.posterior_means(donor_ft.reshaped({1, donor.len(), c, s, s}));
  std::vector<Tensor<real>> used(latents.begin(), latents.begin() + (t_len - 1));

  Tensor<real> recip_ft = dataio::frames_tensor(recipient);
  const auto rollout = pred.rollout_frames(cond_prefix(recip_ft, k), used, t_len, k);

  TransplantResult res;
  const double arm_d = env::arm_length_px(donor.agent);
  const double arm_r = env::arm_length_px(recipient.agent);
  evalkit::AngleEstimate prev_d = evalkit::detect_angle(donor.frame(k - 1), arm_d);
  evalkit::AngleEstimate prev_p = evalkit::detect_angle(recipient.frame(k - 1), arm_r);
  for (int t = k; t < t_len; ++t) {
    Tensor<real> frame = rollout[t - 1].reshaped({c, s, s}).clone();
    const auto cur_d = evalkit::detect_angle(donor.frame(t), arm_d);
    const auto cur_p = evalkit::detect_angle(frame_to_u8(frame), arm_r);
    if (prev_d.valid && cur_d.valid && prev_p.valid && cur_p.valid) {
      const double dd = signed_delta_deg(cur_d.angle_deg, prev_d.angle_deg);
      const double dp = signed_delta_deg(cur_p.angle_deg, prev_p.angle_deg);
      res.donor_delta.push_back(dd);
      res.pred_delta.push_back(dp);
      res.delta_err.push_back(evalkit::angular_error(dd, dp));
    } else {
      ++res.detect_failures;
    }
    res.frames.push_back(std::move(frame));
    prev_d = cur_d;
    prev_p = cur_p;
  }
  return res;
}

evalkit::EvalReport eval_transplant(const Predictor<real>& pred, const dataio::DatasetReader& donors,
                                    const dataio::DatasetReader& recipients, int n_pairs,
                                    uint64_t seed) {
  if (n_pairs < 1) throw ConfigError("need at least one transplant pair");
  evalkit::EvalReport report;
  report.experiment = "transplant";
  report.identifiers["pairs"] = std::to_string(n_pairs);
  report.identifiers["donor_variant"] = donors.manifest().variant;
  report.identifiers["recipient_variant"] = recipients.manifest().variant;

  Rng rng(seed);
  const int nd = donors.count("test"), nr = recipients.count("test");
  for (int p = 0; p < n_pairs; ++p) {
    const int di = static_cast<int>(rng.below(static_cast<uint64_t>(nd)));
    int ri = static_cast<int>(rng.below(static_cast<uint64_t>(nr)));
    if (&donors == &recipients && ri == di) ri = (ri + 1) % nr;
    const TransplantResult res =
        transplant(pred, donors.read("test", di), recipients.read("test", ri));
    for (double e : res.delta_err) report.add("delta_err", e);
    const int steps = static_cast<int>(res.delta_err.size()) + res.detect_failures;
    report.add("fail_rate", steps > 0 ? static_cast<double>(res.detect_failures) / steps : 1.0);
  }
  report.finalize_aggregates();
  return report;
}

evalkit::EvalReport eval_round_trip(const Grounding& g, int n, uint64_t seed) {
  if (n < 1) throw ConfigError("need at least one round-trip sample");
  Rng rng(seed);
  std::vector<double> u(n);
  for (double& x : u) x = rng.uniform(g.action_min(), g.action_max());
  const auto back = g.latent_to_act(g.act_to_latent(u));

  evalkit::EvalReport report;
  report.experiment = "grounding_round_trip";
  report.identifiers["samples"] = std::to_string(n);
  report.identifiers["predictor_crc"] = std::to_string(g.predictor_crc());
  for (int i = 0; i < n; ++i) report.add("round_trip_err", std::fabs(u[i] - back[i].u_deg));
  report.finalize_aggregates();
  return report;
}

LatentPca pca_latents(const Predictor<real>& pred, const dataio::DatasetReader& reader,
                      const std::string& split, int n_points) {
  check_dataset_shape(pred.config(), reader);
  const int t_len = pred.config().seq_len;
  const int per_seq = t_len - 1;
  const int avail = reader.count(split) * per_seq;
  const int n = n_points > 0 ? std::min(n_points, avail) : avail;
  if (n < 2) throw ConfigError("PCA needs at least two transitions");

  const int d = pred.config().latent_dim;
  Tensor<double> rows({n, d});
  LatentPca out;
  int got = 0;
  for (int i = 0; got < n; ++i) {
    const env::VideoSequence seq = reader.read(split, i);
    Tensor<real> ft = dataio::frames_tensor(seq);
    const auto means =
        pred.posterior_means(ft.reshaped({1, seq.len(), ft.dim(1), ft.dim(2), ft.dim(3)}));
    for (int t = 0; t < per_seq && got < n; ++t, ++got) {
      for (int j = 0; j < d; ++j)
        rows[static_cast<size_t>(got) * d + j] = static_cast<double>(means[t][j]);
      out.actions.push_back(seq.actions[t]);
    }
  }

  out.pca = evalkit::pca(rows, std::min(2, d));
  out.pc1_ratio = out.pca.explained_variance_ratio.empty() ? 0.0 : out.pca.explained_variance_ratio[0];
  std::vector<double> pc1(n);
  const int kcols = out.pca.projections.dim(1);
  for (int i = 0; i < n; ++i) pc1[i] = out.pca.projections[static_cast<size_t>(i) * kcols];
  out.pc1_rank_corr = evalkit::rank_correlation(pc1, out.actions);
  return out;
}

plan::ServoEpisodeSpec sample_episode(int image_size, env::Variant variant,
                                      const std::string& background_dir, Rng& rng) {
  plan::ServoEpisodeSpec spec;
  spec.agent = env::default_agent(image_size);
  switch (variant) {
    case env::Variant::kPlain:
    case env::Variant::kVariedAgent:  // held-out split uses the default agent
      break;
    case env::Variant::kVariedBg:
      if (background_dir.empty()) {
        spec.bg.kind = env::BackgroundSpec::Kind::kProceduralTexture;
        spec.bg.seed = rng.next_u64();
      } else {
        const auto files = env::list_backgrounds(background_dir, true);
        if (files.empty()) throw ArtifactError("no held-out backgrounds in " + background_dir);
        spec.bg.kind = env::BackgroundSpec::Kind::kExternalImage;
        spec.bg.image_path = files[rng.below(files.size())];
      }
      break;
  }
  spec.start_deg = rng.uniform(0.0, 360.0);
  spec.goal_deg = std::fmod(spec.start_deg + rng.uniform(60.0, 140.0), 360.0);
  return spec;
}

evalkit::EvalReport eval_servo(const Clasp<real>& m, const Grounding* grounding,
                               const ServoEvalConfig& cfg) {
  if (cfg.episodes < 1) throw ConfigError("need at least one servo episode");
  evalkit::EvalReport report;
  report.experiment = "servo";
  report.identifiers["policy"] = plan::policy_name(cfg.policy);
  report.identifiers["variant"] = env::variant_name(cfg.variant);
  report.identifiers["episodes"] = std::to_string(cfg.episodes);

  Rng rng(cfg.seed);
  for (int e = 0; e < cfg.episodes; ++e) {
    const plan::ServoEpisodeSpec spec =
        sample_episode(m.cfg.image_size, cfg.variant, cfg.background_dir, rng);
    const plan::ServoResult res =
        plan::servo_episode(m, grounding, cfg.policy, spec, cfg.planner, rng);
    report.add("final_error", res.final_error);
    report.add("start_error", res.start_error);
    report.add("steps_used", static_cast<double>(res.steps.size()));
    report.add("early_stop", res.early_stop ? 1.0 : 0.0);
  }
  report.finalize_aggregates();
  return report;
}

evalkit::EvalReport data_efficiency_sweep(const Clasp<real>& m, const dataio::DatasetReader& reader,
                                          const std::string& data_dir, const std::string& work_dir,
                                          const SweepConfig& cfg) {
  if (cfg.budgets.empty()) throw ConfigError("sweep needs at least one label budget");
  const int n_train = reader.count("train");
  const uint32_t crc = model::param_checksum(m.reg);

  evalkit::EvalReport report;
  report.experiment = "data_efficiency";
  report.identifiers["label_seed"] = std::to_string(cfg.label_seed);
  report.identifiers["predictor_crc"] = std::to_string(crc);

  auto copy_metric = [&report](const evalkit::EvalReport& src, const std::string& from,
                               const std::string& to) {
    const auto it = src.per_item.find(from);
    if (it == src.per_item.end()) return;
    for (double v : it->second) report.add(to, v);
  };

  for (int budget : cfg.budgets) {
    if (budget > n_train) throw ConfigError("label budget exceeds the training split");
    const std::string tag = "@" + std::to_string(budget);
    const auto labeled = dataio::labeled_subset(n_train, budget, cfg.label_seed);

    const Grounding g = model::fit_grounding(m.pred, crc, reader, labeled, cfg.ground);
    report.add("grounding_val_mse" + tag, g.val_mse_action());

    copy_metric(eval_action_conditioned(m, &g, reader, cfg.pred_eval), "pred_err",
                "clasp_pred_err" + tag);
    if (cfg.run_servo) {
      ServoEvalConfig sc = cfg.servo;
      sc.policy = plan::Policy::kPlanned;
      copy_metric(eval_servo(m, &g, sc), "final_error", "clasp_servo" + tag);
    }

    if (cfg.run_supervised) {
      model::TrainConfig tc = cfg.supervised;
      tc.mode = model::TrainMode::kSupervised;
      tc.labeled = budget;
      tc.data_dir = data_dir;
      tc.out_dir = work_dir + "/sup-" + std::to_string(budget);
      const model::TrainResult tr = model::train(m.cfg, tc);
      const auto sup = model::load_model(tr.checkpoint_path);

      copy_metric(eval_action_conditioned(*sup, nullptr, reader, cfg.pred_eval), "pred_err",
                  "sup_pred_err" + tag);
      if (cfg.run_servo) {
        ServoEvalConfig sc = cfg.servo;
        sc.policy = plan::Policy::kSupervised;
        copy_metric(eval_servo(*sup, nullptr, sc), "final_error", "sup_servo" + tag);
      }
    }
  }
  report.finalize_aggregates();
  return report;
}

}  // namespace clasp::experiments
