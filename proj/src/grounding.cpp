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
#include "clasp/grounding.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace clasp::model {

namespace {

// Fits y = mlp(x) by minibatch Adam with early stopping on a held-out
// slice; restores the best-validation parameters before returning.
double fit_regression(nn::ParamRegistry<real>& reg, const nn::Mlp<real>& mlp, const Tensor<real>& x,
                      const Tensor<real>& y, const GroundingConfig& cfg, Rng& rng) {
  const int n = x.dim(0), in_dim = x.dim(1), out_dim = y.dim(1);
  int n_val = std::max(1, static_cast<int>(std::lround(n * cfg.val_fraction)));
  if (n_val >= n) n_val = n - 1;
  const int n_train = n - n_val;

  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(static_cast<uint64_t>(i) + 1)]);

  auto gather = [&](const Tensor<real>& src, int start, int count, int width) {
    Tensor<real> out({count, width});
    for (int i = 0; i < count; ++i)
      std::copy(src.data() + static_cast<size_t>(perm[start + i]) * width,
                src.data() + static_cast<size_t>(perm[start + i]) * width + width,
                out.data() + static_cast<size_t>(i) * width);
    return out;
  };
  Tensor<real> xt = gather(x, 0, n_train, in_dim), yt = gather(y, 0, n_train, out_dim);
  Tensor<real> xv = gather(x, n_train, n_val, in_dim), yv = gather(y, n_train, n_val, out_dim);

  auto val_mse = [&]() {
    ad::NoGradGuard ng;
    auto pred = mlp.forward(ad::Value<real>::constant(xv));
    double acc = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
      const double d = static_cast<double>(pred.tensor()[i]) - static_cast<double>(yv[i]);
      acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
  };

  nn::Adam<real> opt(reg, static_cast<real>(cfg.lr));
  const int batch = std::min(cfg.batch, n_train);
  double best = val_mse();
  std::vector<Tensor<real>> best_params;
  for (const auto& e : reg.entries()) best_params.push_back(e.value.tensor().clone());
  int stale = 0;

  for (int step = 1; step <= cfg.max_steps && stale < cfg.patience; ++step) {
    Tensor<real> xb({batch, in_dim}), yb({batch, out_dim});
    for (int i = 0; i < batch; ++i) {
      const int j = static_cast<int>(rng.below(static_cast<uint64_t>(n_train)));
      std::copy(xt.data() + static_cast<size_t>(j) * in_dim,
                xt.data() + static_cast<size_t>(j) * in_dim + in_dim,
                xb.data() + static_cast<size_t>(i) * in_dim);
      std::copy(yt.data() + static_cast<size_t>(j) * out_dim,
                yt.data() + static_cast<size_t>(j) * out_dim + out_dim,
                yb.data() + static_cast<size_t>(i) * out_dim);
    }
    reg.zero_grad();
    auto loss = ad::scale(ad::sse(mlp.forward(ad::Value<real>::constant(xb)), yb),
                          real(1) / real(batch * out_dim));
    ad::backward(loss);
    opt.step();

    if (step % cfg.eval_every == 0) {
      const double mse = val_mse();
      if (mse < best) {
        best = mse;
        stale = 0;
        for (size_t p = 0; p < best_params.size(); ++p)
          std::copy(reg.entries()[p].value.tensor().data(),
                    reg.entries()[p].value.tensor().data() + reg.entries()[p].value.size(),
                    best_params[p].data());
      } else {
        ++stale;
      }
    }
  }
  for (size_t p = 0; p < best_params.size(); ++p)
    std::copy(best_params[p].data(), best_params[p].data() + best_params[p].size(),
              reg.entries()[p].value.tensor().data());
  return best;
}

nlohmann::json params_to_json(const nn::ParamRegistry<real>& reg) {
  auto arr = nlohmann::json::array();
  for (const auto& e : reg.entries()) {
    std::vector<double> vals(e.value.size());
    for (size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<double>(e.value.tensor()[i]);
    arr.push_back({{"name", e.name}, {"shape", e.value.shape()}, {"values", vals}});
  }
  return arr;
}

void params_from_json(const nlohmann::json& arr, nn::ParamRegistry<real>& reg) {
  if (arr.size() != reg.entries().size())
    throw ArtifactError("grounding artifact parameter list mismatch");
  for (size_t p = 0; p < arr.size(); ++p) {
    auto& e = reg.entries()[p];
    if (arr[p].at("name").get<std::string>() != e.name ||
        arr[p].at("shape").get<std::vector<int>>() != e.value.shape())
      throw ArtifactError("grounding artifact parameter " + e.name + " mismatch");
    const auto vals = arr[p].at("values").get<std::vector<double>>();
    if (vals.size() != e.value.size()) throw ArtifactError("grounding artifact size mismatch");
    for (size_t i = 0; i < vals.size(); ++i) e.value.tensor()[i] = static_cast<real>(vals[i]);
  }
}

}  // namespace

Tensor<real> Grounding::act_to_latent(const std::vector<double>& u_deg) const {
  if (latent_dim_ == 0) throw ArtifactError("grounding is not fitted");
  ad::NoGradGuard ng;
  const int n = static_cast<int>(u_deg.size());
  Tensor<real> u({n, 1});
  for (int i = 0; i < n; ++i) u[i] = static_cast<real>((u_deg[i] - u_mean_) / u_std_);
  return lat_.mlp.forward(ad::Value<real>::constant(u)).tensor();
}

std::vector<Grounding::ActionEstimate> Grounding::latent_to_act(const Tensor<real>& z) const {
  if (latent_dim_ == 0) throw ArtifactError("grounding is not fitted");
  if (z.rank() != 2 || z.dim(1) != latent_dim_) throw ConfigError("latent batch shape mismatch");
  ad::NoGradGuard ng;
  auto out = act_.mlp.forward(ad::Value<real>::constant(z)).tensor();
  std::vector<ActionEstimate> res(z.dim(0));
  for (int i = 0; i < z.dim(0); ++i) {
    const double raw = static_cast<double>(out[i]) * u_std_ + u_mean_;
    res[i].extrapolated = raw < u_min_ || raw > u_max_;
    res[i].u_deg = std::clamp(raw, u_min_, u_max_);
  }
  return res;
}

void Grounding::check_predictor(uint32_t crc) const {
  if (crc != predictor_crc_)
    throw ArtifactError("grounding artifact was fit to a different predictor");
}

void Grounding::save(const std::string& path) const {
  nlohmann::json j;
  j["format"] = "clasp-ground-1";
  j["latent_dim"] = latent_dim_;
  j["hidden"] = hidden_;
  j["u_mean"] = u_mean_;
  j["u_std"] = u_std_;
  j["u_min"] = u_min_;
  j["u_max"] = u_max_;
  j["val_mse_latent"] = val_lat_;
  j["val_mse_action"] = val_act_;
  j["pairs"] = pairs_;
  j["predictor_crc"] = predictor_crc_;
  j["lat"] = params_to_json(lat_.reg);
  j["act"] = params_to_json(act_.reg);
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  std::ofstream out(target);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
}

Grounding Grounding::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("missing grounding artifact: " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("format").get<std::string>() != "clasp-ground-1")
    throw ArtifactError("unsupported grounding format in " + path);
  Grounding g;
  g.latent_dim_ = j.at("latent_dim").get<int>();
  g.hidden_ = j.at("hidden").get<int>();
  g.u_mean_ = j.at("u_mean").get<double>();
  g.u_std_ = j.at("u_std").get<double>();
  g.u_min_ = j.at("u_min").get<double>();
  g.u_max_ = j.at("u_max").get<double>();
  g.val_lat_ = j.at("val_mse_latent").get<double>();
  g.val_act_ = j.at("val_mse_action").get<double>();
  g.pairs_ = j.at("pairs").get<int64_t>();
  g.predictor_crc_ = j.at("predictor_crc").get<uint32_t>();
  Rng init(11);
  g.lat_.mlp = nn::Mlp<real>(g.lat_.reg, "lat", 1, {g.hidden_, g.hidden_}, g.latent_dim_, init);
  g.act_.mlp = nn::Mlp<real>(g.act_.reg, "act", g.latent_dim_, {g.hidden_, g.hidden_}, 1, init);
  params_from_json(j.at("lat"), g.lat_.reg);
  params_from_json(j.at("act"), g.act_.reg);
  return g;
}

Grounding fit_grounding(const Predictor<real>& pred, uint32_t predictor_crc,
                        const dataio::DatasetReader& reader, const std::vector<int>& labeled_indices,
                        const GroundingConfig& cfg) {
  if (labeled_indices.empty()) throw ConfigError("grounding needs at least one labeled sequence");
  const int d = pred.config().latent_dim;
  const int seq_len = reader.manifest().seq_len;
  const int per_seq = seq_len - 1;
  const int n_pairs = static_cast<int>(labeled_indices.size()) * per_seq;

  Tensor<real> u_raw({n_pairs, 1});
  Tensor<real> z({n_pairs, d});
  // Chunked posterior extraction keeps the encoder batched without holding
  // every sequence in memory.
  const int chunk = 16;
  int row = 0;
  for (size_t base = 0; base < labeled_indices.size(); base += chunk) {
    const int b = static_cast<int>(std::min<size_t>(chunk, labeled_indices.size() - base));
    const int s = reader.manifest().image_size;
    Tensor<real> frames({b, seq_len, 3, s, s});
    std::vector<env::VideoSequence> seqs;
    for (int i = 0; i < b; ++i) {
      env::VideoSequence seq = reader.read("train", labeled_indices[base + i]);
      Tensor<float> f = dataio::frames_tensor(seq);
      std::copy(f.data(), f.data() + f.size(), frames.data() + static_cast<size_t>(i) * f.size());
      seqs.push_back(std::move(seq));
    }
    std::vector<Tensor<real>> means = pred.posterior_means(frames);
    for (int i = 0; i < b; ++i) {
      if (!seqs[i].has_actions) throw ArtifactError("labeled sequence without stored actions");
      for (int t = 0; t < per_seq; ++t) {
        u_raw[row] = static_cast<real>(seqs[i].actions[t]);
        std::copy(means[t].data() + static_cast<size_t>(i) * d,
                  means[t].data() + static_cast<size_t>(i) * d + d,
                  z.data() + static_cast<size_t>(row) * d);
        ++row;
      }
    }
  }

  Grounding g;
  g.latent_dim_ = d;
  g.hidden_ = cfg.hidden;
  g.pairs_ = n_pairs;
  g.predictor_crc_ = predictor_crc;
  double mean = 0, m2 = 0;
  g.u_min_ = static_cast<double>(u_raw[0]);
  g.u_max_ = static_cast<double>(u_raw[0]);
  for (int i = 0; i < n_pairs; ++i) {
    const double u = static_cast<double>(u_raw[i]);
    mean += u;
    g.u_min_ = std::min(g.u_min_, u);
    g.u_max_ = std::max(g.u_max_, u);
  }
  mean /= n_pairs;
  for (int i = 0; i < n_pairs; ++i) {
    const double dlt = static_cast<double>(u_raw[i]) - mean;
    m2 += dlt * dlt;
  }
  g.u_mean_ = mean;
  g.u_std_ = std::max(std::sqrt(m2 / n_pairs), 1e-6);

  Tensor<real> u_std({n_pairs, 1});
  for (int i = 0; i < n_pairs; ++i)
    u_std[i] = static_cast<real>((static_cast<double>(u_raw[i]) - g.u_mean_) / g.u_std_);

  Rng init = Rng(cfg.seed).split(0x6011);
  g.lat_.mlp = nn::Mlp<real>(g.lat_.reg, "lat", 1, {cfg.hidden, cfg.hidden}, d, init);
  g.act_.mlp = nn::Mlp<real>(g.act_.reg, "act", d, {cfg.hidden, cfg.hidden}, 1, init);
  Rng fit_lat = Rng(cfg.seed).split(0x6012);
  Rng fit_act = Rng(cfg.seed).split(0x6013);
  g.val_lat_ = fit_regression(g.lat_.reg, g.lat_.mlp, u_std, z, cfg, fit_lat);
  g.val_act_ = fit_regression(g.act_.reg, g.act_.mlp, z, u_std, cfg, fit_act);
  return g;
}

}  // namespace clasp::model
