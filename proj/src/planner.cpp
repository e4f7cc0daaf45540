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
#include "clasp/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clasp/evalkit.hpp"

namespace clasp::plan {

using model::Clasp;
using model::Grounding;
using model::Predictor;

CemResult cem_optimize(const CemConfig& cfg, int dim, Rng& rng, const CostFn& cost,
                       const InitFn& init, const ClampFn& clamp) {
  if (cfg.elites < 1 || cfg.elites > cfg.samples) throw ConfigError("bad elite count");
  if (cfg.iters < 1 || cfg.horizon < 1 || dim < 1) throw ConfigError("bad CEM dimensions");
  const int m = cfg.samples, h = cfg.horizon;
  const size_t cell = static_cast<size_t>(h) * dim;

  Tensor<real> mu = Tensor<real>::zeros({h, dim});
  Tensor<real> var = Tensor<real>::full({h, dim}, real(1));

  CemResult result;
  Tensor<real> cands({m, h, dim});
  for (int iter = 0; iter < cfg.iters; ++iter) {
    if (iter == 0 && init) {
      cands = init(rng);
      if (cands.rank() != 3 || cands.dim(0) != m || cands.dim(1) != h || cands.dim(2) != dim)
        throw ConfigError("init sampler returned wrong shape");
    } else {
      for (int i = 0; i < m; ++i)
        for (size_t j = 0; j < cell; ++j)
          cands[static_cast<size_t>(i) * cell + j] = static_cast<real>(
              rng.normal(static_cast<double>(mu[j]), std::sqrt(static_cast<double>(var[j]))));
    }
    if (clamp) clamp(cands);

    const std::vector<double> costs = cost(cands);
    if (static_cast<int>(costs.size()) != m) throw ConfigError("cost callback returned wrong count");
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (costs[a] != costs[b]) return costs[a] < costs[b];
      return a < b;
    });

    result.trace.best_cost.push_back(costs[order[0]]);
    result.trace.mean_cost.push_back(std::accumulate(costs.begin(), costs.end(), 0.0) / m);
    if (iter == cfg.iters - 1) {
      result.best = model::rows_of(cands, order[0], 1).reshaped({h, dim}).clone();
      result.best_cost = costs[order[0]];
      break;
    }

    // Refit a per-cell diagonal Gaussian over the elites.
    for (size_t j = 0; j < cell; ++j) {
      double mean = 0;
      for (int e = 0; e < cfg.elites; ++e)
        mean += static_cast<double>(cands[static_cast<size_t>(order[e]) * cell + j]);
      mean /= cfg.elites;
      double ss = 0;
      for (int e = 0; e < cfg.elites; ++e) {
        const double d = static_cast<double>(cands[static_cast<size_t>(order[e]) * cell + j]) - mean;
        ss += d * d;
      }
      const double v = cfg.elites > 1 ? ss / (cfg.elites - 1) : 0.0;
      mu[j] = static_cast<real>(mean);
      var[j] = static_cast<real>(std::max(v, cfg.var_floor));
    }
  }
  return result;
}

namespace {

// Encoder embedding of a frame batch [N, C, S, S].
Tensor<real> embed_frames(const Predictor<real>& pred, const Tensor<real>& frames) {
  ad::NoGradGuard ng;
  return pred.encode(ad::Value<real>::constant(frames)).h.tensor();
}

// Cosine distance in [0, 2] between each row and the single goal row.
std::vector<double> cosine_costs(const Tensor<real>& emb, const Tensor<real>& goal_emb) {
  const int n = emb.dim(0), d = emb.dim(1);
  std::vector<double> out(n);
  double gn = 0;
  for (int j = 0; j < d; ++j) gn += static_cast<double>(goal_emb[j]) * goal_emb[j];
  gn = std::sqrt(gn);
  for (int i = 0; i < n; ++i) {
    double dot = 0, an = 0;
    const real* row = emb.data() + static_cast<size_t>(i) * d;
    for (int j = 0; j < d; ++j) {
      dot += static_cast<double>(row[j]) * goal_emb[j];
      an += static_cast<double>(row[j]) * row[j];
    }
    out[i] = 1.0 - dot / (std::sqrt(an) * gn + 1e-12);
  }
  return out;
}

std::vector<double> pixel_costs(const Tensor<real>& frames, const Tensor<real>& goal) {
  const int n = frames.dim(0);
  const size_t sz = goal.size();
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    const real* row = frames.data() + static_cast<size_t>(i) * sz;
    double acc = 0;
    for (size_t j = 0; j < sz; ++j) {
      const double d = static_cast<double>(row[j]) - goal[j];
      acc += d * d;
    }
    out[i] = acc / static_cast<double>(sz);
  }
  return out;
}

struct RolloutScorer {
  const Predictor<real>* pred;
  Tensor<real> cond_tiled;                 // [M, K, C, S, S]
  std::vector<Tensor<real>> warmup;        // K-1 tiles of [M, d]
  Tensor<real> goal;                       // [C, S, S]
  Tensor<real> goal_emb;                   // [1, enc_dim] when using features
  bool feature_cost = true;
  int horizon = 0;

  // latent_of(candidates, h) -> [M, d] planned latent for future step h.
  std::vector<double> operator()(const Tensor<real>& cands,
                                 const std::function<Tensor<real>(const Tensor<real>&, int)>& latent_of) const {
    const int k = pred->config().cond_frames;
    const int total = k + horizon;
    std::vector<Tensor<real>> latents = warmup;
    for (int hh = 0; hh < horizon; ++hh) latents.push_back(latent_of(cands, hh));
    auto frames = pred->rollout_frames(cond_tiled, latents, total, total - 1);
    const Tensor<real>& final_frames = frames.back();
    if (feature_cost) return cosine_costs(embed_frames(*pred, final_frames), goal_emb);
    return pixel_costs(final_frames, goal);
  }
};

RolloutScorer make_scorer(const Predictor<real>& pred, const Tensor<real>& history,
                          const Tensor<real>& goal, const PlannerConfig& cfg) {
  const auto& mc = pred.config();
  const int k = mc.cond_frames, m = cfg.cem.samples, d = mc.latent_dim;
  if (history.rank() != 4 || history.dim(0) != k) throw ConfigError("history must hold cond_frames frames");
  if (cfg.cost != "feature" && cfg.cost != "pixel") throw ConfigError("unknown cost kind: " + cfg.cost);

  RolloutScorer sc;
  sc.pred = &pred;
  sc.goal = goal;
  sc.feature_cost = cfg.cost == "feature";
  sc.horizon = cfg.cem.horizon;

  // History posteriors describe the observed (static) transitions.
  Tensor<real> hist_b({1, k, history.dim(1), history.dim(2), history.dim(3)});
  std::copy(history.data(), history.data() + history.size(), hist_b.data());
  std::vector<Tensor<real>> post = pred.posterior_means(hist_b);
  for (const auto& p : post) {
    Tensor<real> tile({m, d});
    for (int i = 0; i < m; ++i)
      std::copy(p.data(), p.data() + d, tile.data() + static_cast<size_t>(i) * d);
    sc.warmup.push_back(tile);
  }

  sc.cond_tiled = Tensor<real>({m, k, history.dim(1), history.dim(2), history.dim(3)});
  for (int i = 0; i < m; ++i)
    std::copy(history.data(), history.data() + history.size(),
              sc.cond_tiled.data() + static_cast<size_t>(i) * history.size());

  if (sc.feature_cost) {
    Tensor<real> gb({1, goal.dim(0), goal.dim(1), goal.dim(2)});
    std::copy(goal.data(), goal.data() + goal.size(), gb.data());
    sc.goal_emb = embed_frames(pred, gb);
  }
  return sc;
}

Tensor<real> slice_step(const Tensor<real>& cands, int h) {
  const int m = cands.dim(0), hz = cands.dim(1), d = cands.dim(2);
  Tensor<real> out({m, d});
  for (int i = 0; i < m; ++i)
    std::copy(cands.data() + (static_cast<size_t>(i) * hz + h) * d,
              cands.data() + (static_cast<size_t>(i) * hz + h) * d + d,
              out.data() + static_cast<size_t>(i) * d);
  return out;
}

}  // namespace

PlanOutcome plan_action(const Predictor<real>& pred, const Grounding& grounding,
                        const Tensor<real>& history, const Tensor<real>& goal,
                        const PlannerConfig& cfg, Rng& rng) {
  RolloutScorer scorer = make_scorer(pred, history, goal, cfg);
  auto cost = [&](const Tensor<real>& cands) { return scorer(cands, slice_step); };
  CemResult cem = cem_optimize(cfg.cem, pred.config().latent_dim, rng, cost);

  PlanOutcome out;
  out.best_latents = cem.best;
  out.best_cost = cem.best_cost;
  out.trace = std::move(cem.trace);
  Tensor<real> first = model::rows_of(cem.best, 0, 1);
  auto est = grounding.latent_to_act(first);
  out.u_star = est[0].u_deg;
  out.extrapolated = est[0].extrapolated;
  return out;
}

PlanOutcome plan_action_supervised(const Clasp<real>& m, const Tensor<real>& history,
                                   const Tensor<real>& goal, const PlannerConfig& cfg, Rng& rng) {
  RolloutScorer scorer = make_scorer(m.pred, history, goal, cfg);
  const double u_max = m.cfg.action_max;
  auto embed_step = [&](const Tensor<real>& cands, int h) {
    ad::NoGradGuard ng;
    Tensor<real> u = slice_step(cands, h);
    for (size_t i = 0; i < u.size(); ++i) u[i] = static_cast<real>(u[i] / u_max);
    return m.act_embed.forward(ad::Value<real>::constant(u)).tensor();
  };
  auto cost = [&](const Tensor<real>& cands) { return scorer(cands, embed_step); };
  auto init = [&](Rng& r) {
    Tensor<real> c({cfg.cem.samples, cfg.cem.horizon, 1});
    for (size_t i = 0; i < c.size(); ++i) c[i] = static_cast<real>(r.uniform(0.0, u_max));
    return c;
  };
  auto clamp_u = [&](Tensor<real>& c) {
    for (size_t i = 0; i < c.size(); ++i)
      c[i] = std::clamp(c[i], real(0), static_cast<real>(u_max));
  };
  CemResult cem = cem_optimize(cfg.cem, 1, rng, cost, init, clamp_u);

  PlanOutcome out;
  out.best_latents = cem.best;
  out.best_cost = cem.best_cost;
  out.trace = std::move(cem.trace);
  out.u_star = static_cast<double>(cem.best[0]);
  return out;
}

ServoResult servo_episode(const Clasp<real>& m, const Grounding* grounding, Policy policy,
                          const ServoEpisodeSpec& spec, const PlannerConfig& cfg, Rng& rng) {
  if (policy == Policy::kPlanned && grounding == nullptr)
    throw ConfigError("planned policy needs a grounding artifact");
  const int k = m.cfg.cond_frames;
  const int s = spec.agent.image_size;
  if (s != m.cfg.image_size) throw ConfigError("episode image size does not match the model");

  const Tensor<uint8_t> bg = env::render_background(spec.bg, s);
  auto observe = [&](double angle) {
    env::EnvState st{angle};
    Tensor<uint8_t> img = env::render_over(st, spec.agent, bg);
    Tensor<real> out({3, s, s});
    for (int p = 0; p < s * s; ++p)
      for (int c = 0; c < 3; ++c)
        out[static_cast<size_t>(c) * s * s + p] = static_cast<real>(img[3 * p + c] / 255.f);
    return out;
  };

  double angle = spec.start_deg;
  Tensor<real> goal_obs = observe(spec.goal_deg);
  Tensor<real> history({k, 3, s, s});
  auto push_frame = [&](const Tensor<real>& f, bool fill_all) {
    const size_t fsz = f.size();
    if (fill_all) {
      for (int i = 0; i < k; ++i)
        std::copy(f.data(), f.data() + fsz, history.data() + static_cast<size_t>(i) * fsz);
      return;
    }
    std::memmove(history.data(), history.data() + fsz, (static_cast<size_t>(k) - 1) * fsz);
    std::copy(f.data(), f.data() + fsz, history.data() + (static_cast<size_t>(k) - 1) * fsz);
  };
  push_frame(observe(angle), true);

  ServoResult result;
  result.start_error = evalkit::angular_error(spec.start_deg, spec.goal_deg);
  result.final_error = result.start_error;
  for (int step = 0; step < cfg.servo_steps; ++step) {
    ServoStep st;
    switch (policy) {
      case Policy::kPlanned: {
        PlanOutcome p = plan_action(m.pred, *grounding, history, goal_obs, cfg, rng);
        st.u = p.u_star;
        st.cost = p.best_cost;
        st.extrapolated = p.extrapolated;
        break;
      }
      case Policy::kSupervised: {
        PlanOutcome p = plan_action_supervised(m, history, goal_obs, cfg, rng);
        st.u = p.u_star;
        st.cost = p.best_cost;
        break;
      }
      case Policy::kRandom:
        st.u = rng.uniform(0.0, m.cfg.action_max);
        break;
    }
    env::EnvState next = env::step(env::EnvState{angle}, env::Action{st.u});
    angle = next.angle_deg;
    Tensor<real> obs = observe(angle);
    push_frame(obs, false);
    auto det = evalkit::detect_angle(env::render_over(env::EnvState{angle}, spec.agent, bg),
                                     env::arm_length_px(spec.agent));
    st.detected_deg = det.valid ? det.angle_deg : 0.0;
    st.error_after = evalkit::angular_error(angle, spec.goal_deg);
    result.steps.push_back(st);
    result.final_error = st.error_after;
    if (st.error_after <= cfg.stop_deg) {
      result.early_stop = true;
      break;
    }
  }
  return result;
}

}  // namespace clasp::plan
