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
#ifndef CLASP_PLANNER_HPP_
#define CLASP_PLANNER_HPP_

#include <functional>
#include <string>
#include <vector>

#include "clasp/composer.hpp"
#include "clasp/env.hpp"
#include "clasp/grounding.hpp"
#include "clasp/model.hpp"

namespace clasp::plan {

struct CemConfig {
  int horizon = 5;
  int samples = 10;       // candidates per iteration
  int elites = 3;         // kept for the refit
  int iters = 4;
  double var_floor = 1e-4;
};

struct CemTrace {
  std::vector<double> best_cost;  // per iteration
  std::vector<double> mean_cost;
};

// Candidates are [M, H, dim]; the callback returns one cost per candidate.
using CostFn = std::function<std::vector<double>(const Tensor<real>&)>;
// Optional overrides: iteration-0 sampler and a clamp applied to every
// sampled candidate batch (both default to the standard normal / no-op).
using InitFn = std::function<Tensor<real>(Rng&)>;
using ClampFn = std::function<void(Tensor<real>&)>;

struct CemResult {
  Tensor<real> best;      // [H, dim], lowest-cost sample of the final iteration
  double best_cost = 0;
  CemTrace trace;
};

// Cross-entropy method with a diagonal Gaussian refit per (step, dim) cell
// over the elites (unbiased variance, floored).
CemResult cem_optimize(const CemConfig& cfg, int dim, Rng& rng, const CostFn& cost,
                       const InitFn& init = nullptr, const ClampFn& clamp = nullptr);

struct PlannerConfig {
  CemConfig cem;
  std::string cost = "feature";  // "feature": encoder cosine distance; "pixel": mean squared
  int servo_steps = 5;
  double stop_deg = 2.0;         // stop an episode once within this of the goal
};

struct PlanOutcome {
  double u_star = 0;
  bool extrapolated = false;     // action readout left the grounded range
  double best_cost = 0;
  Tensor<real> best_latents;     // [H, d]
  CemTrace trace;
};

// One replanning round: CEM over latent sequences scored by rolling the
// predictor out from the observation history and comparing the final frame
// against the goal. The executed action is the grounded readout of the
// first planned latent.
PlanOutcome plan_action(const model::Predictor<real>& pred, const model::Grounding& grounding,
                        const Tensor<real>& history, const Tensor<real>& goal,
                        const PlannerConfig& cfg, Rng& rng);

// Supervised-baseline round: CEM directly over action sequences, embedded
// into latents by the jointly trained action encoder.
PlanOutcome plan_action_supervised(const model::Clasp<real>& m, const Tensor<real>& history,
                                   const Tensor<real>& goal, const PlannerConfig& cfg, Rng& rng);

enum class Policy { kPlanned, kSupervised, kRandom };

inline Policy parse_policy(const std::string& s) {
  if (s == "planned") return Policy::kPlanned;
  if (s == "supervised") return Policy::kSupervised;
  if (s == "random") return Policy::kRandom;
  throw ConfigError("unknown policy: " + s);
}

inline std::string policy_name(Policy p) {
  switch (p) {
    case Policy::kPlanned: return "planned";
    case Policy::kSupervised: return "supervised";
    case Policy::kRandom: return "random";
  }
  return "?";
}

struct ServoEpisodeSpec {
  env::AgentConfig agent;
  env::BackgroundSpec bg;
  double start_deg = 0;
  double goal_deg = 0;
};

struct ServoStep {
  double u = 0;
  double cost = 0;              // planner's predicted cost (0 for random)
  double detected_deg = 0;      // detector reading after the step
  double error_after = 0;       // true angular distance to the goal
  bool extrapolated = false;
};

struct ServoResult {
  std::vector<ServoStep> steps;
  double start_error = 0;
  double final_error = 0;
  bool early_stop = false;
};

// Closed-loop episode: observe, plan, act, repeat. The observation history
// starts as the initial frame repeated (the scene is static until acted
// on); errors are scored against the simulator's true angle.
ServoResult servo_episode(const model::Clasp<real>& m, const model::Grounding* grounding,
                          Policy policy, const ServoEpisodeSpec& spec, const PlannerConfig& cfg,
                          Rng& rng);

}  // namespace clasp::plan

#endif  // CLASP_PLANNER_HPP_
