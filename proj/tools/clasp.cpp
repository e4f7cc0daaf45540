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
//
// Pipeline driver. Every invocation creates one run directory under --out,
// snapshots its full configuration there, and writes all outputs inside it.
//
// Exit codes: 0 ok, 2 configuration error, 3 missing/incompatible artifact,
// 4 numerical failure.

#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <zlib.h>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "clasp/checkpoint.hpp"
#include "clasp/experiments.hpp"
#include "clasp/image.hpp"
#include "plotting.hpp"

namespace fs = std::filesystem;

namespace clasp::cli {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitArtifact = 3;
constexpr int kExitNumerical = 4;

fs::path make_run_dir(const std::string& root, const std::string& cmd, const std::string& snapshot) {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
  const uint32_t hash = ::crc32(0, reinterpret_cast<const Bytef*>(snapshot.data()),
                                static_cast<uInt>(snapshot.size()));
  char tail[16];
  std::snprintf(tail, sizeof(tail), "%08x", hash);
  fs::path dir = fs::path(root) / (std::string(stamp) + "-" + cmd + "-" + tail);
  // Same config twice within a second: suffix instead of clobbering.
  for (int i = 2; fs::exists(dir); ++i)
    dir = fs::path(root) / (std::string(stamp) + "-" + cmd + "-" + tail + "." + std::to_string(i));
  fs::create_directories(dir);
  std::ofstream(dir / "config.txt") << snapshot;
  return dir;
}

void print_aggregates(const evalkit::EvalReport& rep) {
  std::cout << "experiment: " << rep.experiment << "\n";
  for (const auto& [key, value] : rep.identifiers) std::cout << "  " << key << ": " << value << "\n";
  for (const auto& [metric, s] : rep.aggregate) {
    char line[160];
    std::snprintf(line, sizeof(line), "  %-24s %10.4f +- %-10.4f (n=%d)", metric.c_str(), s.mean,
                  s.stddev, s.count);
    std::cout << line << "\n";
  }
}

std::unique_ptr<model::Clasp<real>> load_checkpoint(const std::string& path,
                                                    model::CheckpointMeta* meta) {
  if (!fs::exists(path)) throw ArtifactError("checkpoint not found: " + path);
  return model::load_model(path, meta);
}

model::Grounding load_grounding_for(const std::string& path, const model::Clasp<real>& m) {
  if (!fs::exists(path)) throw ArtifactError("grounding artifact not found: " + path);
  model::Grounding g = model::Grounding::load(path);
  g.check_predictor(model::param_checksum(m.reg));
  if (g.latent_dim() != m.cfg.latent_dim)
    throw ArtifactError("grounding latent width does not match the checkpoint");
  return g;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenArgs {
  std::string variant = "plain";
  int image_size = 32;
  int seq_len = 15;
  int train = 5000;
  int test = 500;
  uint64_t seed = 1;
  std::string background_dir;
  double action_lo = 0.0;
  double action_hi = 40.0;
};

int run_gen(const GenArgs& a, const fs::path& run_dir) {
  env::GenConfig gc;
  gc.image_size = a.image_size;
  gc.seq_len = a.seq_len;
  gc.variant = env::parse_variant(a.variant);
  gc.background_dir = a.background_dir;
  gc.action_lo = a.action_lo;
  gc.action_hi = a.action_hi;
  const std::string out = (run_dir / "dataset").string();
  env::generate_dataset(gc, a.seed, a.train, a.test, out);

  std::ifstream mf(fs::path(out) / "manifest.json", std::ios::binary);
  std::stringstream ss;
  ss << mf.rdbuf();
  const std::string manifest = ss.str();
  const uint32_t crc = ::crc32(0, reinterpret_cast<const Bytef*>(manifest.data()),
                               static_cast<uInt>(manifest.size()));
  std::cout << "dataset: " << out << "\n"
            << "sequences: " << a.train << " train / " << a.test << " test\n"
            << "manifest crc32: " << crc << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string mode = "clasp";
  int steps = 3000;
  int batch = 16;
  double lr = 2e-4;
  uint64_t seed = 1;
  int labeled = 0;
  int log_every = 25;
  int ckpt_every = 1000;
  int kl_warmup = 0;
  bool quiet = false;
  // model shape; 0 / -1 mean "derive from the dataset"
  int image_size = 0;
  int seq_len = 0;
  int latent_dim = 10;
  int enc_dim = 128;
  int enc_base = 8;
  int enc_levels = 4;
  int lstm_hidden = 256;
  int infer_h1 = 256;
  int infer_h2 = 128;
  int comp_hidden = 32;
  int act_hidden = 32;
  int cond_frames = 5;
  int comp_chunk = 4;
  double beta_z = 1e-2;
  double beta_nu = 1e-8;
  double action_max = 40.0;
  int skips = -1;
};

int run_train(const TrainArgs& a, const fs::path& run_dir) {
  dataio::DatasetReader reader(a.data);
  const auto& man = reader.manifest();

  model::PredictorConfig mc;
  mc.image_size = a.image_size > 0 ? a.image_size : man.image_size;
  mc.seq_len = a.seq_len > 0 ? a.seq_len : std::min(man.seq_len, mc.seq_len);
  mc.latent_dim = a.latent_dim;
  mc.enc_dim = a.enc_dim;
  mc.enc_base = a.enc_base;
  mc.enc_levels = a.enc_levels;
  mc.lstm_hidden = a.lstm_hidden;
  mc.infer_h1 = a.infer_h1;
  mc.infer_h2 = a.infer_h2;
  mc.comp_hidden = a.comp_hidden;
  mc.act_embed_hidden = a.act_hidden;
  mc.cond_frames = a.cond_frames;
  mc.comp_chunk = a.comp_chunk;
  mc.beta_z = a.beta_z;
  mc.beta_nu = a.beta_nu;
  mc.action_max = a.action_max;
  mc.skip_connections = a.skips < 0 ? man.variant == "varied_bg" : a.skips > 0;

  model::TrainConfig tc;
  tc.mode = model::parse_train_mode(a.mode);
  tc.steps = a.steps;
  tc.batch_size = a.batch;
  tc.lr = a.lr;
  tc.seed = a.seed;
  tc.data_dir = a.data;
  tc.out_dir = run_dir.string();
  tc.log_every = a.log_every;
  tc.ckpt_every = a.ckpt_every;
  tc.labeled = a.labeled;
  tc.quiet = a.quiet;
  tc.kl_warmup = a.kl_warmup;

  const model::TrainResult res = model::train(mc, tc);
  std::cout << "checkpoint: " << res.checkpoint_path << "\n"
            << "final loss: " << res.last.total << " (step " << res.last.step << ")\n"
            << "param crc32: " << res.param_crc << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ground

struct GroundArgs {
  std::string ckpt;
  std::string data;
  int labeled = 1000;
  uint64_t label_seed = 1;
  uint64_t seed = 7;
  int fit_steps = 5000;
  int eval_every = 50;
  int patience = 20;
  double val_fraction = 0.1;
  int fit_batch = 256;
  double fit_lr = 1e-3;
  int round_trip = 200;
};

int run_ground(const GroundArgs& a, const fs::path& run_dir) {
  model::CheckpointMeta meta;
  const auto m = load_checkpoint(a.ckpt, &meta);
  if (meta.mode == "supervised")
    std::cerr << "note: grounding a supervised checkpoint; its inference head is untrained\n";
  dataio::DatasetReader reader(a.data);
  const auto labeled = dataio::labeled_subset(reader.count("train"), a.labeled, a.label_seed);

  model::GroundingConfig gc;
  gc.seed = a.seed;
  gc.max_steps = a.fit_steps;
  gc.eval_every = a.eval_every;
  gc.patience = a.patience;
  gc.val_fraction = a.val_fraction;
  gc.batch = a.fit_batch;
  gc.lr = a.fit_lr;

  const model::Grounding g =
      model::fit_grounding(m->pred, model::param_checksum(m->reg), reader, labeled, gc);
  const std::string out = (run_dir / "grounding.json").string();
  g.save(out);

  const evalkit::EvalReport rt = experiments::eval_round_trip(g, a.round_trip, a.seed ^ 0x77);
  rt.save((run_dir / "round_trip.json").string());
  std::cout << "grounding: " << out << "\n"
            << "pairs: " << g.pair_count() << "\n";
  print_aggregates(rt);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval-pred

struct EvalPredArgs {
  std::string ckpt;
  std::string data;
  std::string grounding;
  std::string split = "test";
  int max_seq = 0;
  uint64_t seed = 99;
  double action_lo = 0.0;
  double action_hi = 40.0;
};

int run_eval_pred(const EvalPredArgs& a, const fs::path& run_dir) {
  model::CheckpointMeta meta;
  const auto m = load_checkpoint(a.ckpt, &meta);
  std::unique_ptr<model::Grounding> g;
  if (!a.grounding.empty())
    g = std::make_unique<model::Grounding>(load_grounding_for(a.grounding, *m));
  else if (meta.mode != "supervised")
    std::cerr << "note: no --grounding given; using the checkpoint's action embedding, which is "
                 "only trained in supervised mode\n";
  dataio::DatasetReader reader(a.data);

  experiments::PredEvalConfig cfg;
  cfg.split = a.split;
  cfg.max_sequences = a.max_seq;
  cfg.seed = a.seed;
  cfg.action_lo = a.action_lo;
  cfg.action_hi = a.action_hi;
  evalkit::EvalReport rep = experiments::eval_action_conditioned(*m, g.get(), reader, cfg);
  rep.identifiers["checkpoint"] = a.ckpt;
  rep.identifiers["mode"] = meta.mode;
  rep.save((run_dir / "report.json").string());
  print_aggregates(rep);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// transplant

struct TransplantArgs {
  std::string ckpt;
  std::string donor_data;
  std::string recipient_data;
  int pairs = 20;
  uint64_t seed = 5;
  int strips = 0;
};

int run_transplant(const TransplantArgs& a, const fs::path& run_dir) {
  const auto m = load_checkpoint(a.ckpt, nullptr);
  dataio::DatasetReader donors(a.donor_data);
  const std::string rdata = a.recipient_data.empty() ? a.donor_data : a.recipient_data;
  dataio::DatasetReader recipients(rdata);

  evalkit::EvalReport rep = experiments::eval_transplant(m->pred, donors, recipients, a.pairs, a.seed);
  rep.identifiers["checkpoint"] = a.ckpt;
  rep.save((run_dir / "report.json").string());
  print_aggregates(rep);

  Rng rng(a.seed);
  const int k = m->cfg.cond_frames, t_len = m->cfg.seq_len;
  for (int i = 0; i < a.strips; ++i) {
    const int di = static_cast<int>(rng.below(static_cast<uint64_t>(donors.count("test"))));
    int ri = static_cast<int>(rng.below(static_cast<uint64_t>(recipients.count("test"))));
    if (a.recipient_data.empty() && ri == di) ri = (ri + 1) % recipients.count("test");
    const env::VideoSequence donor = donors.read("test", di);
    const env::VideoSequence recipient = recipients.read("test", ri);
    const auto res = experiments::transplant(m->pred, donor, recipient);

    std::vector<std::vector<Tensor<uint8_t>>> rows(2);
    for (int t = 0; t < t_len; ++t) rows[0].push_back(donor.frame(t));
    for (int t = 0; t < k; ++t) rows[1].push_back(recipient.frame(t));
    for (const auto& f : res.frames) rows[1].push_back(experiments::frame_to_u8(f));
    const auto img = plotting::upscale_nearest(plotting::tile_rows(rows), 4);
    img::write_png((run_dir / ("strip-" + std::to_string(i) + ".png")).string(), img);
  }
  if (a.strips > 0) std::cout << "strips: " << a.strips << " (donor row, transplanted row)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// servo

struct ServoArgs {
  std::string ckpt;
  std::string grounding;
  std::string policy = "planned";
  int episodes = 50;
  std::string variant = "plain";
  std::string background_dir;
  uint64_t seed = 123;
  int horizon = 5;
  int samples = 10;
  int elites = 3;
  int iters = 4;
  int servo_steps = 5;
  double stop_deg = 2.0;
  std::string cost = "feature";
};

int run_servo(const ServoArgs& a, const fs::path& run_dir) {
  model::CheckpointMeta meta;
  const auto m = load_checkpoint(a.ckpt, &meta);
  const plan::Policy policy = plan::parse_policy(a.policy);
  std::unique_ptr<model::Grounding> g;
  if (policy == plan::Policy::kPlanned) {
    if (a.grounding.empty()) throw ConfigError("the planned policy needs --grounding");
    g = std::make_unique<model::Grounding>(load_grounding_for(a.grounding, *m));
  }
  if (policy == plan::Policy::kSupervised && meta.mode != "supervised")
    std::cerr << "note: supervised policy on a " << meta.mode << " checkpoint\n";

  experiments::ServoEvalConfig cfg;
  cfg.episodes = a.episodes;
  cfg.policy = policy;
  cfg.variant = env::parse_variant(a.variant);
  cfg.background_dir = a.background_dir;
  cfg.seed = a.seed;
  cfg.planner.cem.horizon = a.horizon;
  cfg.planner.cem.samples = a.samples;
  cfg.planner.cem.elites = a.elites;
  cfg.planner.cem.iters = a.iters;
  cfg.planner.servo_steps = a.servo_steps;
  cfg.planner.stop_deg = a.stop_deg;
  cfg.planner.cost = a.cost;

  evalkit::EvalReport rep = experiments::eval_servo(*m, g.get(), cfg);
  rep.identifiers["checkpoint"] = a.ckpt;
  rep.save((run_dir / "report.json").string());
  print_aggregates(rep);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// pca

struct PcaArgs {
  std::string ckpt;
  std::string data;
  std::string split = "test";
  int points = 2000;
};

int run_pca(const PcaArgs& a, const fs::path& run_dir) {
  const auto m = load_checkpoint(a.ckpt, nullptr);
  dataio::DatasetReader reader(a.data);
  const experiments::LatentPca res = experiments::pca_latents(m->pred, reader, a.split, a.points);

  evalkit::EvalReport rep;
  rep.experiment = "pca";
  rep.identifiers["checkpoint"] = a.ckpt;
  rep.identifiers["split"] = a.split;
  const int n = res.pca.projections.dim(0), k = res.pca.projections.dim(1);
  for (int i = 0; i < n; ++i) {
    rep.add("pc1", res.pca.projections[static_cast<size_t>(i) * k]);
    rep.add("pc2", k > 1 ? res.pca.projections[static_cast<size_t>(i) * k + 1] : 0.0);
    rep.add("action", res.actions[i]);
  }
  for (double r : res.pca.explained_variance_ratio) rep.add("explained_variance_ratio", r);
  rep.add("pc1_ratio", res.pc1_ratio);
  rep.add("pc1_rank_corr", res.pc1_rank_corr);
  rep.finalize_aggregates();
  rep.save((run_dir / "report.json").string());

  char line[128];
  std::snprintf(line, sizeof(line), "PC1 variance ratio: %.4f  rank corr(PC1, u): %.4f  (n=%d)",
                res.pc1_ratio, res.pc1_rank_corr, n);
  std::cout << line << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string ckpt;
  std::string data;
  std::vector<int> budgets{50, 200, 1000};
  uint64_t label_seed = 1;
  uint64_t seed = 123;
  int episodes = 20;
  int max_seq = 50;
  int sup_steps = 2000;
  int sup_batch = 16;
  double sup_lr = 2e-4;
  bool no_servo = false;
  bool no_supervised = false;
  int horizon = 5;
  int samples = 10;
  int elites = 3;
  int iters = 4;
  int servo_steps = 5;
};

int run_sweep(const SweepArgs& a, const fs::path& run_dir) {
  const auto m = load_checkpoint(a.ckpt, nullptr);
  dataio::DatasetReader reader(a.data);

  experiments::SweepConfig cfg;
  cfg.budgets = a.budgets;
  cfg.label_seed = a.label_seed;
  cfg.pred_eval.max_sequences = a.max_seq;
  cfg.servo.episodes = a.episodes;
  cfg.servo.seed = a.seed;
  cfg.servo.planner.cem.horizon = a.horizon;
  cfg.servo.planner.cem.samples = a.samples;
  cfg.servo.planner.cem.elites = a.elites;
  cfg.servo.planner.cem.iters = a.iters;
  cfg.servo.planner.servo_steps = a.servo_steps;
  cfg.supervised.steps = a.sup_steps;
  cfg.supervised.batch_size = a.sup_batch;
  cfg.supervised.lr = a.sup_lr;
  cfg.supervised.quiet = true;
  cfg.run_servo = !a.no_servo;
  cfg.run_supervised = !a.no_supervised;

  evalkit::EvalReport rep =
      experiments::data_efficiency_sweep(*m, reader, a.data, run_dir.string(), cfg);
  rep.identifiers["checkpoint"] = a.ckpt;
  rep.save((run_dir / "report.json").string());
  print_aggregates(rep);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string metrics;
};

void render_pca(const evalkit::EvalReport& rep, const fs::path& run_dir) {
  plotting::write_svg_scatter((run_dir / "pca.svg").string(), rep.per_item.at("pc1"),
                              rep.per_item.at("pc2"), rep.per_item.at("action"),
                              "Latent posterior means, top-2 PCA", "PC1", "PC2");
}

void render_sweep(const evalkit::EvalReport& rep, const fs::path& run_dir) {
  // Metric keys look like clasp_servo@200; group into per-model curves.
  std::map<std::string, plotting::Series> curves;
  for (const auto& [key, s] : rep.aggregate) {
    const auto at = key.rfind('@');
    if (at == std::string::npos) continue;
    const std::string base = key.substr(0, at);
    const int budget = std::stoi(key.substr(at + 1));
    curves[base].label = base;
    curves[base].x.push_back(budget);
    curves[base].y.push_back(s.mean);
  }
  std::vector<plotting::Series> servo, pred;
  for (auto& [base, series] : curves) {
    for (size_t i = 1; i < series.x.size(); ++i)  // keys arrive sorted by budget string; fix order
      for (size_t j = i; j > 0 && series.x[j - 1] > series.x[j]; --j) {
        std::swap(series.x[j - 1], series.x[j]);
        std::swap(series.y[j - 1], series.y[j]);
      }
    if (base.find("servo") != std::string::npos) servo.push_back(series);
    if (base.find("pred_err") != std::string::npos) pred.push_back(series);
  }
  if (!servo.empty())
    plotting::write_svg_lines((run_dir / "sweep_servo.svg").string(), servo,
                              "Servo error vs label budget", "labeled sequences", "degrees");
  if (!pred.empty())
    plotting::write_svg_lines((run_dir / "sweep_pred.svg").string(), pred,
                              "Prediction error vs label budget", "labeled sequences", "degrees");
}

void render_metrics(const std::string& path, const fs::path& run_dir) {
  std::ifstream f(path);
  if (!f) throw ArtifactError("cannot read metrics " + path);
  plotting::Series total{"total", {}, {}}, recon{"recon", {}, {}};
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("step")) continue;
    total.x.push_back(j["step"].get<double>());
    total.y.push_back(j.value("total", 0.0));
    recon.x.push_back(j["step"].get<double>());
    recon.y.push_back(j.value("recon", 0.0));
  }
  if (total.x.empty()) throw ArtifactError("no metric lines in " + path);
  plotting::write_svg_lines((run_dir / "loss.svg").string(), {total, recon}, "Training objective",
                            "step", "loss");
}

int run_report(const ReportArgs& a, const fs::path& run_dir) {
  if (a.inputs.empty() && a.metrics.empty())
    throw ConfigError("report needs --in report.json and/or --metrics metrics.jsonl");
  std::ofstream tables(run_dir / "tables.txt");
  for (const auto& path : a.inputs) {
    const evalkit::EvalReport rep = evalkit::EvalReport::load(path);
    tables << "== " << rep.experiment << " (" << path << ")\n";
    for (const auto& [key, value] : rep.identifiers) tables << key << ": " << value << "\n";
    for (const auto& [metric, s] : rep.aggregate) {
      char line[160];
      std::snprintf(line, sizeof(line), "%-28s %12.5f +- %-12.5f n=%d", metric.c_str(), s.mean,
                    s.stddev, s.count);
      tables << line << "\n";
    }
    tables << "\n";
    if (rep.experiment == "pca") render_pca(rep, run_dir);
    if (rep.experiment == "data_efficiency") render_sweep(rep, run_dir);
    print_aggregates(rep);
  }
  if (!a.metrics.empty()) render_metrics(a.metrics, run_dir);
  std::cout << "report artifacts in " << run_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  CLI::App app{"Latent action-space discovery from video: data, training, grounding, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "flat key=value configuration file");

  std::string out_root = "runs";
  int workers = 0;
  app.add_option("--out", out_root, "directory that holds per-invocation run directories");
  app.add_option("--workers", workers, "cap on OpenMP threads (0: library default)");

  GenArgs gen;
  auto* cgen = app.add_subcommand("gen-data", "generate a reacher dataset");
  cgen->add_option("--variant", gen.variant, "plain | varied_bg | varied_agent");
  cgen->add_option("--image-size", gen.image_size);
  cgen->add_option("--seq-len", gen.seq_len);
  cgen->add_option("--train", gen.train);
  cgen->add_option("--test", gen.test);
  cgen->add_option("--seed", gen.seed);
  cgen->add_option("--background-dir", gen.background_dir, "external .ppm backgrounds");
  cgen->add_option("--action-lo", gen.action_lo);
  cgen->add_option("--action-hi", gen.action_hi);

  TrainArgs tr;
  auto* ctr = app.add_subcommand("train", "train a predictor");
  ctr->add_option("--data", tr.data)->envname("CLASP_DATA_DIR")->required();
  ctr->add_option("--mode", tr.mode, "clasp | no_comp | supervised");
  ctr->add_option("--steps", tr.steps);
  ctr->add_option("--batch", tr.batch);
  ctr->add_option("--lr", tr.lr);
  ctr->add_option("--seed", tr.seed);
  ctr->add_option("--labeled", tr.labeled, "restrict training to this many sequences (0: all)");
  ctr->add_option("--log-every", tr.log_every);
  ctr->add_option("--ckpt-every", tr.ckpt_every);
  ctr->add_option("--kl-warmup", tr.kl_warmup, "ramp the latent KL weight over this many steps");
  ctr->add_flag("--quiet", tr.quiet);
  ctr->add_option("--image-size", tr.image_size, "0: use the dataset's");
  ctr->add_option("--seq-len", tr.seq_len, "0: min(dataset, default)");
  ctr->add_option("--latent-dim", tr.latent_dim);
  ctr->add_option("--enc-dim", tr.enc_dim);
  ctr->add_option("--enc-base", tr.enc_base);
  ctr->add_option("--enc-levels", tr.enc_levels);
  ctr->add_option("--lstm-hidden", tr.lstm_hidden);
  ctr->add_option("--infer-h1", tr.infer_h1);
  ctr->add_option("--infer-h2", tr.infer_h2);
  ctr->add_option("--comp-hidden", tr.comp_hidden);
  ctr->add_option("--act-hidden", tr.act_hidden);
  ctr->add_option("--cond-frames", tr.cond_frames);
  ctr->add_option("--comp-chunk", tr.comp_chunk);
  ctr->add_option("--beta-z", tr.beta_z);
  ctr->add_option("--beta-nu", tr.beta_nu);
  ctr->add_option("--action-max", tr.action_max);
  ctr->add_option("--skips", tr.skips, "decoder skip connections: 1 on, 0 off, -1 auto by variant");

  GroundArgs gr;
  auto* cgr = app.add_subcommand("ground", "fit the action-latent bijection");
  cgr->add_option("--ckpt", gr.ckpt)->required();
  cgr->add_option("--data", gr.data)->envname("CLASP_DATA_DIR")->required();
  cgr->add_option("--labeled", gr.labeled);
  cgr->add_option("--label-seed", gr.label_seed);
  cgr->add_option("--seed", gr.seed);
  cgr->add_option("--fit-steps", gr.fit_steps);
  cgr->add_option("--eval-every", gr.eval_every);
  cgr->add_option("--patience", gr.patience);
  cgr->add_option("--val-frac", gr.val_fraction);
  cgr->add_option("--fit-batch", gr.fit_batch);
  cgr->add_option("--fit-lr", gr.fit_lr);
  cgr->add_option("--round-trip", gr.round_trip, "held-out round-trip samples to score");

  EvalPredArgs ep;
  auto* cep = app.add_subcommand("eval-pred", "action-conditioned prediction error");
  cep->add_option("--ckpt", ep.ckpt)->required();
  cep->add_option("--data", ep.data)->envname("CLASP_DATA_DIR")->required();
  cep->add_option("--grounding", ep.grounding, "grounding.json (omit for supervised checkpoints)");
  cep->add_option("--split", ep.split);
  cep->add_option("--max-seq", ep.max_seq, "0: whole split");
  cep->add_option("--seed", ep.seed);
  cep->add_option("--action-lo", ep.action_lo);
  cep->add_option("--action-hi", ep.action_hi);

  TransplantArgs tp;
  auto* ctp = app.add_subcommand("transplant", "replay donor latents on a new scene");
  ctp->add_option("--ckpt", tp.ckpt)->required();
  ctp->add_option("--donor-data", tp.donor_data)->envname("CLASP_DATA_DIR")->required();
  ctp->add_option("--recipient-data", tp.recipient_data, "defaults to --donor-data");
  ctp->add_option("--pairs", tp.pairs);
  ctp->add_option("--seed", tp.seed);
  ctp->add_option("--strips", tp.strips, "write this many PNG frame strips");

  ServoArgs sv;
  auto* csv = app.add_subcommand("servo", "closed-loop goal reaching");
  csv->add_option("--ckpt", sv.ckpt)->required();
  csv->add_option("--grounding", sv.grounding);
  csv->add_option("--policy", sv.policy, "planned | supervised | random");
  csv->add_option("--episodes", sv.episodes);
  csv->add_option("--variant", sv.variant);
  csv->add_option("--background-dir", sv.background_dir);
  csv->add_option("--seed", sv.seed);
  csv->add_option("--horizon", sv.horizon);
  csv->add_option("--samples", sv.samples);
  csv->add_option("--elites", sv.elites);
  csv->add_option("--iters", sv.iters);
  csv->add_option("--servo-steps", sv.servo_steps);
  csv->add_option("--stop-deg", sv.stop_deg);
  csv->add_option("--cost", sv.cost, "feature | pixel");

  PcaArgs pc;
  auto* cpc = app.add_subcommand("pca", "latent structure summary");
  cpc->add_option("--ckpt", pc.ckpt)->required();
  cpc->add_option("--data", pc.data)->envname("CLASP_DATA_DIR")->required();
  cpc->add_option("--split", pc.split);
  cpc->add_option("--points", pc.points, "0: every transition");

  SweepArgs sw;
  auto* csw = app.add_subcommand("sweep", "label-budget data-efficiency sweep");
  csw->add_option("--ckpt", sw.ckpt)->required();
  csw->add_option("--data", sw.data)->envname("CLASP_DATA_DIR")->required();
  csw->add_option("--budgets", sw.budgets)->delimiter(',');
  csw->add_option("--label-seed", sw.label_seed);
  csw->add_option("--seed", sw.seed);
  csw->add_option("--episodes", sw.episodes);
  csw->add_option("--max-seq", sw.max_seq);
  csw->add_option("--sup-steps", sw.sup_steps);
  csw->add_option("--sup-batch", sw.sup_batch);
  csw->add_option("--sup-lr", sw.sup_lr);
  csw->add_flag("--no-servo", sw.no_servo);
  csw->add_flag("--no-supervised", sw.no_supervised);
  csw->add_option("--horizon", sw.horizon);
  csw->add_option("--samples", sw.samples);
  csw->add_option("--elites", sw.elites);
  csw->add_option("--iters", sw.iters);
  csw->add_option("--servo-steps", sw.servo_steps);

  ReportArgs rp;
  auto* crp = app.add_subcommand("report", "tables and plots from saved reports");
  crp->add_option("--in", rp.inputs, "report.json files")->take_all();
  crp->add_option("--metrics", rp.metrics, "metrics.jsonl from a training run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

#ifdef _OPENMP
  if (workers > 0) omp_set_num_threads(workers);
#endif

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    const fs::path run_dir = make_run_dir(out_root, cmd, app.config_to_str(true, false));
    std::cout << "run dir: " << run_dir.string() << "\n";
    if (*cgen) return run_gen(gen, run_dir);
    if (*ctr) return run_train(tr, run_dir);
    if (*cgr) return run_ground(gr, run_dir);
    if (*cep) return run_eval_pred(ep, run_dir);
    if (*ctp) return run_transplant(tp, run_dir);
    if (*csv) return run_servo(sv, run_dir);
    if (*cpc) return run_pca(pc, run_dir);
    if (*csw) return run_sweep(sw, run_dir);
    if (*crp) return run_report(rp, run_dir);
    throw ConfigError("no subcommand selected");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ArtifactError& e) {
    std::cerr << "artifact error: " << e.what() << "\n";
    return kExitArtifact;
  } catch (const IoError& e) {
    std::cerr << "artifact error: " << e.what() << "\n";
    return kExitArtifact;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace clasp::cli

int main(int argc, char** argv) { return clasp::cli::main(argc, argv); }
