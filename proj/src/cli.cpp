// SPDX-License-Identifier: Apache-2.0
#include "mdd/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mdd/corpus.hpp"
#include "mdd/denoiser.hpp"
#include "mdd/metrics.hpp"
#include "mdd/sampler.hpp"
#include "mdd/synth.hpp"
#include "mdd/vq.hpp"

namespace mdd {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

std::vector<std::string> tokenize_text(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

struct Config {
  json j;

  // Config lookups with dotted paths and defaults.
  template <typename T>
  T get(const std::string& dotted, T fallback) const {
    const json* cur = &j;
    std::istringstream in(dotted);
    std::string part;
    while (std::getline(in, part, '.')) {
      if (!cur->contains(part)) return fallback;
      cur = &(*cur)[part];
    }
    return cur->get<T>();
  }
};

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    // Usage-level failure by contract: the caller mistyped the path.
    throw CLI::ValidationError("config", "config file not found: " + path);
  }
  Config cfg;
  try {
    in >> cfg.j;
  } catch (const json::exception& e) {
    throw DataError("config " + path + ": " + e.what());
  }
  return cfg;
}

// Reproducibility record written next to every stage's outputs. Contents are
// a pure function of the invocation so reruns stay byte-identical.
void write_run_record(const fs::path& out_dir, const std::string& command, const Config& cfg,
                      uint64_t seed, const json& extra = json::object()) {
  fs::create_directories(out_dir);
  json rec;
  rec["command"] = command;
  rec["config"] = cfg.j;
  rec["seed"] = seed;
  rec["version"] = kVersion;
  rec["overrides"] = extra;
  std::ofstream out(out_dir / "run_record.json", std::ios::binary);
  out << rec.dump(2) << "\n";
}

NgramHashProvider provider_from_config(const Config& cfg) {
  const auto layers = cfg.get<std::vector<int>>("provider.layers", {7, 9, 11, 12});
  std::vector<int> widths = cfg.get<std::vector<int>>(
      "provider.widths", std::vector<int>(layers.size(), 64));
  const auto seed = cfg.get<uint64_t>("provider.seed", 7);
  return NgramHashProvider(layers, widths, seed);
}

FeatureExtractor extractor_from_config(const Config& cfg) {
  return FeatureExtractor(cfg.get<int>("extractor.dim", 24), cfg.get<uint64_t>("extractor.seed", 11));
}

// ---- subcommands ----

int cmd_synth(const std::string& out_dir, int clips, uint64_t seed) {
  generate_synthetic_corpus(out_dir, clips, seed);
  json extra{{"clips", clips}, {"out", out_dir}};
  Config empty;
  empty.j = json::object();
  write_run_record(out_dir, "synth", empty, seed, extra);
  std::cout << "wrote " << clips << " synthetic clips under " << out_dir << "\n";
  return 0;
}

int cmd_preprocess(const Config& cfg, const std::string& data_dir, const std::string& out_dir) {
  const fs::path in_root(data_dir);
  const fs::path out_root(out_dir);
  fs::create_directories(out_root / "clips");

  DatasetManifest manifest = DatasetManifest::load((in_root / "manifest.jsonl").string());
  const auto target_fps = cfg.get<uint32_t>("preprocess.fps", kCanonicalFps);
  const auto max_frames = cfg.get<int>("preprocess.max_frames", kMaxClipFrames);

  int resampled = 0;
  for (auto& rec : manifest.records) {
    const JointMotion raw = load_joint_motion((in_root / rec.motion_path).string());
    const CanonicalizeResult canon = canonicalize(raw, target_fps, max_frames);
    if (canon.resampled_by_interpolation) ++resampled;
    const MotionClip clip = encode_features(canon.motion);
    const std::string rel =
        (fs::path("clips") / (fs::path(rec.motion_path).stem().string() + ".mclp")).string();
    save_motion_clip(clip, (out_root / rel).string());
    rec.motion_path = rel;
  }
  manifest.save((out_root / "manifest.jsonl").string());
  write_run_record(out_root, "preprocess", cfg, cfg.get<uint64_t>("seed", 0));
  std::cout << "preprocessed " << manifest.records.size() << " motions";
  if (resampled > 0) std::cout << " (warning: " << resampled << " resampled by interpolation)";
  std::cout << "\n";
  return 0;
}

std::vector<MotionClip> load_clips(const DatasetManifest& manifest, const fs::path& root) {
  std::vector<MotionClip> clips;
  clips.reserve(manifest.records.size());
  for (const auto& rec : manifest.records)
    clips.push_back(load_motion_clip((root / rec.motion_path).string()));
  return clips;
}

int cmd_train_vq(const Config& cfg, const std::string& data_dir, const std::string& out_dir) {
  const fs::path root(data_dir);
  const DatasetManifest manifest = DatasetManifest::load((root / "manifest.jsonl").string());
  const std::vector<MotionClip> clips = load_clips(manifest, root);

  VqTrainConfig tc;
  tc.codebook_size = cfg.get<int>("vq.codebook_size", 512);
  tc.code_dim = cfg.get<int>("vq.code_dim", 512);
  tc.hidden = cfg.get<int>("vq.hidden", 64);
  tc.beta = cfg.get<double>("vq.beta", 0.25);
  tc.ema_decay = cfg.get<double>("vq.ema_decay", 0.99);
  tc.reset_threshold = cfg.get<double>("vq.reset_threshold", 1.0);
  tc.reset_every = cfg.get<int>("vq.reset_every", 20);
  tc.steps = cfg.get<int>("vq.steps", 2000);
  tc.batch_size = cfg.get<int>("vq.batch_size", 8);
  tc.lr = cfg.get<double>("vq.lr", 1e-3);
  tc.momentum = cfg.get<double>("vq.momentum", 0.9);
  tc.weight_decay = cfg.get<double>("vq.weight_decay", 4.5e-2);
  tc.holdout_fraction = cfg.get<double>("vq.holdout_fraction", 0.1);
  tc.seed = cfg.get<uint64_t>("seed", 0);

  const VqTrainResult result = train_toy_vq(clips, tc);

  const fs::path out_root(out_dir);
  fs::create_directories(out_root);
  save_vq_checkpoint(result.model, result.book, (out_root / "vq.mvq1").string());
  std::ofstream curve(out_root / "vq_loss.csv", std::ios::binary);
  curve << "step,loss\n";
  for (size_t i = 0; i < result.loss_curve.size(); ++i)
    curve << i << "," << result.loss_curve[i] << "\n";
  write_run_record(out_root, "train-vq", cfg, tc.seed);
  std::cout << "train-vq done: holdout recon L1 = " << result.holdout_recon_l1 << "\n";
  return 0;
}

int cmd_train_denoiser(const Config& cfg, const std::string& data_dir,
                       const std::string& vq_path, const std::string& out_dir) {
  const fs::path root(data_dir);
  DatasetManifest manifest = DatasetManifest::load((root / "manifest.jsonl").string());
  auto [vq_model, book] = load_vq_checkpoint(vq_path);

  const auto provider = provider_from_config(cfg);
  const int cond_dim = cfg.get<int>("denoiser.cond_dim", 32);
  const int T = cfg.get<int>("denoiser.T", 10);
  const int hidden = cfg.get<int>("denoiser.hidden", 48);
  const int blocks = cfg.get<int>("denoiser.blocks", 2);
  const uint64_t seed = cfg.get<uint64_t>("seed", 0);

  Rng rng(seed);
  ToyDenoiser net(book.size(), hidden, cond_dim, T, blocks, rng);
  std::vector<int> widths;
  for (int layer : provider.layer_set()) widths.push_back(provider.width(layer));
  AggregatorParams hsa = AggregatorParams::init(provider.layer_set(), widths, cond_dim, rng);

  DenoiserTrainConfig dc;
  dc.lr = cfg.get<double>("denoiser.lr", 1e-3);
  dc.momentum = cfg.get<double>("denoiser.momentum", 0.9);
  dc.weight_decay = cfg.get<double>("denoiser.weight_decay", 4.5e-2);
  dc.lambda_aux = cfg.get<double>("denoiser.lambda_aux", 0.01);
  dc.sigma_map["curated"] = cfg.get<double>("denoiser.sigma_curated", 0.1);
  dc.sigma_map["wild"] = cfg.get<double>("denoiser.sigma_wild", 0.3);

  const NoiseSchedule schedule =
      build_schedule(T, book.size(), cfg.get<std::string>("schedule.profile", "mask-and-replace"));

  // Materialize: tokens via the VQ encoder, caption features via the
  // provider; caption-less motions still train the unconditional branch.
  ExampleMaterializer materialize = [&](const ManifestRecord& rec) {
    std::vector<TrainingExample> out;
    const MotionClip clip = load_motion_clip((root / rec.motion_path).string());
    TrainingExample base;
    base.u0 = encode_to_tokens(clip, vq_model, book);
    if (rec.captions.empty()) {
      base.source = "curated";
      out.push_back(base);
      return out;
    }
    for (const auto& cap : rec.captions) {
      TrainingExample ex = base;
      ex.source = cap.source;
      ex.condition_features = provider.embed(tokenize_text(cap.text));
      out.push_back(std::move(ex));
    }
    return out;
  };

  const auto ratios = cfg.get<std::vector<double>>("denoiser.split", {0.9, 0.1});
  const int batch_size = cfg.get<int>("denoiser.batch_size", 16);
  SplitBatches batches = split_and_batch(manifest, ratios, batch_size, rng, materialize);
  if (batches.train_batches.empty()) throw DataError("train-denoiser: no training batches");

  DiffusionTrainer trainer(std::move(net), std::move(hsa), dc);
  const int steps = cfg.get<int>("denoiser.steps", 3000);

  const fs::path out_root(out_dir);
  fs::create_directories(out_root);
  std::ofstream curve(out_root / "denoiser_loss.csv", std::ios::binary);
  curve << "step,loss,kl_term,aux_term\n";
  for (int step = 0; step < steps; ++step) {
    const auto& batch = batches.train_batches[step % batches.train_batches.size()];
    const TrainLossBreakdown loss = trainer.train_step(batch, schedule, rng);
    curve << step << "," << loss.total << "," << loss.kl << "," << loss.aux << "\n";
  }

  DenoiserCheckpoint ckpt;
  ckpt.net = trainer.net();
  ckpt.hsa = trainer.hsa();
  ckpt.provider_layers = provider.layer_set();
  ckpt.provider_widths = widths;
  ckpt.provider_seed = provider.seed();
  ckpt.schedule_profile = schedule.profile;
  save_denoiser_checkpoint(ckpt, (out_root / "denoiser.mdn1").string());
  manifest.save((out_root / "manifest.split.jsonl").string());
  write_run_record(out_root, "train-denoiser", cfg, seed);
  std::cout << "train-denoiser done: " << steps << " steps over "
            << batches.train_batches.size() << " batches\n";
  return 0;
}

PipelineBundle load_bundle(const std::string& vq_path, const std::string& denoiser_path) {
  PipelineBundle bundle;
  auto [vq_model, book] = load_vq_checkpoint(vq_path);
  bundle.vq = std::move(vq_model);
  bundle.book = std::move(book);
  DenoiserCheckpoint ckpt = load_denoiser_checkpoint(denoiser_path);
  bundle.denoiser = std::move(ckpt.net);
  bundle.hsa = std::move(ckpt.hsa);
  bundle.provider = std::make_shared<NgramHashProvider>(ckpt.provider_layers,
                                                        ckpt.provider_widths, ckpt.provider_seed);
  bundle.schedule_profile = ckpt.schedule_profile;
  return bundle;
}

int cmd_generate(const Config& cfg, const std::string& vq_path, const std::string& denoiser_path,
                 const std::string& text, int length, double scale, int steps, uint64_t seed,
                 const std::string& out_dir) {
  const PipelineBundle bundle = load_bundle(vq_path, denoiser_path);

  GuidanceConfig gc;
  gc.scale = scale;
  gc.steps = steps > 0 ? steps : bundle.denoiser.T;
  gc.seed = seed;

  const MotionClip clip = generate_motion(tokenize_text(text), bundle, gc, length);

  const fs::path out_root(out_dir);
  fs::create_directories(out_root);
  save_motion_clip(clip, (out_root / "generated.mclp").string());
  save_joint_motion(decode_features(clip), (out_root / "generated.jntm").string());

  // Token dump for debugging; regenerate the same sequence for the record.
  const NoiseSchedule s = build_schedule(gc.steps, bundle.denoiser.K, bundle.schedule_profile);
  ConditionEmbedding cond = ConditionEmbedding::none();
  if (!text.empty() && bundle.hsa)
    cond = aggregate(*bundle.hsa, bundle.provider->embed(tokenize_text(text)));
  const TokenSequence tokens = generate(bundle.denoiser, cond, gc, length, s);
  json dump;
  dump["tokens"] = tokens.tokens;
  dump["codebook_size"] = tokens.codebook_size;
  dump["text"] = text;
  dump["scale"] = scale;
  dump["steps"] = gc.steps;
  std::ofstream tok_out(out_root / "tokens.json", std::ios::binary);
  tok_out << dump.dump(2) << "\n";

  json extra{{"text", text}, {"length", length}, {"scale", scale}, {"steps", gc.steps}};
  write_run_record(out_root, "generate", cfg, seed, extra);
  std::cout << "generated " << clip.frame_count() << " frames -> " << out_dir << "\n";
  return 0;
}

int cmd_evaluate(const Config& cfg, const std::string& data_dir, const std::string& vq_path,
                 const std::string& denoiser_path, const std::string& out_dir) {
  const fs::path root(data_dir);
  DatasetManifest manifest = DatasetManifest::load((root / "manifest.jsonl").string());
  const PipelineBundle bundle = load_bundle(vq_path, denoiser_path);
  const FeatureExtractor extractor = extractor_from_config(cfg);
  const uint64_t seed = cfg.get<uint64_t>("seed", 0);

  // Evaluation pool: test-split records when tagged, otherwise everything.
  std::vector<const ManifestRecord*> pool;
  for (const auto& rec : manifest.records)
    if (rec.split == "test") pool.push_back(&rec);
  if (pool.empty())
    for (const auto& rec : manifest.records) pool.push_back(&rec);
  const int max_samples = cfg.get<int>("evaluate.max_samples", 64);
  if (static_cast<int>(pool.size()) > max_samples) pool.resize(max_samples);
  if (pool.empty()) throw DataError("evaluate: empty evaluation pool");

  GuidanceConfig gc;
  gc.scale = cfg.get<double>("evaluate.scale", 1.0);
  gc.steps = cfg.get<int>("evaluate.steps", bundle.denoiser.T);

  std::vector<MotionClip> real_clips;
  std::vector<MotionClip> gen_clips;
  std::vector<std::vector<std::string>> texts;
  const int gen_length = cfg.get<int>("evaluate.length", 16);
  for (size_t i = 0; i < pool.size(); ++i) {
    real_clips.push_back(load_motion_clip((root / pool[i]->motion_path).string()));
    const std::string text =
        pool[i]->captions.empty() ? std::string() : pool[i]->captions.front().text;
    texts.push_back(tokenize_text(text));
    GuidanceConfig gi = gc;
    gi.seed = splitmix64(seed ^ (0x9e3779b97f4a7c15ULL + i));
    gen_clips.push_back(generate_motion(texts.back(), bundle, gi, gen_length));
  }

  const FeatureSet f_real = extractor.motion_feature_set(real_clips);
  const FeatureSet f_gen = extractor.motion_feature_set(gen_clips);
  const FeatureSet f_text = extractor.text_feature_set(texts);

  const int reps = cfg.get<int>("evaluate.repetitions", 20);
  const int mm_reps = cfg.get<int>("evaluate.mmodality_repetitions", 5);
  const int pool_size = cfg.get<int>("evaluate.rprecision_pool", 32);
  const int div_subset = cfg.get<int>("evaluate.diversity_subset",
                                      std::max(1, static_cast<int>(pool.size()) / 4));

  json report;
  auto add = [&](const std::string& name, const MetricReport& r) {
    report[name] = {{"mean", r.mean}, {"ci95", r.ci95}, {"runs", r.runs}};
  };

  add("fid", run_repeated(reps, seed + 1, [&](Rng&) { return fid(f_real, f_gen); }));
  add("mm_dist", run_repeated(reps, seed + 2, [&](Rng&) { return mm_dist(f_gen, f_text); }));
  if (static_cast<int>(pool.size()) >= pool_size) {
    add("r_precision_top1", run_repeated(reps, seed + 3, [&](Rng& r) {
          return r_precision(f_gen, f_text, pool_size, r).top1;
        }));
    add("r_precision_top2", run_repeated(reps, seed + 4, [&](Rng& r) {
          return r_precision(f_gen, f_text, pool_size, r).top2;
        }));
    add("r_precision_top3", run_repeated(reps, seed + 5, [&](Rng& r) {
          return r_precision(f_gen, f_text, pool_size, r).top3;
        }));
  }
  add("diversity", run_repeated(reps, seed + 6,
                                [&](Rng& r) { return diversity(f_gen, div_subset, r); }));

  // MModality: repeated generations for a handful of texts.
  const int mm_texts = cfg.get<int>("evaluate.mmodality_texts", 2);
  const int mm_samples = cfg.get<int>("evaluate.mmodality_samples", 20);
  std::map<std::string, FeatureSet> per_text;
  for (int ti = 0; ti < mm_texts && ti < static_cast<int>(texts.size()); ++ti) {
    std::vector<MotionClip> reruns;
    for (int rep = 0; rep < mm_samples; ++rep) {
      GuidanceConfig gi = gc;
      gi.seed = splitmix64(seed ^ (0xB5297A4D3F84D5B5ULL + 1000 * ti + rep));
      reruns.push_back(generate_motion(texts[ti], bundle, gi, gen_length));
    }
    std::string key = "text" + std::to_string(ti);
    per_text[key] = extractor.motion_feature_set(reruns);
  }
  add("mmodality",
      run_repeated(mm_reps, seed + 7, [&](Rng& r) { return mmodality(per_text, r); }));

  const fs::path out_root(out_dir);
  fs::create_directories(out_root);
  std::ofstream out(out_root / "evaluation.json", std::ios::binary);
  out << report.dump(2) << "\n";
  write_run_record(out_root, "evaluate", cfg, seed);
  std::cout << "evaluate done: fid=" << report["fid"]["mean"] << " mm_dist="
            << report["mm_dist"]["mean"] << "\n";
  return 0;
}

int cmd_filter_captions(const Config& cfg, const std::string& data_dir, double tau,
                        const std::string& out_path) {
  const fs::path root(data_dir);
  DatasetManifest manifest = DatasetManifest::load((root / "manifest.jsonl").string());
  const FeatureExtractor extractor = extractor_from_config(cfg);

  MotionFeatureFn motion_fn = [&](const ManifestRecord& rec) {
    return extractor.motion_features(load_motion_clip((root / rec.motion_path).string()));
  };
  TextFeatureFn text_fn = [&](const std::string& text) {
    return extractor.text_features(tokenize_text(text));
  };
  const int removed = filter_captions(manifest, motion_fn, text_fn, tau);
  manifest.save(out_path);
  write_run_record(fs::path(out_path).parent_path(), "filter-captions", cfg,
                   cfg.get<uint64_t>("seed", 0), json{{"tau", tau}, {"removed", removed}});
  std::cout << "filter-captions removed " << removed << " captions (tau=" << tau << ")\n";
  return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& argv) {
  CLI::App app{"Motion discrete diffusion pipeline"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir = "out", vq_path, denoiser_path, out_path;
  std::string text;
  int clips = 200, length = 16, steps = 0;
  double scale = -1.0, tau = 5.0;
  uint64_t seed = UINT64_MAX;  // sentinel: fall back to config

  auto* synth = app.add_subcommand("synth", "Write a synthetic joint-motion corpus");
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--clips", clips, "Number of clips");
  synth->add_option("--seed", seed, "RNG seed");

  auto* preprocess =
      app.add_subcommand("preprocess", "Canonicalize and encode a raw motion directory");
  preprocess->add_option("--config", config_path, "JSON config")->required();
  preprocess->add_option("--data", data_dir, "Input directory (manifest + motions)")->required();
  preprocess->add_option("--out", out_dir, "Output directory")->required();

  auto* train_vq = app.add_subcommand("train-vq", "Train the motion tokenizer");
  train_vq->add_option("--config", config_path, "JSON config")->required();
  train_vq->add_option("--data", data_dir, "Preprocessed directory")->required();
  train_vq->add_option("--out", out_dir, "Output directory")->required();
  train_vq->add_option("--seed", seed, "Override config seed");

  auto* train_den = app.add_subcommand("train-denoiser", "Train the conditional denoiser");
  train_den->add_option("--config", config_path, "JSON config")->required();
  train_den->add_option("--data", data_dir, "Preprocessed directory")->required();
  train_den->add_option("--vq", vq_path, "VQ checkpoint (.mvq1)")->required();
  train_den->add_option("--out", out_dir, "Output directory")->required();
  train_den->add_option("--seed", seed, "Override config seed");

  auto* generate = app.add_subcommand("generate", "Sample a motion from text");
  generate->add_option("--config", config_path, "JSON config")->required();
  generate->add_option("--vq", vq_path, "VQ checkpoint")->required();
  generate->add_option("--denoiser", denoiser_path, "Denoiser checkpoint")->required();
  generate->add_option("--text", text, "Motion description (empty = unconditional)");
  generate->add_option("--length", length, "Token count (frames = 4x)");
  generate->add_option("--scale", scale, "Guidance scale s");
  generate->add_option("--steps", steps, "Inference steps (default: trained T)");
  generate->add_option("--seed", seed, "RNG seed");
  generate->add_option("--out", out_dir, "Output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Run the metric suite");
  evaluate->add_option("--config", config_path, "JSON config")->required();
  evaluate->add_option("--data", data_dir, "Preprocessed directory")->required();
  evaluate->add_option("--vq", vq_path, "VQ checkpoint")->required();
  evaluate->add_option("--denoiser", denoiser_path, "Denoiser checkpoint")->required();
  evaluate->add_option("--out", out_dir, "Output directory")->required();
  evaluate->add_option("--seed", seed, "Override config seed");

  auto* filter = app.add_subcommand("filter-captions", "Drop captions with MM-Dist above tau");
  filter->add_option("--config", config_path, "JSON config")->required();
  filter->add_option("--data", data_dir, "Directory with manifest + clips")->required();
  filter->add_option("--tau", tau, "Quality threshold");
  filter->add_option("--out", out_path, "Filtered manifest path")->required();

  std::vector<std::string> args(argv.rbegin(), argv.rend());  // CLI11 wants reversed
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    Config cfg;
    cfg.j = json::object();
    if (!config_path.empty()) cfg = load_config(config_path);
    if (seed != UINT64_MAX) cfg.j["seed"] = seed;
    if (scale < 0.0) scale = cfg.get<double>("generate.scale", 2.0);
    const uint64_t run_seed = cfg.get<uint64_t>("seed", 0);

    if (synth->parsed()) return cmd_synth(out_dir, clips, seed != UINT64_MAX ? seed : 0);
    if (preprocess->parsed()) return cmd_preprocess(cfg, data_dir, out_dir);
    if (train_vq->parsed()) return cmd_train_vq(cfg, data_dir, out_dir);
    if (train_den->parsed()) return cmd_train_denoiser(cfg, data_dir, vq_path, out_dir);
    if (generate->parsed())
      return cmd_generate(cfg, vq_path, denoiser_path, text, length, scale,
                          steps > 0 ? steps : cfg.get<int>("generate.steps", 0), run_seed,
                          out_dir);
    if (evaluate->parsed()) return cmd_evaluate(cfg, data_dir, vq_path, denoiser_path, out_dir);
    if (filter->parsed()) return cmd_filter_captions(cfg, data_dir, tau, out_path);
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int cli_dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_dispatch(args);
}

}  // namespace mdd
