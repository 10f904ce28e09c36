// Synthetic scenes (coloured rectangles with exact ground truth), a toy
// captioner driven by the surrogate policy, CHAIR-style hallucination
// metrics, and the list-size / objective comparison harnesses.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "lpoi/core.hpp"
#include "lpoi/formats.hpp"
#include "lpoi/listgen.hpp"
#include "lpoi/png_io.hpp"
#include "lpoi/rng.hpp"
#include "lpoi/surrogate.hpp"

namespace lpoi {

struct VocabEntry {
  std::string label;
  Rgb color;
};

inline const std::vector<VocabEntry>& default_vocabulary() {
  static const std::vector<VocabEntry> vocab = {
      {"person", {230, 159, 0}}, {"car", {86, 180, 233}},   {"bus", {0, 158, 115}},    {"dog", {240, 228, 66}},
      {"cat", {0, 114, 178}},    {"bicycle", {213, 94, 0}}, {"chair", {204, 121, 167}}, {"bottle", {120, 120, 255}},
      {"cup", {140, 80, 40}},    {"bird", {60, 200, 200}},  {"horse", {150, 200, 60}}, {"boat", {100, 60, 160}},
  };
  return vocab;
}

struct Scene {
  std::string id;
  Image image;
  std::vector<DetectedObject> objects;  // ground truth; confidence 1

  bool has(std::string_view label) const {
    return std::any_of(objects.begin(), objects.end(), [&](const auto& o) { return o.label == label; });
  }
};

struct SceneOptions {
  int width = 96;
  int height = 96;
  int min_side = 12;
  int max_side = 36;
  int max_objects = 4;
  Rgb background{235, 235, 235};
};

inline std::string scene_id(std::size_t index) { return fmt::format("scene-{:04d}", index); }

/// n scenes, each with 1..max_objects pairwise-disjoint rectangles carrying
/// distinct labels. Scene i depends only on (seed, i).
inline std::vector<Scene> gen_scenes(std::size_t n, std::uint64_t seed,
                                     std::span<const VocabEntry> vocab = default_vocabulary(),
                                     const SceneOptions& opt = {}) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "scene count must be >= 1");
  if (vocab.empty()) throw Error(ErrorKind::InvalidArgument, "vocabulary must not be empty");
  if (opt.min_side < 1 || opt.max_side < opt.min_side || opt.max_side > std::min(opt.width, opt.height)) {
    throw Error(ErrorKind::InvalidArgument, "invalid rectangle side range");
  }
  std::vector<Scene> scenes;
  scenes.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    Scene scene;
    scene.id = scene_id(s);
    scene.image = Image(opt.width, opt.height, opt.background);
    Rng rng(derive_seed(seed, scene.id));
    const int limit = std::min<int>(opt.max_objects, static_cast<int>(vocab.size()));
    const int count = rng.uniform_int(1, std::max(1, limit));
    std::vector<std::size_t> labels(vocab.size());
    std::iota(labels.begin(), labels.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(labels));
    for (int i = 0; i < count; ++i) {
      for (int attempt = 0; attempt < 200; ++attempt) {
        const int w = rng.uniform_int(opt.min_side, opt.max_side);
        const int h = rng.uniform_int(opt.min_side, opt.max_side);
        const int x0 = rng.uniform_int(0, opt.width - w);
        const int y0 = rng.uniform_int(0, opt.height - h);
        const BoundingBox box{x0, y0, x0 + w, y0 + h};
        const bool clear = std::none_of(scene.objects.begin(), scene.objects.end(),
                                        [&](const auto& o) { return o.box.intersects(box); });
        if (!clear) continue;
        const auto& entry = vocab[labels[static_cast<std::size_t>(i)]];
        fill_rect(scene.image, {box.x0, box.y0, box.x1, box.y1}, entry.color);
        scene.objects.push_back({entry.label, box, 1.0});
        break;
      }
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

// ---------------------------------------------------------------------------
// Captioning and metrics

struct CaptionRecord {
  std::string scene_id;
  std::vector<std::string> mentions;
};

/// Mentions every vocabulary label whose policy score exceeds tau. Present
/// labels carry visibility 1, absent ones 0; the context is the scene's own
/// context stream, as for training samples.
inline CaptionRecord caption(const ToyPolicy& policy, const Scene& scene,
                             std::span<const VocabEntry> vocab = default_vocabulary(), double tau = 0.0) {
  CaptionRecord out{scene.id, {}};
  const auto context = context_features(scene.id, policy.dim());
  for (const auto& entry : vocab) {
    const FeatureVector f{scene.has(entry.label) ? 1.0 : 0.0, context};
    if (policy.forward(f) > tau) out.mentions.push_back(entry.label);
  }
  return out;
}

struct ChairMetrics {
  double chair_i = 0.0;   // hallucinated mentions / mentions
  double chair_s = 0.0;   // captions with a hallucination / captions
  double coverage = 0.0;  // ground-truth labels mentioned / ground-truth labels
};

/// Empty denominators give 0.
inline ChairMetrics chair_metrics(std::span<const CaptionRecord> captions, std::span<const Scene> scenes) {
  std::map<std::string_view, const Scene*> by_id;
  for (const auto& s : scenes) by_id.emplace(s.id, &s);
  std::size_t mentions = 0;
  std::size_t hallucinated = 0;
  std::size_t bad_captions = 0;
  std::size_t truth = 0;
  std::size_t covered = 0;
  for (const auto& c : captions) {
    const auto it = by_id.find(c.scene_id);
    if (it == by_id.end()) throw Error(ErrorKind::UnknownScene, "caption refers to unknown scene '" + c.scene_id + "'");
    const Scene& scene = *it->second;
    std::size_t wrong = 0;
    for (const auto& m : c.mentions) wrong += scene.has(m) ? 0 : 1;
    mentions += c.mentions.size();
    hallucinated += wrong;
    bad_captions += wrong > 0 ? 1 : 0;
    truth += scene.objects.size();
    for (const auto& o : scene.objects) {
      covered += std::find(c.mentions.begin(), c.mentions.end(), o.label) != c.mentions.end() ? 1 : 0;
    }
  }
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  return {ratio(hallucinated, mentions), ratio(bad_captions, captions.size()), ratio(covered, truth)};
}

// ---------------------------------------------------------------------------
// Scenes as preference data

/// One sample per scene: the chosen answer names a present object, the
/// rejected answer an absent one.
inline std::vector<PreferenceSample> scene_samples(std::span<const Scene> scenes, std::uint64_t seed,
                                                   std::span<const VocabEntry> vocab = default_vocabulary()) {
  std::vector<PreferenceSample> out;
  out.reserve(scenes.size());
  for (const auto& scene : scenes) {
    Rng rng(derive_seed(seed, scene.id + "/answers"));
    std::vector<std::string> absent;
    for (const auto& e : vocab) {
      if (!scene.has(e.label)) absent.push_back(e.label);
    }
    if (scene.objects.empty() || absent.empty()) continue;
    const auto& present = scene.objects[rng.uniform_index(scene.objects.size())].label;
    const auto& missing = absent[rng.uniform_index(absent.size())];
    out.push_back({scene.id, "images/" + scene.id + ".png", "What is in the image?",
                   "There is a " + present + " in the image.", "There is a " + missing + " in the image."});
  }
  return out;
}

inline DetectionTable scene_detections(std::span<const Scene> scenes) {
  DetectionTable table;
  for (const auto& s : scenes) table.emplace(s.id, s.objects);
  return table;
}

/// Listwise records for scenes via the regular pipeline, with oracle
/// detections and a verifier that accepts every hard negative.
inline DatasetBuild scene_records(std::span<const Scene> scenes, std::span<const PreferenceSample> samples,
                                  const BuildOptions& options, std::uint64_t seed, unsigned workers = 1) {
  std::map<std::string_view, const Scene*> by_id;
  for (const auto& s : scenes) by_id.emplace(s.id, &s);
  AlwaysHallucinatingVerifier verifier;
  const auto detections = scene_detections(scenes);
  auto loader = [&](const PreferenceSample& sample) -> Image {
    const auto it = by_id.find(sample.id);
    if (it == by_id.end()) throw Error(ErrorKind::UnknownScene, "no scene '" + sample.id + "'");
    return it->second->image;
  };
  return build_dataset(samples, loader, detections, verifier, options, seed, workers);
}

/// Writes scenes as pipeline inputs: images/<id>.png, manifest.jsonl and
/// detections.jsonl under `dir`.
inline void write_scene_set(const std::filesystem::path& dir, std::span<const Scene> scenes,
                            std::span<const PreferenceSample> samples) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + (dir / "images").string() + ": " + ec.message());
  for (const auto& s : scenes) write_png(dir / "images" / (s.id + ".png"), s.image);
  write_input_manifest(dir / "manifest.jsonl", samples);
  std::vector<std::string> ids;
  for (const auto& s : scenes) ids.push_back(s.id);
  write_detections(dir / "detections.jsonl", ids, scene_detections(scenes));
}

// ---------------------------------------------------------------------------
// Experiment harness

struct BenchConfig {
  std::size_t scenes = 200;
  double holdout = 0.2;
  int list_size = 5;
  double tau = 0.0;
  TrainerConfig trainer;
  BuildOptions build;
  SceneOptions scene;
};

struct BenchRow {
  std::string objective;
  int list_size = 0;
  std::uint64_t seed = 0;
  ChairMetrics chair;
  double ordering_accuracy = 0.0;
  double final_total_loss = 0.0;
};

inline std::string objective_name(ObjectiveTerms t) {
  if (t == ObjectiveTerms::full()) return "lpoi";
  if (t == ObjectiveTerms::dpo_only()) return "dpo";
  return fmt::format("custom(dpo={},anchor={},listwise={})", t.dpo, t.anchor, t.listwise);
}

/// Generates scenes for `seed`, builds lists of `list_size`, trains on the
/// first (1 - holdout) share and evaluates ordering and CHAIR on the rest.
inline BenchRow run_cell(const BenchConfig& config, std::uint64_t seed, int list_size, ObjectiveTerms terms) {
  if (!(config.holdout > 0.0 && config.holdout < 1.0)) throw Error(ErrorKind::InvalidArgument, "holdout must be in (0, 1)");
  const auto scenes = gen_scenes(config.scenes, seed, default_vocabulary(), config.scene);
  const auto samples = scene_samples(scenes, seed);
  BuildOptions build = config.build;
  build.plan.list_size = list_size;
  const auto built = scene_records(scenes, samples, build, seed);
  const auto examples = make_examples(built.records, config.trainer.context_dim);

  const auto n_eval = static_cast<std::size_t>(std::max(1.0, std::round(config.holdout * examples.size())));
  if (n_eval >= examples.size()) throw Error(ErrorKind::InvalidArgument, "holdout leaves no training data");
  const std::span<const PolicyExample> all(examples);
  const auto train_set = all.first(examples.size() - n_eval);
  const auto eval_set = all.last(n_eval);

  TrainerConfig tc = config.trainer;
  tc.seed = seed;
  tc.terms = terms;
  tc.hyper.list_size = list_size;
  const auto result = train(tc, train_set);

  std::map<std::string_view, const Scene*> by_id;
  for (const auto& s : scenes) by_id.emplace(s.id, &s);
  std::vector<Scene> eval_scenes;
  std::vector<CaptionRecord> captions;
  for (const auto& ex : eval_set) {
    const Scene& scene = *by_id.at(ex.id);
    eval_scenes.push_back(scene);
    captions.push_back(caption(result.policy, scene, default_vocabulary(), config.tau));
  }

  BenchRow row;
  row.objective = objective_name(terms);
  row.list_size = list_size;
  row.seed = seed;
  row.chair = chair_metrics(captions, eval_scenes);
  row.ordering_accuracy = ordering_accuracy(result.policy, result.reference, eval_set, tc.hyper.beta);
  row.final_total_loss = result.history.back().loss.total;
  return row;
}

/// Full objective for every (list size, seed) cell; rows ordered by size,
/// then seed, whatever the worker count.
inline std::vector<BenchRow> run_ablation(const BenchConfig& config, std::span<const int> list_sizes,
                                          std::span<const std::uint64_t> seeds, unsigned workers = 1) {
  if (seeds.empty()) throw Error(ErrorKind::InvalidArgument, "ablation needs at least one seed");
  if (list_sizes.empty()) throw Error(ErrorKind::InvalidArgument, "ablation needs at least one list size");
  for (int L : list_sizes) validate_list_size(L);
  std::vector<BenchRow> rows(list_sizes.size() * seeds.size());
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    rows[i] = run_cell(config, seeds[i % seeds.size()], list_sizes[i / seeds.size()], ObjectiveTerms::full());
  });
  return rows;
}

/// Full objective against the text-only DPO baseline, per seed.
inline std::vector<BenchRow> compare_objectives(const BenchConfig& config, std::span<const std::uint64_t> seeds,
                                                unsigned workers = 1) {
  if (seeds.empty()) throw Error(ErrorKind::InvalidArgument, "comparison needs at least one seed");
  const ObjectiveTerms objectives[] = {ObjectiveTerms::full(), ObjectiveTerms::dpo_only()};
  std::vector<BenchRow> rows(seeds.size() * 2);
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    rows[i] = run_cell(config, seeds[i / 2], config.list_size, objectives[i % 2]);
  });
  return rows;
}

inline std::string ablation_csv(std::span<const BenchRow> rows) {
  std::string out = "list_size,seed,chair_i,chair_s,coverage,ordering_accuracy,final_total_loss\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", r.list_size, r.seed, r.chair.chair_i, r.chair.chair_s,
                       r.chair.coverage, r.ordering_accuracy, r.final_total_loss);
  }
  return out;
}

inline std::string bench_csv(std::span<const BenchRow> rows) {
  std::string out = "objective,seed,list_size,chair_i,chair_s,coverage,ordering_accuracy,final_total_loss\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.objective, r.seed, r.list_size, r.chair.chair_i,
                       r.chair.chair_s, r.chair.coverage, r.ordering_accuracy, r.final_total_loss);
  }
  return out;
}

}  // namespace lpoi
