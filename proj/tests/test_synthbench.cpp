#include <gtest/gtest.h>

#include <set>

#include "lpoi/synthbench.hpp"

using namespace lpoi;

namespace {

ToyPolicy visibility_projection(double weight = 1.0, double bias = 0.0) {
  auto p = ToyPolicy::linear();
  p.params()[0] = weight;
  p.params()[p.size() - 1] = bias;
  return p;
}

}  // namespace

TEST(Scenes, Deterministic) {
  const auto a = gen_scenes(20, 5);
  const auto b = gen_scenes(20, 5);
  ASSERT_EQ(a.size(), 20u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(a[i].image, b[i].image);
    EXPECT_EQ(a[i].objects, b[i].objects);
  }
  EXPECT_NE(gen_scenes(20, 6)[0].objects, a[0].objects);
}

TEST(Scenes, Constraints) {
  for (const auto& s : gen_scenes(200, 3)) {
    ASSERT_GE(s.objects.size(), 1u);
    ASSERT_LE(s.objects.size(), 4u);
    std::set<std::string> labels;
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      const auto& o = s.objects[i];
      EXPECT_NO_THROW(validate_box(o.box, s.image.width, s.image.height));
      EXPECT_EQ(o.confidence, 1.0);
      EXPECT_TRUE(labels.insert(o.label).second);
      for (std::size_t j = i + 1; j < s.objects.size(); ++j) EXPECT_FALSE(o.box.intersects(s.objects[j].box));
    }
  }
}

TEST(Scenes, EveryLabelCoveredForSeedSeven) {
  std::set<std::string> seen;
  for (const auto& s : gen_scenes(100, 7)) {
    for (const auto& o : s.objects) seen.insert(o.label);
  }
  EXPECT_EQ(seen.size(), default_vocabulary().size());
}

TEST(Scenes, PixelsMatchGroundTruth) {
  const auto& vocab = default_vocabulary();
  for (const auto& s : gen_scenes(10, 1)) {
    for (const auto& o : s.objects) {
      const auto it = std::find_if(vocab.begin(), vocab.end(), [&](const auto& e) { return e.label == o.label; });
      ASSERT_NE(it, vocab.end());
      EXPECT_EQ(s.image.at(o.box.x0, o.box.y0), it->color);
      EXPECT_EQ(s.image.at(o.box.x1 - 1, o.box.y1 - 1), it->color);
    }
  }
  EXPECT_THROW(gen_scenes(0, 1), Error);
}

TEST(Caption, OraclePolicies) {
  const auto scenes = gen_scenes(30, 2);
  std::vector<CaptionRecord> oracle;
  for (const auto& s : scenes) {
    const auto c = caption(visibility_projection(), s);
    EXPECT_EQ(c.mentions.size(), s.objects.size());
    for (const auto& m : c.mentions) EXPECT_TRUE(s.has(m));
    EXPECT_TRUE(caption(ToyPolicy::linear(), s).mentions.empty());
    EXPECT_EQ(caption(visibility_projection(0.0, 5.0), s).mentions.size(), default_vocabulary().size());
    oracle.push_back(c);
  }
  const auto m = chair_metrics(oracle, scenes);
  EXPECT_EQ(m.chair_i, 0.0);
  EXPECT_EQ(m.chair_s, 0.0);
  EXPECT_EQ(m.coverage, 1.0);
}

TEST(Chair, HandCountedExample) {
  Scene s;
  s.id = "s";
  s.objects = {{"dog", {0, 0, 1, 1}, 1.0}, {"cat", {1, 1, 2, 2}, 1.0}, {"cup", {2, 2, 3, 3}, 1.0}};
  const std::vector<Scene> scenes{s};
  const std::vector<CaptionRecord> caps{{"s", {"dog", "cat", "cup", "bus", "boat"}}};
  const auto m = chair_metrics(caps, scenes);
  EXPECT_DOUBLE_EQ(m.chair_i, 0.4);
  EXPECT_DOUBLE_EQ(m.chair_s, 1.0);
  EXPECT_DOUBLE_EQ(m.coverage, 1.0);
}

TEST(Chair, EmptyAndUnknown) {
  const auto m = chair_metrics({}, {});
  EXPECT_EQ(m.chair_i, 0.0);
  EXPECT_EQ(m.chair_s, 0.0);
  EXPECT_EQ(m.coverage, 0.0);
  const std::vector<CaptionRecord> caps{{"nope", {"dog"}}};
  try {
    chair_metrics(caps, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownScene);
  }
}

TEST(Chair, BoundsOnRandomPolicies) {
  const auto scenes = gen_scenes(25, 4);
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    auto p = ToyPolicy::linear();
    p.init_uniform(rng, 2.0);
    std::vector<CaptionRecord> caps;
    for (const auto& s : scenes) caps.push_back(caption(p, s));
    const auto m = chair_metrics(caps, scenes);
    for (double v : {m.chair_i, m.chair_s, m.coverage}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(SceneSamples, ChosenPresentRejectedAbsent) {
  const auto scenes = gen_scenes(30, 9);
  const auto samples = scene_samples(scenes, 9);
  ASSERT_EQ(samples.size(), scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& s = samples[i];
    bool chosen_present = false;
    bool rejected_present = false;
    for (const auto& o : scenes[i].objects) {
      chosen_present |= s.chosen == "There is a " + o.label + " in the image.";
      rejected_present |= s.rejected == "There is a " + o.label + " in the image.";
    }
    EXPECT_TRUE(chosen_present);
    EXPECT_FALSE(rejected_present);
  }
}

TEST(SceneRecords, MasksTheMentionedObject) {
  const auto scenes = gen_scenes(15, 10);
  const auto samples = scene_samples(scenes, 10);
  BuildOptions opt;
  opt.plan.list_size = 4;
  const auto built = scene_records(scenes, samples, opt, 10, 4);
  ASSERT_EQ(built.records.size(), 15u);
  EXPECT_EQ(built.skipped, 0u);
  for (std::size_t i = 0; i < built.records.size(); ++i) {
    const auto& r = built.records[i];
    EXPECT_TRUE(r.verified);
    EXPECT_EQ(r.retries, 0);
    EXPECT_EQ(samples[i].chosen, "There is a " + r.selected[0].label + " in the image.");
    EXPECT_EQ(r.ranked.images.size(), 4u);
  }
}

TEST(Bench, DegenerateListIsPairwiseImagePreference) {
  BenchConfig cfg;
  cfg.scenes = 20;
  cfg.trainer.epochs = 2;
  const auto row = run_cell(cfg, 1, 2, ObjectiveTerms::full());
  EXPECT_EQ(row.list_size, 2);
  // At L = 2 the listwise term is the DPO loss between x_1 and x_2.
  const auto scenes = gen_scenes(5, 1);
  const auto built = scene_records(scenes, scene_samples(scenes, 1), [] {
    BuildOptions o;
    o.plan.list_size = 2;
    return o;
  }(), 1);
  auto p = ToyPolicy::linear();
  Rng rng(3);
  p.init_uniform(rng, 1.0);
  const auto ref = ToyPolicy::linear();
  for (const auto& ex : make_examples(built.records)) {
    const auto s = list_scores(p, ref, ex, 0.1);
    ASSERT_EQ(s.size(), 2u);
    const auto lb = batch_loss(p, ref, std::span(&ex, 1), {0.1, 0.0, 2}, {false, false, true});
    EXPECT_EQ(lb.listwise, dpo_loss(s[0], s[1]).value);
  }
}

TEST(Bench, AblationRowsDeterministic) {
  BenchConfig cfg;
  cfg.scenes = 30;
  cfg.trainer.epochs = 3;
  const std::vector<int> sizes{3, 4};
  const std::vector<std::uint64_t> seeds{1, 2};
  const auto a = run_ablation(cfg, sizes, seeds, 1);
  const auto b = run_ablation(cfg, sizes, seeds, 4);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(ablation_csv(a), ablation_csv(b));
  EXPECT_EQ(a[0].list_size, 3);
  EXPECT_EQ(a[1].seed, 2u);
  EXPECT_EQ(a[2].list_size, 4);
  EXPECT_EQ(ablation_csv(a).substr(0, ablation_csv(a).find('\n')),
            "list_size,seed,chair_i,chair_s,coverage,ordering_accuracy,final_total_loss");
  EXPECT_THROW(run_ablation(cfg, sizes, {}, 1), Error);
}

TEST(Bench, CompareObjectivesRows) {
  BenchConfig cfg;
  cfg.scenes = 30;
  cfg.trainer.epochs = 3;
  const std::vector<std::uint64_t> seeds{5};
  const auto rows = compare_objectives(cfg, seeds, 2);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].objective, "lpoi");
  EXPECT_EQ(rows[1].objective, "dpo");
}
