#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "lpoi/formats.hpp"
#include "oracles.hpp"

using namespace lpoi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("lpoi_formats_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<ListRecord> synthetic_records(int n) {
  std::vector<ListRecord> out;
  Rng rng(12);
  for (int i = 0; i < n; ++i) {
    const int w = 24 + static_cast<int>(rng.uniform_index(20));
    const int h = 20 + static_cast<int>(rng.uniform_index(20));
    const auto img = oracle::gradient_image(w, h);
    ListRecord r;
    r.sample_id = "rec-" + std::to_string(i);
    r.question = "What is here?";
    r.chosen = "A cup \"quoted\" and a plate.";
    r.rejected = "A bird.";
    const int boxes = 1 + i % 3;
    MaskPlan plan;
    plan.list_size = 2 + i % 4;
    plan.sweep = static_cast<SweepDirection>(i % 3);
    plan.prompt = i % 2 ? PromptStyle::None : PromptStyle::RedCircle;
    plan.fill = {static_cast<std::uint8_t>(i), 0, 0};
    plan.stroke_width = 1 + i % 3;
    for (int b = 0; b < boxes; ++b) {
      const BoundingBox box{b * 4, b * 3, b * 4 + 6, b * 3 + 5};
      plan.boxes.push_back(box);
      r.selected.push_back({"obj" + std::to_string(b), box, 0.5 + 0.1 * b});
    }
    r.ranked = build_ranked_list(img, plan, r.sample_id);
    r.retries = boxes - 1;
    r.verified = i % 4 != 0;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

TEST(Png, RoundTrip) {
  const auto img = oracle::gradient_image(33, 17);
  EXPECT_EQ(decode_png(encode_png(img)), img);
  EXPECT_EQ(encode_png(img), encode_png(img));
  EXPECT_THROW(decode_png({1, 2, 3}), Error);
}

TEST(Dataset, EmptyRoundTrip) {
  const auto dir = scratch("empty");
  const auto manifest = write_dataset({}, dir);
  EXPECT_EQ(read_text(manifest), "{\"records\":0,\"schema\":\"lpoi-dataset-v1\"}\n");
  EXPECT_TRUE(read_dataset(dir).empty());
}

TEST(Dataset, TenRecordsRoundTripByteIdentical) {
  const auto records = synthetic_records(10);
  const auto a = scratch("rt_a");
  const auto b = scratch("rt_b");
  write_dataset(records, a);
  const auto back = read_dataset(a);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) EXPECT_EQ(back[i], records[i]) << records[i].sample_id;
  write_dataset(back, b);
  for (const auto& entry : fs::directory_iterator(a)) {
    EXPECT_EQ(read_text(entry.path()), read_text(b / entry.path().filename())) << entry.path();
  }
}

TEST(Dataset, SchemaGate) {
  const auto dir = scratch("schema");
  write_dataset(synthetic_records(1), dir);
  auto text = read_text(dir / "manifest.jsonl");
  text.replace(text.find("lpoi-dataset-v1"), 15, "lpoi-dataset-v9");
  write_text(dir / "manifest.jsonl", text);
  try {
    read_dataset(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::FormatError);
  }
}

TEST(Dataset, ChecksumGate) {
  const auto dir = scratch("checksum");
  write_dataset(synthetic_records(1), dir);
  write_png(dir / "rec-0_k1.png", oracle::gradient_image(3, 3));
  try {
    read_dataset(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::FormatError);
  }
}

TEST(Dataset, MissingManifestIsIoError) {
  const auto dir = scratch("missing");
  try {
    read_dataset(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IoError);
  }
}

TEST(InputFiles, ManifestRoundTrip) {
  const auto dir = scratch("manifest");
  const std::vector<PreferenceSample> samples{{"a", "a.png", "q?", "w.", "l."}, {"b", "img/b.png", "Q", "W", "L"}};
  write_input_manifest(dir / "m.jsonl", samples);
  EXPECT_EQ(read_input_manifest(dir / "m.jsonl"), samples);
  EXPECT_TRUE(validate_input_manifest(dir / "m.jsonl").clean());
  write_text(dir / "bad.jsonl", "{\"id\":\"a\",\"image\":\"x\"}\nnot json\n");
  const auto report = validate_input_manifest(dir / "bad.jsonl");
  EXPECT_GE(report.errors.size(), 2u);
  EXPECT_THROW(read_input_manifest(dir / "bad.jsonl"), Error);
}

TEST(InputFiles, DetectionsRoundTripAndValidation) {
  const auto dir = scratch("dets");
  DetectionTable table{{"a", {{"dog", {1, 2, 3, 4}, 0.5}}}, {"b", {}}};
  const std::vector<std::string> ids{"a", "b"};
  write_detections(dir / "d.jsonl", ids, table);
  EXPECT_EQ(read_detections(dir / "d.jsonl"), table);
  EXPECT_TRUE(validate_detections_file(dir / "d.jsonl").clean());
  const std::vector<PreferenceSample> manifest{{"a", "a.png", "q", "w", "l"}};
  EXPECT_EQ(validate_detections_file(dir / "d.jsonl", &manifest).warnings.size(), 1u);

  write_text(dir / "bad.jsonl",
             "{\"id\":\"a\",\"objects\":[{\"label\":\"Dog\",\"box\":[5,5,1,1],\"confidence\":1.5}]}\n");
  EXPECT_FALSE(validate_detections_file(dir / "bad.jsonl").errors.empty());
  write_text(dir / "extra.jsonl", "{\"id\":\"a\",\"objects\":[],\"colour\":1}\n");
  EXPECT_FALSE(validate_detections_file(dir / "extra.jsonl").clean());
}

TEST(InputFiles, Verdicts) {
  const auto dir = scratch("verdicts");
  write_text(dir / "v.jsonl",
             "{\"id\":\"a\",\"retry\":0,\"verdict\":\"still-valid\",\"rationale\":\"the bus is visible\"}\n"
             "{\"id\":\"a\",\"retry\":1,\"verdict\":\"hallucinating\"}\n");
  EXPECT_TRUE(validate_verdicts_file(dir / "v.jsonl").clean());
  const auto entries = read_verdicts(dir / "v.jsonl");
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].verdict, Verdict::StillValid);
  EXPECT_EQ(entries[0].rationale, "the bus is visible");

  write_text(dir / "bad.jsonl", "{\"id\":\"a\",\"retry\":4,\"verdict\":\"maybe\"}\n");
  EXPECT_FALSE(validate_verdicts_file(dir / "bad.jsonl").errors.empty());
  EXPECT_THROW(load_adapter_verifier(dir / "v.jsonl"), Error);
}

TEST(InputFiles, AdapterHeader) {
  const auto dir = scratch("adapter");
  write_text(dir / "v.jsonl",
             "#lpoi-adapter model=idefics2-8b threshold=0.3\n"
             "{\"id\":\"a\",\"retry\":0,\"verdict\":\"hallucinating\"}\n");
  EXPECT_TRUE(validate_verdicts_file(dir / "v.jsonl").clean());
  auto v = load_adapter_verifier(dir / "v.jsonl");
  EXPECT_EQ(v.model(), "idefics2-8b");
  EXPECT_EQ(v.threshold(), 0.3);
  const Image img(2, 2);
  EXPECT_EQ(v.verify({"a", 0, &img, "q", "w"}).value, Verdict::Hallucinating);

  write_text(dir / "d.jsonl",
             "#lpoi-adapter model=grounding-dino-tiny threshold=0.3\n"
             "{\"id\":\"a\",\"objects\":[],\"warning\":\"image unreadable\"}\n");
  EXPECT_TRUE(validate_detections_file(dir / "d.jsonl").clean());

  write_text(dir / "late.jsonl",
             "{\"id\":\"a\",\"retry\":0,\"verdict\":\"hallucinating\"}\n"
             "#lpoi-adapter model=x threshold=0.3\n");
  EXPECT_FALSE(validate_verdicts_file(dir / "late.jsonl").clean());
  write_text(dir / "badthr.jsonl", "#lpoi-adapter model=x threshold=1.5\n");
  EXPECT_FALSE(validate_verdicts_file(dir / "badthr.jsonl").clean());
}
