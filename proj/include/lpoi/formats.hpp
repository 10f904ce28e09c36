// File formats: input manifest, detections and verdicts (JSON Lines), and the
// on-disk listwise dataset (PNG images plus a JSON Lines manifest).
//
// The validate_* functions are the schema checker shared with the external
// model adapter: a file it emits must come back with no errors and no
// warnings.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lpoi/core.hpp"
#include "lpoi/listgen.hpp"
#include "lpoi/png_io.hpp"
#include "lpoi/rng.hpp"

namespace lpoi {

using json = nlohmann::json;

inline constexpr std::string_view kDatasetSchema = "lpoi-dataset-v1";
inline constexpr std::string_view kAdapterHeaderTag = "#lpoi-adapter";

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool clean() const { return errors.empty() && warnings.empty(); }
  void error(std::size_t line, const std::string& msg) { errors.push_back("line " + std::to_string(line) + ": " + msg); }
  void warn(std::size_t line, const std::string& msg) { warnings.push_back("line " + std::to_string(line) + ": " + msg); }
};

struct AdapterHeader {
  std::string model;
  double threshold = 0.0;
};

namespace detail {

struct JsonLine {
  std::size_t line = 0;
  json value;
};

struct JsonLinesFile {
  std::vector<JsonLine> records;
  std::vector<std::pair<std::size_t, std::string>> comments;
};

inline JsonLinesFile read_json_lines(const std::filesystem::path& path, ValidationReport& report) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  JsonLinesFile file;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    if (text.front() == '#') {
      file.comments.emplace_back(line, text);
      continue;
    }
    try {
      file.records.push_back({line, json::parse(text)});
    } catch (const json::parse_error& e) {
      report.error(line, std::string("malformed JSON: ") + e.what());
    }
  }
  return file;
}

inline void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::size_t line,
                       ValidationReport& report, std::string_view where) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) report.warn(line, "unknown key '" + key + "' in " + std::string(where));
  }
}

inline std::optional<std::string> get_string(const json& obj, const char* key, std::size_t line,
                                             ValidationReport& report, bool required = true) {
  if (!obj.contains(key)) {
    if (required) report.error(line, std::string("missing key '") + key + "'");
    return std::nullopt;
  }
  if (!obj[key].is_string()) {
    report.error(line, std::string("key '") + key + "' must be a string");
    return std::nullopt;
  }
  return obj[key].get<std::string>();
}

inline std::optional<BoundingBox> parse_box(const json& value, std::size_t line, ValidationReport& report) {
  if (!value.is_array() || value.size() != 4) {
    report.error(line, "box must be an array [x0, y0, x1, y1]");
    return std::nullopt;
  }
  int c[4];
  for (std::size_t i = 0; i < 4; ++i) {
    if (!value[i].is_number_integer()) {
      report.error(line, "box coordinates must be integers");
      return std::nullopt;
    }
    c[i] = value[i].get<int>();
  }
  BoundingBox box{c[0], c[1], c[2], c[3]};
  if (box.x0 < 0 || box.y0 < 0 || box.x0 >= box.x1 || box.y0 >= box.y1) {
    report.error(line, "box " + to_string(box) + " is empty or negative");
    return std::nullopt;
  }
  return box;
}

inline std::optional<AdapterHeader> parse_adapter_header(std::string_view text) {
  if (text.substr(0, kAdapterHeaderTag.size()) != kAdapterHeaderTag) return std::nullopt;
  std::istringstream fields{std::string(text.substr(kAdapterHeaderTag.size()))};
  AdapterHeader header;
  bool have_model = false;
  bool have_threshold = false;
  std::string field;
  while (fields >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) return std::nullopt;
    const auto key = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    if (key == "model" && !value.empty()) {
      header.model = value;
      have_model = true;
    } else if (key == "threshold") {
      try {
        std::size_t used = 0;
        header.threshold = std::stod(value, &used);
        if (used != value.size()) return std::nullopt;
      } catch (const std::exception&) {
        return std::nullopt;
      }
      have_threshold = true;
    } else {
      return std::nullopt;
    }
  }
  if (!have_model || !have_threshold) return std::nullopt;
  if (!(header.threshold > 0.0 && header.threshold < 1.0)) return std::nullopt;
  return header;
}

inline std::optional<AdapterHeader> check_comments(const JsonLinesFile& file, ValidationReport& report) {
  std::optional<AdapterHeader> header;
  for (const auto& [line, text] : file.comments) {
    auto parsed = parse_adapter_header(text);
    if (!parsed) {
      report.warn(line, "unrecognised comment line (expected '#lpoi-adapter model=<id> threshold=<t>')");
    } else if (header) {
      report.warn(line, "repeated adapter header");
    } else if (line != 1) {
      report.warn(line, "adapter header must be the first line");
      header = parsed;
    } else {
      header = parsed;
    }
  }
  return header;
}

inline void throw_if_errors(const ValidationReport& report, const std::filesystem::path& path) {
  if (report.errors.empty()) return;
  throw Error(ErrorKind::FormatError, path.string() + ": " + report.errors.front() +
                                          (report.errors.size() > 1
                                               ? " (+" + std::to_string(report.errors.size() - 1) + " more)"
                                               : std::string()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Input manifest: {"id", "image", "question", "chosen", "rejected"}

struct ManifestFile {
  std::vector<PreferenceSample> samples;
  ValidationReport report;
};

inline ManifestFile parse_input_manifest(const std::filesystem::path& path) {
  ManifestFile out;
  auto file = detail::read_json_lines(path, out.report);
  detail::check_comments(file, out.report);
  std::set<std::string> seen;
  for (const auto& [line, obj] : file.records) {
    if (!obj.is_object()) {
      out.report.error(line, "record must be a JSON object");
      continue;
    }
    detail::check_keys(obj, {"id", "image", "question", "chosen", "rejected"}, line, out.report, "manifest record");
    auto id = detail::get_string(obj, "id", line, out.report);
    auto image = detail::get_string(obj, "image", line, out.report);
    auto question = detail::get_string(obj, "question", line, out.report);
    auto chosen = detail::get_string(obj, "chosen", line, out.report);
    auto rejected = detail::get_string(obj, "rejected", line, out.report);
    if (!id || !image || !question || !chosen || !rejected) continue;
    if (!seen.insert(*id).second) {
      out.report.error(line, "duplicate id '" + *id + "'");
      continue;
    }
    out.samples.push_back({*id, *image, *question, *chosen, *rejected});
  }
  return out;
}

inline std::vector<PreferenceSample> read_input_manifest(const std::filesystem::path& path) {
  auto parsed = parse_input_manifest(path);
  detail::throw_if_errors(parsed.report, path);
  return std::move(parsed.samples);
}

inline void write_input_manifest(const std::filesystem::path& path, std::span<const PreferenceSample> samples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& s : samples) {
    json j;
    j["id"] = s.id;
    j["image"] = s.image_path;
    j["question"] = s.question;
    j["chosen"] = s.chosen;
    j["rejected"] = s.rejected;
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Detections: {"id", "objects": [{"label", "box": [x0,y0,x1,y1], "confidence"}]}

struct DetectionsFile {
  DetectionTable table;
  std::vector<std::string> order;
  std::optional<AdapterHeader> header;
  ValidationReport report;
};

inline DetectionsFile parse_detections(const std::filesystem::path& path) {
  DetectionsFile out;
  auto file = detail::read_json_lines(path, out.report);
  out.header = detail::check_comments(file, out.report);
  for (const auto& [line, obj] : file.records) {
    if (!obj.is_object()) {
      out.report.error(line, "record must be a JSON object");
      continue;
    }
    detail::check_keys(obj, {"id", "objects", "warning"}, line, out.report, "detections record");
    auto id = detail::get_string(obj, "id", line, out.report);
    if (!id) continue;
    if (obj.contains("warning") && !obj["warning"].is_string()) out.report.error(line, "'warning' must be a string");
    if (!obj.contains("objects") || !obj["objects"].is_array()) {
      out.report.error(line, "missing array 'objects'");
      continue;
    }
    std::vector<DetectedObject> objects;
    for (const auto& o : obj["objects"]) {
      if (!o.is_object()) {
        out.report.error(line, "object entry must be a JSON object");
        continue;
      }
      detail::check_keys(o, {"label", "box", "confidence"}, line, out.report, "object");
      auto label = detail::get_string(o, "label", line, out.report);
      std::optional<BoundingBox> box;
      if (o.contains("box")) {
        box = detail::parse_box(o["box"], line, out.report);
      } else {
        out.report.error(line, "missing key 'box'");
      }
      double confidence = 1.0;
      if (!o.contains("confidence") || !o["confidence"].is_number()) {
        out.report.error(line, "missing numeric 'confidence'");
        continue;
      }
      confidence = o["confidence"].get<double>();
      if (!(confidence >= 0.0 && confidence <= 1.0)) {
        out.report.error(line, "confidence " + std::to_string(confidence) + " outside [0, 1]");
        continue;
      }
      if (!label || !box) continue;
      if (label->empty()) {
        out.report.error(line, "empty label");
        continue;
      }
      if (detail::ascii_lower(*label) != *label) out.report.warn(line, "label '" + *label + "' is not lowercase");
      objects.push_back({detail::ascii_lower(*label), *box, confidence});
    }
    if (out.table.contains(*id)) {
      out.report.error(line, "duplicate id '" + *id + "'");
      continue;
    }
    out.order.push_back(*id);
    out.table.emplace(*id, std::move(objects));
  }
  return out;
}

inline DetectionTable read_detections(const std::filesystem::path& path) {
  auto parsed = parse_detections(path);
  detail::throw_if_errors(parsed.report, path);
  return std::move(parsed.table);
}

inline void write_detections(const std::filesystem::path& path, std::span<const std::string> ids,
                             const DetectionTable& table) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& id : ids) {
    json j;
    j["id"] = id;
    j["objects"] = json::array();
    if (auto it = table.find(id); it != table.end()) {
      for (const auto& d : it->second) {
        j["objects"].push_back({{"label", d.label}, {"box", {d.box.x0, d.box.y0, d.box.x1, d.box.y1}},
                                {"confidence", d.confidence}});
      }
    }
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Verdicts: {"id", "retry": int, "verdict": "hallucinating"|"still-valid"}

struct VerdictsFile {
  std::vector<VerdictEntry> entries;
  std::optional<AdapterHeader> header;
  ValidationReport report;
};

inline VerdictsFile parse_verdicts(const std::filesystem::path& path) {
  VerdictsFile out;
  auto file = detail::read_json_lines(path, out.report);
  out.header = detail::check_comments(file, out.report);
  std::set<std::pair<std::string, int>> seen;
  for (const auto& [line, obj] : file.records) {
    if (!obj.is_object()) {
      out.report.error(line, "record must be a JSON object");
      continue;
    }
    detail::check_keys(obj, {"id", "retry", "verdict", "rationale", "warning"}, line, out.report, "verdict record");
    auto id = detail::get_string(obj, "id", line, out.report);
    auto verdict_text = detail::get_string(obj, "verdict", line, out.report);
    auto rationale = detail::get_string(obj, "rationale", line, out.report, false);
    if (obj.contains("warning") && !obj["warning"].is_string()) out.report.error(line, "'warning' must be a string");
    if (!obj.contains("retry") || !obj["retry"].is_number_integer()) {
      out.report.error(line, "missing integer 'retry'");
      continue;
    }
    const int retry = obj["retry"].get<int>();
    if (retry < 0 || retry >= static_cast<int>(kMaxMaskBoxes)) {
      out.report.error(line, "retry " + std::to_string(retry) + " outside [0, 3]");
      continue;
    }
    if (!id || !verdict_text) continue;
    const auto verdict = parse_verdict(*verdict_text);
    if (!verdict) {
      out.report.error(line, "verdict must be 'hallucinating' or 'still-valid'");
      continue;
    }
    if (!seen.emplace(*id, retry).second) {
      out.report.error(line, "duplicate verdict for id '" + *id + "' retry " + std::to_string(retry));
      continue;
    }
    out.entries.push_back({*id, retry, *verdict, rationale});
  }
  return out;
}

inline std::vector<VerdictEntry> read_verdicts(const std::filesystem::path& path) {
  auto parsed = parse_verdicts(path);
  detail::throw_if_errors(parsed.report, path);
  return std::move(parsed.entries);
}

inline FixtureVerifier load_fixture_verifier(const std::filesystem::path& path) {
  return FixtureVerifier(read_verdicts(path));
}

inline AdapterVerifier load_adapter_verifier(const std::filesystem::path& path) {
  auto parsed = parse_verdicts(path);
  detail::throw_if_errors(parsed.report, path);
  if (!parsed.header) {
    throw Error(ErrorKind::FormatError, path.string() + ": adapter verdicts need a '#lpoi-adapter' header line");
  }
  return AdapterVerifier(std::move(parsed.entries), parsed.header->model, parsed.header->threshold);
}

/// Schema check for adapter-produced (or hand-written) files. When `manifest`
/// is given, ids must refer to manifest samples.
inline ValidationReport validate_detections_file(const std::filesystem::path& path,
                                                 const std::vector<PreferenceSample>* manifest = nullptr) {
  auto parsed = parse_detections(path);
  if (manifest) {
    std::set<std::string> ids;
    for (const auto& s : *manifest) ids.insert(s.id);
    for (const auto& id : parsed.order) {
      if (!ids.contains(id)) parsed.report.warnings.push_back("id '" + id + "' not present in manifest");
    }
  }
  return parsed.report;
}

inline ValidationReport validate_verdicts_file(const std::filesystem::path& path) {
  return parse_verdicts(path).report;
}

inline ValidationReport validate_input_manifest(const std::filesystem::path& path) {
  return parse_input_manifest(path).report;
}

// ---------------------------------------------------------------------------
// Listwise dataset directory
//
//   manifest.jsonl   first line {"schema": "lpoi-dataset-v1", "records": N},
//                    then one record per sample
//   {id}_k{k}.png    list images, k = 1..L

inline constexpr std::string_view kDatasetManifestName = "manifest.jsonl";

inline std::string list_image_name(std::string_view id, int k) {
  return std::string(id) + "_k" + std::to_string(k) + ".png";
}

namespace detail {

inline json box_json(const BoundingBox& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

inline json record_json(const ListRecord& r, const std::vector<std::string>& images,
                        const std::vector<std::string>& checksums) {
  const auto& plan = r.ranked.plan;
  json j;
  j["id"] = r.sample_id;
  j["L"] = plan.list_size;
  j["fractions"] = r.ranked.fractions;
  j["boxes"] = json::array();
  for (const auto& b : plan.boxes) j["boxes"].push_back(box_json(b));
  j["objects"] = json::array();
  for (const auto& o : r.selected) {
    j["objects"].push_back({{"label", o.label}, {"box", box_json(o.box)}, {"confidence", o.confidence}});
  }
  j["retries"] = r.retries;
  j["verified"] = r.verified;
  j["images"] = images;
  j["checksums"] = checksums;
  j["width"] = r.ranked.images.empty() ? 0 : r.ranked.images.front().width;
  j["height"] = r.ranked.images.empty() ? 0 : r.ranked.images.front().height;
  j["sweep"] = std::string(to_string(plan.sweep));
  j["prompt"] = std::string(to_string(plan.prompt));
  j["fill"] = json::array({plan.fill.r, plan.fill.g, plan.fill.b});
  j["stroke_width"] = plan.stroke_width;
  j["question"] = r.question;
  j["chosen"] = r.chosen;
  j["rejected"] = r.rejected;
  return j;
}

template <typename T>
T require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw Error(ErrorKind::FormatError, where + ": missing key '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::FormatError, where + ": bad value for '" + key + "': " + e.what());
  }
}

inline BoundingBox require_box(const json& value, const std::string& where) {
  ValidationReport report;
  auto box = parse_box(value, 0, report);
  if (!box) throw Error(ErrorKind::FormatError, where + ": " + report.errors.front());
  return *box;
}

}  // namespace detail

/// Writes images and manifest; returns the manifest path. The directory is
/// created if needed; existing files with the same names are overwritten.
inline std::filesystem::path write_dataset(std::span<const ListRecord> records, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
  std::set<std::string> ids;
  std::vector<json> lines;
  for (const auto& r : records) {
    if (!is_valid_sample_id(r.sample_id)) throw Error(ErrorKind::InvalidArgument, "bad sample id '" + r.sample_id + "'");
    if (!ids.insert(r.sample_id).second) {
      throw Error(ErrorKind::InvalidArgument, "duplicate sample id '" + r.sample_id + "'");
    }
    std::vector<std::string> names;
    std::vector<std::string> checksums;
    for (std::size_t k = 0; k < r.ranked.images.size(); ++k) {
      const auto name = list_image_name(r.sample_id, static_cast<int>(k) + 1);
      const auto bytes = encode_png(r.ranked.images[k]);
      write_file_bytes(out_dir / name, bytes);
      names.push_back(name);
      checksums.push_back(hex64(fnv1a64(std::span<const std::uint8_t>(bytes))));
    }
    lines.push_back(detail::record_json(r, names, checksums));
  }
  const auto manifest = out_dir / kDatasetManifestName;
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + manifest.string());
  out << json{{"schema", kDatasetSchema}, {"records", records.size()}}.dump() << '\n';
  for (const auto& line : lines) out << line.dump() << '\n';
  if (!out) throw Error(ErrorKind::IoError, "short write to " + manifest.string());
  return manifest;
}

inline std::vector<ListRecord> read_dataset(const std::filesystem::path& dir) {
  const auto manifest = dir / kDatasetManifestName;
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + manifest.string());
  std::string text;
  if (!std::getline(in, text)) throw Error(ErrorKind::FormatError, manifest.string() + ": empty manifest");
  json header;
  try {
    header = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::FormatError, manifest.string() + ": malformed header: " + e.what());
  }
  const auto schema = detail::require<std::string>(header, "schema", manifest.string());
  if (schema != kDatasetSchema) {
    throw Error(ErrorKind::FormatError, "unsupported dataset schema '" + schema + "' (expected '" +
                                            std::string(kDatasetSchema) + "')");
  }
  const auto expected = detail::require<std::size_t>(header, "records", manifest.string());

  std::vector<ListRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::FormatError, where + ": " + e.what());
    }
    ListRecord r;
    r.sample_id = detail::require<std::string>(j, "id", where);
    r.question = detail::require<std::string>(j, "question", where);
    r.chosen = detail::require<std::string>(j, "chosen", where);
    r.rejected = detail::require<std::string>(j, "rejected", where);
    r.retries = detail::require<int>(j, "retries", where);
    r.verified = detail::require<bool>(j, "verified", where);
    auto& plan = r.ranked.plan;
    plan.list_size = detail::require<int>(j, "L", where);
    try {
      plan.sweep = parse_sweep(detail::require<std::string>(j, "sweep", where));
      plan.prompt = parse_prompt(detail::require<std::string>(j, "prompt", where));
    } catch (const Error& e) {
      throw Error(ErrorKind::FormatError, where + ": " + e.what());
    }
    const auto fill = detail::require<std::vector<int>>(j, "fill", where);
    if (fill.size() != 3) throw Error(ErrorKind::FormatError, where + ": fill must have 3 channels");
    for (int c : fill) {
      if (c < 0 || c > 255) throw Error(ErrorKind::FormatError, where + ": fill channel out of range");
    }
    plan.fill = {static_cast<std::uint8_t>(fill[0]), static_cast<std::uint8_t>(fill[1]),
                 static_cast<std::uint8_t>(fill[2])};
    plan.stroke_width = detail::require<int>(j, "stroke_width", where);
    for (const auto& b : detail::require<json>(j, "boxes", where)) plan.boxes.push_back(detail::require_box(b, where));
    for (const auto& o : detail::require<json>(j, "objects", where)) {
      r.selected.push_back({detail::require<std::string>(o, "label", where), detail::require_box(o.at("box"), where),
                            detail::require<double>(o, "confidence", where)});
    }
    r.ranked.sample_id = r.sample_id;
    r.ranked.fractions = detail::require<std::vector<double>>(j, "fractions", where);
    const auto names = detail::require<std::vector<std::string>>(j, "images", where);
    const auto checksums = detail::require<std::vector<std::string>>(j, "checksums", where);
    const auto width = detail::require<int>(j, "width", where);
    const auto height = detail::require<int>(j, "height", where);

    try {
      validate_list_size(plan.list_size);
    } catch (const Error& e) {
      throw Error(ErrorKind::FormatError, where + ": " + e.what());
    }
    if (names.size() != static_cast<std::size_t>(plan.list_size) || checksums.size() != names.size() ||
        r.ranked.fractions.size() != names.size()) {
      throw Error(ErrorKind::FormatError, where + ": images/checksums/fractions must each have L entries");
    }
    for (int k = 1; k <= plan.list_size; ++k) {
      if (r.ranked.fractions[static_cast<std::size_t>(k - 1)] != mask_fraction(k, plan.list_size)) {
        throw Error(ErrorKind::FormatError, where + ": fraction " + std::to_string(k) + " is not (k-1)/(L-1)");
      }
    }
    if (r.retries < 0 || r.retries > static_cast<int>(kMaxMaskBoxes) ||
        r.selected.size() != static_cast<std::size_t>(r.retries) + 1 || plan.boxes.size() != r.selected.size()) {
      throw Error(ErrorKind::FormatError, where + ": retries, objects and boxes disagree");
    }
    for (std::size_t i = 0; i < plan.boxes.size(); ++i) {
      if (plan.boxes[i] != r.selected[i].box) throw Error(ErrorKind::FormatError, where + ": box/object mismatch");
    }
    for (std::size_t k = 0; k < names.size(); ++k) {
      const auto& name = names[k];
      if (name.find('/') != std::string::npos || name.find('\\') != std::string::npos || name == "..") {
        throw Error(ErrorKind::FormatError, where + ": image path must be a plain file name");
      }
      const auto bytes = read_file_bytes(dir / name);
      if (hex64(fnv1a64(std::span<const std::uint8_t>(bytes))) != checksums[k]) {
        throw Error(ErrorKind::FormatError, where + ": checksum mismatch for " + name);
      }
      auto image = decode_png(bytes, (dir / name).string());
      if (image.width != width || image.height != height) {
        throw Error(ErrorKind::FormatError, where + ": " + name + " has unexpected dimensions");
      }
      r.ranked.images.push_back(std::move(image));
    }
    records.push_back(std::move(r));
  }
  if (records.size() != expected) {
    throw Error(ErrorKind::FormatError, manifest.string() + ": header announces " + std::to_string(expected) +
                                            " records, found " + std::to_string(records.size()));
  }
  return records;
}

inline void write_warnings(const std::filesystem::path& path, std::span<const BuildWarning> warnings) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& w : warnings) {
    out << json{{"id", w.sample_id}, {"kind", w.kind}, {"message", w.message}, {"skipped", w.skipped}}.dump() << '\n';
  }
}

}  // namespace lpoi
