// Listwise dataset construction: pick the critical object by textual priority,
// mask it across the list, verify the hard negative and retry with extra
// objects when the verifier says the chosen answer still holds.

#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lpoi/core.hpp"
#include "lpoi/masking.hpp"
#include "lpoi/rng.hpp"

namespace lpoi {

struct DetectedObject {
  std::string label;
  BoundingBox box;
  double confidence = 1.0;

  friend bool operator==(const DetectedObject&, const DetectedObject&) = default;
};

enum class Verdict { Hallucinating, StillValid };

inline std::string_view to_string(Verdict v) { return v == Verdict::Hallucinating ? "hallucinating" : "still-valid"; }

inline std::optional<Verdict> parse_verdict(std::string_view text) {
  if (text == "hallucinating") return Verdict::Hallucinating;
  if (text == "still-valid") return Verdict::StillValid;
  return std::nullopt;
}

struct VerificationVerdict {
  Verdict value = Verdict::Hallucinating;
  std::optional<std::string> rationale;
};

struct ListRecord {
  std::string sample_id;
  std::string question;
  std::string chosen;
  std::string rejected;
  RankedList ranked;
  std::vector<DetectedObject> selected;  // in masking order
  int retries = 0;
  bool verified = false;

  friend bool operator==(const ListRecord&, const ListRecord&) = default;
};

// ---------------------------------------------------------------------------
// Candidate extraction

namespace detail {

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

inline const std::vector<std::pair<std::string_view, std::string_view>>& irregular_plurals() {
  static const std::vector<std::pair<std::string_view, std::string_view>> table = {
      {"person", "people"}, {"man", "men"},     {"woman", "women"}, {"child", "children"},
      {"mouse", "mice"},    {"foot", "feet"},   {"tooth", "teeth"}, {"goose", "geese"},
      {"knife", "knives"},  {"leaf", "leaves"}, {"wolf", "wolves"}, {"shelf", "shelves"},
  };
  return table;
}

inline bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

}  // namespace detail

/// Surface forms accepted for a label word: itself, regular plurals and the
/// irregular singular/plural partner.
inline std::vector<std::string> word_forms(std::string_view word) {
  std::vector<std::string> forms{std::string(word)};
  const std::string w(word);
  forms.push_back(w + "s");
  forms.push_back(w + "es");
  if (w.size() > 1 && w.back() == 'y' && !detail::is_vowel(w[w.size() - 2])) {
    forms.push_back(w.substr(0, w.size() - 1) + "ies");
  }
  for (const auto& [singular, plural] : detail::irregular_plurals()) {
    if (w == singular) forms.emplace_back(plural);
    if (w == plural) forms.emplace_back(singular);
  }
  return forms;
}

namespace detail {

/// Index of the first word where `label` matches (earlier label words exact,
/// last word in any accepted form), or npos.
inline std::size_t find_label(const std::vector<std::string>& text, const std::vector<std::string>& label) {
  if (label.empty() || text.size() < label.size()) return std::string::npos;
  const auto forms = word_forms(label.back());
  for (std::size_t i = 0; i + label.size() <= text.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j + 1 < label.size() && ok; ++j) ok = text[i + j] == label[j];
    if (ok && std::find(forms.begin(), forms.end(), text[i + label.size() - 1]) != forms.end()) return i;
  }
  return std::string::npos;
}

inline std::vector<std::string> labels_in(std::string_view text, std::span<const std::string> vocabulary) {
  const auto tokens = words(text);
  struct Hit {
    std::size_t position;
    std::size_t length;
    std::string label;
  };
  std::vector<Hit> hits;
  for (const auto& label : vocabulary) {
    const auto label_words = words(label);
    const auto pos = find_label(tokens, label_words);
    if (pos != std::string::npos) hits.push_back({pos, label_words.size(), ascii_lower(label)});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.position != b.position) return a.position < b.position;
    if (a.length != b.length) return a.length > b.length;
    return a.label < b.label;
  });
  std::vector<std::string> out;
  for (auto& h : hits) out.push_back(std::move(h.label));
  return out;
}

}  // namespace detail

/// Splits `text` after its first '.', '!' or '?'.
inline std::pair<std::string_view, std::string_view> split_first_sentence(std::string_view text) {
  const auto end = text.find_first_of(".!?");
  if (end == std::string_view::npos) return {text, {}};
  return {text.substr(0, end + 1), text.substr(end + 1)};
}

/// Vocabulary labels in priority order: first sentence of the chosen answer,
/// then the question, then the rest of the chosen answer. Within one source,
/// labels are ordered by first occurrence.
inline std::vector<std::string> extract_candidate_phrases(std::string_view question, std::string_view chosen,
                                                          std::span<const std::string> vocabulary) {
  const auto [first, rest] = split_first_sentence(chosen);
  std::vector<std::string> ordered;
  for (std::string_view source : {first, question, rest}) {
    for (auto& label : detail::labels_in(source, vocabulary)) {
      if (std::find(ordered.begin(), ordered.end(), label) == ordered.end()) ordered.push_back(std::move(label));
    }
  }
  return ordered;
}

// ---------------------------------------------------------------------------
// Object selection

/// Index of the object to mask next, skipping `excluded` indices. Candidates
/// are tried in priority order; among detections of the same label the
/// highest confidence wins, then the largest area, then the earliest index.
/// Without any candidate match the pick is uniform over the remaining
/// detections. Returns nullopt when nothing is left.
inline std::optional<std::size_t> select_object_index(std::span<const std::string> candidates,
                                                      std::span<const DetectedObject> detections, Rng& rng,
                                                      std::span<const std::size_t> excluded = {}) {
  auto is_excluded = [&](std::size_t i) { return std::find(excluded.begin(), excluded.end(), i) != excluded.end(); };
  for (const auto& candidate : candidates) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < detections.size(); ++i) {
      if (is_excluded(i) || detail::ascii_lower(detections[i].label) != candidate) continue;
      if (!best) {
        best = i;
        continue;
      }
      const auto& a = detections[i];
      const auto& b = detections[*best];
      if (a.confidence > b.confidence || (a.confidence == b.confidence && a.box.area() > b.box.area())) best = i;
    }
    if (best) return best;
  }
  std::vector<std::size_t> remaining;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (!is_excluded(i)) remaining.push_back(i);
  }
  if (remaining.empty()) return std::nullopt;
  return remaining[rng.uniform_index(remaining.size())];
}

inline DetectedObject select_object(std::span<const std::string> candidates, std::span<const DetectedObject> detections,
                                    Rng& rng) {
  if (detections.empty()) throw Error(ErrorKind::NoDetections, "no detections to select from");
  return detections[*select_object_index(candidates, detections, rng)];
}

// ---------------------------------------------------------------------------
// Verification

struct VerifyRequest {
  std::string_view sample_id;
  int retry = 0;  // 0 for the first masking
  const Image* hard_negative = nullptr;
  std::string_view question;
  std::string_view chosen;
};

/// Decides whether the chosen answer has become a hallucination on the fully
/// masked image. Implementations that cannot take concurrent calls return
/// false from concurrent(); the dataset builder then serialises them.
class Verifier {
 public:
  virtual ~Verifier() = default;
  virtual VerificationVerdict verify(const VerifyRequest& request) = 0;
  virtual bool concurrent() const { return true; }
};

class AlwaysHallucinatingVerifier final : public Verifier {
 public:
  VerificationVerdict verify(const VerifyRequest&) override { return {Verdict::Hallucinating, std::nullopt}; }
};

struct VerdictEntry {
  std::string id;
  int retry = 0;
  Verdict verdict = Verdict::Hallucinating;
  std::optional<std::string> rationale;
};

/// Precomputed verdicts keyed by (sample id, retry). A missing key means the
/// verifier has no answer for that request.
class FixtureVerifier : public Verifier {
 public:
  explicit FixtureVerifier(std::vector<VerdictEntry> entries) {
    for (auto& e : entries) {
      auto key = std::make_pair(e.id, e.retry);
      if (!table_.emplace(std::move(key), VerificationVerdict{e.verdict, e.rationale}).second) {
        throw Error(ErrorKind::FormatError, "duplicate verdict for id '" + e.id + "' retry " + std::to_string(e.retry));
      }
    }
  }

  VerificationVerdict verify(const VerifyRequest& request) override {
    const auto it = table_.find(std::make_pair(std::string(request.sample_id), request.retry));
    if (it == table_.end()) {
      throw Error(ErrorKind::VerifierUnavailable, "no verdict for id '" + std::string(request.sample_id) +
                                                      "' retry " + std::to_string(request.retry));
    }
    return it->second;
  }

  std::size_t size() const { return table_.size(); }

 private:
  std::map<std::pair<std::string, int>, VerificationVerdict> table_;
};

/// Verdicts produced by the external model adapter. Same lookup as the
/// fixture, but the file must carry the adapter's provenance header.
class AdapterVerifier final : public FixtureVerifier {
 public:
  AdapterVerifier(std::vector<VerdictEntry> entries, std::string model, double threshold)
      : FixtureVerifier(std::move(entries)), model_(std::move(model)), threshold_(threshold) {}

  const std::string& model() const { return model_; }
  double threshold() const { return threshold_; }

 private:
  std::string model_;
  double threshold_;
};

inline VerificationVerdict verify_negative(Verifier& verifier, const VerifyRequest& request) {
  if (request.hard_negative == nullptr) throw Error(ErrorKind::InvalidArgument, "verification needs an image");
  return verifier.verify(request);
}

// ---------------------------------------------------------------------------
// Sample construction

enum class UnavailablePolicy { AcceptUnverified, Skip, Fail };

inline UnavailablePolicy parse_unavailable_policy(std::string_view text) {
  if (text == "accept") return UnavailablePolicy::AcceptUnverified;
  if (text == "skip") return UnavailablePolicy::Skip;
  if (text == "fail") return UnavailablePolicy::Fail;
  throw Error(ErrorKind::InvalidArgument, "unknown verifier-unavailable policy '" + std::string(text) + "'");
}

struct BuildOptions {
  MaskPlan plan;  // boxes are ignored; everything else is the template
  UnavailablePolicy on_unavailable = UnavailablePolicy::AcceptUnverified;
  int max_maskings = static_cast<int>(kMaxMaskBoxes);
};

/// Structured, auditable record of anything that did not go to plan.
struct BuildWarning {
  std::string sample_id;
  std::string kind;  // no-detections, invalid-sample, dropped-detection, verifier-unavailable, ...
  std::string message;
  bool skipped = false;

  friend bool operator==(const BuildWarning&, const BuildWarning&) = default;
};

struct BuildOutcome {
  std::optional<ListRecord> record;
  std::vector<BuildWarning> warnings;
};

inline BuildOutcome build_sample(const PreferenceSample& sample, const Image& image,
                                 std::span<const DetectedObject> detections, Verifier& verifier,
                                 const BuildOptions& options, Rng& rng) {
  BuildOutcome out;
  auto skip = [&](std::string kind, std::string message) {
    out.warnings.push_back({sample.id, std::move(kind), std::move(message), true});
    return out;
  };
  try {
    validate_sample(sample, image);
  } catch (const Error& e) {
    return skip("invalid-sample", e.what());
  }
  if (options.max_maskings < 1 || options.max_maskings > static_cast<int>(kMaxMaskBoxes)) {
    throw Error(ErrorKind::InvalidArgument, "max maskings must be in [1, 4]");
  }

  std::vector<DetectedObject> usable;
  for (const auto& d : detections) {
    try {
      validate_box(d.box, image.width, image.height);
      usable.push_back(d);
    } catch (const Error& e) {
      out.warnings.push_back({sample.id, "dropped-detection", "'" + d.label + "': " + e.what(), false});
    }
  }
  if (usable.empty()) return skip("no-detections", "no usable detections for sample");

  std::vector<std::string> vocabulary;
  for (const auto& d : usable) {
    auto label = detail::ascii_lower(d.label);
    if (std::find(vocabulary.begin(), vocabulary.end(), label) == vocabulary.end()) vocabulary.push_back(label);
  }
  const auto candidates = extract_candidate_phrases(sample.question, sample.chosen, vocabulary);

  std::vector<std::size_t> chosen_idx{*select_object_index(candidates, usable, rng)};
  ListRecord record;
  record.sample_id = sample.id;
  record.question = sample.question;
  record.chosen = sample.chosen;
  record.rejected = sample.rejected;

  MaskPlan plan = options.plan;
  for (;;) {
    plan.boxes.clear();
    for (auto i : chosen_idx) plan.boxes.push_back(usable[i].box);
    record.ranked = build_ranked_list(image, plan, sample.id);
    const int retry = static_cast<int>(chosen_idx.size()) - 1;

    std::optional<VerificationVerdict> verdict;
    try {
      verdict = verify_negative(verifier, {sample.id, retry, &record.ranked.images.back(), sample.question,
                                           sample.chosen});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::VerifierUnavailable || options.on_unavailable == UnavailablePolicy::Fail) throw;
      if (options.on_unavailable == UnavailablePolicy::Skip) return skip("verifier-unavailable", e.what());
      out.warnings.push_back({sample.id, "verifier-unavailable", e.what(), false});
      record.verified = false;
      break;
    }
    if (verdict->value == Verdict::Hallucinating) {
      record.verified = true;
      break;
    }
    if (static_cast<int>(chosen_idx.size()) >= options.max_maskings) {
      out.warnings.push_back({sample.id, "retries-exhausted",
                              "chosen answer still valid after " + std::to_string(chosen_idx.size()) + " maskings",
                              false});
      record.verified = false;
      break;
    }
    const auto next = select_object_index(candidates, usable, rng, chosen_idx);
    if (!next) {
      out.warnings.push_back({sample.id, "objects-exhausted",
                              "chosen answer still valid and no further objects to mask", false});
      record.verified = false;
      break;
    }
    chosen_idx.push_back(*next);
  }
  for (auto i : chosen_idx) record.selected.push_back(usable[i]);
  record.retries = static_cast<int>(chosen_idx.size()) - 1;
  out.record = std::move(record);
  return out;
}

// ---------------------------------------------------------------------------
// Batch construction

/// Forwards to a verifier under a mutex, for verifiers that declare
/// themselves serial.
class SerializedVerifier final : public Verifier {
 public:
  explicit SerializedVerifier(Verifier& inner) : inner_(inner) {}
  VerificationVerdict verify(const VerifyRequest& request) override {
    std::lock_guard lock(mutex_);
    return inner_.verify(request);
  }

 private:
  Verifier& inner_;
  std::mutex mutex_;
};

struct DatasetBuild {
  std::vector<ListRecord> records;     // input order
  std::vector<BuildWarning> warnings;  // input order, per-sample order preserved
  std::size_t skipped = 0;
};

using ImageLoader = std::function<Image(const PreferenceSample&)>;
using DetectionTable = std::unordered_map<std::string, std::vector<DetectedObject>>;

inline unsigned default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return std::clamp(hw == 0 ? 1u : hw, 1u, 8u);
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Exceptions are
/// rethrown in index order after every worker has finished.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (count == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(count);
    for (unsigned t = 0; t < count; ++t) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Builds every sample with an rng seeded from (seed, sample id), so output
/// is a pure function of the inputs regardless of scheduling.
inline DatasetBuild build_dataset(std::span<const PreferenceSample> samples, const ImageLoader& load_image,
                                  const DetectionTable& detections, Verifier& verifier, const BuildOptions& options,
                                  std::uint64_t seed, unsigned workers = 1) {
  std::optional<SerializedVerifier> serial;
  Verifier* active = &verifier;
  if (!verifier.concurrent() && workers > 1) active = &serial.emplace(verifier);

  std::vector<BuildOutcome> outcomes(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    const auto& sample = samples[i];
    Image image;
    try {
      image = load_image(sample);
    } catch (const Error& e) {
      outcomes[i].warnings.push_back({sample.id, "image-unreadable", e.what(), true});
      return;
    }
    const auto it = detections.find(sample.id);
    const std::span<const DetectedObject> dets =
        it == detections.end() ? std::span<const DetectedObject>{} : std::span<const DetectedObject>(it->second);
    Rng rng(derive_seed(seed, sample.id));
    outcomes[i] = build_sample(sample, image, dets, *active, options, rng);
  });

  DatasetBuild build;
  for (auto& o : outcomes) {
    for (auto& w : o.warnings) build.warnings.push_back(std::move(w));
    if (o.record) {
      build.records.push_back(std::move(*o.record));
    } else {
      ++build.skipped;
    }
  }
  return build;
}

}  // namespace lpoi
