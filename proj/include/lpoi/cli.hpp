// The `lpoi` command line: one binary, one verb per task. Options may also
// come from a TOML file (--config); flags given on the command line win.
// Every command that writes outputs also writes resolved_config.toml, which
// can be passed back through --config to rerun it.
//
// Exit codes: 0 success, 1 runtime failure, 2 partial (samples skipped),
// 64 usage error.

#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "lpoi/core.hpp"
#include "lpoi/formats.hpp"
#include "lpoi/listgen.hpp"
#include "lpoi/masking.hpp"
#include "lpoi/png_io.hpp"
#include "lpoi/surrogate.hpp"
#include "lpoi/synthbench.hpp"

namespace lpoi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitPartial = 2;
inline constexpr int kExitUsage = 64;

inline constexpr const char* kSnapshotName = "resolved_config.toml";

/// Bad flag values found after parsing (e.g. a malformed colour).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::shared_ptr<spdlog::logger> logger() {
  if (auto existing = spdlog::get("lpoi")) return existing;
  auto log = spdlog::stderr_color_mt("lpoi");
  log->set_pattern("[%l] %v");
  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char* env = std::getenv("LPOI_LOG")) {
    const std::string v(env);
    if (v == "error") level = spdlog::level::err;
    else if (v == "warn") level = spdlog::level::warn;
    else if (v == "info") level = spdlog::level::info;
    else if (v == "debug") level = spdlog::level::debug;
    else log->warn("LPOI_LOG='{}' not one of error, warn, info, debug; using warn", v);
  }
  log->set_level(level);
  return log;
}

inline std::vector<int> split_ints(const std::string& text, std::size_t count, const char* what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError(fmt::format("{} '{}': '{}' is not an integer", what, text, part));
    }
  }
  if (out.size() != count) throw UsageError(fmt::format("{} '{}' needs {} comma-separated integers", what, text, count));
  return out;
}

inline Rgb parse_color(const std::string& text) {
  const auto v = split_ints(text, 3, "colour");
  for (int c : v) {
    if (c < 0 || c > 255) throw UsageError(fmt::format("colour '{}' has a channel outside [0, 255]", text));
  }
  return {static_cast<std::uint8_t>(v[0]), static_cast<std::uint8_t>(v[1]), static_cast<std::uint8_t>(v[2])};
}

inline BoundingBox parse_box_flag(const std::string& text) {
  const auto v = split_ints(text, 4, "box");
  return {v[0], v[1], v[2], v[3]};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "short write to " + path.string());
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Option sets

struct MaskFlags {
  int list_size = 5;
  std::string sweep = "nearest-edge";
  std::string fill = "0,0,0";
  bool no_prompt = false;
  int stroke_width = 3;

  void add(CLI::App& cmd) {
    cmd.add_option("--list-size", list_size, "List size L")->check(CLI::Range(kMinListSize, kMaxListSize))
        ->capture_default_str();
    cmd.add_option("--sweep", sweep, "Mask sweep direction")
        ->check(CLI::IsMember({"nearest-edge", "left-to-right", "top-to-bottom"}))
        ->capture_default_str();
    cmd.add_option("--fill-color", fill, "Mask fill colour as r,g,b")->capture_default_str();
    cmd.add_flag("--no-prompt", no_prompt, "Do not draw the red-circle prompt");
    cmd.add_option("--stroke-width", stroke_width, "Prompt stroke width in pixels")->check(CLI::PositiveNumber)
        ->capture_default_str();
  }

  MaskPlan plan() const {
    MaskPlan p;
    p.list_size = list_size;
    p.sweep = parse_sweep(sweep);
    p.fill = parse_color(fill);
    p.prompt = no_prompt ? PromptStyle::None : PromptStyle::RedCircle;
    p.stroke_width = stroke_width;
    return p;
  }
};

struct TrainFlags {
  TrainerConfig config;
  std::string kind = "linear";
  std::string objective = "lpoi";

  void add(CLI::App& cmd, bool with_seed) {
    cmd.add_option("--epochs", config.epochs, "Training epochs (>= 1)")->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd.add_option("--lr", config.learning_rate, "Learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    cmd.add_option("--momentum", config.momentum, "SGD momentum in [0, 1)")->check(CLI::Range(0.0, 0.999999999))
        ->capture_default_str();
    cmd.add_option("--batch-size", config.batch_size, "Mini-batch size")->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd.add_option("--beta", config.hyper.beta, "Score scale beta (> 0)")->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd.add_option("--delta", config.hyper.delta, "Anchor margin delta")->capture_default_str();
    cmd.add_option("--kind", kind, "Policy kind")->check(CLI::IsMember({"linear", "mlp1"}))->capture_default_str();
    cmd.add_option("--hidden", config.hidden, "Hidden width for mlp1")->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd.add_option("--context-dim", config.context_dim, "Context feature dimension")->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd.add_option("--init-scale", config.init_scale, "Initial parameters drawn from U(-s, s)")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    if (with_seed) cmd.add_option("--seed", config.seed, "Random seed")->capture_default_str();
  }

  TrainerConfig resolved() const {
    TrainerConfig c = config;
    c.kind = parse_policy_kind(kind);
    if (objective == "lpoi") c.terms = ObjectiveTerms::full();
    else if (objective == "dpo") c.terms = ObjectiveTerms::dpo_only();
    else throw UsageError("unknown objective '" + objective + "'");
    return c;
  }
};

struct Options {
  unsigned workers = default_workers();

  struct {
    std::string manifest, detections, verdicts, verifier = "fixture", out, on_unavailable = "accept";
    std::uint64_t seed = 42;
    MaskFlags mask;
  } build;

  struct {
    std::string kind = "linear";
    int hidden = kDefaultHidden, context_dim = kDefaultContextDim, list_size = 5, batch = 8, instances = 1;
    double beta = 0.1, delta = 0.0, h = 1e-5, tol = 1e-4, scale = 1.0;
    std::uint64_t seed = 42;
  } grad;

  struct {
    std::string data, out;
    std::size_t scenes = 200;
    int list_size = 5;
    TrainFlags train;
  } train;

  struct {
    std::string out;
    BenchConfig bench;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<int> sizes{3, 4, 5};
    TrainFlags train;
  } bench, ablate;

  struct {
    std::string image, out;
    std::vector<std::string> boxes;
    MaskFlags mask;
  } render;

  struct {
    std::string manifest, detections, verdicts;
    bool require_header = false, strict = false;
  } validate;

  struct {
    std::size_t n = 10;
    std::uint64_t seed = 7;
    int width = 96, height = 96;
    std::string out;
  } scenes;
};

// Only the section of the command that ran is kept, so a rerun with
// --config touches nothing else.
inline std::string snapshot_text(const CLI::App& app) {
  std::string section;
  for (const auto* sub : app.get_subcommands()) section = sub->get_name();
  const std::string prefix = section + ".";
  std::istringstream all(app.config_to_str(true, false));
  std::string text = "[" + section + "]\n", line;
  while (std::getline(all, line)) {
    // Unset paths are left out; an empty string would fail the file checks.
    if (line.starts_with(prefix) && !line.ends_with("=\"\"")) text += line.substr(prefix.size()) + "\n";
  }
  return text;
}

inline void write_snapshot(const CLI::App& app, const std::filesystem::path& dir) {
  write_text(dir / kSnapshotName, snapshot_text(app));
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_build_lists(const Options& o, const CLI::App& app, std::ostream& out) {
  const auto& b = o.build;
  BuildOptions options;
  options.plan = b.mask.plan();
  options.on_unavailable = parse_unavailable_policy(b.on_unavailable);

  std::unique_ptr<Verifier> verifier;
  if (b.verifier == "stub") {
    if (!b.verdicts.empty()) throw UsageError("--verdicts conflicts with --verifier stub");
    verifier = std::make_unique<AlwaysHallucinatingVerifier>();
  } else {
    if (b.verdicts.empty()) throw UsageError("--verifier " + b.verifier + " needs --verdicts");
    if (b.verifier == "adapter") {
      verifier = std::make_unique<AdapterVerifier>(load_adapter_verifier(b.verdicts));
    } else {
      verifier = std::make_unique<FixtureVerifier>(load_fixture_verifier(b.verdicts));
    }
  }

  const std::filesystem::path manifest(b.manifest);
  const auto samples = read_input_manifest(manifest);
  const auto detections = read_detections(b.detections);
  const auto base = manifest.parent_path();
  auto loader = [&](const PreferenceSample& s) {
    const std::filesystem::path p(s.image_path);
    return read_png(p.is_absolute() ? p : base / p);
  };

  auto log = logger();
  log->info("building lists for {} samples with {} workers", samples.size(), o.workers);
  const auto built = build_dataset(samples, loader, detections, *verifier, options, b.seed, o.workers);
  for (const auto& w : built.warnings) log->warn("{} [{}]: {}", w.sample_id, w.kind, w.message);

  ensure_dir(b.out);
  write_dataset(built.records, b.out);
  write_warnings(std::filesystem::path(b.out) / "warnings.jsonl", built.warnings);
  write_snapshot(app, b.out);

  std::map<int, std::size_t> histogram;
  std::size_t unverified = 0;
  for (const auto& r : built.records) {
    ++histogram[r.retries];
    unverified += r.verified ? 0 : 1;
  }
  out << fmt::format("records: {}\nskipped: {}\nunverified: {}\nretries:", built.records.size(), built.skipped,
                     unverified);
  for (int r = 0; r < static_cast<int>(kMaxMaskBoxes); ++r) out << fmt::format(" {}={}", r, histogram[r]);
  out << '\n';
  return built.skipped > 0 ? kExitPartial : kExitOk;
}

inline int cmd_grad_check(const Options& o, std::ostream& out) {
  const auto& g = o.grad;
  const auto kind = parse_policy_kind(g.kind);
  BuildOptions build;
  build.plan.list_size = g.list_size;
  double worst = 0.0;
  for (int i = 0; i < g.instances; ++i) {
    const auto seed = derive_seed(g.seed, "grad-check/" + std::to_string(i));
    const auto scenes = gen_scenes(static_cast<std::size_t>(g.batch), seed);
    const auto records = scene_records(scenes, scene_samples(scenes, seed), build, seed, o.workers).records;
    const auto batch = make_examples(records, g.context_dim);
    Rng rng(derive_seed(seed, "policy"));
    auto policy = ToyPolicy::make(kind, g.context_dim, g.hidden);
    policy.init_uniform(rng, g.scale);
    auto reference = ToyPolicy::make(kind, g.context_dim, g.hidden);
    reference.init_uniform(rng, g.scale);
    worst = std::max(worst, finite_diff_check(policy, reference, batch, {g.beta, g.delta, g.list_size}, g.h));
  }
  const bool ok = worst <= g.tol;
  out << fmt::format("policy: {} ({} parameters)\nmax relative error: {:.3e}\ntolerance: {:.3e}\nresult: {}\n",
                     g.kind, ToyPolicy::param_count(kind, g.context_dim, g.hidden), worst, g.tol,
                     ok ? "pass" : "fail");
  return ok ? kExitOk : kExitFailure;
}

inline int cmd_train(const Options& o, const CLI::App& app, std::ostream& out) {
  const auto& t = o.train;
  auto config = t.train.resolved();
  std::vector<PolicyExample> examples;
  if (!t.data.empty()) {
    const auto records = read_dataset(t.data);
    if (records.empty()) throw Error(ErrorKind::InvalidArgument, "dataset " + t.data + " has no records");
    config.hyper.list_size = records.front().ranked.plan.list_size;
    examples = make_examples(records, config.context_dim);
  } else {
    config.hyper.list_size = t.list_size;
    const auto scenes = gen_scenes(t.scenes, config.seed);
    BuildOptions build;
    build.plan.list_size = t.list_size;
    examples = make_examples(scene_records(scenes, scene_samples(scenes, config.seed), build, config.seed, o.workers)
                                 .records,
                             config.context_dim);
  }
  logger()->info("training {} policy on {} examples for {} epochs", t.train.kind, examples.size(), config.epochs);
  const auto result = train(config, examples);
  ensure_dir(t.out);
  const std::filesystem::path dir(t.out);
  save_policy(dir / "policy.json", result.policy);
  write_text(dir / "metrics.csv", metrics_csv(result.history));
  write_snapshot(app, dir);
  const auto& last = result.history.back();
  out << fmt::format("epochs: {}\nfinal total loss: {}\nordering accuracy: {}\n", last.epoch, last.loss.total,
                     last.ordering_accuracy);
  return kExitOk;
}

inline BenchConfig bench_config(const BenchConfig& base, const TrainFlags& flags) {
  BenchConfig c = base;
  c.trainer = flags.resolved();
  return c;
}

inline void print_rows(std::ostream& out, std::span<const BenchRow> rows) {
  out << fmt::format("{:<10} {:>6} {:>4} {:>8} {:>8} {:>8} {:>8}\n", "objective", "seed", "L", "chair_i", "chair_s",
                     "coverage", "order");
  for (const auto& r : rows) {
    out << fmt::format("{:<10} {:>6} {:>4} {:>8.4f} {:>8.4f} {:>8.4f} {:>8.4f}\n", r.objective, r.seed, r.list_size,
                       r.chair.chair_i, r.chair.chair_s, r.chair.coverage, r.ordering_accuracy);
  }
}

inline int cmd_bench(const Options& o, const CLI::App& app, std::ostream& out) {
  const auto config = bench_config(o.bench.bench, o.bench.train);
  const auto rows = compare_objectives(config, o.bench.seeds, o.workers);
  ensure_dir(o.bench.out);
  write_text(std::filesystem::path(o.bench.out) / "bench.csv", bench_csv(rows));
  write_snapshot(app, o.bench.out);
  print_rows(out, rows);
  return kExitOk;
}

inline int cmd_ablate(const Options& o, const CLI::App& app, std::ostream& out) {
  const auto config = bench_config(o.ablate.bench, o.ablate.train);
  const auto rows = run_ablation(config, o.ablate.sizes, o.ablate.seeds, o.workers);
  ensure_dir(o.ablate.out);
  write_text(std::filesystem::path(o.ablate.out) / "ablation.csv", ablation_csv(rows));
  write_snapshot(app, o.ablate.out);
  print_rows(out, rows);
  return kExitOk;
}

inline int cmd_render(const Options& o, const CLI::App& app, std::ostream& out) {
  const auto& r = o.render;
  if (r.boxes.size() > kMaxMaskBoxes) throw UsageError("at most 4 --box values");
  auto plan = r.mask.plan();
  for (const auto& b : r.boxes) plan.boxes.push_back(parse_box_flag(b));
  const auto image = read_png(r.image);
  const auto list = build_ranked_list(image, plan, std::filesystem::path(r.image).stem().string());
  ensure_dir(r.out);
  const std::filesystem::path dir(r.out);
  for (std::size_t k = 0; k < list.images.size(); ++k) {
    const auto name = fmt::format("{}_k{}_f{:.4f}.png", list.sample_id, k + 1, list.fractions[k]);
    write_png(dir / name, list.images[k]);
    out << name << '\n';
  }
  write_snapshot(app, dir);
  return kExitOk;
}

inline int cmd_validate(const Options& o, std::ostream& out) {
  const auto& v = o.validate;
  if (v.manifest.empty() && v.detections.empty() && v.verdicts.empty()) {
    throw UsageError("give at least one of --manifest, --detections, --verdicts");
  }
  bool failed = false;
  auto report = [&](const std::string& path, const ValidationReport& rep, bool has_header) {
    for (const auto& e : rep.errors) out << fmt::format("{}: error: {}\n", path, e);
    for (const auto& w : rep.warnings) out << fmt::format("{}: warning: {}\n", path, w);
    bool bad = !rep.errors.empty() || (v.strict && !rep.warnings.empty());
    if (v.require_header && !has_header) {
      out << fmt::format("{}: error: missing '#lpoi-adapter model=<id> threshold=<t>' header\n", path);
      bad = true;
    }
    out << fmt::format("{}: {} ({} errors, {} warnings)\n", path, bad ? "invalid" : "ok", rep.errors.size(),
                       rep.warnings.size());
    failed |= bad;
  };
  std::optional<std::vector<PreferenceSample>> manifest;
  if (!v.manifest.empty()) {
    auto parsed = parse_input_manifest(v.manifest);
    report(v.manifest, parsed.report, true);
    manifest = std::move(parsed.samples);
  }
  if (!v.detections.empty()) {
    auto rep = validate_detections_file(v.detections, manifest ? &*manifest : nullptr);
    report(v.detections, rep, parse_detections(v.detections).header.has_value());
  }
  if (!v.verdicts.empty()) {
    auto parsed = parse_verdicts(v.verdicts);
    if (manifest) {
      std::set<std::string> ids;
      for (const auto& s : *manifest) ids.insert(s.id);
      for (const auto& e : parsed.entries) {
        if (!ids.contains(e.id)) parsed.report.warnings.push_back("id '" + e.id + "' not present in manifest");
      }
    }
    report(v.verdicts, parsed.report, parsed.header.has_value());
  }
  return failed ? kExitFailure : kExitOk;
}

inline int cmd_scenes(const Options& o, const CLI::App& app, std::ostream& out) {
  const auto& s = o.scenes;
  SceneOptions opt;
  opt.width = s.width;
  opt.height = s.height;
  const auto scenes = gen_scenes(s.n, s.seed, default_vocabulary(), opt);
  write_scene_set(s.out, scenes, scene_samples(scenes, s.seed));
  write_snapshot(app, s.out);
  out << fmt::format("scenes: {}\n", scenes.size());
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline void add_bench_flags(CLI::App& cmd, BenchConfig& bench, TrainFlags& train) {
  cmd.add_option("--scenes", bench.scenes, "Synthetic scenes per cell")->check(CLI::Range(2, 1000000))
      ->capture_default_str();
  cmd.add_option("--holdout", bench.holdout, "Held-out share of scenes")->check(CLI::Range(0.01, 0.99))
      ->capture_default_str();
  cmd.add_option("--tau", bench.tau, "Caption mention threshold")->capture_default_str();
  train.add(cmd, false);
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"Listwise preference data construction, objectives and toy benchmarks", "lpoi"};
  app.set_config("--config", "", "TOML file with option values; command-line flags win");
  app.require_subcommand(1, 1);
  app.add_option("--workers", o.workers, "Worker threads (default: logical processors, at most 8)")
      ->check(CLI::Range(1u, 256u))
      ->configurable(false);

  auto* build = app.add_subcommand("build-lists", "Build ranked image lists from a sample manifest");
  build->add_option("--manifest", o.build.manifest, "Input manifest (JSON Lines)")->required()
      ->check(CLI::ExistingFile);
  build->add_option("--detections", o.build.detections, "Detections file (JSON Lines)")->required()
      ->check(CLI::ExistingFile);
  build->add_option("--verdicts", o.build.verdicts, "Verdicts file for the fixture or adapter verifier")
      ->check(CLI::ExistingFile);
  build->add_option("--verifier", o.build.verifier, "Verifier: fixture, adapter or stub")
      ->check(CLI::IsMember({"fixture", "adapter", "stub"}))
      ->capture_default_str();
  build->add_option("--on-unavailable", o.build.on_unavailable, "When the verifier has no answer: accept, skip, fail")
      ->check(CLI::IsMember({"accept", "skip", "fail"}))
      ->capture_default_str();
  build->add_option("--seed", o.build.seed, "Random seed")->capture_default_str();
  build->add_option("--out", o.build.out, "Output dataset directory")->required()->configurable(false);
  o.build.mask.add(*build);

  auto* grad = app.add_subcommand("grad-check", "Compare analytic and finite-difference policy gradients");
  grad->add_option("--kind", o.grad.kind, "Policy kind")->check(CLI::IsMember({"linear", "mlp1"}))
      ->capture_default_str();
  grad->add_option("--hidden", o.grad.hidden, "Hidden width for mlp1")->check(CLI::PositiveNumber)
      ->capture_default_str();
  grad->add_option("--context-dim", o.grad.context_dim, "Context feature dimension")->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  grad->add_option("--list-size", o.grad.list_size, "List size L")->check(CLI::Range(kMinListSize, kMaxListSize))
      ->capture_default_str();
  grad->add_option("--batch", o.grad.batch, "Examples per instance")->check(CLI::PositiveNumber)
      ->capture_default_str();
  grad->add_option("--instances", o.grad.instances, "Random instances to check")->check(CLI::PositiveNumber)
      ->capture_default_str();
  grad->add_option("--beta", o.grad.beta, "Score scale beta")->check(CLI::PositiveNumber)->capture_default_str();
  grad->add_option("--delta", o.grad.delta, "Anchor margin delta")->capture_default_str();
  grad->add_option("--scale", o.grad.scale, "Parameters drawn from U(-s, s)")->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  grad->add_option("--step", o.grad.h, "Finite-difference step")->check(CLI::PositiveNumber)->capture_default_str();
  grad->add_option("--tol", o.grad.tol, "Maximum accepted relative error")->check(CLI::PositiveNumber)
      ->capture_default_str();
  grad->add_option("--seed", o.grad.seed, "Random seed")->capture_default_str();

  auto* trn = app.add_subcommand("train", "Train the toy policy and write a checkpoint and metrics");
  trn->add_option("--data", o.train.data, "Dataset directory from build-lists (default: synthetic scenes)");
  trn->add_option("--scenes", o.train.scenes, "Synthetic scenes when --data is absent")->check(CLI::PositiveNumber)
      ->capture_default_str();
  trn->add_option("--list-size", o.train.list_size, "List size for synthetic scenes")
      ->check(CLI::Range(kMinListSize, kMaxListSize))
      ->capture_default_str();
  trn->add_option("--objective", o.train.train.objective, "lpoi (all terms) or dpo (text-only DPO)")
      ->check(CLI::IsMember({"lpoi", "dpo"}))
      ->capture_default_str();
  trn->add_option("--out", o.train.out, "Output directory")->required()->configurable(false);
  o.train.train.add(*trn, true);

  auto* bench = app.add_subcommand("bench", "Full objective against text-only DPO on synthetic scenes");
  add_bench_flags(*bench, o.bench.bench, o.bench.train);
  bench->add_option("--list-size", o.bench.bench.list_size, "List size L")
      ->check(CLI::Range(kMinListSize, kMaxListSize))
      ->capture_default_str();
  bench->add_option("--seeds", o.bench.seeds, "Seeds, comma separated")->delimiter(',')->capture_default_str();
  bench->add_option("--out", o.bench.out, "Output directory")->required()->configurable(false);

  auto* ablate = app.add_subcommand("ablate", "List-size ablation on synthetic scenes");
  add_bench_flags(*ablate, o.ablate.bench, o.ablate.train);
  ablate->add_option("--sizes", o.ablate.sizes, "List sizes, comma separated")->delimiter(',')->check(CLI::Range(kMinListSize, kMaxListSize))
      ->capture_default_str();
  ablate->add_option("--seeds", o.ablate.seeds, "Seeds, comma separated")->delimiter(',')->capture_default_str();
  ablate->add_option("--out", o.ablate.out, "Output directory")->required()->configurable(false);

  auto* render = app.add_subcommand("render", "Write the L list images for one image");
  render->add_option("--image", o.render.image, "Input PNG")->required()->check(CLI::ExistingFile);
  render->add_option("--box", o.render.boxes, "Box x0,y0,x1,y1 (repeat for up to 4 boxes)")->required();
  render->add_option("--out", o.render.out, "Output directory")->required()->configurable(false);
  o.render.mask.add(*render);

  auto* validate = app.add_subcommand("validate", "Check input files against the JSON Lines schemas");
  validate->add_option("--manifest", o.validate.manifest, "Input manifest")->check(CLI::ExistingFile);
  validate->add_option("--detections", o.validate.detections, "Detections file")->check(CLI::ExistingFile);
  validate->add_option("--verdicts", o.validate.verdicts, "Verdicts file")->check(CLI::ExistingFile);
  validate->add_flag("--require-header", o.validate.require_header, "Detections/verdicts must carry the adapter header");
  validate->add_flag("--strict", o.validate.strict, "Treat warnings as failures");

  auto* scenes = app.add_subcommand("scenes", "Write a synthetic scene set as pipeline inputs");
  scenes->add_option("--n", o.scenes.n, "Number of scenes")->check(CLI::PositiveNumber)->capture_default_str();
  scenes->add_option("--seed", o.scenes.seed, "Random seed")->capture_default_str();
  scenes->add_option("--width", o.scenes.width, "Image width")->check(CLI::Range(36, 4096))->capture_default_str();
  scenes->add_option("--height", o.scenes.height, "Image height")->check(CLI::Range(36, 4096))->capture_default_str();
  scenes->add_option("--out", o.scenes.out, "Output directory")->required()->configurable(false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  auto log = logger();
  try {
    if (build->parsed()) return cmd_build_lists(o, app, out);
    if (grad->parsed()) return cmd_grad_check(o, out);
    if (trn->parsed()) return cmd_train(o, app, out);
    if (bench->parsed()) return cmd_bench(o, app, out);
    if (ablate->parsed()) return cmd_ablate(o, app, out);
    if (render->parsed()) return cmd_render(o, app, out);
    if (validate->parsed()) return cmd_validate(o, out);
    if (scenes->parsed()) return cmd_scenes(o, app, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const Error& e) {
    log->error("{}", e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    log->error("unexpected failure: {}", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace lpoi::cli
