// Desk-scale differentiable policy standing in for the vision-language model.
//
// A response under an image is summarised as a feature vector
// [visibility, context_1..context_d]; the policy maps it to a log-likelihood
// proxy. Scores, losses and their gradients come from losses.hpp and are
// chained through the policy's analytic Jacobian here.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "lpoi/core.hpp"
#include "lpoi/listgen.hpp"
#include "lpoi/losses.hpp"
#include "lpoi/masking.hpp"
#include "lpoi/rng.hpp"

namespace lpoi {

inline constexpr int kDefaultContextDim = 8;
inline constexpr int kDefaultHidden = 16;

struct FeatureVector {
  double visibility = 1.0;
  std::vector<double> context;

  std::size_t size() const { return context.size() + 1; }
  double operator[](std::size_t i) const { return i == 0 ? visibility : context[i - 1]; }
};

/// d values in [-1, 1], a pure function of (key, d).
inline std::vector<double> context_features(std::string_view key, int dim) {
  Rng rng(derive_seed(0x6c706f692d637478ULL, key));
  std::vector<double> out(static_cast<std::size_t>(std::max(dim, 0)));
  for (auto& v : out) v = rng.uniform(-1.0, 1.0);
  return out;
}

/// Chosen answer under list image k (1-based): visibility from the resolved
/// mask geometry of x_k, context from the sample id.
inline FeatureVector featurize(const ListRecord& record, int k, int dim = kDefaultContextDim) {
  const auto& images = record.ranked.images;
  if (images.empty()) throw Error(ErrorKind::InvalidArgument, "record '" + record.sample_id + "' has no images");
  FeatureVector f;
  f.visibility = plan_visibility(record.ranked.plan, images.front().width, images.front().height, k);
  f.context = context_features(record.sample_id, dim);
  return f;
}

/// Rejected answer on the original image. The rejected answer is treated as
/// ungrounded (visibility 0) with its own context stream.
inline FeatureVector featurize_rejected(const ListRecord& record, int dim = kDefaultContextDim) {
  return {0.0, context_features(record.sample_id + "\x1frejected", dim)};
}

enum class PolicyKind { Linear, Mlp1 };

inline std::string_view to_string(PolicyKind k) { return k == PolicyKind::Linear ? "linear" : "mlp1"; }

inline PolicyKind parse_policy_kind(std::string_view text) {
  if (text == "linear") return PolicyKind::Linear;
  if (text == "mlp1") return PolicyKind::Mlp1;
  throw Error(ErrorKind::InvalidArgument, "unknown policy kind '" + std::string(text) + "'");
}

/// linear: w . f + b, parameters [w_0..w_d, b].
/// mlp1:   v . tanh(W f + c) + b, parameters [W (H x (d+1), row-major), c, v, b].
class ToyPolicy {
 public:
  static std::size_t param_count(PolicyKind kind, int dim, int hidden) {
    const auto in = static_cast<std::size_t>(dim) + 1;
    const auto h = static_cast<std::size_t>(hidden);
    return kind == PolicyKind::Linear ? in + 1 : in * h + h + h + 1;
  }

  static ToyPolicy linear(int dim = kDefaultContextDim) { return ToyPolicy(PolicyKind::Linear, dim, 0); }
  static ToyPolicy mlp1(int dim = kDefaultContextDim, int hidden = kDefaultHidden) {
    if (hidden < 1) throw Error(ErrorKind::InvalidArgument, "hidden width must be >= 1");
    return ToyPolicy(PolicyKind::Mlp1, dim, hidden);
  }
  static ToyPolicy make(PolicyKind kind, int dim, int hidden) {
    return kind == PolicyKind::Linear ? linear(dim) : mlp1(dim, hidden);
  }

  PolicyKind kind() const { return kind_; }
  int dim() const { return dim_; }
  int hidden() const { return hidden_; }
  std::size_t input_size() const { return static_cast<std::size_t>(dim_) + 1; }
  std::size_t size() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  void set_params(std::vector<double> values) {
    if (values.size() != params_.size()) {
      throw Error(ErrorKind::DimensionMismatch, "expected " + std::to_string(params_.size()) + " parameters, got " +
                                                    std::to_string(values.size()));
    }
    for (double v : values) {
      if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "policy parameter is not finite");
    }
    params_ = std::move(values);
  }

  void init_uniform(Rng& rng, double scale) {
    for (auto& p : params_) p = rng.uniform(-scale, scale);
  }

  double forward(const FeatureVector& f) const { return evaluate(f, {}, 0.0); }

  /// Forward pass that also adds scale * d(output)/d(params) into `grad`.
  double forward(const FeatureVector& f, std::span<double> grad, double scale) const {
    if (grad.size() != params_.size()) throw Error(ErrorKind::DimensionMismatch, "gradient buffer size mismatch");
    return evaluate(f, grad, scale);
  }

  friend bool operator==(const ToyPolicy&, const ToyPolicy&) = default;

 private:
  ToyPolicy(PolicyKind kind, int dim, int hidden)
      : kind_(kind), dim_(dim), hidden_(kind == PolicyKind::Linear ? 0 : hidden) {
    if (dim < 0) throw Error(ErrorKind::InvalidArgument, "context dimension must be >= 0");
    params_.assign(param_count(kind_, dim_, hidden_), 0.0);
  }

  double evaluate(const FeatureVector& f, std::span<double> grad, double scale) const {
    const std::size_t in = input_size();
    if (f.size() != in) {
      throw Error(ErrorKind::DimensionMismatch, "feature vector has " + std::to_string(f.size()) +
                                                    " entries, policy expects " + std::to_string(in));
    }
    const bool want_grad = !grad.empty();
    if (kind_ == PolicyKind::Linear) {
      double out = params_[in];
      for (std::size_t i = 0; i < in; ++i) out += params_[i] * f[i];
      if (want_grad) {
        for (std::size_t i = 0; i < in; ++i) grad[i] += scale * f[i];
        grad[in] += scale;
      }
      return out;
    }
    const auto h = static_cast<std::size_t>(hidden_);
    const std::size_t c_off = in * h;
    const std::size_t v_off = c_off + h;
    const std::size_t b_off = v_off + h;
    double out = params_[b_off];
    for (std::size_t j = 0; j < h; ++j) {
      double pre = params_[c_off + j];
      for (std::size_t i = 0; i < in; ++i) pre += params_[j * in + i] * f[i];
      const double act = std::tanh(pre);
      const double v = params_[v_off + j];
      out += v * act;
      if (want_grad) {
        const double back = scale * v * (1.0 - act * act);
        for (std::size_t i = 0; i < in; ++i) grad[j * in + i] += back * f[i];
        grad[c_off + j] += back;
        grad[v_off + j] += scale * act;
      }
    }
    if (want_grad) grad[b_off] += scale;
    return out;
  }

  PolicyKind kind_;
  int dim_;
  int hidden_;
  std::vector<double> params_;
};

/// Everything one preference sample contributes to the objective.
struct PolicyExample {
  std::string id;
  FeatureVector chosen;             // chosen answer, original image
  FeatureVector rejected;           // rejected answer, original image
  std::vector<FeatureVector> list;  // chosen answer on x_1..x_L
};

inline PolicyExample make_example(const ListRecord& record, int dim = kDefaultContextDim) {
  PolicyExample ex;
  ex.id = record.sample_id;
  const int L = record.ranked.plan.list_size;
  for (int k = 1; k <= L; ++k) ex.list.push_back(featurize(record, k, dim));
  ex.chosen = ex.list.front();
  ex.rejected = featurize_rejected(record, dim);
  return ex;
}

inline std::vector<PolicyExample> make_examples(std::span<const ListRecord> records, int dim = kDefaultContextDim) {
  std::vector<PolicyExample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(make_example(r, dim));
  return out;
}

namespace detail {

inline void require_same_architecture(const ToyPolicy& a, const ToyPolicy& b) {
  if (a.kind() != b.kind() || a.dim() != b.dim() || a.hidden() != b.hidden()) {
    throw Error(ErrorKind::DimensionMismatch, "policy and reference policy architectures differ");
  }
}

/// Loss of one example; if `grad` is non-empty adds scale * dL/dtheta.
inline LossBreakdown accumulate_example(const ToyPolicy& policy, const ToyPolicy& reference, const PolicyExample& ex,
                                        const Hyperparams& hyper, ObjectiveTerms terms, std::span<double> grad,
                                        double scale) {
  std::vector<PolicyLogProbs> list;
  list.reserve(ex.list.size());
  for (const auto& f : ex.list) list.push_back({policy.forward(f), reference.forward(f)});
  const auto result = total_loss(hyper, {policy.forward(ex.chosen), reference.forward(ex.chosen)},
                                 {policy.forward(ex.rejected), reference.forward(ex.rejected)}, list, terms);
  if (!grad.empty()) {
    // dS/dlog pi_theta = beta; the reference receives nothing.
    const double b = hyper.beta * scale;
    if (result.grad.chosen != 0.0) policy.forward(ex.chosen, grad, b * result.grad.chosen);
    if (result.grad.rejected != 0.0) policy.forward(ex.rejected, grad, b * result.grad.rejected);
    for (std::size_t k = 0; k < ex.list.size(); ++k) {
      if (result.grad.list[k] != 0.0) policy.forward(ex.list[k], grad, b * result.grad.list[k]);
    }
  }
  return result.loss;
}

}  // namespace detail

struct PolicyGradient {
  std::vector<double> grad;  // mean over the batch
  LossBreakdown loss;        // mean over the batch
};

/// Mean loss and parameter gradient over a batch, reduced in input order.
inline PolicyGradient grad_total(const ToyPolicy& policy, const ToyPolicy& reference,
                                 std::span<const PolicyExample> batch, const Hyperparams& hyper,
                                 ObjectiveTerms terms = ObjectiveTerms::full()) {
  detail::require_same_architecture(policy, reference);
  if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "batch must not be empty");
  const double inv = 1.0 / static_cast<double>(batch.size());
  PolicyGradient out;
  out.grad.assign(policy.size(), 0.0);
  for (const auto& ex : batch) out.loss += detail::accumulate_example(policy, reference, ex, hyper, terms, out.grad, inv);
  out.loss = out.loss.scaled(inv);
  return out;
}

inline LossBreakdown batch_loss(const ToyPolicy& policy, const ToyPolicy& reference,
                                std::span<const PolicyExample> batch, const Hyperparams& hyper,
                                ObjectiveTerms terms = ObjectiveTerms::full()) {
  detail::require_same_architecture(policy, reference);
  if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "batch must not be empty");
  LossBreakdown sum;
  for (const auto& ex : batch) sum += detail::accumulate_example(policy, reference, ex, hyper, terms, {}, 0.0);
  return sum.scaled(1.0 / static_cast<double>(batch.size()));
}

/// Max over parameters of |g_fd - g_an| / max(1e-12, |g_fd| + |g_an|), with
/// g_fd the central difference of the mean total loss at step h.
inline double finite_diff_check(const ToyPolicy& policy, const ToyPolicy& reference,
                                std::span<const PolicyExample> batch, const Hyperparams& hyper, double h = 1e-5,
                                ObjectiveTerms terms = ObjectiveTerms::full()) {
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "finite-difference step must be > 0");
  const auto analytic = grad_total(policy, reference, batch, hyper, terms).grad;
  ToyPolicy probe = policy;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double original = probe.params()[i];
    probe.params()[i] = original + h;
    const double up = batch_loss(probe, reference, batch, hyper, terms).total;
    probe.params()[i] = original - h;
    const double down = batch_loss(probe, reference, batch, hyper, terms).total;
    probe.params()[i] = original;
    const double fd = (up - down) / (2.0 * h);
    const double err = std::abs(fd - analytic[i]) / std::max(1e-12, std::abs(fd) + std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

/// S_k for each list image of one example.
inline std::vector<double> list_scores(const ToyPolicy& policy, const ToyPolicy& reference, const PolicyExample& ex,
                                       double beta) {
  std::vector<double> s;
  s.reserve(ex.list.size());
  for (const auto& f : ex.list) s.push_back(score(beta, {policy.forward(f), reference.forward(f)}));
  return s;
}

/// Fraction of examples whose list scores are strictly descending in k.
inline double ordering_accuracy(const ToyPolicy& policy, const ToyPolicy& reference,
                                std::span<const PolicyExample> examples, double beta) {
  if (examples.empty()) return 0.0;
  std::size_t ordered = 0;
  for (const auto& ex : examples) {
    const auto s = list_scores(policy, reference, ex, beta);
    bool ok = true;
    for (std::size_t k = 1; k < s.size() && ok; ++k) ok = s[k - 1] > s[k];
    ordered += ok ? 1 : 0;
  }
  return static_cast<double>(ordered) / static_cast<double>(examples.size());
}

// ---------------------------------------------------------------------------
// Training

struct TrainerConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 50;
  int batch_size = 16;
  std::uint64_t seed = 42;
  Hyperparams hyper;
  PolicyKind kind = PolicyKind::Linear;
  int context_dim = kDefaultContextDim;
  int hidden = kDefaultHidden;
  double init_scale = 0.1;
  ObjectiveTerms terms;
};

inline void validate_trainer_config(const TrainerConfig& c) {
  if (!(c.learning_rate > 0.0) || !std::isfinite(c.learning_rate)) {
    throw Error(ErrorKind::InvalidArgument, "learning rate must be finite and > 0");
  }
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw Error(ErrorKind::InvalidArgument, "momentum must be in [0, 1)");
  if (c.epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be >= 1");
  if (c.batch_size < 1) throw Error(ErrorKind::InvalidArgument, "batch size must be >= 1");
  if (!(c.init_scale >= 0.0) || !std::isfinite(c.init_scale)) {
    throw Error(ErrorKind::InvalidArgument, "init scale must be finite and >= 0");
  }
  validate_hyperparams(c.hyper);
}

inline ToyPolicy initial_policy(const TrainerConfig& c) {
  auto policy = ToyPolicy::make(c.kind, c.context_dim, c.hidden);
  Rng rng(derive_seed(c.seed, "policy-init"));
  policy.init_uniform(rng, c.init_scale);
  return policy;
}

struct EpochMetrics {
  int epoch = 0;
  LossBreakdown loss;
  double ordering_accuracy = 0.0;
};

struct TrainResult {
  ToyPolicy policy;
  ToyPolicy reference;
  std::vector<EpochMetrics> history;
};

/// SGD with momentum on the mean batch loss. The reference policy is the
/// initial policy, frozen. Shuffle order per epoch comes from the seed, so
/// the whole trajectory is reproducible.
inline TrainResult train(const TrainerConfig& config, std::span<const PolicyExample> examples) {
  validate_trainer_config(config);
  if (examples.empty()) throw Error(ErrorKind::InvalidArgument, "training set is empty");
  TrainResult out{initial_policy(config), initial_policy(config), {}};
  auto& policy = out.policy;
  const auto& reference = out.reference;

  Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
  std::vector<std::size_t> order(examples.size());
  std::vector<double> velocity(policy.size(), 0.0);
  std::vector<double> grad(policy.size());
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) try {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      const double inv = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t i = start; i < stop; ++i) {
        detail::accumulate_example(policy, reference, examples[order[i]], config.hyper, config.terms, grad, inv);
      }
      auto params = policy.params();
      for (std::size_t p = 0; p < params.size(); ++p) {
        velocity[p] = config.momentum * velocity[p] - config.learning_rate * grad[p];
        params[p] += velocity[p];
        if (!std::isfinite(params[p])) {
          throw Error(ErrorKind::Diverged, "parameters became non-finite in epoch " + std::to_string(epoch));
        }
      }
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = batch_loss(policy, reference, examples, config.hyper, config.terms);
    if (!m.loss.finite()) throw Error(ErrorKind::Diverged, "loss became non-finite in epoch " + std::to_string(epoch));
    m.ordering_accuracy = ordering_accuracy(policy, reference, examples, config.hyper.beta);
    out.history.push_back(m);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NonFinite) throw;
    throw Error(ErrorKind::Diverged, "non-finite score in epoch " + std::to_string(epoch) + " (" + e.what() + ")");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints and metrics

inline constexpr std::string_view kPolicyFormat = "lpoi-policy-v1";

inline void save_policy(const std::filesystem::path& path, const ToyPolicy& policy) {
  nlohmann::json j;
  j["format"] = kPolicyFormat;
  j["kind"] = std::string(to_string(policy.kind()));
  j["context_dim"] = policy.dim();
  j["hidden"] = policy.hidden();
  j["params"] = std::vector<double>(policy.params().begin(), policy.params().end());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline ToyPolicy load_policy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format").get<std::string>() != kPolicyFormat) {
      throw Error(ErrorKind::FormatError, path.string() + ": unsupported checkpoint format");
    }
    auto policy = ToyPolicy::make(parse_policy_kind(j.at("kind").get<std::string>()), j.at("context_dim").get<int>(),
                                  j.at("hidden").get<int>());
    policy.set_params(j.at("params").get<std::vector<double>>());
    return policy;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::FormatError) throw;
    throw Error(ErrorKind::FormatError, path.string() + ": " + e.what());
  }
}

inline std::string metrics_csv(std::span<const EpochMetrics> history) {
  std::string out = "epoch,dpo,anchor,listwise,total,ordering_accuracy\n";
  for (const auto& m : history) {
    out += fmt::format("{},{},{},{},{},{}\n", m.epoch, m.loss.dpo, m.loss.anchor, m.loss.listwise, m.loss.total,
                       m.ordering_accuracy);
  }
  return out;
}

}  // namespace lpoi
