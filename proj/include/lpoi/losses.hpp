// DPO, anchor and listwise (Plackett-Luce) losses over preference scores,
// with closed-form gradients with respect to those scores.
//
// A score is S = beta * (log pi_theta - log pi_ref) for one response under
// one image. The three losses combine as
//
//   L_total = -log sigma(S_w - S_l)                 (pairwise, text preference)
//           + -log sigma(S_w - delta)               (anchor on the chosen answer)
//           + sum_k [ -S_k + logsumexp(S_k..S_z) ]  (listwise over masked images)
//
// where S_1..S_z are the chosen answer's scores on the list images ordered
// from least to most masked.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "lpoi/core.hpp"

namespace lpoi {

/// log(1 + exp(t)) without overflow or cancellation.
inline double softplus(double t) { return std::log1p(std::exp(-std::abs(t))) + std::max(t, 0.0); }

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace detail {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, std::string(what) + " is not finite");
}

}  // namespace detail

struct PolicyLogProbs {
  double theta = 0.0;      // log pi_theta(answer | image, question)
  double reference = 0.0;  // log pi_ref(answer | image, question)
};

inline double score(double beta, const PolicyLogProbs& lp) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw Error(ErrorKind::InvalidArgument, "beta must be finite and > 0");
  detail::require_finite(lp.theta, "policy log-probability");
  detail::require_finite(lp.reference, "reference log-probability");
  return beta * (lp.theta - lp.reference);
}

struct PairLoss {
  double value = 0.0;
  double d_first = 0.0;   // dL/dS_w
  double d_second = 0.0;  // dL/dS_l (zero for the anchor loss)
};

/// -log sigma(S_w - S_l).
inline PairLoss dpo_loss(double chosen, double rejected) {
  detail::require_finite(chosen, "chosen score");
  detail::require_finite(rejected, "rejected score");
  const double t = chosen - rejected;
  const double s = sigmoid(-t);
  return {softplus(-t), -s, s};
}

/// -log sigma(S_w - delta). Same evaluation path as dpo_loss.
inline PairLoss anchor_loss(double chosen, double delta) {
  detail::require_finite(chosen, "chosen score");
  detail::require_finite(delta, "delta");
  const auto pair = dpo_loss(chosen, delta);
  return {pair.value, pair.d_first, 0.0};
}

/// Plackett-Luce negative log-likelihood of the order S_1 > S_2 > ... > S_z.
///
/// Suffix log-sum-exps are accumulated right to left as (running max m,
/// tail = sum of exp(S_j - m) over the non-max entries), so each term is
/// (m - S_k) + log1p(tail). At z = 2 this is the same floating-point
/// expression as dpo_loss(S_1, S_2).
///
/// `grad` (if non-empty) must have the same length as `scores` and receives
/// dL/dS_m = -1 + sum_{k<=m} exp(S_m - lse_k).
inline double listwise_loss(std::span<const double> scores, std::span<double> grad = {}) {
  const std::size_t z = scores.size();
  if (z == 0) throw Error(ErrorKind::EmptyList, "listwise loss needs at least one score");
  if (!grad.empty() && grad.size() != z) {
    throw Error(ErrorKind::DimensionMismatch, "gradient buffer length differs from score count");
  }
  for (double s : scores) detail::require_finite(s, "list score");

  std::vector<double> lse(z);
  double value = 0.0;
  double m = scores[z - 1];
  double tail = 0.0;
  for (std::size_t i = z; i-- > 0;) {
    const double s = scores[i];
    if (i + 1 < z) {
      if (s > m) {
        tail = (1.0 + tail) * std::exp(m - s);
        m = s;
      } else {
        tail += std::exp(s - m);
      }
    }
    const double log_tail = std::log1p(tail);
    lse[i] = m + log_tail;
    value += (m - s) + log_tail;
  }

  if (!grad.empty()) {
    // log of sum_{k<=m} exp(-lse_k), accumulated left to right.
    double log_acc = -lse[0];
    for (std::size_t i = 0; i < z; ++i) {
      if (i > 0) {
        const double a = log_acc;
        const double b = -lse[i];
        const double hi = std::max(a, b);
        log_acc = hi + std::log1p(std::exp(std::min(a, b) - hi));
      }
      grad[i] = -1.0 + std::exp(scores[i] + log_acc);
    }
  }
  return value;
}

inline double listwise_loss(const std::vector<double>& scores, std::vector<double>* grad) {
  if (grad) grad->assign(scores.size(), 0.0);
  return listwise_loss(std::span<const double>(scores), grad ? std::span<double>(*grad) : std::span<double>{});
}

/// Which of the three terms contribute. Disabled terms report zero and pass
/// no gradient; the text-only DPO baseline is {true, false, false}.
struct ObjectiveTerms {
  bool dpo = true;
  bool anchor = true;
  bool listwise = true;

  static ObjectiveTerms full() { return {}; }
  static ObjectiveTerms dpo_only() { return {true, false, false}; }

  friend bool operator==(const ObjectiveTerms&, const ObjectiveTerms&) = default;
};

/// Gradients of the total loss with respect to each score.
struct ScoreGradients {
  double chosen = 0.0;        // S_w on the original image
  double rejected = 0.0;      // S_l on the original image
  std::vector<double> list;   // S_1..S_L on the list images
};

struct TotalLoss {
  LossBreakdown loss;
  ScoreGradients grad;
  double chosen_score = 0.0;
  double rejected_score = 0.0;
  std::vector<double> list_scores;
};

inline TotalLoss total_loss(const Hyperparams& params, const PolicyLogProbs& chosen, const PolicyLogProbs& rejected,
                            std::span<const PolicyLogProbs> list, ObjectiveTerms terms = ObjectiveTerms::full()) {
  validate_hyperparams(params);
  if (list.size() < static_cast<std::size_t>(kMinListSize)) {
    throw Error(ErrorKind::InvalidArgument, "listwise term needs at least 2 list images, got " +
                                                std::to_string(list.size()));
  }
  TotalLoss out;
  out.chosen_score = score(params.beta, chosen);
  out.rejected_score = score(params.beta, rejected);
  out.list_scores.reserve(list.size());
  for (const auto& lp : list) out.list_scores.push_back(score(params.beta, lp));
  out.grad.list.assign(list.size(), 0.0);

  double dpo = 0.0;
  double anchor = 0.0;
  double listwise = 0.0;
  if (terms.dpo) {
    const auto p = dpo_loss(out.chosen_score, out.rejected_score);
    dpo = p.value;
    out.grad.chosen += p.d_first;
    out.grad.rejected += p.d_second;
  }
  if (terms.anchor) {
    const auto a = anchor_loss(out.chosen_score, params.delta);
    anchor = a.value;
    out.grad.chosen += a.d_first;
  }
  if (terms.listwise) listwise = listwise_loss(out.list_scores, out.grad.list);
  out.loss = LossBreakdown::of(dpo, anchor, listwise);
  return out;
}

}  // namespace lpoi
