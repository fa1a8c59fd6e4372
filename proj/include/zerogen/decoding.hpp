#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zerogen/error.hpp"
#include "zerogen/lm.hpp"
#include "zerogen/logits.hpp"
#include "zerogen/rng.hpp"

namespace zerogen {

enum class Strategy { kGreedy, kTopK, kNucleus };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kGreedy: return "greedy";
    case Strategy::kTopK: return "top-k";
    case Strategy::kNucleus: return "nucleus";
  }
  return "?";
}

inline std::optional<Strategy> parse_strategy(std::string_view s) {
  if (s == "greedy") return Strategy::kGreedy;
  if (s == "top-k") return Strategy::kTopK;
  if (s == "nucleus") return Strategy::kNucleus;
  return std::nullopt;
}

struct DebiasParams {
  double lambda = 200.0;
  // One prompt per competing label. Filled per example by the generator.
  std::vector<std::vector<TokenId>> prompts;
};

struct DecodeParams {
  Strategy strategy = Strategy::kNucleus;
  int k = 40;
  double p = 0.9;
  double temperature = 1.0;
  int max_new_tokens = 40;
  std::optional<DebiasParams> debias;

  void validate() const {
    if (!(temperature > 0)) throw InvalidTemperature("temperature must be > 0");
    if (strategy == Strategy::kTopK && k < 1) throw InvalidK("top-k requires k >= 1");
    if (strategy == Strategy::kNucleus && !(p > 0 && p <= 1)) throw InvalidP("nucleus p must be in (0, 1]");
    if (max_new_tokens < 0) throw InvalidArgument("max_new_tokens must be >= 0");
    if (debias && !(debias->lambda >= 0)) throw InvalidArgument("debias lambda must be >= 0");
  }
};

enum class StopReason { kQuote, kEos, kMaxLength };

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::kQuote: return "quote";
    case StopReason::kEos: return "eos";
    case StopReason::kMaxLength: return "max-length";
  }
  return "?";
}

struct GenerationTrace {
  std::vector<TokenId> prompt;
  std::vector<TokenId> generated;
  // Probability of each chosen token (the stop token included) under the
  // model distribution after debiasing and temperature, before truncation.
  std::vector<double> step_probs;
  StopReason stop = StopReason::kMaxLength;

  friend bool operator==(const GenerationTrace&, const GenerationTrace&) = default;
};

namespace detail {

// Token ids with finite score, by descending score; ties by lower id.
inline std::vector<std::size_t> ranked_support(const LogitVector& logits) {
  std::vector<std::size_t> idx;
  idx.reserve(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (logits[i] != kNegInf) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
  return idx;
}

inline LogitVector keep_only(const LogitVector& logits, std::span<const std::size_t> keep) {
  LogitVector out(logits.size(), kNegInf);
  for (std::size_t i : keep) out[i] = logits[i];
  return out.normalized();
}

}  // namespace detail

inline LogitVector apply_temperature(const LogitVector& logits, double t) {
  if (!(t > 0)) throw InvalidTemperature("temperature must be > 0");
  LogitVector out = logits;
  for (auto& v : out.mutable_values()) v /= t;
  return out.normalized();
}

inline LogitVector filter_top_k(const LogitVector& logits, int k) {
  if (k < 1) throw InvalidK("top-k requires k >= 1");
  auto ranked = detail::ranked_support(logits);
  if (ranked.size() > static_cast<std::size_t>(k)) ranked.resize(static_cast<std::size_t>(k));
  return detail::keep_only(logits, ranked);
}

// Smallest probability-ordered prefix whose mass reaches p.
inline LogitVector filter_nucleus(const LogitVector& logits, double p) {
  if (!(p > 0 && p <= 1)) throw InvalidP("nucleus p must be in (0, 1]");
  auto ranked = detail::ranked_support(logits);
  if (p < 1) {
    const double z = logits.log_partition();
    double mass = 0.0;
    std::size_t keep = 0;
    while (keep < ranked.size()) {
      mass += std::exp(logits[ranked[keep]] - z);
      ++keep;
      if (mass >= p) break;
    }
    ranked.resize(keep);
  }
  return detail::keep_only(logits, ranked);
}

// Self-debiasing. With delta(w) = p_target(w) - max_b p_b(w), each target
// probability is scaled by exp(lambda * delta(w)) where delta(w) < 0 and left
// alone otherwise; the result is renormalized.
inline LogitVector debias_logits(const LogitVector& target, std::span<const LogitVector> biased,
                                 double lambda) {
  if (!(lambda >= 0)) throw InvalidArgument("debias lambda must be >= 0");
  for (const auto& b : biased) {
    if (b.size() != target.size()) throw DimensionMismatch("debias: vector lengths differ");
  }
  if (biased.empty() || lambda == 0) return target.normalized();

  const auto pt = target.probabilities();
  std::vector<std::vector<double>> pb;
  pb.reserve(biased.size());
  for (const auto& b : biased) pb.push_back(b.probabilities());

  LogitVector out = target.normalized();
  for (std::size_t w = 0; w < pt.size(); ++w) {
    double worst = 0.0;
    for (const auto& q : pb) worst = std::max(worst, q[w]);
    const double delta = pt[w] - worst;
    if (delta < 0 && out[w] != kNegInf) out[w] += lambda * delta;
  }
  return out.normalized();
}

// Inverse-CDF draw over ascending token id.
inline TokenId sample_token(const LogitVector& dist, Rng& rng) {
  const auto probs = dist.probabilities();
  std::size_t last = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0) last = i;
  }
  if (last == probs.size()) throw DegenerateDistribution();

  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0) continue;
    cum += probs[i];
    if (u < cum) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last);
}

// Autoregressive decoding from `prompt`. Stops on the quote token (when
// `stop_at_quote`), on EOS, or after max_new_tokens generated tokens. The
// stop token is not part of `generated`.
inline GenerationTrace decode_sequence(const LmBackend& backend, std::span<const TokenId> prompt,
                                       const DecodeParams& params, Rng& rng,
                                       bool stop_at_quote = true) {
  if (prompt.empty()) throw InvalidArgument("decode_sequence: empty prompt");
  params.validate();

  GenerationTrace trace;
  trace.prompt.assign(prompt.begin(), prompt.end());
  std::vector<TokenId> context = trace.prompt;
  std::vector<std::vector<TokenId>> debias_contexts;
  if (params.debias) debias_contexts = params.debias->prompts;

  const auto budget = static_cast<std::size_t>(params.max_new_tokens);
  while (trace.generated.size() < budget) {
    LogitVector logits = backend.next_token_logits(context);
    if (params.debias && !debias_contexts.empty()) {
      std::vector<LogitVector> biased;
      biased.reserve(debias_contexts.size());
      for (const auto& dc : debias_contexts) biased.push_back(backend.next_token_logits(dc));
      logits = debias_logits(logits, biased, params.debias->lambda);
    }
    logits = apply_temperature(logits, params.temperature);

    TokenId next = Vocabulary::kEos;
    switch (params.strategy) {
      case Strategy::kGreedy: next = logits.argmax(); break;
      case Strategy::kTopK: next = sample_token(filter_top_k(logits, params.k), rng); break;
      case Strategy::kNucleus: next = sample_token(filter_nucleus(logits, params.p), rng); break;
    }
    trace.step_probs.push_back(std::exp(logits[static_cast<std::size_t>(next)]));

    if (stop_at_quote && next == Vocabulary::kQuote) {
      trace.stop = StopReason::kQuote;
      return trace;
    }
    if (next == Vocabulary::kEos) {
      trace.stop = StopReason::kEos;
      return trace;
    }
    trace.generated.push_back(next);
    context.push_back(next);
    for (auto& dc : debias_contexts) dc.push_back(next);
  }
  trace.stop = StopReason::kMaxLength;
  return trace;
}

}  // namespace zerogen
