#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

#include "zerogen/decoding.hpp"
#include "zerogen/error.hpp"
#include "zerogen/lm.hpp"
#include "zerogen/prompting.hpp"
#include "zerogen/rng.hpp"

namespace zerogen {

struct PseudoExample {
  std::uint64_t idx = 0;  // sample index that produced the example
  std::string text;
  std::optional<std::string> context;
  std::string label;  // label name, or the answer span for question answering
  std::string template_id;
  std::uint64_t seed = 0;  // per-sample seed the example was decoded with

  friend bool operator==(const PseudoExample&, const PseudoExample&) = default;
};

struct GenerationManifest {
  std::string task;
  std::uint64_t requested = 0;
  std::uint64_t achieved = 0;
  std::uint64_t attempts = 0;
  std::map<std::string, std::uint64_t> rejections;
  std::string config_digest;
  // How often each label was drawn, over all attempts (before filtering).
  std::map<std::string, std::uint64_t> sampled_labels;

  friend bool operator==(const GenerationManifest&, const GenerationManifest&) = default;
};

struct PseudoDataset {
  std::vector<PseudoExample> examples;
  GenerationManifest manifest;

  const std::string& task_id() const noexcept { return manifest.task; }
  std::size_t size() const noexcept { return examples.size(); }

  friend bool operator==(const PseudoDataset&, const PseudoDataset&) = default;
};

struct FilterRules {
  int min_tokens = 5;
  int max_tokens = 128;
  bool require_closing_quote = true;
  // Drop examples whose (context, text, label) was already accepted.
  bool dedup = true;

  void validate() const {
    if (min_tokens >= max_tokens) throw InvalidArgument("filter: min_tokens must be < max_tokens");
  }
};

enum class RejectReason { kTooShort, kTooLong, kNoClosingQuote };

inline std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::kTooShort: return "too-short";
    case RejectReason::kTooLong: return "too-long";
    case RejectReason::kNoClosingQuote: return "no-closing-quote";
  }
  return "?";
}

inline constexpr std::string_view kRejectDuplicate = "duplicate";
inline constexpr std::string_view kRejectNoEntity = "no-entity";

// nullopt means accepted. The quote check comes first: a generation that
// never closed its quote is rejected regardless of length.
inline std::optional<RejectReason> filter_example(std::string_view text, StopReason stop,
                                                  const FilterRules& rules) {
  if (rules.require_closing_quote && stop != StopReason::kQuote) return RejectReason::kNoClosingQuote;
  const auto n = static_cast<long long>(split_words(text).size());
  if (n < rules.min_tokens) return RejectReason::kTooShort;
  if (n > rules.max_tokens) return RejectReason::kTooLong;
  return std::nullopt;
}

namespace detail {

struct WordSpan {
  std::size_t begin = 0, end = 0;  // core word, punctuation stripped
  bool punct_before = false;
  bool punct_after = false;
  bool sentence_initial = false;
};

inline bool is_number_word(std::string_view w) {
  if (w.empty() || !std::isdigit(static_cast<unsigned char>(w.front())) ||
      !std::isdigit(static_cast<unsigned char>(w.back()))) {
    return false;
  }
  for (char c : w) {
    if (!std::isdigit(static_cast<unsigned char>(c)) && c != '.' && c != ',') return false;
  }
  return true;
}

inline bool is_function_word(std::string_view w) {
  static const std::set<std::string, std::less<>> kWords = {
      "a",    "after", "an",    "and",   "as",    "at",   "before", "but",   "by",
      "for",  "from",  "he",    "her",   "here",  "his",  "i",      "if",    "in",
      "it",   "its",   "of",    "on",    "or",    "our",  "she",    "so",    "that",
      "the",  "their", "then",  "there", "these", "they", "this",   "those", "to",
      "we",   "when",  "while", "with",  "yet",   "you"};
  std::string lower(w);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return kWords.count(lower) != 0;
}

inline std::vector<WordSpan> scan_words(std::string_view text) {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  auto is_alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  std::vector<WordSpan> out;
  bool next_initial = true;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    std::size_t b = i, e = j;
    while (b < e && !is_alnum(text[b])) ++b;
    while (e > b && !is_alnum(text[e - 1])) --e;
    if (b < e) {
      WordSpan w{b, e, b > i, e < j, next_initial};
      out.push_back(w);
      next_initial = false;
    }
    for (std::size_t k = e; k < j; ++k) {
      if (text[k] == '.' || text[k] == '!' || text[k] == '?') next_initial = true;
    }
    i = j;
  }
  return out;
}

}  // namespace detail

// Entity candidates of a context, in first-occurrence order, without
// duplicates: maximal runs of capitalized words and standalone numbers. A
// lone capitalized function word at the start of a sentence ("The", "It") is
// not an entity, and neither is the pronoun "I".
inline std::vector<std::string> entity_candidates(std::string_view context) {
  const auto words = detail::scan_words(context);
  std::vector<std::string> out;
  auto add = [&](std::string s) {
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
  };
  auto capitalized = [&](const detail::WordSpan& w) {
    return std::isupper(static_cast<unsigned char>(context[w.begin])) != 0;
  };

  for (std::size_t i = 0; i < words.size();) {
    const auto& w = words[i];
    const auto core = context.substr(w.begin, w.end - w.begin);
    if (detail::is_number_word(core)) {
      add(std::string(core));
      ++i;
      continue;
    }
    if (!capitalized(w)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < words.size() && capitalized(words[j]) && !words[j - 1].punct_after &&
           !words[j].punct_before && !words[j].sentence_initial) {
      ++j;
    }
    const bool lone = j == i + 1;
    const bool skip = lone && (core == "I" || (w.sentence_initial && detail::is_function_word(core)));
    if (!skip) add(std::string(context.substr(w.begin, words[j - 1].end - w.begin)));
    i = j;
  }
  return out;
}

// Uniform choice among the entity candidates of `context`.
inline std::string select_answer_entity(std::string_view context, Rng& rng) {
  if (context.empty()) throw InvalidArgument("select_answer_entity: empty context");
  auto cands = entity_candidates(context);
  if (cands.empty()) throw NoEntityFound(std::string(context));
  return cands[rng.below(cands.size())];
}

struct GenerationOptions {
  std::size_t workers = 1;
  std::string config_digest;
};

namespace detail {

// What one sample index produced, before filtering and dedup.
struct AttemptResult {
  PseudoExample candidate;
  StopReason stop = StopReason::kMaxLength;
  std::optional<std::string> sampled_label;
  bool no_entity = false;
};

// Runs attempts [0, max_attempts) through `attempt` and assembles them in
// index order until `n` examples are accepted. Attempts are computed in
// parallel batches; results past the stopping point are discarded, so the
// output does not depend on the worker count.
template <typename AttemptFn>
PseudoDataset assemble(const std::string& task_id, std::uint64_t n, const FilterRules& rules,
                       const GenerationOptions& opts, AttemptFn&& attempt) {
  PseudoDataset ds;
  ds.manifest.task = task_id;
  ds.manifest.requested = n;
  ds.manifest.config_digest = opts.config_digest;
  const std::uint64_t max_attempts = 20 * n;

  std::set<std::tuple<std::optional<std::string>, std::string, std::string>> seen;
  std::uint64_t next = 0;
  std::vector<AttemptResult> batch;
  const std::size_t workers = std::max<std::size_t>(1, opts.workers);

  while (ds.examples.size() < n && next < max_attempts) {
    const std::uint64_t want = std::max<std::uint64_t>(64, 2 * (n - ds.examples.size()));
    const std::uint64_t count = std::min(want, max_attempts - next);
    batch.assign(count, AttemptResult{});

    if (workers == 1 || count == 1) {
      for (std::uint64_t k = 0; k < count; ++k) batch[k] = attempt(next + k);
    } else {
      std::atomic<std::uint64_t> cursor{0};
      std::vector<std::exception_ptr> errors(workers);
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < std::min<std::uint64_t>(workers, count); ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::uint64_t k; (k = cursor.fetch_add(1)) < count;) batch[k] = attempt(next + k);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }

    for (auto& r : batch) {
      if (ds.examples.size() >= n) break;
      ++ds.manifest.attempts;
      if (r.sampled_label) ++ds.manifest.sampled_labels[*r.sampled_label];
      if (r.no_entity) {
        ++ds.manifest.rejections[std::string(kRejectNoEntity)];
        continue;
      }
      if (auto reason = filter_example(r.candidate.text, r.stop, rules)) {
        ++ds.manifest.rejections[std::string(to_string(*reason))];
        continue;
      }
      if (rules.dedup &&
          !seen.emplace(r.candidate.context, r.candidate.text, r.candidate.label).second) {
        ++ds.manifest.rejections[std::string(kRejectDuplicate)];
        continue;
      }
      ds.examples.push_back(std::move(r.candidate));
    }
    next += count;
  }
  ds.manifest.achieved = ds.examples.size();
  return ds;
}

inline std::uint64_t sample_seed(std::uint64_t master, std::uint64_t idx) {
  return derive_seed(master, "sample", idx);
}

// Generation prompts of every label except `target`, for self-debiasing.
inline std::vector<std::vector<TokenId>> competing_prompts(const TaskSpec& task, std::size_t target,
                                                           const std::optional<std::string>& context,
                                                           const Vocabulary& vocab) {
  std::vector<std::vector<TokenId>> out;
  for (const auto& l : task.labels) {
    if (l.index == target) continue;
    SlotBindings b;
    b.c = context;
    b.y = l.word_text();
    out.push_back(encode_prompt(instantiate_prompt(task.generation, b), vocab));
  }
  return out;
}

inline AttemptResult decode_attempt(const LmBackend& backend, const TaskSpec& task,
                                    const std::vector<TokenId>& prompt, DecodeParams params,
                                    std::uint64_t idx, std::uint64_t seed) {
  AttemptResult r;
  Rng rng(derive_seed(seed, "decoder"));
  auto trace = decode_sequence(backend, prompt, params, rng, task.generation.opens_quote);
  r.candidate.idx = idx;
  r.candidate.text = detokenize(trace.generated, backend.vocabulary());
  r.candidate.template_id = task.generation.id;
  r.candidate.seed = seed;
  r.stop = trace.stop;
  return r;
}

inline FilterRules effective_rules(FilterRules rules, const TaskSpec& task) {
  rules.require_closing_quote = task.generation.opens_quote;
  rules.validate();
  return rules;
}

}  // namespace detail

// Single-sentence pipeline: per sample index draw a label uniformly, decode
// from its generation prompt, filter and dedup. Stops at n accepted examples
// or after 20 * n attempts; a shortfall is recorded in the manifest.
inline PseudoDataset generate_single_sentence_dataset(const LmBackend& backend, const TaskSpec& task,
                                                      std::uint64_t n, const DecodeParams& params,
                                                      const FilterRules& rules, std::uint64_t seed,
                                                      const GenerationOptions& opts = {}) {
  if (task.kind != TaskKind::kSingleSentence) {
    throw InvalidArgument("task " + task.id + " is not a single-sentence classification task");
  }
  if (task.labels.empty()) throw EmptyLabelSet();
  params.validate();
  const auto eff = detail::effective_rules(rules, task);
  const auto& vocab = backend.vocabulary();

  std::vector<std::vector<TokenId>> prompts;
  std::vector<std::vector<std::vector<TokenId>>> competitors;
  for (const auto& l : task.labels) {
    SlotBindings b;
    b.y = l.word_text();
    prompts.push_back(encode_prompt(instantiate_prompt(task.generation, b), vocab));
    competitors.push_back(detail::competing_prompts(task, l.index, std::nullopt, vocab));
  }

  auto attempt = [&](std::uint64_t idx) {
    const auto seed_i = detail::sample_seed(seed, idx);
    Rng label_rng(derive_seed(seed_i, "label-sampler"));
    const Label& label = sample_label(task.labels, label_rng);
    DecodeParams p = params;
    if (p.debias) p.debias->prompts = competitors[label.index];
    auto r = detail::decode_attempt(backend, task, prompts[label.index], std::move(p), idx, seed_i);
    r.candidate.label = label.name;
    r.sampled_label = label.name;
    return r;
  };
  return detail::assemble(task.id, n, eff, opts, attempt);
}

// Two-step pipeline for sentence-pair classification and question answering:
// draw a context uniformly (with replacement), then a label (classification)
// or an answer entity of the context (QA), and decode the second sentence
// from the combined prompt. Contexts without an entity are counted as
// "no-entity" rejections.
inline PseudoDataset generate_pair_dataset(const LmBackend& backend, const TaskSpec& task,
                                           std::span<const std::string> contexts, std::uint64_t n,
                                           const DecodeParams& params, const FilterRules& rules,
                                           std::uint64_t seed, const GenerationOptions& opts = {}) {
  if (task.kind == TaskKind::kSingleSentence) {
    throw InvalidArgument("task " + task.id + " is not a sentence-pair or question-answering task");
  }
  if (contexts.empty()) throw EmptyCorpus();
  params.validate();
  const auto eff = detail::effective_rules(rules, task);
  const auto& vocab = backend.vocabulary();
  const bool qa = task.kind == TaskKind::kQuestionAnswering;

  auto attempt = [&](std::uint64_t idx) {
    const auto seed_i = detail::sample_seed(seed, idx);
    Rng ctx_rng(derive_seed(seed_i, "context-sampler"));
    const std::string& ctx = contexts[ctx_rng.below(contexts.size())];

    SlotBindings b;
    b.c = ctx;
    std::string label;
    std::optional<std::size_t> label_index;
    if (qa) {
      Rng entity_rng(derive_seed(seed_i, "entity-sampler"));
      auto cands = entity_candidates(ctx);
      if (cands.empty()) {
        detail::AttemptResult r;
        r.candidate.idx = idx;
        r.candidate.seed = seed_i;
        r.no_entity = true;
        return r;
      }
      label = cands[entity_rng.below(cands.size())];
      b.y = label;
    } else {
      Rng label_rng(derive_seed(seed_i, "label-sampler"));
      const Label& l = sample_label(task.labels, label_rng);
      label = l.name;
      label_index = l.index;
      b.y = l.word_text();
    }

    DecodeParams p = params;
    if (p.debias) {
      if (label_index) p.debias->prompts = detail::competing_prompts(task, *label_index, ctx, vocab);
      else p.debias.reset();
    }
    auto prompt = encode_prompt(instantiate_prompt(task.generation, b), vocab);
    auto r = detail::decode_attempt(backend, task, prompt, std::move(p), idx, seed_i);
    r.candidate.context = ctx;
    r.candidate.label = label;
    if (label_index) r.sampled_label = label;
    return r;
  };
  return detail::assemble(task.id, n, eff, opts, attempt);
}

}  // namespace zerogen
