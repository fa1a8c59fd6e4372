#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zerogen/error.hpp"
#include "zerogen/lm.hpp"
#include "zerogen/rng.hpp"

namespace zerogen {

enum class TaskKind { kSingleSentence, kSentencePair, kQuestionAnswering };

inline std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::kSingleSentence: return "single-sentence-classification";
    case TaskKind::kSentencePair: return "sentence-pair-classification";
    case TaskKind::kQuestionAnswering: return "question-answering";
  }
  return "?";
}

inline std::optional<TaskKind> parse_task_kind(std::string_view s) {
  if (s == "single-sentence-classification") return TaskKind::kSingleSentence;
  if (s == "sentence-pair-classification") return TaskKind::kSentencePair;
  if (s == "question-answering") return TaskKind::kQuestionAnswering;
  return std::nullopt;
}

enum class PromptType { kControlCode, kControlCodeWithTask, kNaturalLanguage };

inline std::string_view to_string(PromptType t) {
  switch (t) {
    case PromptType::kControlCode: return "control-code";
    case PromptType::kControlCodeWithTask: return "control-code-with-task-description";
    case PromptType::kNaturalLanguage: return "natural-language";
  }
  return "?";
}

inline std::optional<PromptType> parse_prompt_type(std::string_view s) {
  if (s == "control-code") return PromptType::kControlCode;
  if (s == "control-code-with-task-description") return PromptType::kControlCodeWithTask;
  if (s == "natural-language") return PromptType::kNaturalLanguage;
  return std::nullopt;
}

struct Label {
  std::size_t index = 0;
  std::string name;
  std::vector<std::string> words;  // verbalizer

  // Verbalizer as it is substituted for <Y>.
  std::string word_text() const {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i) out.push_back(' ');
      out += words[i];
    }
    return out;
  }

  friend bool operator==(const Label&, const Label&) = default;
};

// Slot values for <X> (input), <C> (context) and <Y> (label word).
struct SlotBindings {
  std::optional<std::string> x;
  std::optional<std::string> c;
  std::optional<std::string> y;
};

struct PromptTemplate {
  std::string id;
  std::string pattern;
  bool opens_quote = false;
  PromptType type = PromptType::kNaturalLanguage;

  // Throws InvalidArgument when the pattern holds an unknown <A>-style slot
  // or opens_quote disagrees with the final character.
  void validate() const {
    for (std::size_t i = 0; i + 2 < pattern.size(); ++i) {
      if (pattern[i] == '<' && pattern[i + 2] == '>' && pattern[i + 1] >= 'A' && pattern[i + 1] <= 'Z') {
        const char s = pattern[i + 1];
        if (s != 'X' && s != 'C' && s != 'Y') {
          throw InvalidArgument("template " + id + ": unknown slot <" + std::string(1, s) + ">");
        }
      }
    }
    if (opens_quote && (pattern.empty() || pattern.back() != '"')) {
      throw InvalidArgument("template " + id + ": opens_quote set but pattern does not end with a quote");
    }
  }

  bool has_slot(char s) const { return pattern.find(std::string{'<', s, '>'}) != std::string::npos; }

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

struct TaskSpec {
  std::string id;
  TaskKind kind = TaskKind::kSingleSentence;
  std::vector<Label> labels;  // empty for question answering
  PromptTemplate generation;
  std::optional<PromptTemplate> baseline;
  int min_tokens = 5;
  int max_tokens = 128;

  bool is_classification() const { return kind != TaskKind::kQuestionAnswering; }

  std::optional<std::size_t> label_index(std::string_view name) const {
    for (const auto& l : labels) {
      if (l.name == name) return l.index;
    }
    return std::nullopt;
  }

  void validate() const {
    if (is_classification()) {
      if (labels.size() < 2) throw InvalidArgument("task " + id + ": classification needs >= 2 labels");
    } else if (!labels.empty()) {
      throw InvalidArgument("task " + id + ": question answering has no predefined labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i].index != i) throw InvalidArgument("task " + id + ": label indices must be dense");
      if (labels[i].words.empty()) throw InvalidArgument("task " + id + ": label " + labels[i].name + " has no verbalizer");
      for (std::size_t j = 0; j < i; ++j) {
        if (labels[j].name == labels[i].name) throw InvalidArgument("task " + id + ": duplicate label " + labels[i].name);
      }
    }
    if (min_tokens >= max_tokens) throw InvalidArgument("task " + id + ": min_tokens must be < max_tokens");
    generation.validate();
    if (baseline) baseline->validate();
  }
};

// Verbalizer words that map to UNK under `vocab`.
inline std::vector<std::string> verbalizer_oov(const TaskSpec& task, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (const auto& l : task.labels) {
    for (const auto& w : l.words) {
      for (TokenId t : tokenize(w, vocab)) {
        if (t == Vocabulary::kUnk) out.push_back(w);
      }
    }
  }
  return out;
}

// Uniform draw over the label set.
inline const Label& sample_label(std::span<const Label> labels, Rng& rng) {
  if (labels.empty()) throw EmptyLabelSet();
  return labels[rng.below(labels.size())];
}

// Single-pass textual substitution of <X>, <C>, <Y>. Substituted text is not
// rescanned.
inline std::string instantiate_prompt(const PromptTemplate& tpl, const SlotBindings& bindings) {
  const std::string& p = tpl.pattern;
  std::string out;
  out.reserve(p.size() + 64);
  for (std::size_t i = 0; i < p.size();) {
    if (p[i] == '<' && i + 2 < p.size() && p[i + 2] == '>') {
      const std::optional<std::string>* slot = nullptr;
      switch (p[i + 1]) {
        case 'X': slot = &bindings.x; break;
        case 'C': slot = &bindings.c; break;
        case 'Y': slot = &bindings.y; break;
        default: break;
      }
      if (slot) {
        if (!slot->has_value()) throw MissingSlot(p.substr(i, 3));
        out += **slot;
        i += 3;
        continue;
      }
    }
    out.push_back(p[i++]);
  }
  return out;
}

struct PromptingResult {
  std::size_t label = 0;
  std::vector<double> scores;  // one per label, in label order
};

// Zero-shot classification by verbalizer likelihood.
//
// The baseline pattern is split at its first <Y>. The part before (with <X>
// and <C> bound) is the scoring prefix. A label's score is the mean per-token
// log-probability of its verbalizer, plus the summed log-probability of the
// remaining pattern text after <Y>. Ties go to the lowest label index.
inline PromptingResult prompting_classify(const LmBackend& backend, const TaskSpec& task,
                                          std::string_view input_x,
                                          std::optional<std::string_view> context_c = std::nullopt) {
  if (!task.is_classification()) throw InvalidArgument("prompting_classify: task is not a classification task");
  if (!task.baseline) throw InvalidArgument("prompting_classify: task " + task.id + " has no baseline template");
  if (task.labels.empty()) throw EmptyLabelSet();

  const auto& tpl = *task.baseline;
  const auto cut = tpl.pattern.find("<Y>");
  if (cut == std::string::npos) throw MissingSlot("<Y>");

  SlotBindings b;
  b.x = std::string(input_x);
  if (context_c) b.c = std::string(*context_c);
  PromptTemplate head{tpl.id, tpl.pattern.substr(0, cut), false, tpl.type};
  PromptTemplate tail{tpl.id, tpl.pattern.substr(cut + 3), false, tpl.type};

  const auto& vocab = backend.vocabulary();
  const auto prefix = encode_prompt(instantiate_prompt(head, b), vocab);

  PromptingResult result;
  result.scores.reserve(task.labels.size());
  for (const auto& label : task.labels) {
    auto verbal = tokenize(label.word_text(), vocab);
    if (verbal.empty()) throw InvalidArgument("label " + label.name + " has an empty verbalizer");
    b.y = label.word_text();
    auto rest = tokenize(instantiate_prompt(tail, b), vocab);

    double score = sequence_logprob(backend, prefix, verbal) / static_cast<double>(verbal.size());
    if (!rest.empty()) {
      auto ctx = prefix;
      ctx.insert(ctx.end(), verbal.begin(), verbal.end());
      score += sequence_logprob(backend, ctx, rest);
    }
    result.scores.push_back(score);
  }
  for (std::size_t i = 1; i < result.scores.size(); ++i) {
    if (result.scores[i] > result.scores[result.label]) result.label = i;
  }
  return result;
}

}  // namespace zerogen
