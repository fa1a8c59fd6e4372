#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "zerogen/dataset_io.hpp"
#include "zerogen/rng.hpp"
#include "zerogen/synthesis.hpp"

namespace zerogen {

// A small synthetic world: a movie-review sentiment language with a
// class-specific lexicon, plus people/places/years sentences for the pair
// tasks. Used for examples, smoke runs and acceptance checks.
struct ToyWorld {
  std::vector<std::string> lm_corpus;
  std::vector<PseudoExample> gold_train;
  std::vector<PseudoExample> gold_test;
  std::vector<std::string> contexts;
  std::string catalog;
  std::string config;
};

struct ToyWorldSizes {
  std::size_t lm_sentences_per_class = 2000;
  std::size_t gold_train = 1000;
  std::size_t gold_test = 1000;
  std::size_t contexts = 40;
};

namespace toy {

inline constexpr std::array<const char*, 12> kPositiveAdjectives = {
    "brilliant", "wonderful", "charming", "moving",  "delightful", "superb",
    "gripping",  "touching",  "clever",   "stunning", "joyful",    "fresh"};
inline constexpr std::array<const char*, 12> kNegativeAdjectives = {
    "boring", "dull", "awful", "clumsy", "tedious", "bland",
    "messy",  "lifeless", "painful", "shallow", "stale", "weak"};
inline constexpr std::array<const char*, 10> kNouns = {"acting", "plot",   "story",   "score",   "cast",
                                                       "script", "pacing", "ending",  "visuals", "dialogue"};
inline constexpr std::array<const char*, 3> kPositiveConjunctions = {"and", "plus", "with"};
inline constexpr std::array<const char*, 3> kNegativeConjunctions = {"but", "yet", "though"};
// Sentence openers that never occur in the language-model corpus.
inline constexpr std::array<const char*, 4> kOpeners = {"overall ,", "honestly ,", "in short ,", "to be fair ,"};

inline constexpr std::array<const char*, 6> kNames = {"Alice", "Bob", "Carol", "David", "Emma", "Frank"};
inline constexpr std::array<const char*, 5> kCities = {"Paris", "London", "Berlin", "Tokyo", "Rome"};
inline constexpr std::array<int, 5> kYears = {1995, 2001, 2008, 2013, 2019};

template <typename A>
const char* pick(const A& a, Rng& rng) {
  return a[rng.below(a.size())];
}

// ADJ ADJ NOUN (CONJ ADJ ADJ NOUN){0..3} .
inline std::string review_sentence(bool positive, Rng& rng) {
  const auto clauses = 1 + rng.below(4);
  std::string s;
  for (std::uint64_t c = 0; c < clauses; ++c) {
    if (c) s += std::string(" ") + (positive ? pick(kPositiveConjunctions, rng) : pick(kNegativeConjunctions, rng)) + " ";
    for (int a = 0; a < 2; ++a) {
      s += positive ? pick(kPositiveAdjectives, rng) : pick(kNegativeAdjectives, rng);
      s += " ";
    }
    s += pick(kNouns, rng);
  }
  return s + " .";
}

struct Event {
  std::string a, b, city;
  int year;
};

inline Event random_event(Rng& rng) {
  Event e;
  e.a = pick(kNames, rng);
  do e.b = pick(kNames, rng); while (e.b == e.a);
  e.city = pick(kCities, rng);
  e.year = kYears[rng.below(kYears.size())];
  return e;
}

inline std::string event_context(const Event& e) {
  return e.a + " met " + e.b + " in " + e.city + " in " + std::to_string(e.year) + " .";
}

inline std::string question_for(const Event& e, const std::string& answer) {
  if (answer == e.city) return "where did " + e.a + " meet " + e.b + " ?";
  if (answer == std::to_string(e.year)) return "when did " + e.a + " meet " + e.b + " ?";
  if (answer == e.a) return "who met " + e.b + " in " + e.city + " ?";
  return "who did " + e.a + " meet in " + e.city + " ?";
}

inline std::string hypothesis_for(const Event& e, bool entailed, Rng& rng) {
  if (entailed) {
    switch (rng.below(3)) {
      case 0: return e.a + " met " + e.b + " .";
      case 1: return e.a + " was in " + e.city + " in " + std::to_string(e.year) + " .";
      default: return e.b + " was in " + e.city + " .";
    }
  }
  std::string other;
  do other = pick(kCities, rng); while (other == e.city);
  return rng.below(2) ? e.a + " was in " + other + " in " + std::to_string(e.year) + " ."
                      : e.b + " never met " + e.a + " .";
}

inline const char* kCatalog = R"(# Prompt catalog for the toy world.

[template.sentiment-gen]
pattern = "The following movie review is <Y> \""
opens_quote = true
type = natural-language

[template.sentiment-score]
pattern = "The following movie review is <Y> \" <X> \""
type = natural-language

[template.nli-gen]
pattern = "Based on the fact that \" <C> \" , it is <Y> \""
opens_quote = true
type = natural-language

[template.nli-score]
pattern = "Based on the fact that \" <C> \" , it is <Y> \" <X> \""
type = natural-language

[template.qa-gen]
pattern = "The context is : \" <C> \" \" <Y> \" is the answer to the following question \""
opens_quote = true
type = natural-language

[task.sentiment-toy]
kind = single-sentence-classification
labels = positive, negative
generation_template = sentiment-gen
baseline_template = sentiment-score
min_tokens = 4
max_tokens = 40

[task.nli-toy]
kind = sentence-pair-classification
labels = entailment, not_entailment
verbalizer.entailment = true
verbalizer.not_entailment = false
generation_template = nli-gen
baseline_template = nli-score
min_tokens = 3
max_tokens = 40

[task.qa-toy]
kind = question-answering
generation_template = qa-gen
min_tokens = 3
max_tokens = 40
)";

inline const char* kConfig = R"(# Toy-world run: trains a trigram model on the bundled corpus at load time.
seed = 20221

[task]
id = sentiment-toy
contexts = contexts.txt

[prompts]
catalog = catalog.cfg

[lm.train]
corpus = lm_corpus.txt
order = 3
delta = 0.1

[decode]
strategy = nucleus
k = 40
p = 0.9
temperature = 1.0
max_new_tokens = 40

[filter]
dedup = true

[generate]
n = 2000
workers = 1

[train]
learning_rate = 0.1
epochs = 10
l2 = 0.00001
validation_fraction = 0.1

[output]
dir = out
)";

}  // namespace toy

inline ToyWorld make_toy_world(std::uint64_t seed = 7, const ToyWorldSizes& sizes = {}) {
  using namespace toy;
  ToyWorld w;
  Rng rng(derive_seed(seed, "toy-world"));

  for (std::size_t i = 0; i < 2 * sizes.lm_sentences_per_class; ++i) {
    const bool positive = i % 2 == 0;
    w.lm_corpus.push_back(std::string("The following movie review is ") + (positive ? "positive" : "negative") +
                          " \" " + review_sentence(positive, rng) + " \"");
  }

  std::vector<Event> events;
  for (std::size_t i = 0; i < sizes.contexts; ++i) {
    events.push_back(random_event(rng));
    w.contexts.push_back(event_context(events.back()));
  }
  for (std::size_t i = 0; i < 8 * sizes.contexts; ++i) {
    const auto& e = events[i % events.size()];
    const std::string ctx = event_context(e);
    const std::array<std::string, 4> answers = {e.a, e.b, e.city, std::to_string(e.year)};
    const auto& ans = answers[rng.below(answers.size())];
    w.lm_corpus.push_back("The context is : \" " + ctx + " \" \" " + ans +
                          " \" is the answer to the following question \" " + question_for(e, ans) + " \"");
    const bool entailed = i % 2 == 0;
    w.lm_corpus.push_back("Based on the fact that \" " + ctx + " \" , it is " + (entailed ? "true" : "false") +
                          " \" " + hypothesis_for(e, entailed, rng) + " \"");
  }

  auto gold = [&](std::size_t n, const std::string& tag) {
    std::vector<PseudoExample> out;
    Rng g(derive_seed(seed, tag));
    for (std::size_t i = 0; i < n; ++i) {
      const bool positive = i % 2 == 0;
      std::string text = review_sentence(positive, g);
      if (g.uniform() < 0.4) text = std::string(pick(kOpeners, g)) + " " + text;
      PseudoExample ex;
      ex.idx = i;
      ex.text = text;
      ex.label = positive ? "positive" : "negative";
      ex.template_id = "gold";
      ex.seed = 0;
      out.push_back(std::move(ex));
    }
    return out;
  };
  w.gold_train = gold(sizes.gold_train, "gold-train");
  w.gold_test = gold(sizes.gold_test, "gold-test");
  w.catalog = kCatalog;
  w.config = kConfig;
  return w;
}

inline void write_toy_world(const ToyWorld& w, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto lines = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& l : v) s += l + "\n";
    return s;
  };
  detail::write_text_file(dir / "lm_corpus.txt", lines(w.lm_corpus));
  detail::write_text_file(dir / "contexts.txt", lines(w.contexts));
  detail::write_text_file(dir / "catalog.cfg", w.catalog);
  detail::write_text_file(dir / "run.cfg", w.config);
  write_examples(w.gold_train, dir / "gold_train.jsonl");
  write_examples(w.gold_test, dir / "gold_test.jsonl");
}

}  // namespace zerogen
