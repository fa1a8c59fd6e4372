#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cctype>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "zerogen/error.hpp"
#include "zerogen/rng.hpp"

namespace zerogen {

template <typename T>
double accuracy(std::span<const T> predictions, std::span<const T> golds) {
  if (predictions.size() != golds.size()) throw LengthMismatch("accuracy: prediction/gold lengths differ");
  if (predictions.empty()) throw EmptyInput("accuracy: no predictions");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) hit += predictions[i] == golds[i];
  return static_cast<double>(hit) / static_cast<double>(golds.size());
}

inline double accuracy(const std::vector<std::string>& predictions, const std::vector<std::string>& golds) {
  return accuracy<std::string>(std::span<const std::string>(predictions), std::span<const std::string>(golds));
}

// SQuAD answer normalization: lowercase, drop punctuation, drop the articles
// a/an/the, collapse whitespace. Returns the remaining tokens.
inline std::vector<std::string> normalize_answer(std::string_view s) {
  std::string cleaned;
  cleaned.reserve(s.size());
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::ispunct(u)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(u)));
  }
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && cur != "a" && cur != "an" && cur != "the") tokens.push_back(cur);
    cur.clear();
  };
  for (char c : cleaned) {
    if (std::isspace(static_cast<unsigned char>(c))) flush();
    else cur.push_back(c);
  }
  flush();
  return tokens;
}

struct EmF1 {
  double em = 0;
  double f1 = 0;
};

inline double token_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : gold) ++counts[t];
  int same = 0;
  for (const auto& t : pred) {
    if (auto it = counts.find(t); it != counts.end() && it->second > 0) {
      --it->second;
      ++same;
    }
  }
  if (same == 0) return 0.0;
  const double precision = static_cast<double>(same) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(same) / static_cast<double>(gold.size());
  return 2 * precision * recall / (precision + recall);
}

inline EmF1 em_f1(std::string_view prediction, std::span<const std::string> golds) {
  if (golds.empty()) throw EmptyGolds();
  const auto pred = normalize_answer(prediction);
  EmF1 out;
  for (const auto& g : golds) {
    const auto gold = normalize_answer(g);
    if (pred == gold) out.em = 1.0;
    out.f1 = std::max(out.f1, token_f1(pred, gold));
  }
  return out;
}

inline EmF1 em_f1(std::string_view prediction, std::initializer_list<std::string> golds) {
  std::vector<std::string> g(golds);
  return em_f1(prediction, std::span<const std::string>(g));
}

using TokenList = std::vector<std::string>;

namespace detail {

struct NgramKeyHash {
  std::size_t operator()(const std::string& s) const noexcept { return static_cast<std::size_t>(fnv1a64(s)); }
};

// Counts of every n-gram (n = 1..4), keyed by the order byte followed by the
// joined tokens.
using NgramCounts = std::unordered_map<std::string, int, NgramKeyHash>;

inline NgramCounts count_ngrams(const TokenList& tokens) {
  NgramCounts out;
  for (int n = 1; n <= 4; ++n) {
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
      std::string key(1, static_cast<char>('0' + n));
      for (int j = 0; j < n; ++j) {
        key.push_back('\x1f');
        key += tokens[i + static_cast<std::size_t>(j)];
      }
      ++out[key];
    }
  }
  return out;
}

// Closest reference length; ties go to the shorter reference.
inline std::size_t closest_length(std::size_t c, std::span<const std::size_t> lengths) {
  std::size_t best = lengths.front();
  for (std::size_t r : lengths) {
    const auto d = r > c ? r - c : c - r;
    const auto bd = best > c ? best - c : c - best;
    if (d < bd || (d == bd && r < best)) best = r;
  }
  return best;
}

// BLEU-4 from the clipped match count per order and the closest reference
// length.
inline double bleu_from_matches(std::size_t cand_len, const std::array<double, 4>& matched,
                                std::size_t ref_len) {
  if (cand_len < 4) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= 4; ++n) {
    const double total = static_cast<double>(cand_len - static_cast<std::size_t>(n) + 1);
    const double m = matched[static_cast<std::size_t>(n - 1)];
    if (m <= 0) return 0.0;
    log_sum += std::log(m / total);
  }
  const double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len)));
  return bp * std::exp(log_sum / 4.0);
}

}  // namespace detail

// Unsmoothed BLEU-4: geometric mean of clipped 1..4-gram precisions times
// the brevity penalty against the closest reference length.
inline double bleu4(const TokenList& candidate, std::span<const TokenList> references) {
  if (references.empty()) throw EmptyReferences();
  if (candidate.size() < 4) return 0.0;
  const auto cand = detail::count_ngrams(candidate);
  std::vector<detail::NgramCounts> refs;
  std::vector<std::size_t> lengths;
  for (const auto& r : references) {
    refs.push_back(detail::count_ngrams(r));
    lengths.push_back(r.size());
  }
  std::array<double, 4> matched{};
  for (const auto& [key, c] : cand) {
    int best = 0;
    for (const auto& r : refs) {
      if (auto it = r.find(key); it != r.end()) best = std::max(best, it->second);
    }
    matched[static_cast<std::size_t>(key[0] - '1')] += std::min(c, best);
  }
  return detail::bleu_from_matches(candidate.size(), matched,
                                   detail::closest_length(candidate.size(), lengths));
}

// Mean BLEU-4 of each sampled text against all other sampled texts.
//
// The corpus is put in canonical (sorted) order before a seeded sample of
// min(sample_size, |corpus|) texts is drawn, so the score does not depend on
// the input order.
inline double self_bleu(std::span<const TokenList> corpus, std::size_t sample_size, Rng& rng) {
  if (corpus.size() < 2) throw CorpusTooSmall("self-BLEU needs at least two texts");
  std::vector<const TokenList*> sorted;
  sorted.reserve(corpus.size());
  for (const auto& t : corpus) sorted.push_back(&t);
  std::sort(sorted.begin(), sorted.end(), [](const TokenList* a, const TokenList* b) { return *a < *b; });

  const std::size_t m = std::min(sample_size, sorted.size());
  if (m < 2) throw CorpusTooSmall("self-BLEU sample needs at least two texts");
  // Partial Fisher-Yates: the first m slots become the sample.
  for (std::size_t i = 0; i < m; ++i) std::swap(sorted[i], sorted[i + rng.below(sorted.size() - i)]);
  sorted.resize(m);

  std::vector<detail::NgramCounts> counts;
  std::vector<std::size_t> lengths;
  counts.reserve(m);
  for (const auto* t : sorted) {
    counts.push_back(detail::count_ngrams(*t));
    lengths.push_back(t->size());
  }

  // For every n-gram, the largest count in any sampled text and the largest
  // count in any other text, so "max over references" excludes the candidate
  // in O(1).
  struct Top2 {
    int best = 0;
    std::size_t owner = SIZE_MAX;
    int second = 0;
  };
  std::unordered_map<std::string, Top2, detail::NgramKeyHash> top;
  for (std::size_t i = 0; i < m; ++i) {
    for (const auto& [key, c] : counts[i]) {
      auto& t = top[key];
      if (c > t.best) {
        t.second = t.best;
        t.best = c;
        t.owner = i;
      } else if (c > t.second) {
        t.second = c;
      }
    }
  }

  double total = 0.0;
  std::vector<std::size_t> other_lengths;
  for (std::size_t i = 0; i < m; ++i) {
    if (lengths[i] < 4) continue;
    std::array<double, 4> matched{};
    for (const auto& [key, c] : counts[i]) {
      const auto& t = top.at(key);
      const int ref = t.owner == i ? t.second : t.best;
      matched[static_cast<std::size_t>(key[0] - '1')] += std::min(c, ref);
    }
    other_lengths.clear();
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) other_lengths.push_back(lengths[j]);
    }
    total += detail::bleu_from_matches(lengths[i], matched,
                                       detail::closest_length(lengths[i], other_lengths));
  }
  return total / static_cast<double>(m);
}

}  // namespace zerogen
