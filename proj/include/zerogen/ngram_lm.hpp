#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "zerogen/error.hpp"
#include "zerogen/lm.hpp"

namespace zerogen {

// Add-delta smoothed n-gram model with backoff to shorter contexts.
//
// For a context seen in training,
//   P(w | ctx) = (c(ctx, w) + delta) / (c(ctx) + delta * |V|).
// An unseen context drops its oldest token until a seen one is found; the
// empty (unigram) context is always present after training.
class ToyNGramLm final : public LmBackend {
 public:
  struct ContextStats {
    std::uint64_t total = 0;
    std::map<TokenId, std::uint64_t> next;

    friend bool operator==(const ContextStats&, const ContextStats&) = default;
  };
  using CountTable = std::map<std::vector<TokenId>, ContextStats>;

  // `counts` holds contexts of every length 0..order-1. The unigram context
  // must be present with a positive total.
  ToyNGramLm(Vocabulary vocab, int order, double delta, CountTable counts)
      : vocab_(std::move(vocab)), order_(order), delta_(delta), counts_(std::move(counts)) {
    if (order_ < 1) throw InvalidArgument("n-gram order must be >= 1");
    if (!(delta_ > 0)) throw InvalidArgument("smoothing delta must be > 0");
    auto it = counts_.find({});
    if (it == counts_.end() || it->second.total == 0) throw EmptyCorpus();
    for (const auto& [ctx, stats] : counts_) {
      if (ctx.size() >= static_cast<std::size_t>(order_)) {
        throw InvalidArgument("context longer than order - 1");
      }
      for (TokenId t : ctx) vocab_.check(t);
      for (const auto& [t, c] : stats.next) vocab_.check(t);
    }
  }

  const Vocabulary& vocabulary() const override { return vocab_; }
  int order() const noexcept { return order_; }
  double delta() const noexcept { return delta_; }
  const CountTable& counts() const noexcept { return counts_; }

  LogitVector next_token_logits(std::span<const TokenId> prefix) const override {
    for (TokenId t : prefix) vocab_.check(t);
    return distribution(longest_seen_context(prefix));
  }

  // The full (order-1)-token context used for `prefix`, left-padded with BOS.
  std::vector<TokenId> context_of(std::span<const TokenId> prefix) const {
    const std::size_t want = static_cast<std::size_t>(order_ - 1);
    std::vector<TokenId> ctx;
    ctx.reserve(want);
    const std::size_t have = std::min(want, prefix.size());
    ctx.insert(ctx.end(), want - have, Vocabulary::kBos);
    ctx.insert(ctx.end(), prefix.end() - static_cast<std::ptrdiff_t>(have), prefix.end());
    return ctx;
  }

  // Distribution for exactly `ctx` (possibly unseen), applying backoff.
  LogitVector distribution_for_context(std::vector<TokenId> ctx) const {
    while (!ctx.empty() && !counts_.count(ctx)) ctx.erase(ctx.begin());
    return distribution(counts_.at(ctx));
  }

  friend bool operator==(const ToyNGramLm& a, const ToyNGramLm& b) {
    return a.vocab_ == b.vocab_ && a.order_ == b.order_ && a.delta_ == b.delta_ &&
           a.counts_ == b.counts_;
  }

 private:
  const ContextStats& longest_seen_context(std::span<const TokenId> prefix) const {
    auto ctx = context_of(prefix);
    while (true) {
      if (auto it = counts_.find(ctx); it != counts_.end()) return it->second;
      ctx.erase(ctx.begin());
    }
  }

  LogitVector distribution(const ContextStats& stats) const {
    const double v = static_cast<double>(vocab_.size());
    const double denom = static_cast<double>(stats.total) + delta_ * v;
    LogitVector out(vocab_.size(), std::log(delta_ / denom));
    for (const auto& [t, c] : stats.next) {
      out[static_cast<std::size_t>(t)] = std::log((static_cast<double>(c) + delta_) / denom);
    }
    return out;
  }

  Vocabulary vocab_;
  int order_;
  double delta_;
  CountTable counts_;
};

// Counts every n-gram of order 1..order in the corpus. Each sentence is
// padded with order-1 BOS tokens and terminated by EOS.
inline ToyNGramLm train_toy_lm(const std::vector<std::vector<TokenId>>& corpus,
                               const Vocabulary& vocab, int order, double delta = 0.1) {
  if (corpus.empty()) throw EmptyCorpus();
  if (order < 1) throw InvalidArgument("n-gram order must be >= 1");
  if (!(delta > 0)) throw InvalidArgument("smoothing delta must be > 0");

  ToyNGramLm::CountTable counts;
  const std::size_t pad = static_cast<std::size_t>(order - 1);
  for (const auto& sentence : corpus) {
    std::vector<TokenId> seq(pad, Vocabulary::kBos);
    for (TokenId t : sentence) {
      vocab.check(t);
      seq.push_back(t);
    }
    seq.push_back(Vocabulary::kEos);
    for (std::size_t i = pad; i < seq.size(); ++i) {
      for (std::size_t m = 0; m <= pad; ++m) {
        std::vector<TokenId> ctx(seq.begin() + static_cast<std::ptrdiff_t>(i - m),
                                 seq.begin() + static_cast<std::ptrdiff_t>(i));
        auto& stats = counts[std::move(ctx)];
        ++stats.total;
        ++stats.next[seq[i]];
      }
    }
  }
  return ToyNGramLm(vocab, order, delta, std::move(counts));
}

// Builds the vocabulary from the text lines and trains on them.
inline ToyNGramLm train_toy_lm_from_text(const std::vector<std::string>& lines, int order,
                                         double delta = 0.1) {
  auto vocab = Vocabulary::from_corpus(lines);
  std::vector<std::vector<TokenId>> corpus;
  corpus.reserve(lines.size());
  for (const auto& l : lines) corpus.push_back(tokenize(l, vocab));
  return train_toy_lm(corpus, vocab, order, delta);
}

// Model file:
//   ngram-lm v1 order=<n> delta=<delta>
//   <one token per line, in id order>
//   <ctx ids, space separated>\t<token id>\t<count>
inline void write_ngram_lm(const ToyNGramLm& lm, std::ostream& out) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", lm.delta());
  out << "ngram-lm v1 order=" << lm.order() << " delta=" << buf << '\n';
  for (const auto& t : lm.vocabulary().tokens()) out << t << '\n';
  for (const auto& [ctx, stats] : lm.counts()) {
    std::string ctx_text;
    for (std::size_t i = 0; i < ctx.size(); ++i) {
      if (i) ctx_text.push_back(' ');
      ctx_text += std::to_string(ctx[i]);
    }
    for (const auto& [t, c] : stats.next) out << ctx_text << '\t' << t << '\t' << c << '\n';
  }
}

inline void save_ngram_lm(const ToyNGramLm& lm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_ngram_lm(lm, out);
  if (!out) throw IoError("write failed: " + path.string());
}

inline ToyNGramLm read_ngram_lm(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(source, lineno, "missing header");
  int order = 0;
  double delta = 0;
  {
    char tail = 0;
    if (std::sscanf(line.c_str(), "ngram-lm v1 order=%d delta=%lf%c", &order, &delta, &tail) != 2 ||
        order < 1 || !(delta > 0)) {
      throw ParseError(source, lineno, "bad header: " + line);
    }
  }

  std::vector<std::string> tokens;
  ToyNGramLm::CountTable counts;
  bool in_counts = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto tab1 = line.find('\t');
    if (tab1 == std::string::npos) {
      if (in_counts || line.empty()) throw ParseError(source, lineno, "expected count entry");
      tokens.push_back(line);
      continue;
    }
    in_counts = true;
    const auto tab2 = line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) throw ParseError(source, lineno, "expected three fields");
    std::vector<TokenId> ctx;
    {
      std::istringstream ss(line.substr(0, tab1));
      long long v;
      while (ss >> v) ctx.push_back(static_cast<TokenId>(v));
      if (!ss.eof()) throw ParseError(source, lineno, "bad context ids");
    }
    long long token = -1;
    unsigned long long count = 0;
    try {
      std::size_t used = 0;
      const auto tok_text = line.substr(tab1 + 1, tab2 - tab1 - 1);
      token = std::stoll(tok_text, &used);
      if (used != tok_text.size()) throw std::invalid_argument("trailing");
      const auto cnt_text = line.substr(tab2 + 1);
      count = std::stoull(cnt_text, &used);
      if (used != cnt_text.size() || count == 0) throw std::invalid_argument("count");
    } catch (const std::exception&) {
      throw ParseError(source, lineno, "bad count entry: " + line);
    }
    if (token < 0 || static_cast<std::size_t>(token) >= tokens.size()) {
      throw ParseError(source, lineno, "token id out of range");
    }
    for (TokenId t : ctx) {
      if (t < 0 || static_cast<std::size_t>(t) >= tokens.size()) {
        throw ParseError(source, lineno, "context id out of range");
      }
    }
    if (ctx.size() >= static_cast<std::size_t>(order)) {
      throw ParseError(source, lineno, "context longer than order - 1");
    }
    auto& stats = counts[ctx];
    if (!stats.next.emplace(static_cast<TokenId>(token), count).second) {
      throw ParseError(source, lineno, "duplicate count entry");
    }
    stats.total += count;
  }
  try {
    return ToyNGramLm(Vocabulary::from_tokens(tokens), order, delta, std::move(counts));
  } catch (const InvalidArgument& e) {
    throw ParseError(source, lineno, e.what());
  } catch (const EmptyCorpus&) {
    throw ParseError(source, lineno, "model has no unigram counts");
  }
}

inline ToyNGramLm load_ngram_lm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  return read_ngram_lm(in, path.string());
}

}  // namespace zerogen
