#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "zerogen/metrics.hpp"

using namespace zerogen;

namespace {

// Textbook BLEU-4 over explicit n-gram vectors.
double reference_bleu(const TokenList& c, const std::vector<TokenList>& refs) {
  if (c.size() < 4) return 0.0;
  auto grams = [](const TokenList& t, std::size_t n) {
    std::map<TokenList, int> m;
    for (std::size_t i = 0; i + n <= t.size(); ++i) ++m[TokenList(t.begin() + i, t.begin() + i + n)];
    return m;
  };
  double log_p = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    int clipped = 0;
    for (const auto& [g, cnt] : grams(c, n)) {
      int best = 0;
      for (const auto& r : refs) {
        auto rg = grams(r, n);
        if (rg.count(g)) best = std::max(best, rg[g]);
      }
      clipped += std::min(cnt, best);
    }
    if (clipped == 0) return 0.0;
    log_p += std::log(static_cast<double>(clipped) / static_cast<double>(c.size() - n + 1));
  }
  std::size_t r = refs[0].size();
  for (const auto& ref : refs) {
    const auto d = [&](std::size_t x) { return x > c.size() ? x - c.size() : c.size() - x; };
    if (d(ref.size()) < d(r) || (d(ref.size()) == d(r) && ref.size() < r)) r = ref.size();
  }
  const double bp = c.size() >= r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c.size()));
  return bp * std::exp(log_p / 4);
}

std::vector<TokenList> random_corpus(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::vector<TokenList> out;
  for (std::size_t i = 0; i < n; ++i) {
    TokenList t;
    const auto len = 3 + g() % 8;
    for (std::size_t j = 0; j < len; ++j) t.push_back(std::string(1, static_cast<char>('a' + g() % 4)));
    out.push_back(t);
  }
  return out;
}

}  // namespace

TEST(Accuracy, Basic) {
  EXPECT_DOUBLE_EQ(accuracy({"a", "b", "c", "a"}, {"a", "b", "a", "a"}), 0.75);
  EXPECT_THROW(accuracy({"a"}, {"a", "b"}), LengthMismatch);
  EXPECT_THROW(accuracy({}, {}), EmptyInput);
}

TEST(EmF1, Normalization) {
  auto r = em_f1("The Cat, sat!", {"cat sat"});
  EXPECT_EQ(r.em, 1.0);
  EXPECT_EQ(r.f1, 1.0);
  EXPECT_EQ(normalize_answer("  An  apple a day. "), (std::vector<std::string>{"apple", "day"}));
}

TEST(EmF1, PartialOverlap) {
  auto r = em_f1("the cat sat", {"cat sat down"});
  EXPECT_EQ(r.em, 0.0);
  EXPECT_NEAR(r.f1, 0.8, 1e-12);
  r = em_f1("", {"x"});
  EXPECT_EQ(r.em, 0.0);
  EXPECT_EQ(r.f1, 0.0);
  r = em_f1("a the", {"an"});
  EXPECT_EQ(r.em, 1.0);
  EXPECT_EQ(r.f1, 1.0);
}

TEST(EmF1, SurfaceVariantsMatch) {
  for (const char* v : {"The Big  Apple!", "big apple", "a BIG, apple.", "  an big apple  "}) {
    EXPECT_EQ(em_f1(v, {"the big apple"}).em, 1.0) << v;
  }
}

TEST(EmF1, MaxOverGoldsAndEdgeCases) {
  auto r = em_f1("paris", {"london", "Paris"});
  EXPECT_EQ(r.em, 1.0);
  EXPECT_EQ(em_f1("london", {"paris"}).f1, 0.0);
  EXPECT_EQ(em_f1("the", {"a"}).em, 1.0);
  EXPECT_THROW(em_f1("x", std::span<const std::string>{}), EmptyGolds);
}

TEST(Bleu4, BrevityPenaltyExample) {
  std::vector<TokenList> refs = {{"a", "b", "c", "d", "e"}};
  EXPECT_NEAR(bleu4({"a", "b", "c", "d"}, refs), 0.778801, 1e-6);
}

TEST(Bleu4, ExactAndDisjoint) {
  std::vector<TokenList> refs = {{"x", "y", "z", "w", "v"}, {"a", "b", "c", "d"}};
  EXPECT_DOUBLE_EQ(bleu4({"a", "b", "c", "d"}, refs), 1.0);
  EXPECT_EQ(bleu4({"p", "q", "r", "s"}, refs), 0.0);
  EXPECT_EQ(bleu4({"a", "b", "c"}, refs), 0.0);
  EXPECT_THROW(bleu4({"a"}, std::span<const TokenList>{}), EmptyReferences);
}

TEST(Bleu4, MatchesReferenceImplementation) {
  auto corpus = random_corpus(80, 5);
  for (std::size_t i = 0; i + 3 < corpus.size(); i += 4) {
    std::vector<TokenList> refs(corpus.begin() + i + 1, corpus.begin() + i + 4);
    EXPECT_NEAR(bleu4(corpus[i], refs), reference_bleu(corpus[i], refs), 1e-12);
  }
}

TEST(Bleu4, AddingCandidateAsReferenceNeverLowersScore) {
  auto corpus = random_corpus(60, 13);
  for (std::size_t i = 0; i + 2 < corpus.size(); i += 3) {
    std::vector<TokenList> refs(corpus.begin() + i + 1, corpus.begin() + i + 3);
    const double before = bleu4(corpus[i], refs);
    EXPECT_GE(before, 0.0);
    EXPECT_LE(before, 1.0);
    refs.push_back(corpus[i]);
    EXPECT_GE(bleu4(corpus[i], refs), before);
  }
}

TEST(SelfBleu, IdenticalAndDisjointCorpora) {
  std::vector<TokenList> same(5, TokenList{"a", "b", "c", "d", "e"});
  Rng rng(1);
  EXPECT_DOUBLE_EQ(self_bleu(same, 100, rng), 1.0);
  std::vector<TokenList> disjoint;
  for (int i = 0; i < 5; ++i) {
    TokenList t;
    for (int j = 0; j < 5; ++j) t.push_back("w" + std::to_string(i) + "_" + std::to_string(j));
    disjoint.push_back(t);
  }
  EXPECT_EQ(self_bleu(disjoint, 100, rng), 0.0);
}

TEST(SelfBleu, MatchesLeaveOneOutMean) {
  auto corpus = random_corpus(40, 9);
  double total = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    std::vector<TokenList> others;
    for (std::size_t j = 0; j < corpus.size(); ++j) {
      if (j != i) others.push_back(corpus[j]);
    }
    total += reference_bleu(corpus[i], others);
  }
  Rng rng(3);
  EXPECT_NEAR(self_bleu(corpus, 1000, rng), total / static_cast<double>(corpus.size()), 1e-12);
}

TEST(SelfBleu, IndependentOfInputOrder) {
  auto corpus = random_corpus(300, 2);
  auto shuffled = corpus;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(8));
  Rng a(11), b(11);
  EXPECT_DOUBLE_EQ(self_bleu(corpus, 50, a), self_bleu(shuffled, 50, b));
}

TEST(SelfBleu, InRangeAndTooSmall) {
  auto corpus = random_corpus(100, 4);
  Rng rng(6);
  const double s = self_bleu(corpus, 30, rng);
  EXPECT_GE(s, 0.0);
  EXPECT_LE(s, 1.0);
  EXPECT_THROW(self_bleu(random_corpus(1, 1), 10, rng), CorpusTooSmall);
  EXPECT_THROW(self_bleu(corpus, 1, rng), CorpusTooSmall);
}
