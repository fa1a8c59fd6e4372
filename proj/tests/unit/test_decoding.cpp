#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "table_lm.hpp"
#include "zerogen/decoding.hpp"
#include "zerogen/ngram_lm.hpp"

using namespace zerogen;

namespace {

LogitVector scores(std::vector<double> v) { return LogitVector(std::move(v)).normalized(); }

LogitVector probs(std::vector<double> p) { return LogitVector::from_probabilities(p); }

void expect_probs(const LogitVector& l, const std::vector<double>& want, double tol = 1e-4) {
  auto p = l.probabilities();
  ASSERT_EQ(p.size(), want.size());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], want[i], tol) << "entry " << i;
}

double mass(const LogitVector& l) {
  double s = 0;
  for (double v : l.values()) s += std::exp(v);
  return s;
}

}  // namespace

TEST(Temperature, OneIsIdentity) {
  auto l = scores({1.0, -0.5, 2.0});
  expect_probs(apply_temperature(l, 1.0), l.probabilities(), 1e-12);
}

TEST(Temperature, HalfSharpensToSoftmaxOfDoubledScores) {
  // ln[0.7311, 0.2689] is the normalized form of raw scores [1, 0].
  expect_probs(apply_temperature(scores({1.0, 0.0}), 0.5), {0.880797, 0.119203});
}

TEST(Temperature, LargeTApproachesUniformOverSupport) {
  auto l = apply_temperature(probs({0.7, 0.2, 0.1, 0.0}), 1e9);
  expect_probs(l, {1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0}, 1e-6);
}

TEST(Temperature, NonPositiveThrows) {
  EXPECT_THROW(apply_temperature(scores({0, 1}), 0.0), InvalidTemperature);
  EXPECT_THROW(apply_temperature(scores({0, 1}), -1.0), InvalidTemperature);
}

TEST(TopK, LargeKKeepsEverything) {
  auto l = scores({0.3, 1.2, -2.0});
  expect_probs(filter_top_k(l, 3), l.probabilities(), 1e-12);
  expect_probs(filter_top_k(l, 10), l.probabilities(), 1e-12);
}

TEST(TopK, OneIsOneHotOnArgmax) {
  expect_probs(filter_top_k(scores({0.3, 1.2, 1.2, -2.0}), 1), {0, 1, 0, 0}, 0);
}

TEST(TopK, KeepsTwoOfFour) {
  expect_probs(filter_top_k(scores({2, 1, 0, -1}), 2), {0.731059, 0.268941, 0, 0});
}

TEST(TopK, TiesAtTheCutBreakToLowerId) {
  expect_probs(filter_top_k(scores({0, 1, 1, 1}), 2), {0, 0.5, 0.5, 0}, 1e-12);
}

TEST(TopK, InvalidKThrows) { EXPECT_THROW(filter_top_k(scores({0, 1}), 0), InvalidK); }

TEST(Nucleus, FullMassKeepsEverything) {
  auto l = probs({0.5, 0.3, 0.15, 0.05});
  expect_probs(filter_nucleus(l, 1.0), l.probabilities(), 1e-12);
}

TEST(Nucleus, SmallestPrefixReachingP) {
  expect_probs(filter_nucleus(probs({0.5, 0.3, 0.15, 0.05}), 0.9), {0.526316, 0.315789, 0.157895, 0});
}

TEST(Nucleus, DominantTokenAlone) {
  expect_probs(filter_nucleus(probs({0.02, 0.95, 0.03}), 0.9), {0, 1, 0}, 0);
}

TEST(Nucleus, InvalidPThrows) {
  EXPECT_THROW(filter_nucleus(probs({0.5, 0.5}), 0.0), InvalidP);
  EXPECT_THROW(filter_nucleus(probs({0.5, 0.5}), 1.5), InvalidP);
}

TEST(Debias, ZeroLambdaIsIdentity) {
  auto t = probs({0.6, 0.4});
  std::vector<LogitVector> b = {probs({0.8, 0.2})};
  expect_probs(debias_logits(t, b, 0.0), {0.6, 0.4}, 1e-12);
}

TEST(Debias, OneCompetitorLambdaOne) {
  std::vector<LogitVector> b = {probs({0.8, 0.2})};
  expect_probs(debias_logits(probs({0.6, 0.4}), b, 1.0), {0.551186, 0.448814});
}

TEST(Debias, HugeLambdaSuppressesTokensFavouredElsewhere) {
  std::vector<LogitVector> b = {probs({0.1, 0.7, 0.2})};
  auto out = debias_logits(probs({0.3, 0.4, 0.3}), b, 1e4).probabilities();
  EXPECT_LT(out[1], 1e-100);
}

TEST(Debias, DimensionMismatchThrows) {
  std::vector<LogitVector> b = {probs({0.5, 0.25, 0.25})};
  EXPECT_THROW(debias_logits(probs({0.5, 0.5}), b, 1.0), DimensionMismatch);
}

TEST(Debias, RelativeOddsFallWithLambdaForMoreDisfavouredTokens) {
  // If token w is at least as disfavoured as u, p(w) / p(u) never grows with lambda.
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto t = scores(oracle::random_scores(gen, 8));
    std::vector<LogitVector> b = {scores(oracle::random_scores(gen, 8)), scores(oracle::random_scores(gen, 8))};
    const auto pt = t.probabilities();
    std::vector<double> delta(pt.size());
    for (std::size_t w = 0; w < pt.size(); ++w) {
      double worst = 0;
      for (const auto& q : b) worst = std::max(worst, q.probabilities()[w]);
      delta[w] = std::min(0.0, pt[w] - worst);
    }
    std::vector<double> prev = pt;
    for (double lambda : {0.5, 1.0, 5.0, 50.0, 200.0}) {
      auto cur = debias_logits(t, b, lambda).probabilities();
      for (std::size_t w = 0; w < pt.size(); ++w) {
        for (std::size_t u = 0; u < pt.size(); ++u) {
          if (delta[w] <= delta[u]) {
            EXPECT_LE(std::log(cur[w]) - std::log(cur[u]), std::log(prev[w]) - std::log(prev[u]) + 1e-9);
          }
        }
      }
      prev = cur;
    }
  }
}

TEST(FilterProperties, NormalizedAndSupportShrinks) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 2 + gen() % 63;
    auto raw = oracle::random_scores(gen, n);
    if (trial % 3 == 0) raw[gen() % n] = kNegInf;
    auto l = scores(raw);
    const double p = 0.05 + 0.95 * static_cast<double>(gen() % 1000) / 1000.0;
    for (const auto& out : {filter_top_k(l, 1 + static_cast<int>(gen() % n)), filter_nucleus(l, p),
                            apply_temperature(l, 0.3 + static_cast<double>(gen() % 30) / 10)}) {
      EXPECT_NEAR(mass(out), 1.0, 1e-9);
      for (std::size_t i = 0; i < n; ++i) {
        if (l[i] == kNegInf) {
          EXPECT_EQ(out[i], kNegInf);
        }
      }
    }
    // Retained mass reaches p, and would not without the last kept token.
    auto kept = filter_nucleus(l, p);
    const auto pl = l.probabilities();
    double m = 0, smallest = 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (kept[i] != kNegInf) {
        m += pl[i];
        smallest = std::min(smallest, pl[i]);
      }
    }
    EXPECT_GE(m, p - 1e-12);
    EXPECT_LT(m - smallest, p);
  }
}

TEST(SampleToken, OneHotAlwaysReturnsThatToken) {
  Rng rng(1);
  auto l = probs({0, 0, 1, 0});
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_token(l, rng), 2);
}

TEST(SampleToken, FairCoinPassesChiSquare) {
  Rng rng(2024);
  std::vector<std::uint64_t> counts(2);
  auto l = probs({0.5, 0.5});
  for (int i = 0; i < 100000; ++i) ++counts[static_cast<std::size_t>(sample_token(l, rng))];
  EXPECT_GT(oracle::chi_square_p(counts, {0.5, 0.5}), 0.001);
}

TEST(SampleToken, SameSeedSameToken) {
  auto l = probs({0.1, 0.2, 0.3, 0.4});
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng a(s), b(s);
    EXPECT_EQ(sample_token(l, a), sample_token(l, b));
  }
}

TEST(SampleToken, AllMaskedThrows) {
  Rng rng(0);
  EXPECT_THROW(sample_token(LogitVector(3, kNegInf), rng), DegenerateDistribution);
}

namespace {

// Vocabulary: specials, then a b c. From any token the chain a -> b -> c -> "
// is the argmax path.
testing_support::TableLm chain_lm() {
  auto v = testing_support::vocab_with({"a", "b", "c"});
  //                      <s>   </s>  unk   "     a     b     c
  std::map<TokenId, std::vector<double>> rows = {
      {Vocabulary::kBos, {0.0, 0.05, 0.05, 0.1, 0.6, 0.1, 0.1}},
      {4, {0.0, 0.05, 0.05, 0.1, 0.1, 0.6, 0.1}},
      {5, {0.0, 0.05, 0.05, 0.1, 0.1, 0.1, 0.6}},
      {6, {0.0, 0.05, 0.05, 0.6, 0.1, 0.1, 0.1}},
  };
  return testing_support::TableLm(v, rows, {0.0, 0.2, 0.2, 0.2, 0.2, 0.1, 0.1});
}

}  // namespace

TEST(DecodeSequence, GreedyStopsAtQuoteAfterThreeSteps) {
  auto lm = chain_lm();
  DecodeParams p;
  p.strategy = Strategy::kGreedy;
  Rng rng(0);
  std::vector<TokenId> prompt = {Vocabulary::kBos};
  auto t = decode_sequence(lm, prompt, p, rng);
  EXPECT_EQ(t.generated, (std::vector<TokenId>{4, 5, 6}));
  EXPECT_EQ(t.stop, StopReason::kQuote);
  ASSERT_EQ(t.step_probs.size(), 4u);
  for (double sp : t.step_probs) EXPECT_NEAR(sp, 0.6, 1e-12);
}

TEST(DecodeSequence, GreedyIsDeterministic) {
  auto lm = chain_lm();
  DecodeParams p;
  p.strategy = Strategy::kGreedy;
  Rng r1(1), r2(99);
  std::vector<TokenId> prompt = {Vocabulary::kBos};
  EXPECT_EQ(decode_sequence(lm, prompt, p, r1), decode_sequence(lm, prompt, p, r2));
}

TEST(DecodeSequence, ZeroBudgetIsEmptyMaxLength) {
  auto lm = chain_lm();
  DecodeParams p;
  p.max_new_tokens = 0;
  Rng rng(0);
  std::vector<TokenId> prompt = {Vocabulary::kBos};
  auto t = decode_sequence(lm, prompt, p, rng);
  EXPECT_TRUE(t.generated.empty());
  EXPECT_EQ(t.stop, StopReason::kMaxLength);
}

TEST(DecodeSequence, BudgetCapsLength) {
  auto lm = chain_lm();
  DecodeParams p;
  p.strategy = Strategy::kGreedy;
  p.max_new_tokens = 2;
  Rng rng(0);
  std::vector<TokenId> prompt = {Vocabulary::kBos};
  auto t = decode_sequence(lm, prompt, p, rng);
  EXPECT_EQ(t.generated.size(), 2u);
  EXPECT_EQ(t.stop, StopReason::kMaxLength);
}

TEST(DecodeSequence, QuoteIsOrdinaryTokenWhenNotStopping) {
  auto lm = chain_lm();
  DecodeParams p;
  p.strategy = Strategy::kGreedy;
  p.max_new_tokens = 5;
  Rng rng(0);
  std::vector<TokenId> prompt = {Vocabulary::kBos};
  auto t = decode_sequence(lm, prompt, p, rng, false);
  // a b c ", then the fallback row whose first maximum is EOS.
  EXPECT_EQ(t.generated.size(), 4u);
  EXPECT_EQ(t.generated[3], Vocabulary::kQuote);
  EXPECT_EQ(t.stop, StopReason::kEos);
}

TEST(DecodeSequence, EmptyPromptThrows) {
  auto lm = chain_lm();
  Rng rng(0);
  EXPECT_THROW(decode_sequence(lm, {}, DecodeParams{}, rng), InvalidArgument);
}

TEST(DecodeSequence, GreedyTopOneAndTightNucleusAgree) {
  auto lm = train_toy_lm_from_text({"the cat sat on the mat .", "the dog sat \" on \" the log ."}, 3, 0.1);
  std::mt19937_64 gen(8);
  for (int i = 0; i < 20; ++i) {
    std::vector<TokenId> prompt = {Vocabulary::kBos};
    for (int j = 0; j < 1 + static_cast<int>(gen() % 4); ++j) {
      prompt.push_back(static_cast<TokenId>(4 + gen() % (lm.vocabulary().size() - 4)));
    }
    DecodeParams g;
    g.strategy = Strategy::kGreedy;
    g.max_new_tokens = 12;
    DecodeParams k = g, n = g;
    k.strategy = Strategy::kTopK;
    k.k = 1;
    n.strategy = Strategy::kNucleus;
    n.p = 1e-6;
    Rng r1(i), r2(i + 100), r3(i + 200);
    auto tg = decode_sequence(lm, prompt, g, r1);
    EXPECT_EQ(tg, decode_sequence(lm, prompt, k, r2));
    EXPECT_EQ(tg, decode_sequence(lm, prompt, n, r3));
  }
}

TEST(DecodeSequence, StepProbabilitiesInUnitInterval) {
  auto lm = train_toy_lm_from_text({"the cat sat on the mat .", "the dog sat on the log ."}, 3, 0.1);
  DecodeParams p;
  p.max_new_tokens = 20;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    std::vector<TokenId> prompt = {Vocabulary::kBos};
    auto t = decode_sequence(lm, prompt, p, rng);
    EXPECT_LE(t.generated.size(), 20u);
    for (double sp : t.step_probs) {
      EXPECT_GT(sp, 0.0);
      EXPECT_LE(sp, 1.0);
    }
  }
}

TEST(DecodeSequence, DebiasSteersAwayFromCompetitorContinuation) {
  // After "x" the model prefers b; after "y" it prefers b even more. Debiasing
  // the "x" prompt against the "y" prompt pushes the choice to c.
  auto v = testing_support::vocab_with({"x", "y", "b", "c"});
  std::map<TokenId, std::vector<double>> rows = {
      {4, {0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.55, 0.45}},
      {5, {0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.95, 0.05}},
  };
  testing_support::TableLm lm(v, rows, {0, 0.1, 0.0, 0.9, 0, 0, 0, 0});
  DecodeParams p;
  p.strategy = Strategy::kGreedy;
  p.max_new_tokens = 1;
  Rng rng(0);
  std::vector<TokenId> prompt = {Vocabulary::kBos, 4};
  EXPECT_EQ(decode_sequence(lm, prompt, p, rng).generated, (std::vector<TokenId>{6}));
  p.debias = DebiasParams{200.0, {{Vocabulary::kBos, 5}}};
  EXPECT_EQ(decode_sequence(lm, prompt, p, rng).generated, (std::vector<TokenId>{7}));
}

TEST(DecodeParams, Defaults) {
  DecodeParams p;
  EXPECT_EQ(p.strategy, Strategy::kNucleus);
  EXPECT_DOUBLE_EQ(p.p, 0.9);
  EXPECT_DOUBLE_EQ(p.temperature, 1.0);
  EXPECT_DOUBLE_EQ(DebiasParams{}.lambda, 200.0);
}
