#include <gtest/gtest.h>

#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "zerogen/tam.hpp"

using namespace zerogen;

namespace {

TaskSpec binary_task() {
  TaskSpec t;
  t.id = "sent";
  t.labels = {Label{0, "pos", {"good"}}, Label{1, "neg", {"bad"}}};
  t.generation = PromptTemplate{"g", "<Y> \"", true, PromptType::kNaturalLanguage};
  return t;
}

std::vector<PseudoExample> examples(std::size_t n) {
  std::vector<PseudoExample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({i, "text " + std::to_string(i), std::nullopt, "pos", "t", i});
  return out;
}

// Separable by one keyword per class, with shared filler words.
std::vector<PseudoExample> separable(std::size_t n, std::uint64_t seed) {
  static const char* filler[] = {"the", "film", "was", "really", "quite", "a", "movie"};
  Rng rng(seed);
  std::vector<PseudoExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = rng.below(2) == 0;
    std::string text;
    for (int w = 0; w < 4; ++w) text += std::string(filler[rng.below(7)]) + " ";
    text += pos ? "great" : "awful";
    out.push_back({i, text, std::nullopt, pos ? "pos" : "neg", "t", i});
  }
  return out;
}

// Straightforward SGD over a sparse weight map, snapshotting every epoch.
std::vector<std::pair<std::map<std::pair<std::size_t, std::uint32_t>, double>, std::vector<double>>>
reference_sgd(const std::vector<PseudoExample>& train, const TaskSpec& task, const TrainConfig& cfg) {
  std::map<std::pair<std::size_t, std::uint32_t>, double> w;
  std::vector<double> b(task.labels.size(), 0.0);
  std::vector<FeatureVector> xs;
  std::vector<std::size_t> ys;
  for (const auto& ex : train) {
    xs.push_back(featurize(ex.text, std::nullopt));
    ys.push_back(*task.label_index(ex.label));
  }
  std::vector<std::pair<std::map<std::pair<std::size_t, std::uint32_t>, double>, std::vector<double>>> snaps;
  snaps.emplace_back(w, b);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, "sgd", static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (auto idx : order) {
      std::vector<double> s(b);
      for (std::size_t l = 0; l < b.size(); ++l) {
        for (const auto& [f, c] : xs[idx]) {
          if (auto it = w.find({l, f}); it != w.end()) s[l] += it->second * c;
        }
      }
      double hi = *std::max_element(s.begin(), s.end()), z = 0;
      for (double v : s) z += std::exp(v - hi);
      for (auto& [_, v] : w) v -= cfg.learning_rate * cfg.l2 * v;
      for (std::size_t l = 0; l < b.size(); ++l) {
        const double r = std::exp(s[l] - hi) / z - (l == ys[idx] ? 1.0 : 0.0);
        for (const auto& [f, c] : xs[idx]) w[{l, f}] -= cfg.learning_rate * r * c;
        b[l] -= cfg.learning_rate * r;
      }
    }
    snaps.emplace_back(w, b);
  }
  return snaps;
}

}  // namespace

TEST(Featurize, RepeatedWordCounts) {
  auto x = featurize("good good", std::nullopt);
  // unigram "good" twice, bigram "good good" once
  ASSERT_EQ(x.size(), 2u);
  std::multiset<double> counts;
  for (const auto& [i, c] : x) counts.insert(c);
  EXPECT_EQ(counts, (std::multiset<double>{1.0, 2.0}));
}

TEST(Featurize, SortedPositiveAndCaseInsensitive) {
  auto x = featurize("The Movie was GOOD , the movie", std::string_view("A context here"));
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_GT(x[i].second, 0);
    EXPECT_LT(x[i].first, kFeatureSpace);
    if (i) {
      EXPECT_LT(x[i - 1].first, x[i].first);
    }
  }
  EXPECT_EQ(featurize("Good Film", std::nullopt), featurize("good film", std::nullopt));
}

TEST(Featurize, ContextFeaturesUseTheirOwnHalf) {
  auto x = featurize("word", std::string_view("word"));
  ASSERT_EQ(x.size(), 2u);
  EXPECT_LT(x[0].first, kFeatureSpace / 2);
  EXPECT_GE(x[1].first, kFeatureSpace / 2);
  EXPECT_TRUE(featurize("", std::nullopt).empty());
}

TEST(Featurize, SaltChangesBuckets) {
  EXPECT_NE(featurize("some words here", std::nullopt, FeatureConfig{1}),
            featurize("some words here", std::nullopt, FeatureConfig{2}));
}

TEST(Split, SizesFollowCeiling) {
  auto s = split_pseudo_validation(examples(10), 0.1, 1);
  EXPECT_EQ(s.train.size(), 9u);
  EXPECT_EQ(s.validation.size(), 1u);
  s = split_pseudo_validation(examples(1000), 0.1, 1);
  EXPECT_EQ(s.train.size(), 900u);
  EXPECT_EQ(s.validation.size(), 100u);
  s = split_pseudo_validation(examples(15), 0.1, 1);
  EXPECT_EQ(s.validation.size(), 2u);
}

TEST(Split, PartitionIsDisjointAndComplete) {
  auto s = split_pseudo_validation(examples(200), 0.25, 9);
  std::set<std::uint64_t> ids;
  for (const auto& e : s.train) ids.insert(e.idx);
  for (const auto& e : s.validation) EXPECT_TRUE(ids.insert(e.idx).second);
  EXPECT_EQ(ids.size(), 200u);
  auto again = split_pseudo_validation(examples(200), 0.25, 9);
  EXPECT_EQ(again.validation, s.validation);
}

TEST(Split, TooSmall) {
  EXPECT_THROW(split_pseudo_validation(examples(5), 0.1, 1), DatasetTooSmall);
  EXPECT_THROW(split_pseudo_validation(examples(1), 0.9, 1), DatasetTooSmall);
  EXPECT_THROW(split_pseudo_validation(examples(10), 0.0, 1), InvalidArgument);
}

TEST(Gradient, MatchesFiniteDifferences) {
  auto m = TamModel::zeros("t", {"a", "b", "c"});
  Rng rng(4);
  const auto x = featurize("alpha beta gamma alpha", std::nullopt);
  for (std::size_t l = 0; l < 3; ++l) {
    for (const auto& [f, c] : x) m.weight(l, f) = rng.uniform() - 0.5;
    m.bias[l] = rng.uniform() - 0.5;
  }
  const double l2 = 0.01, h = 1e-6;
  const auto g = tam_gradient(m, x, 1, l2);
  for (std::size_t l = 0; l < 3; ++l) {
    for (const auto& [f, c] : x) {
      auto plus = m, minus = m;
      plus.weight(l, f) += h;
      minus.weight(l, f) -= h;
      const double fd = (tam_example_loss(plus, x, 1, l2) - tam_example_loss(minus, x, 1, l2)) / (2 * h);
      EXPECT_NEAR(g.weights[l * kFeatureSpace + f], fd, 1e-6);
    }
    auto plus = m, minus = m;
    plus.bias[l] += h;
    minus.bias[l] -= h;
    EXPECT_NEAR(g.bias[l], (tam_example_loss(plus, x, 1, l2) - tam_example_loss(minus, x, 1, l2)) / (2 * h), 1e-6);
  }
}

TEST(Train, MatchesReferenceSgd) {
  const auto data = separable(60, 3);
  const auto task = binary_task();
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.l2 = 0.01;
  cfg.learning_rate = 0.2;
  cfg.seed = 42;
  auto result = train_tam(data, task, cfg);
  auto split = split_pseudo_validation(data, cfg.validation_fraction, cfg.seed);
  const auto snaps = reference_sgd(split.train, task, cfg);
  const auto& [w, b] = snaps[static_cast<std::size_t>(result.best_epoch)];
  for (std::size_t l = 0; l < 2; ++l) EXPECT_NEAR(result.model.bias[l], b[l], 1e-9);
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < result.model.weights.size(); ++i) {
    const double got = result.model.weights[i];
    const auto it = w.find({i / kFeatureSpace, static_cast<std::uint32_t>(i % kFeatureSpace)});
    const double want = it == w.end() ? 0.0 : it->second;
    if (got != 0.0) ++nonzero;
    ASSERT_NEAR(got, want, 1e-9) << i;
  }
  if (result.best_epoch > 0) {
    EXPECT_GT(nonzero, 0u);
  }
}

TEST(Train, LearnsSeparableData) {
  const auto task = binary_task();
  TrainConfig cfg;
  cfg.seed = 1;
  auto result = train_tam(separable(400, 8), task, cfg);
  ASSERT_EQ(result.report.size(), 11u);
  EXPECT_EQ(result.report.back().val_acc, 1.0);
  EXPECT_LT(result.report.back().train_loss, result.report.front().train_loss);
  EXPECT_NEAR(result.report.front().train_loss, std::log(2.0), 1e-12);
  std::size_t hit = 0;
  for (const auto& ex : separable(200, 99)) hit += task.labels[tam_predict(result.model, ex.text).label].name == ex.label;
  EXPECT_EQ(hit, 200u);
}

TEST(Train, ZeroEpochsGivesUntrainedModel) {
  TrainConfig cfg;
  cfg.epochs = 0;
  auto result = train_tam(separable(50, 2), binary_task(), cfg);
  EXPECT_EQ(result.report.size(), 1u);
  EXPECT_EQ(result.best_epoch, 0);
  EXPECT_EQ(result.model, TamModel::zeros("sent", {"pos", "neg"}));
  auto p = tam_predict(result.model, "anything");
  EXPECT_EQ(p.label, 0u);
  EXPECT_DOUBLE_EQ(p.probabilities[0], 0.5);
}

TEST(Train, SelectsBestValidationEpoch) {
  TrainConfig cfg;
  cfg.seed = 5;
  cfg.epochs = 6;
  auto result = train_tam(separable(200, 12), binary_task(), cfg);
  double best = -1;
  int best_epoch = -1;
  for (const auto& r : result.report) {
    if (r.val_acc > best) {
      best = r.val_acc;
      best_epoch = r.epoch;
    }
  }
  EXPECT_EQ(result.best_epoch, best_epoch);
}

TEST(Train, Deterministic) {
  TrainConfig cfg;
  cfg.seed = 77;
  const auto data = separable(120, 4);
  auto a = train_tam(data, binary_task(), cfg);
  auto b = train_tam(data, binary_task(), cfg);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.report, b.report);
}

TEST(Train, Errors) {
  TrainConfig cfg;
  EXPECT_THROW(train_tam({}, binary_task(), cfg), DatasetTooSmall);
  EXPECT_THROW(train_tam(examples(5), binary_task(), cfg), DatasetTooSmall);
  auto bad = separable(20, 1);
  bad[3].label = "other";
  EXPECT_THROW(train_tam(bad, binary_task(), cfg), TaskMismatch);
  cfg.learning_rate = 0;
  EXPECT_THROW(train_tam(separable(20, 1), binary_task(), cfg), InvalidArgument);
}

TEST(ModelFile, RoundTrip) {
  TrainConfig cfg;
  auto m = train_tam(separable(100, 6), binary_task(), cfg).model;
  std::stringstream ss;
  write_tam(m, ss);
  EXPECT_EQ(read_tam(ss, binary_task()), m);
}

TEST(ModelFile, Errors) {
  std::stringstream wrong_k("tam v1 k=3 hash_bits=18 salt=1\nbias\t0\t0\t0\n");
  EXPECT_THROW(read_tam(wrong_k, binary_task()), TaskMismatch);
  std::stringstream no_bias("tam v1 k=2 hash_bits=18 salt=1\n0\t5\t1.5\n");
  EXPECT_THROW(read_tam(no_bias, binary_task()), ParseError);
  std::stringstream bad_entry("tam v1 k=2 hash_bits=18 salt=1\n0\t999999999\t1.5\nbias\t0\t0\n");
  try {
    read_tam(bad_entry, binary_task());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(TrainingReport, Format) {
  std::vector<EpochRecord> r = {{0, 0.693147, 0.5}, {1, 0.25, 1.0}};
  EXPECT_EQ(training_report_jsonl(r),
            "{\"epoch\":0,\"train_loss\":0.693147,\"val_acc\":0.500000}\n"
            "{\"epoch\":1,\"train_loss\":0.250000,\"val_acc\":1.000000}\n");
}
