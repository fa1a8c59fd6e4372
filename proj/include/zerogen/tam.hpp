#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "zerogen/error.hpp"
#include "zerogen/prompting.hpp"
#include "zerogen/rng.hpp"
#include "zerogen/synthesis.hpp"

namespace zerogen {

inline constexpr int kHashBits = 18;
inline constexpr std::uint32_t kFeatureSpace = 1u << kHashBits;
inline constexpr std::uint32_t kDefaultSalt = 0x5a47e11u;

struct FeatureConfig {
  std::uint32_t salt = kDefaultSalt;

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

// Sparse (index, count) pairs sorted by index; every count is positive.
using FeatureVector = std::vector<std::pair<std::uint32_t, double>>;

// Unigram and bigram counts of the lowercased words, hashed into 2^18
// buckets. Text features occupy the lower half of the index space and
// context features the upper half, so the two never share a bucket.
inline FeatureVector featurize(std::string_view text, std::optional<std::string_view> context,
                               const FeatureConfig& config = {}) {
  std::map<std::uint32_t, double> acc;
  char salt_hex[16];
  std::snprintf(salt_hex, sizeof salt_hex, "%08x", config.salt);
  constexpr std::uint32_t half = kFeatureSpace / 2;

  auto add_words = [&](std::string_view s, std::string_view field, std::uint32_t offset) {
    auto words = split_words(s);
    for (auto& w : words) {
      for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    const std::uint64_t base = fnv1a64(field, fnv1a64(salt_hex));
    auto bucket = [&](const std::string& key) {
      return offset + static_cast<std::uint32_t>(fnv1a64(key, base) % half);
    };
    for (std::size_t i = 0; i < words.size(); ++i) {
      acc[bucket("u\x1f" + words[i])] += 1.0;
      if (i + 1 < words.size()) acc[bucket("b\x1f" + words[i] + "\x1f" + words[i + 1])] += 1.0;
    }
  };
  add_words(text, "text", 0);
  if (context) add_words(*context, "context", half);
  return FeatureVector(acc.begin(), acc.end());
}

struct TamModel {
  std::string task_id;
  std::vector<std::string> labels;
  FeatureConfig features;
  std::vector<double> weights;  // label-major, labels.size() * kFeatureSpace
  std::vector<double> bias;

  static TamModel zeros(std::string task_id, std::vector<std::string> labels, FeatureConfig features = {}) {
    TamModel m;
    m.task_id = std::move(task_id);
    m.labels = std::move(labels);
    m.features = features;
    m.weights.assign(m.labels.size() * kFeatureSpace, 0.0);
    m.bias.assign(m.labels.size(), 0.0);
    return m;
  }

  std::size_t k() const noexcept { return labels.size(); }

  double weight(std::size_t label, std::uint32_t feature) const {
    return weights[label * kFeatureSpace + feature];
  }
  double& weight(std::size_t label, std::uint32_t feature) { return weights[label * kFeatureSpace + feature]; }

  std::vector<double> scores(const FeatureVector& x) const {
    std::vector<double> s(bias);
    for (std::size_t l = 0; l < k(); ++l) {
      const double* row = weights.data() + l * kFeatureSpace;
      for (const auto& [i, v] : x) s[l] += row[i] * v;
    }
    return s;
  }

  friend bool operator==(const TamModel&, const TamModel&) = default;
};

inline std::vector<double> softmax(std::span<const double> scores) {
  const double hi = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(scores[i] - hi);
  for (auto& v : p) v /= z;
  return p;
}

struct TamPrediction {
  std::size_t label = 0;
  std::vector<double> probabilities;
};

inline TamPrediction tam_predict(const TamModel& model, std::string_view text,
                                 std::optional<std::string_view> context = std::nullopt) {
  TamPrediction out;
  out.probabilities = softmax(model.scores(featurize(text, context, model.features)));
  for (std::size_t l = 1; l < out.probabilities.size(); ++l) {
    if (out.probabilities[l] > out.probabilities[out.label]) out.label = l;
  }
  return out;
}

inline std::size_t tam_predict_label(const TamModel& model, const FeatureVector& x) {
  const auto s = model.scores(x);
  std::size_t best = 0;
  for (std::size_t l = 1; l < s.size(); ++l) {
    if (s[l] > s[best]) best = l;
  }
  return best;
}

// Cross-entropy of one example plus (l2 / 2) * ||W||^2 (bias unpenalized).
inline double tam_example_loss(const TamModel& model, const FeatureVector& x, std::size_t label, double l2) {
  const auto s = model.scores(x);
  const double hi = *std::max_element(s.begin(), s.end());
  double z = 0.0;
  for (double v : s) z += std::exp(v - hi);
  double sq = 0.0;
  for (double w : model.weights) sq += w * w;
  return (hi + std::log(z) - s[label]) + 0.5 * l2 * sq;
}

// d(loss)/d(score_l) = p_l - [l == label].
inline std::vector<double> class_residuals(std::span<const double> scores, std::size_t label) {
  auto r = softmax(scores);
  r[label] -= 1.0;
  return r;
}

struct TamGradient {
  std::vector<double> weights;  // same layout as TamModel::weights
  std::vector<double> bias;
};

inline TamGradient tam_gradient(const TamModel& model, const FeatureVector& x, std::size_t label, double l2) {
  TamGradient g;
  g.weights.resize(model.weights.size());
  for (std::size_t i = 0; i < g.weights.size(); ++i) g.weights[i] = l2 * model.weights[i];
  g.bias = class_residuals(model.scores(x), label);
  for (std::size_t l = 0; l < model.k(); ++l) {
    for (const auto& [i, v] : x) g.weights[l * kFeatureSpace + i] += g.bias[l] * v;
  }
  return g;
}

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 10;
  double l2 = 1e-5;
  double validation_fraction = 0.10;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0)) throw InvalidArgument("learning rate must be > 0");
    if (epochs < 0) throw InvalidArgument("epochs must be >= 0");
    if (!(l2 >= 0) || !(learning_rate * l2 < 1)) throw InvalidArgument("l2 must be >= 0 and learning_rate * l2 < 1");
    if (!(validation_fraction > 0 && validation_fraction < 1)) {
      throw InvalidArgument("validation fraction must be in (0, 1)");
    }
  }
};

struct ValidationSplit {
  std::vector<PseudoExample> train;
  std::vector<PseudoExample> validation;
};

// Seeded shuffle; the last ceil(fraction * n) examples become validation.
// A fraction that covers less than one whole example is DatasetTooSmall.
inline ValidationSplit split_pseudo_validation(std::span<const PseudoExample> examples, double fraction,
                                               std::uint64_t seed) {
  if (!(fraction > 0 && fraction < 1)) throw InvalidArgument("validation fraction must be in (0, 1)");
  const double want = fraction * static_cast<double>(examples.size());
  if (want < 1.0 - 1e-9) {
    throw DatasetTooSmall("pseudo-validation split of " + std::to_string(examples.size()) +
                          " examples at fraction " + std::to_string(fraction) + " is empty");
  }
  const auto n_val = static_cast<std::size_t>(std::ceil(want - 1e-9));
  if (n_val >= examples.size()) throw DatasetTooSmall("pseudo-training split would be empty");

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  ValidationSplit out;
  const std::size_t n_train = examples.size() - n_val;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.train : out.validation).push_back(examples[order[i]]);
  }
  return out;
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_acc = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult {
  TamModel model;
  std::vector<EpochRecord> report;  // epoch 0 is the untrained model
  int best_epoch = 0;
};

namespace detail {

struct Encoded {
  std::vector<FeatureVector> x;
  std::vector<std::size_t> y;
};

inline Encoded encode_examples(std::span<const PseudoExample> examples, const TaskSpec& task,
                               const FeatureConfig& fc) {
  Encoded e;
  for (const auto& ex : examples) {
    auto idx = task.label_index(ex.label);
    if (!idx) throw TaskMismatch("label '" + ex.label + "' is not a label of task " + task.id);
    std::optional<std::string_view> ctx;
    if (ex.context) ctx = *ex.context;
    e.x.push_back(featurize(ex.text, ctx, fc));
    e.y.push_back(*idx);
  }
  return e;
}

inline double mean_loss(const TamModel& m, const Encoded& d) {
  if (d.x.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    const auto s = m.scores(d.x[i]);
    const double hi = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (double v : s) z += std::exp(v - hi);
    total += hi + std::log(z) - s[d.y[i]];
  }
  return total / static_cast<double>(d.x.size());
}

inline double encoded_accuracy(const TamModel& m, const Encoded& d) {
  if (d.x.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < d.x.size(); ++i) hit += tam_predict_label(m, d.x[i]) == d.y[i];
  return static_cast<double>(hit) / static_cast<double>(d.x.size());
}

}  // namespace detail

// Multinomial logistic regression by plain SGD on the pseudo-training part,
// visiting examples in a fresh seeded order each epoch. The returned model is
// the epoch snapshot (epoch 0 = untrained) with the best pseudo-validation
// accuracy, ties to the earlier epoch.
inline TrainResult train_tam(std::span<const PseudoExample> examples, const TaskSpec& task,
                             const TrainConfig& config, const FeatureConfig& features = {}) {
  config.validate();
  if (!task.is_classification()) throw InvalidArgument("train_tam: task " + task.id + " is not a classification task");
  if (examples.empty()) throw DatasetTooSmall("cannot train on an empty dataset");

  auto split = split_pseudo_validation(examples, config.validation_fraction, config.seed);
  const auto train = detail::encode_examples(split.train, task, features);
  const auto val = detail::encode_examples(split.validation, task, features);

  std::vector<std::string> names;
  for (const auto& l : task.labels) names.push_back(l.name);
  TamModel model = TamModel::zeros(task.id, names, features);
  const std::size_t k = model.k();

  // Weights are kept as scale * v so the L2 shrink costs O(1) per step.
  std::vector<double> v(model.weights.size(), 0.0);
  double scale = 1.0;
  auto materialize = [&] {
    for (std::size_t i = 0; i < v.size(); ++i) model.weights[i] = scale * v[i];
  };

  TrainResult result;
  result.model = model;
  result.report.push_back({0, detail::mean_loss(model, train), detail::encoded_accuracy(model, val)});
  double best_acc = result.report.back().val_acc;

  std::vector<std::size_t> order(train.x.size());
  std::vector<double> s(k);
  const double lr = config.learning_rate;
  const double shrink = 1.0 - lr * config.l2;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, "sgd", static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    for (std::size_t idx : order) {
      const auto& x = train.x[idx];
      for (std::size_t l = 0; l < k; ++l) {
        double dot = 0.0;
        const double* row = v.data() + l * kFeatureSpace;
        for (const auto& [f, c] : x) dot += row[f] * c;
        s[l] = scale * dot + model.bias[l];
      }
      const auto r = class_residuals(s, train.y[idx]);
      scale *= shrink;
      for (std::size_t l = 0; l < k; ++l) {
        double* row = v.data() + l * kFeatureSpace;
        const double step = lr * r[l] / scale;
        for (const auto& [f, c] : x) row[f] -= step * c;
        model.bias[l] -= lr * r[l];
      }
      if (scale < 1e-6) {
        for (auto& w : v) w *= scale;
        scale = 1.0;
      }
    }
    materialize();
    result.report.push_back({epoch, detail::mean_loss(model, train), detail::encoded_accuracy(model, val)});
    if (result.report.back().val_acc > best_acc) {
      best_acc = result.report.back().val_acc;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  return result;
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string training_report_jsonl(std::span<const EpochRecord> report) {
  std::string out;
  for (const auto& r : report) {
    out += "{\"epoch\":" + std::to_string(r.epoch) + ",\"train_loss\":" + format_fixed(r.train_loss, 6) +
           ",\"val_acc\":" + format_fixed(r.val_acc, 6) + "}\n";
  }
  return out;
}

// Model file:
//   tam v1 k=<k> hash_bits=18 salt=<hex>
//   <label>\t<feature>\t<weight>      (nonzero weights only)
//   bias\t<b_0>\t...\t<b_k-1>
inline void write_tam(const TamModel& m, std::ostream& out) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%x", m.features.salt);
  out << "tam v1 k=" << m.k() << " hash_bits=" << kHashBits << " salt=" << buf << '\n';
  for (std::size_t l = 0; l < m.k(); ++l) {
    for (std::uint32_t f = 0; f < kFeatureSpace; ++f) {
      const double w = m.weight(l, f);
      if (w == 0.0) continue;
      std::snprintf(buf, sizeof buf, "%.17g", w);
      out << l << '\t' << f << '\t' << buf << '\n';
    }
  }
  out << "bias";
  for (double b : m.bias) {
    std::snprintf(buf, sizeof buf, "%.17g", b);
    out << '\t' << buf;
  }
  out << '\n';
}

inline void save_tam(const TamModel& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_tam(m, out);
  if (!out) throw IoError("write failed: " + path.string());
}

// Reads a model file for `task`; label names come from the task.
inline TamModel read_tam(std::istream& in, const TaskSpec& task, const std::string& source = "<stream>") {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(source, lineno, "missing header");
  unsigned k = 0, salt = 0;
  int bits = 0;
  char tail = 0;
  if (std::sscanf(line.c_str(), "tam v1 k=%u hash_bits=%d salt=%x%c", &k, &bits, &salt, &tail) != 3 ||
      bits != kHashBits) {
    throw ParseError(source, lineno, "bad header: " + line);
  }
  if (k != task.labels.size()) {
    throw TaskMismatch(source + ": model has " + std::to_string(k) + " labels, task " + task.id + " has " +
                       std::to_string(task.labels.size()));
  }
  std::vector<std::string> names;
  for (const auto& l : task.labels) names.push_back(l.name);
  TamModel m = TamModel::zeros(task.id, names, FeatureConfig{salt});

  bool have_bias = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (have_bias) throw ParseError(source, lineno, "content after bias line");
    std::istringstream ss(line);
    std::string head;
    std::getline(ss, head, '\t');
    if (head == "bias") {
      for (std::size_t l = 0; l < k; ++l) {
        std::string f;
        if (!std::getline(ss, f, '\t')) throw ParseError(source, lineno, "short bias line");
        try {
          m.bias[l] = std::stod(f);
        } catch (const std::exception&) {
          throw ParseError(source, lineno, "bad bias value");
        }
      }
      if (std::string extra; std::getline(ss, extra, '\t')) throw ParseError(source, lineno, "long bias line");
      have_bias = true;
      continue;
    }
    std::string feat, weight;
    if (!std::getline(ss, feat, '\t') || !std::getline(ss, weight)) {
      throw ParseError(source, lineno, "expected label<TAB>feature<TAB>weight");
    }
    try {
      const auto l = std::stoul(head);
      const auto f = std::stoul(feat);
      const double w = std::stod(weight);
      if (l >= k || f >= kFeatureSpace || !std::isfinite(w)) throw std::out_of_range("entry");
      m.weight(l, static_cast<std::uint32_t>(f)) = w;
    } catch (const std::exception&) {
      throw ParseError(source, lineno, "bad weight entry: " + line);
    }
  }
  if (!have_bias) throw ParseError(source, lineno, "missing bias line");
  return m;
}

inline TamModel load_tam(const std::filesystem::path& path, const TaskSpec& task) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  return read_tam(in, task, path.string());
}

}  // namespace zerogen
