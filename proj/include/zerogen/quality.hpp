#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "zerogen/metrics.hpp"
#include "zerogen/synthesis.hpp"
#include "zerogen/tam.hpp"

namespace zerogen {

struct EvalReport {
  std::string task_id;
  std::map<std::string, double> metrics;
  std::size_t count = 0;
  std::string config_digest;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct QualityRow {
  std::string strategy;
  double self_bleu = 0;
  double correctness = 0;
  std::size_t size = 0;

  friend bool operator==(const QualityRow&, const QualityRow&) = default;
};

struct QualityReport {
  std::string task_id;
  std::vector<QualityRow> rows;

  friend bool operator==(const QualityReport&, const QualityReport&) = default;
};

// Fraction of examples whose validator prediction equals the generated label.
inline double correctness(const PseudoDataset& dataset, const TamModel& validator) {
  if (dataset.task_id() != validator.task_id) {
    throw TaskMismatch("dataset task '" + dataset.task_id() + "' differs from validator task '" +
                       validator.task_id + "'");
  }
  if (dataset.examples.empty()) throw EmptyInput("correctness: empty dataset");
  std::size_t agree = 0;
  for (const auto& ex : dataset.examples) {
    if (std::find(validator.labels.begin(), validator.labels.end(), ex.label) == validator.labels.end()) {
      throw TaskMismatch("label '" + ex.label + "' unknown to the validator");
    }
    std::optional<std::string_view> ctx;
    if (ex.context) ctx = *ex.context;
    agree += validator.labels[tam_predict(validator, ex.text, ctx).label] == ex.label;
  }
  return static_cast<double>(agree) / static_cast<double>(dataset.examples.size());
}

inline std::vector<TokenList> dataset_texts(const PseudoDataset& ds) {
  std::vector<TokenList> out;
  out.reserve(ds.examples.size());
  for (const auto& ex : ds.examples) out.push_back(split_words(ex.text));
  return out;
}

// One row per strategy label (sorted), with Self-BLEU-4 over a seeded sample
// of the generated texts and validator correctness.
inline QualityReport build_quality_report(const std::map<std::string, PseudoDataset>& datasets,
                                          const TamModel& validator, std::uint64_t seed,
                                          std::size_t sample_size = 1000) {
  QualityReport report;
  for (const auto& [strategy, ds] : datasets) {
    if (report.task_id.empty()) report.task_id = ds.task_id();
    if (ds.task_id() != report.task_id) {
      throw TaskMismatch("quality report mixes tasks '" + report.task_id + "' and '" + ds.task_id() + "'");
    }
    Rng rng(derive_seed(seed, "self-bleu"));
    const auto texts = dataset_texts(ds);
    report.rows.push_back({strategy, self_bleu(texts, sample_size, rng), correctness(ds, validator), ds.size()});
  }
  return report;
}

inline std::string eval_report_jsonl(const EvalReport& r) {
  std::string out;
  for (const auto& [name, value] : r.metrics) {
    nlohmann::ordered_json j;
    j["task"] = r.task_id;
    j["metric"] = name;
    // Keeps the fixed 4-decimal rendering.
    std::string line = j.dump();
    line.pop_back();
    line += ",\"value\":" + format_fixed(value, 4) + ",\"count\":" + std::to_string(r.count) +
            ",\"config_digest\":" + nlohmann::json(r.config_digest).dump() + "}\n";
    out += line;
  }
  return out;
}

inline std::string quality_report_jsonl(const QualityReport& r) {
  std::string out;
  for (const auto& row : r.rows) {
    out += "{\"task\":" + nlohmann::json(r.task_id).dump() + ",\"strategy\":" + nlohmann::json(row.strategy).dump() +
           ",\"self_bleu4\":" + format_fixed(row.self_bleu, 4) + ",\"correctness\":" +
           format_fixed(row.correctness, 4) + ",\"size\":" + std::to_string(row.size) + "}\n";
  }
  return out;
}

namespace detail {

inline std::string render_table(const std::vector<std::string>& header,
                                const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) s += "  ";
      // First column left-aligned, numbers right-aligned.
      const auto pad = std::string(width[c] - cells[c].size(), ' ');
      s += c == 0 ? cells[c] + pad : pad + cells[c];
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

}  // namespace detail

inline std::string quality_report_table(const QualityReport& r) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : r.rows) {
    rows.push_back({row.strategy, format_fixed(row.self_bleu, 4), format_fixed(row.correctness, 4),
                    std::to_string(row.size)});
  }
  return detail::render_table({"strategy", "self-bleu4", "correctness", "size"}, rows);
}

inline std::string eval_report_table(const EvalReport& r) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& [name, value] : r.metrics) rows.push_back({name, format_fixed(value, 4)});
  return detail::render_table({"metric", "value"}, rows);
}

}  // namespace zerogen
