#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "zerogen/catalog.hpp"
#include "zerogen/config.hpp"
#include "zerogen/dataset_io.hpp"
#include "zerogen/ngram_lm.hpp"
#include "zerogen/quality.hpp"
#include "zerogen/synthesis.hpp"
#include "zerogen/tam.hpp"

namespace zerogen {

inline constexpr const char* kVersion = "0.1.0";

// run.json: what produced the outputs of one subcommand invocation.
struct RunManifest {
  std::string command;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, double>> wall_time_ms;  // stage -> milliseconds
  std::vector<std::string> outputs;                          // relative to the output directory
  std::map<std::string, std::uint64_t> counts;
};

inline std::string run_manifest_json(const RunManifest& m, bool include_wall_time = true) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["version"] = kVersion;
  j["formats"] = {{"ngram-lm", "v1"}, {"tam", "v1"}};
  j["config_digest"] = m.config_digest;
  j["seed"] = m.seed;
  j["counts"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.counts) j["counts"][k] = v;
  j["outputs"] = m.outputs;
  if (include_wall_time) {
    j["wall_time_ms"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m.wall_time_ms) j["wall_time_ms"][k] = std::round(v * 1000.0) / 1000.0;
  }
  return j.dump(2) + "\n";
}

// Sidecar manifest location: "dataset.jsonl" pairs with "manifest.json" in
// the same directory, any other "name.jsonl" with "name.manifest.json".
inline std::filesystem::path manifest_path_for(const std::filesystem::path& data_path) {
  if (data_path.filename() == "dataset.jsonl") return data_path.parent_path() / "manifest.json";
  auto p = data_path;
  p.replace_extension(".manifest.json");
  return p;
}

using GoldReader = std::function<std::vector<PseudoExample>(const std::filesystem::path&)>;

struct PipelineHooks {
  GoldReader read_gold = [](const std::filesystem::path& p) { return read_examples(p); };
  std::function<void(const std::string&)> on_stage;  // called as each stage starts
};

namespace detail {

class StageTimer {
 public:
  StageTimer(RunManifest& m, const PipelineHooks& hooks) : m_(m), hooks_(hooks) {}

  template <typename F>
  auto run(const std::string& stage, F&& f) {
    if (hooks_.on_stage) hooks_.on_stage(stage);
    const auto t0 = std::chrono::steady_clock::now();
    struct Record {
      RunManifest& m;
      std::string stage;
      std::chrono::steady_clock::time_point t0;
      ~Record() {
        m.wall_time_ms.emplace_back(
            stage, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      }
    } rec{m_, stage, t0};
    return f();
  }

 private:
  RunManifest& m_;
  const PipelineHooks& hooks_;
};

inline std::vector<std::string> read_lines(const std::filesystem::path& p) {
  const auto text = read_text_file(p);
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    auto line = std::string(KvFile::trim(std::string_view(text).substr(pos, nl - pos)));
    if (!line.empty()) out.push_back(std::move(line));
    pos = nl + 1;
  }
  return out;
}

inline void finish_run(const RunConfig& cfg, RunManifest& m) {
  m.config_digest = cfg.digest;
  m.seed = cfg.seed;
  m.outputs.push_back("run.json");
  write_text_file(cfg.output_dir / "run.json", run_manifest_json(m));
}

}  // namespace detail

// Everything a run needs that is loaded from the config's referenced files.
struct Workspace {
  RunConfig config;
  PromptCatalog catalog;
  const TaskSpec* task = nullptr;
  std::shared_ptr<const ToyNGramLm> lm;  // loaded on demand
  std::vector<std::string> contexts;

  explicit Workspace(RunConfig cfg) : config(std::move(cfg)) {
    try {
      catalog = load_catalog(config.catalog);
    } catch (const DataError& e) {
      throw ConfigError("prompts.catalog", e.what());
    }
    task = &catalog.task(config.task_id);
    if (config.contexts) contexts = detail::read_lines(*config.contexts);
  }

  const ToyNGramLm& backend() {
    if (!lm) {
      if (!config.lm.model.empty()) {
        lm = std::make_shared<ToyNGramLm>(load_ngram_lm(config.lm.model));
      } else {
        auto lines = detail::read_lines(config.lm.corpus);
        if (lines.empty()) throw EmptyCorpus("language-model corpus " + config.lm.corpus.string() + " is empty");
        lm = std::make_shared<ToyNGramLm>(train_toy_lm_from_text(lines, config.lm.order, config.lm.delta));
      }
    }
    return *lm;
  }

  GenerationOptions generation_options() const { return {config.workers, config.digest}; }

  PseudoDataset generate(std::uint64_t n, const DecodeParams& params, std::uint64_t seed) {
    const auto& b = backend();
    const auto rules = config.filter_rules(*task);
    if (task->kind == TaskKind::kSingleSentence) {
      return generate_single_sentence_dataset(b, *task, n, params, rules, seed, generation_options());
    }
    if (contexts.empty()) throw ConfigError("task.contexts", "pair and QA tasks need a non-empty contexts file");
    return generate_pair_dataset(b, *task, contexts, n, params, rules, seed, generation_options());
  }
};

struct GenerateOutcome {
  PseudoDataset dataset;
  RunManifest run;
};

// generate: dataset.jsonl + manifest.json + run.json in the output directory.
inline GenerateOutcome run_generate(const RunConfig& cfg, const PipelineHooks& hooks = {}) {
  GenerateOutcome out;
  out.run.command = "generate";
  detail::StageTimer timer(out.run, hooks);
  Workspace ws(cfg);
  timer.run("load-lm", [&] { return &ws.backend(); });
  out.dataset = timer.run("generate", [&] { return ws.generate(cfg.n, cfg.decode, cfg.seed); });
  timer.run("write", [&] {
    write_dataset(out.dataset, cfg.output_dir / "dataset.jsonl", cfg.output_dir / "manifest.json");
    return 0;
  });
  out.run.outputs = {"dataset.jsonl", "manifest.json"};
  out.run.counts = {{"requested", out.dataset.manifest.requested}, {"achieved", out.dataset.manifest.achieved}};
  detail::finish_run(cfg, out.run);
  return out;
}

// Reads a dataset and checks it belongs to `task`. The sidecar manifest is
// used when present.
inline PseudoDataset load_task_dataset(const std::filesystem::path& data_path, const TaskSpec& task) {
  PseudoDataset ds;
  const auto mpath = manifest_path_for(data_path);
  if (std::filesystem::exists(mpath)) {
    ds = read_dataset(data_path, mpath);
  } else {
    ds.examples = read_examples(data_path);
    ds.manifest.task = task.id;
    ds.manifest.achieved = ds.manifest.requested = ds.examples.size();
  }
  if (ds.task_id() != task.id) {
    throw TaskMismatch("dataset " + data_path.string() + " is for task '" + ds.task_id() + "', config task is '" +
                       task.id + "'");
  }
  if (task.is_classification()) {
    for (const auto& ex : ds.examples) {
      if (!task.label_index(ex.label)) {
        throw TaskMismatch("dataset " + data_path.string() + " has label '" + ex.label + "' unknown to task " + task.id);
      }
    }
  }
  return ds;
}

inline double tam_accuracy(const TamModel& model, std::span<const PseudoExample> gold) {
  if (gold.empty()) throw EmptyInput("evaluation set is empty");
  std::vector<std::string> pred, truth;
  for (const auto& ex : gold) {
    std::optional<std::string_view> ctx;
    if (ex.context) ctx = *ex.context;
    pred.push_back(model.labels[tam_predict(model, ex.text, ctx).label]);
    truth.push_back(ex.label);
  }
  return accuracy(pred, truth);
}

struct TrainEvalOutcome {
  TrainResult training;
  EvalReport report;
  RunManifest run;
};

// train-eval: trains the TAM on a synthetic dataset with model selection on a
// held-out slice of that dataset. The gold test set is read only after the
// model is final.
inline TrainEvalOutcome run_train_eval(const RunConfig& cfg, const std::filesystem::path& dataset_path,
                                       const std::filesystem::path& gold_test_path, const PipelineHooks& hooks = {}) {
  TrainEvalOutcome out;
  out.run.command = "train-eval";
  detail::StageTimer timer(out.run, hooks);
  Workspace ws(cfg);
  if (!ws.task->is_classification()) throw ConfigError("task.id", "train-eval needs a classification task");
  auto ds = timer.run("read-dataset", [&] { return load_task_dataset(dataset_path, *ws.task); });
  out.training = timer.run("train", [&] { return train_tam(ds.examples, *ws.task, cfg.train); });
  timer.run("write-model", [&] {
    save_tam(out.training.model, cfg.output_dir / "model.tam");
    detail::write_text_file(cfg.output_dir / "training.jsonl", training_report_jsonl(out.training.report));
    return 0;
  });
  auto gold = timer.run("read-gold", [&] { return hooks.read_gold(gold_test_path); });
  out.report = timer.run("evaluate", [&] {
    EvalReport r;
    r.task_id = ws.task->id;
    r.count = gold.size();
    r.config_digest = cfg.digest;
    r.metrics["accuracy"] = tam_accuracy(out.training.model, gold);
    r.metrics["pseudo_val_accuracy"] =
        out.training.report[static_cast<std::size_t>(out.training.best_epoch)].val_acc;
    return r;
  });
  detail::write_text_file(cfg.output_dir / "report.jsonl", eval_report_jsonl(out.report));
  out.run.outputs = {"model.tam", "training.jsonl", "report.jsonl"};
  out.run.counts = {{"train_examples", ds.size()},
                    {"gold_examples", gold.size()},
                    {"best_epoch", static_cast<std::uint64_t>(out.training.best_epoch)}};
  detail::finish_run(cfg, out.run);
  return out;
}

// Zero-shot prompting accuracy of `backend` on labelled examples.
inline double evaluate_prompting(const LmBackend& backend, const TaskSpec& task, std::span<const PseudoExample> gold) {
  if (gold.empty()) throw EmptyInput("evaluation set is empty");
  std::vector<std::string> pred, truth;
  for (const auto& ex : gold) {
    std::optional<std::string_view> ctx;
    if (ex.context) ctx = *ex.context;
    pred.push_back(task.labels[prompting_classify(backend, task, ex.text, ctx).label].name);
    truth.push_back(ex.label);
  }
  return accuracy(pred, truth);
}

struct PromptingOutcome {
  EvalReport report;
  RunManifest run;
};

inline PromptingOutcome run_prompting_baseline(const RunConfig& cfg, const std::filesystem::path& gold_test_path,
                                               const PipelineHooks& hooks = {}) {
  PromptingOutcome out;
  out.run.command = "prompting";
  detail::StageTimer timer(out.run, hooks);
  Workspace ws(cfg);
  if (!ws.task->is_classification()) throw ConfigError("task.id", "prompting needs a classification task");
  if (!ws.task->baseline) throw ConfigError("task.id", "task " + ws.task->id + " has no baseline_template");
  const auto* backend = timer.run("load-lm", [&] { return &ws.backend(); });
  auto gold = timer.run("read-gold", [&] { return hooks.read_gold(gold_test_path); });
  out.report = timer.run("evaluate", [&] {
    EvalReport r;
    r.task_id = ws.task->id;
    r.count = gold.size();
    r.config_digest = cfg.digest;
    r.metrics["accuracy"] = evaluate_prompting(*backend, *ws.task, gold);
    return r;
  });
  detail::write_text_file(cfg.output_dir / "prompting_report.jsonl", eval_report_jsonl(out.report));
  out.run.outputs = {"prompting_report.jsonl"};
  out.run.counts = {{"gold_examples", gold.size()}};
  detail::finish_run(cfg, out.run);
  return out;
}

struct QualityOutcome {
  QualityReport report;
  RunManifest run;
};

// quality: a validator TAM trained on the gold training split scores each
// labelled dataset for correctness; Self-BLEU-4 measures its diversity.
inline QualityOutcome run_quality(const RunConfig& cfg,
                                  const std::vector<std::pair<std::string, std::filesystem::path>>& datasets,
                                  const std::filesystem::path& gold_train_path, const PipelineHooks& hooks = {}) {
  QualityOutcome out;
  out.run.command = "quality";
  detail::StageTimer timer(out.run, hooks);
  Workspace ws(cfg);
  if (!ws.task->is_classification()) throw ConfigError("task.id", "quality needs a classification task");
  if (datasets.empty()) throw ConfigError("datasets", "no datasets given");
  std::map<std::string, PseudoDataset> loaded;
  timer.run("read-datasets", [&] {
    for (const auto& [name, path] : datasets) {
      if (!loaded.emplace(name, load_task_dataset(path, *ws.task)).second) {
        throw ConfigError("datasets", "duplicate dataset name '" + name + "'");
      }
    }
    return 0;
  });
  auto validator = timer.run("train-validator", [&] {
    auto gold = hooks.read_gold(gold_train_path);
    return train_tam(gold, *ws.task, cfg.train).model;
  });
  out.report = timer.run("score", [&] {
    return build_quality_report(loaded, validator, cfg.seed, cfg.quality_sample_size);
  });
  detail::write_text_file(cfg.output_dir / "quality_report.jsonl", quality_report_jsonl(out.report));
  detail::write_text_file(cfg.output_dir / "quality_report.txt", quality_report_table(out.report));
  out.run.outputs = {"quality_report.jsonl", "quality_report.txt"};
  for (const auto& [name, ds] : loaded) out.run.counts["size." + name] = ds.size();
  detail::finish_run(cfg, out.run);
  return out;
}

struct SweepPoint {
  std::size_t size = 0;
  std::vector<double> accuracies;  // one per seed
  std::vector<std::size_t> achieved;
  double mean = 0;
  double stddev = 0;
};

struct SweepOutcome {
  std::vector<SweepPoint> points;
  RunManifest run;
};

inline std::string sweep_jsonl(const std::string& task, const std::vector<SweepPoint>& points) {
  std::string out;
  for (const auto& p : points) {
    std::string accs;
    for (std::size_t i = 0; i < p.accuracies.size(); ++i) accs += (i ? "," : "") + format_fixed(p.accuracies[i], 4);
    out += "{\"task\":" + nlohmann::json(task).dump() + ",\"size\":" + std::to_string(p.size) + ",\"accuracies\":[" +
           accs + "],\"mean\":" + format_fixed(p.mean, 4) + ",\"std\":" + format_fixed(p.stddev, 4) + "}\n";
  }
  return out;
}

// sweep: for each seed, one dataset of the largest size is generated and every
// smaller size uses its leading examples; a TAM is trained per (seed, size) and
// scored on the gold test set.
inline SweepOutcome run_scaling_sweep(const RunConfig& cfg, const std::vector<std::size_t>& sizes,
                                      const std::filesystem::path& gold_test_path, const PipelineHooks& hooks = {}) {
  if (sizes.empty()) throw ConfigError("sweep.sizes", "no sizes given");
  const double min_size = 10.0 / cfg.train.validation_fraction;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i && sizes[i] <= sizes[i - 1]) throw ConfigError("sweep.sizes", "sizes must be strictly ascending");
    if (static_cast<double>(sizes[i]) < min_size - 1e-9) {
      throw ConfigError("sweep.sizes", "size " + std::to_string(sizes[i]) + " is below 10 / validation_fraction");
    }
  }
  SweepOutcome out;
  out.run.command = "sweep";
  detail::StageTimer timer(out.run, hooks);
  Workspace ws(cfg);
  if (!ws.task->is_classification()) throw ConfigError("task.id", "sweep needs a classification task");
  timer.run("load-lm", [&] { return &ws.backend(); });
  auto gold = timer.run("read-gold", [&] { return hooks.read_gold(gold_test_path); });

  out.points.resize(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) out.points[i].size = sizes[i];
  for (int r = 0; r < cfg.sweep_seeds; ++r) {
    const auto seed_r = derive_seed(cfg.seed, "sweep", static_cast<std::uint64_t>(r));
    auto ds = timer.run("generate." + std::to_string(r), [&] { return ws.generate(sizes.back(), cfg.decode, seed_r); });
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      const auto take = std::min(sizes[i], ds.examples.size());
      std::span<const PseudoExample> prefix(ds.examples.data(), take);
      TrainConfig tc = cfg.train;
      tc.seed = seed_r;
      auto model = train_tam(prefix, *ws.task, tc).model;
      out.points[i].accuracies.push_back(tam_accuracy(model, gold));
      out.points[i].achieved.push_back(take);
    }
  }
  for (auto& p : out.points) {
    double sum = 0;
    for (double a : p.accuracies) sum += a;
    p.mean = sum / static_cast<double>(p.accuracies.size());
    double ss = 0;
    for (double a : p.accuracies) ss += (a - p.mean) * (a - p.mean);
    p.stddev = p.accuracies.size() > 1 ? std::sqrt(ss / static_cast<double>(p.accuracies.size() - 1)) : 0.0;
  }
  detail::write_text_file(cfg.output_dir / "sweep.jsonl", sweep_jsonl(ws.task->id, out.points));
  out.run.outputs = {"sweep.jsonl"};
  out.run.counts = {{"seeds", static_cast<std::uint64_t>(cfg.sweep_seeds)}, {"gold_examples", gold.size()}};
  detail::finish_run(cfg, out.run);
  return out;
}

}  // namespace zerogen
