#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "zerogen/decoding.hpp"
#include "zerogen/error.hpp"
#include "zerogen/kv_file.hpp"
#include "zerogen/rng.hpp"
#include "zerogen/synthesis.hpp"
#include "zerogen/tam.hpp"

namespace zerogen {

// Where the language model comes from: a saved model file, or a corpus to
// train a toy n-gram model on at load time.
struct LmSource {
  std::filesystem::path model;
  std::filesystem::path corpus;
  int order = 3;
  double delta = 0.1;
};

struct RunConfig {
  std::filesystem::path source;  // the config file, empty when parsed from text

  std::string task_id;
  std::filesystem::path catalog;
  std::optional<std::filesystem::path> contexts;
  LmSource lm;
  DecodeParams decode;
  std::optional<int> filter_min_tokens;  // default: the task's value
  std::optional<int> filter_max_tokens;
  bool dedup = true;
  std::uint64_t n = 0;
  std::size_t workers = 1;
  TrainConfig train;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  std::size_t quality_sample_size = 1000;
  int sweep_seeds = 3;

  std::string digest;  // content hash of everything that affects outputs

  FilterRules filter_rules(const TaskSpec& task) const {
    FilterRules r;
    r.min_tokens = filter_min_tokens.value_or(task.min_tokens);
    r.max_tokens = filter_max_tokens.value_or(task.max_tokens);
    r.dedup = dedup;
    return r;
  }
};

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "task.id",          "task.contexts",          "prompts.catalog",      "lm.model",
      "lm.train.corpus",  "lm.train.order",         "lm.train.delta",       "decode.strategy",
      "decode.k",         "decode.p",               "decode.temperature",   "decode.max_new_tokens",
      "decode.debias.lambda", "filter.min_tokens",  "filter.max_tokens",    "filter.dedup",
      "generate.n",       "generate.workers",       "train.learning_rate",  "train.epochs",
      "train.l2",         "train.validation_fraction", "seed",              "output.dir",
      "quality.sample_size", "sweep.seeds"};
  return keys;
}

namespace detail {

inline std::string read_file_or_config_error(const std::filesystem::path& p, const std::string& field) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError(field, "cannot read '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class ConfigReader {
 public:
  ConfigReader(const KvFile& kv, std::filesystem::path base) : kv_(kv), base_(std::move(base)) {}

  std::optional<std::string> str(const std::string& key) const { return kv_.get(key); }

  std::string required(const std::string& key) const {
    auto v = kv_.get(key);
    if (!v || v->empty()) throw ConfigError(key, "required field is missing");
    return *v;
  }

  std::optional<std::filesystem::path> path(const std::string& key, bool must_exist = true) const {
    auto v = kv_.get(key);
    if (!v) return std::nullopt;
    if (v->empty()) throw ConfigError(key, "empty path");
    std::filesystem::path p(*v);
    if (p.is_relative()) p = base_ / p;
    p = p.lexically_normal();
    if (must_exist && !std::filesystem::exists(p)) throw ConfigError(key, "path does not exist: " + p.string());
    return p;
  }

  template <typename T>
  std::optional<T> number(const std::string& key) const {
    auto v = kv_.get(key);
    if (!v) return std::nullopt;
    std::istringstream ss(*v);
    T out{};
    ss >> out;
    if (!ss || !(ss >> std::ws).eof()) throw ConfigError(key, "not a valid number: '" + *v + "'");
    if constexpr (std::is_unsigned_v<T>) {
      if (v->find('-') != std::string::npos) throw ConfigError(key, "must be non-negative");
    }
    return out;
  }

  std::optional<bool> boolean(const std::string& key) const {
    auto v = kv_.get(key);
    if (!v) return std::nullopt;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(key, "expected true or false");
  }

 private:
  const KvFile& kv_;
  std::filesystem::path base_;
};

}  // namespace detail

// Applies "--key=value" style overrides (leading dashes optional).
inline void apply_overrides(KvFile& kv, const std::vector<std::string>& overrides) {
  for (auto o : overrides) {
    while (o.starts_with("-")) o.erase(0, 1);
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError(o, "override must look like --section.key=value");
    kv.set(o.substr(0, eq), o.substr(eq + 1));
  }
}

// Canonical text of every output-affecting setting, with referenced files
// represented by their content hash. Worker count and output directory are
// excluded: they do not change any artifact.
inline std::string canonical_config_text(const RunConfig& c) {
  auto file_hash = [](const std::filesystem::path& p, const std::string& field) {
    return hex64(fnv1a64(detail::read_file_or_config_error(p, field)));
  };
  std::ostringstream s;
  s << "task.id=" << c.task_id << '\n';
  s << "prompts.catalog#" << file_hash(c.catalog, "prompts.catalog") << '\n';
  if (c.contexts) s << "task.contexts#" << file_hash(*c.contexts, "task.contexts") << '\n';
  if (!c.lm.model.empty()) {
    s << "lm.model#" << file_hash(c.lm.model, "lm.model") << '\n';
  } else {
    s << "lm.train.corpus#" << file_hash(c.lm.corpus, "lm.train.corpus") << '\n';
    s << "lm.train.order=" << c.lm.order << '\n';
    s << "lm.train.delta=" << format_fixed(c.lm.delta, 6) << '\n';
  }
  s << "decode.strategy=" << to_string(c.decode.strategy) << '\n';
  s << "decode.k=" << c.decode.k << '\n';
  s << "decode.p=" << format_fixed(c.decode.p, 6) << '\n';
  s << "decode.temperature=" << format_fixed(c.decode.temperature, 6) << '\n';
  s << "decode.max_new_tokens=" << c.decode.max_new_tokens << '\n';
  if (c.decode.debias) s << "decode.debias.lambda=" << format_fixed(c.decode.debias->lambda, 6) << '\n';
  if (c.filter_min_tokens) s << "filter.min_tokens=" << *c.filter_min_tokens << '\n';
  if (c.filter_max_tokens) s << "filter.max_tokens=" << *c.filter_max_tokens << '\n';
  s << "filter.dedup=" << (c.dedup ? "true" : "false") << '\n';
  s << "generate.n=" << c.n << '\n';
  s << "train.learning_rate=" << format_fixed(c.train.learning_rate, 6) << '\n';
  s << "train.epochs=" << c.train.epochs << '\n';
  s << "train.l2=" << format_fixed(c.train.l2, 6) << '\n';
  s << "train.validation_fraction=" << format_fixed(c.train.validation_fraction, 6) << '\n';
  s << "seed=" << c.seed << '\n';
  s << "quality.sample_size=" << c.quality_sample_size << '\n';
  s << "sweep.seeds=" << c.sweep_seeds << '\n';
  return s.str();
}

// Builds a RunConfig from parsed key-values. Relative paths resolve against
// `base_dir`.
inline RunConfig parse_run_config(const KvFile& kv, const std::filesystem::path& base_dir) {
  for (const auto& [key, e] : kv.entries()) {
    if (!known_config_keys().count(key)) throw ConfigError(key, "unknown configuration field");
  }
  detail::ConfigReader r(kv, base_dir);
  RunConfig c;

  c.task_id = r.required("task.id");
  if (!kv.has("prompts.catalog")) throw ConfigError("prompts.catalog", "required field is missing");
  c.catalog = *r.path("prompts.catalog");
  c.contexts = r.path("task.contexts");

  if (auto m = r.path("lm.model")) {
    if (kv.has("lm.train.corpus")) throw ConfigError("lm.model", "set either lm.model or lm.train.corpus, not both");
    c.lm.model = *m;
  } else if (auto corpus = r.path("lm.train.corpus")) {
    c.lm.corpus = *corpus;
  } else {
    throw ConfigError("lm.model", "one of lm.model or lm.train.corpus is required");
  }
  if (auto v = r.number<int>("lm.train.order")) c.lm.order = *v;
  if (auto v = r.number<double>("lm.train.delta")) c.lm.delta = *v;
  if (c.lm.order < 1) throw ConfigError("lm.train.order", "must be >= 1");
  if (!(c.lm.delta > 0)) throw ConfigError("lm.train.delta", "must be > 0");

  if (auto v = r.str("decode.strategy")) {
    auto s = parse_strategy(*v);
    if (!s) throw ConfigError("decode.strategy", "expected greedy, top-k or nucleus");
    c.decode.strategy = *s;
  }
  if (auto v = r.number<int>("decode.k")) c.decode.k = *v;
  if (auto v = r.number<double>("decode.p")) c.decode.p = *v;
  if (auto v = r.number<double>("decode.temperature")) c.decode.temperature = *v;
  if (auto v = r.number<int>("decode.max_new_tokens")) c.decode.max_new_tokens = *v;
  if (auto v = r.number<double>("decode.debias.lambda")) c.decode.debias = DebiasParams{*v, {}};
  if (c.decode.k < 1) throw ConfigError("decode.k", "must be >= 1");
  if (!(c.decode.p > 0 && c.decode.p <= 1)) throw ConfigError("decode.p", "must be in (0, 1]");
  if (!(c.decode.temperature > 0)) throw ConfigError("decode.temperature", "must be > 0");
  if (c.decode.max_new_tokens < 0) throw ConfigError("decode.max_new_tokens", "must be >= 0");
  if (c.decode.debias && !(c.decode.debias->lambda >= 0)) throw ConfigError("decode.debias.lambda", "must be >= 0");

  c.filter_min_tokens = r.number<int>("filter.min_tokens");
  c.filter_max_tokens = r.number<int>("filter.max_tokens");
  if (auto v = r.boolean("filter.dedup")) c.dedup = *v;

  if (auto v = r.number<std::uint64_t>("generate.n")) c.n = *v;
  if (auto v = r.number<std::size_t>("generate.workers")) c.workers = *v;
  if (c.workers < 1) throw ConfigError("generate.workers", "must be >= 1");

  if (auto v = r.number<double>("train.learning_rate")) c.train.learning_rate = *v;
  if (auto v = r.number<int>("train.epochs")) c.train.epochs = *v;
  if (auto v = r.number<double>("train.l2")) c.train.l2 = *v;
  if (auto v = r.number<double>("train.validation_fraction")) c.train.validation_fraction = *v;
  if (!(c.train.learning_rate > 0)) throw ConfigError("train.learning_rate", "must be > 0");
  if (c.train.epochs < 0) throw ConfigError("train.epochs", "must be >= 0");
  if (!(c.train.l2 >= 0) || !(c.train.learning_rate * c.train.l2 < 1)) {
    throw ConfigError("train.l2", "must be >= 0 with learning_rate * l2 < 1");
  }
  if (!(c.train.validation_fraction > 0 && c.train.validation_fraction < 1)) {
    throw ConfigError("train.validation_fraction", "must be in (0, 1)");
  }

  if (auto v = r.number<std::uint64_t>("seed")) c.seed = *v;
  c.train.seed = c.seed;
  if (auto p = r.path("output.dir", false)) c.output_dir = *p;
  else c.output_dir = (base_dir / "out").lexically_normal();
  if (auto v = r.number<std::size_t>("quality.sample_size")) c.quality_sample_size = *v;
  if (c.quality_sample_size < 2) throw ConfigError("quality.sample_size", "must be >= 2");
  if (auto v = r.number<int>("sweep.seeds")) c.sweep_seeds = *v;
  if (c.sweep_seeds < 1) throw ConfigError("sweep.seeds", "must be >= 1");

  c.digest = hex64(fnv1a64(canonical_config_text(c)));
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  KvFile kv;
  try {
    kv = KvFile::load(path);
  } catch (const IoError& e) {
    throw ConfigError("<config>", e.what());
  } catch (const ParseError& e) {
    throw ConfigError("<config>", e.what());
  }
  apply_overrides(kv, overrides);
  auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  RunConfig c = parse_run_config(kv, base);
  c.source = path;
  return c;
}

}  // namespace zerogen
