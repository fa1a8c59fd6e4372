#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "zerogen/kv_file.hpp"
#include "zerogen/prompting.hpp"

namespace zerogen {

// Prompt catalog: templates and the tasks that use them.
//
//   [template.<id>]
//   pattern = "The movie review in <Y> sentiment is: \""
//   opens_quote = true
//   type = natural-language
//
//   [task.<id>]
//   kind = single-sentence-classification
//   labels = positive, negative
//   verbalizer.positive = positive
//   verbalizer.negative = negative
//   generation_template = <template id>
//   baseline_template = <template id>     (optional)
//   min_tokens = 5                        (optional)
//   max_tokens = 128                      (optional)
struct PromptCatalog {
  std::map<std::string, PromptTemplate> templates;
  std::map<std::string, TaskSpec> tasks;

  const TaskSpec& task(const std::string& id) const {
    auto it = tasks.find(id);
    if (it == tasks.end()) throw ConfigError("task.id", "no task '" + id + "' in prompt catalog");
    return it->second;
  }
};

namespace detail {

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    if (comma == std::string_view::npos) comma = s.size();
    auto item = KvFile::trim(s.substr(start, comma - start));
    if (!item.empty()) out.emplace_back(item);
    start = comma + 1;
  }
  return out;
}

inline bool parse_bool(const std::string& v, bool& out) {
  if (v == "true" || v == "1" || v == "yes") return out = true, true;
  if (v == "false" || v == "0" || v == "no") return out = false, true;
  return false;
}

inline int parse_int_field(const KvFile& kv, const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    int r = std::stoi(v, &used);
    if (used == v.size()) return r;
  } catch (const std::exception&) {
  }
  throw ParseError(kv.source(), kv.line_of(key), "expected integer for " + key);
}

}  // namespace detail

inline PromptCatalog parse_catalog(const KvFile& kv) {
  PromptCatalog cat;
  std::set<std::string> template_ids, task_ids;
  for (const auto& [key, entry] : kv.entries()) {
    const auto first = key.find('.');
    const auto second = first == std::string::npos ? std::string::npos : key.find('.', first + 1);
    if (second == std::string::npos) throw ParseError(kv.source(), entry.line, "unexpected key '" + key + "'");
    const auto group = key.substr(0, first);
    const auto id = key.substr(first + 1, second - first - 1);
    if (group == "template") template_ids.insert(id);
    else if (group == "task") task_ids.insert(id);
    else throw ParseError(kv.source(), entry.line, "unexpected key '" + key + "'");
  }

  for (const auto& id : template_ids) {
    const std::string base = "template." + id;
    PromptTemplate t;
    t.id = id;
    for (const auto& [k, e] : kv.section(base)) {
      if (k == "pattern") {
        t.pattern = e.value;
      } else if (k == "opens_quote") {
        if (!detail::parse_bool(e.value, t.opens_quote)) throw ParseError(kv.source(), e.line, "expected boolean");
      } else if (k == "type") {
        auto pt = parse_prompt_type(e.value);
        if (!pt) throw ParseError(kv.source(), e.line, "unknown prompt type '" + e.value + "'");
        t.type = *pt;
      } else {
        throw ParseError(kv.source(), e.line, "unknown template key '" + k + "'");
      }
    }
    if (!kv.has(base + ".pattern")) throw ParseError(kv.source(), 0, base + " has no pattern");
    try {
      t.validate();
    } catch (const InvalidArgument& err) {
      throw ParseError(kv.source(), kv.line_of(base + ".pattern"), err.what());
    }
    cat.templates.emplace(id, std::move(t));
  }

  auto find_template = [&](const std::string& key, const KvFile::Entry& e) {
    auto it = cat.templates.find(e.value);
    if (it == cat.templates.end()) throw ParseError(kv.source(), e.line, key + ": unknown template '" + e.value + "'");
    return it->second;
  };

  for (const auto& id : task_ids) {
    const std::string base = "task." + id;
    TaskSpec task;
    task.id = id;
    std::map<std::string, KvFile::Entry> verbalizers;
    std::vector<std::string> label_names;
    bool has_generation = false;
    for (const auto& [k, e] : kv.section(base)) {
      if (k == "kind") {
        auto kind = parse_task_kind(e.value);
        if (!kind) throw ParseError(kv.source(), e.line, "unknown task kind '" + e.value + "'");
        task.kind = *kind;
      } else if (k == "labels") {
        label_names = detail::split_list(e.value);
      } else if (k.starts_with("verbalizer.")) {
        verbalizers.emplace(k.substr(11), e);
      } else if (k == "generation_template") {
        task.generation = find_template(k, e);
        has_generation = true;
      } else if (k == "baseline_template") {
        task.baseline = find_template(k, e);
      } else if (k == "min_tokens") {
        task.min_tokens = detail::parse_int_field(kv, base + "." + k, e.value);
      } else if (k == "max_tokens") {
        task.max_tokens = detail::parse_int_field(kv, base + "." + k, e.value);
      } else {
        throw ParseError(kv.source(), e.line, "unknown task key '" + k + "'");
      }
    }
    if (!kv.has(base + ".kind")) throw ParseError(kv.source(), 0, base + " has no kind");
    if (!has_generation) throw ParseError(kv.source(), 0, base + " has no generation_template");
    for (std::size_t i = 0; i < label_names.size(); ++i) {
      Label l;
      l.index = i;
      l.name = label_names[i];
      if (auto v = verbalizers.find(l.name); v != verbalizers.end()) {
        l.words = split_words(v->second.value);
        verbalizers.erase(v);
      } else {
        l.words = {l.name};
      }
      task.labels.push_back(std::move(l));
    }
    if (!verbalizers.empty()) {
      const auto& [name, e] = *verbalizers.begin();
      throw ParseError(kv.source(), e.line, "verbalizer for unknown label '" + name + "'");
    }
    try {
      task.validate();
    } catch (const InvalidArgument& err) {
      throw ParseError(kv.source(), kv.line_of(base + ".kind"), err.what());
    }
    cat.tasks.emplace(id, std::move(task));
  }
  return cat;
}

inline PromptCatalog load_catalog(const std::filesystem::path& path) {
  return parse_catalog(KvFile::load(path));
}

}  // namespace zerogen
