#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "zerogen/error.hpp"
#include "zerogen/synthesis.hpp"

namespace zerogen {

// Dataset file: JSON lines, one example per line, keys in the order
//   idx, text, context (only when present), label, template_id, seed.
// Sidecar manifest: a single JSON object with keys
//   task, requested, achieved, attempts, rejections, config_digest, sampled_labels.

inline std::string example_to_json(const PseudoExample& ex) {
  nlohmann::ordered_json j;
  j["idx"] = ex.idx;
  j["text"] = ex.text;
  if (ex.context) j["context"] = *ex.context;
  j["label"] = ex.label;
  j["template_id"] = ex.template_id;
  j["seed"] = ex.seed;
  return j.dump();
}

inline std::string manifest_to_json(const GenerationManifest& m) {
  nlohmann::ordered_json j;
  j["task"] = m.task;
  j["requested"] = m.requested;
  j["achieved"] = m.achieved;
  j["attempts"] = m.attempts;
  j["rejections"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.rejections) j["rejections"][k] = v;
  j["config_digest"] = m.config_digest;
  j["sampled_labels"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.sampled_labels) j["sampled_labels"][k] = v;
  return j.dump(2) + "\n";
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << body;
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::uint64_t json_u64(const nlohmann::json& j, const char* key, const std::string& src,
                              std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number_unsigned()) {
    throw ParseError(src, line, std::string("missing or non-integer '") + key + "'");
  }
  return it->get<std::uint64_t>();
}

inline std::string json_str(const nlohmann::json& j, const char* key, const std::string& src,
                            std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw ParseError(src, line, std::string("missing or non-string '") + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace detail

inline void write_examples(std::span<const PseudoExample> examples, const std::filesystem::path& path) {
  std::string body;
  for (const auto& ex : examples) {
    body += example_to_json(ex);
    body.push_back('\n');
  }
  detail::write_text_file(path, body);
}

inline std::vector<PseudoExample> parse_examples(std::string_view text, const std::string& source) {
  std::vector<PseudoExample> out;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    const bool terminated = nl != std::string_view::npos;
    if (!terminated) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (line.empty()) continue;
    if (!terminated) throw ParseError(source, lineno, "truncated line (no newline)");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(source, lineno, "expected a JSON object");
    for (const auto& [k, v] : j.items()) {
      if (k != "idx" && k != "text" && k != "context" && k != "label" && k != "template_id" && k != "seed") {
        throw ParseError(source, lineno, "unexpected key '" + k + "'");
      }
    }
    PseudoExample ex;
    ex.idx = detail::json_u64(j, "idx", source, lineno);
    ex.text = detail::json_str(j, "text", source, lineno);
    if (j.contains("context")) ex.context = detail::json_str(j, "context", source, lineno);
    ex.label = detail::json_str(j, "label", source, lineno);
    ex.template_id = detail::json_str(j, "template_id", source, lineno);
    ex.seed = detail::json_u64(j, "seed", source, lineno);
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::vector<PseudoExample> read_examples(const std::filesystem::path& path) {
  return parse_examples(detail::read_text_file(path), path.string());
}

inline GenerationManifest parse_manifest(std::string_view text, const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // nlohmann reports a byte offset; convert it to a line number.
    const auto byte = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
    throw ParseError(source, line, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(source, 1, "expected a JSON object");
  GenerationManifest m;
  m.task = detail::json_str(j, "task", source, 1);
  m.requested = detail::json_u64(j, "requested", source, 1);
  m.achieved = detail::json_u64(j, "achieved", source, 1);
  m.attempts = detail::json_u64(j, "attempts", source, 1);
  m.config_digest = detail::json_str(j, "config_digest", source, 1);
  auto read_counts = [&](const char* key, std::map<std::string, std::uint64_t>& dst, bool required) {
    auto it = j.find(key);
    if (it == j.end()) {
      if (required) throw ParseError(source, 1, std::string("missing '") + key + "'");
      return;
    }
    if (!it->is_object()) throw ParseError(source, 1, std::string("'") + key + "' must be an object");
    for (const auto& [k, v] : it->items()) {
      if (!v.is_number_unsigned()) throw ParseError(source, 1, std::string("non-integer count in '") + key + "'");
      dst[k] = v.get<std::uint64_t>();
    }
  };
  read_counts("rejections", m.rejections, true);
  read_counts("sampled_labels", m.sampled_labels, false);
  return m;
}

inline void write_dataset(const PseudoDataset& ds, const std::filesystem::path& data_path,
                          const std::filesystem::path& manifest_path) {
  write_examples(ds.examples, data_path);
  detail::write_text_file(manifest_path, manifest_to_json(ds.manifest));
}

inline PseudoDataset read_dataset(const std::filesystem::path& data_path,
                                  const std::filesystem::path& manifest_path) {
  PseudoDataset ds;
  ds.examples = read_examples(data_path);
  ds.manifest = parse_manifest(detail::read_text_file(manifest_path), manifest_path.string());
  for (std::size_t i = 1; i < ds.examples.size(); ++i) {
    if (ds.examples[i].idx <= ds.examples[i - 1].idx) {
      throw ParseError(data_path.string(), i + 1, "examples not ordered by sample index");
    }
  }
  return ds;
}

}  // namespace zerogen
