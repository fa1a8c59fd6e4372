#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "zerogen/error.hpp"

namespace zerogen {

// Plain-text key-value file:
//
//   # comment
//   seed = 42
//   [decode]            <- prefixes following keys with "decode."
//   p = 0.9
//   pattern = "text with \" and \n escapes"
//
// Keys are stored fully dotted. Duplicate keys are an error.
class KvFile {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  static KvFile parse(std::string_view text, const std::string& source = "<string>") {
    KvFile kv;
    kv.source_ = source;
    std::string section;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      std::string_view raw = text.substr(pos, nl - pos);
      pos = nl + 1;
      ++lineno;
      std::string_view line = trim(raw);
      if (line.empty() || line.front() == '#' || line.front() == ';') {
        if (nl == text.size()) break;
        continue;
      }
      if (line.front() == '[') {
        if (line.back() != ']') throw ParseError(source, lineno, "unterminated section header");
        section = std::string(trim(line.substr(1, line.size() - 2)));
        if (section.empty()) throw ParseError(source, lineno, "empty section name");
        if (nl == text.size()) break;
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError(source, lineno, "expected key = value");
      std::string key(trim(line.substr(0, eq)));
      if (key.empty()) throw ParseError(source, lineno, "empty key");
      if (!section.empty()) key = section + "." + key;
      std::string value = parse_value(trim(line.substr(eq + 1)), source, lineno);
      if (!kv.entries_.emplace(key, Entry{std::move(value), lineno}).second) {
        throw ParseError(source, lineno, "duplicate key '" + key + "'");
      }
      if (nl == text.size()) break;
    }
    return kv;
  }

  static KvFile load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
  }

  const std::string& source() const noexcept { return source_; }
  const std::map<std::string, Entry>& entries() const noexcept { return entries_; }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second.value;
  }

  std::size_t line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

  void set(const std::string& key, std::string value) { entries_[key] = Entry{std::move(value), 0}; }

  // Keys under "<prefix>." with the prefix stripped.
  std::map<std::string, Entry> section(const std::string& prefix) const {
    std::map<std::string, Entry> out;
    const std::string p = prefix + ".";
    for (auto it = entries_.lower_bound(p); it != entries_.end() && it->first.starts_with(p); ++it) {
      out.emplace(it->first.substr(p.size()), it->second);
    }
    return out;
  }

  static std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  }

  // Quotes and escapes a value so that parse() reads it back verbatim.
  static std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
      switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out.push_back(c);
      }
    }
    out.push_back('"');
    return out;
  }

 private:
  static std::string parse_value(std::string_view v, const std::string& source, std::size_t lineno) {
    if (v.empty() || v.front() != '"') {
      // Unquoted: an inline comment starts at " #".
      if (auto c = v.find(" #"); c != std::string_view::npos) v = trim(v.substr(0, c));
      return std::string(v);
    }
    std::string out;
    std::size_t i = 1;
    for (; i < v.size(); ++i) {
      const char c = v[i];
      if (c == '"') break;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      if (++i >= v.size()) throw ParseError(source, lineno, "dangling escape");
      switch (v[i]) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: throw ParseError(source, lineno, std::string("unknown escape \\") + v[i]);
      }
    }
    if (i >= v.size()) throw ParseError(source, lineno, "unterminated quoted value");
    auto rest = trim(v.substr(i + 1));
    if (!rest.empty() && rest.front() != '#') throw ParseError(source, lineno, "text after quoted value");
    return out;
  }

  std::string source_;
  std::map<std::string, Entry> entries_;
};

}  // namespace zerogen
