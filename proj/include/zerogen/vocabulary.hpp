#pragma once

#include <cctype>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "zerogen/error.hpp"

namespace zerogen {

using TokenId = std::int32_t;

// Splits on whitespace, then separates punctuation into single-character
// tokens. An apostrophe or hyphen between two alphanumerics stays inside the
// word ("doesn't", "well-made").
inline std::vector<std::string> split_words(std::string_view text) {
  auto is_alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };

  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      const bool joiner = (c == '\'' || c == '-') && !cur.empty() && is_alnum(cur.back()) &&
                          i + 1 < text.size() && is_alnum(text[i + 1]);
      if (joiner) {
        cur.push_back(c);
      } else {
        flush();
        out.emplace_back(1, c);
      }
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

class Vocabulary {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr TokenId kQuote = 3;

  static constexpr std::string_view kBosText = "<s>";
  static constexpr std::string_view kEosText = "</s>";
  static constexpr std::string_view kUnkText = "<unk>";
  static constexpr std::string_view kQuoteText = "\"";

  // Vocabulary holding only the four specials.
  Vocabulary() {
    for (auto s : {kBosText, kEosText, kUnkText, kQuoteText}) add(std::string(s));
  }

  // Builds a vocabulary from an explicit token list. The list must begin with
  // the four specials in id order and contain no duplicates.
  static Vocabulary from_tokens(std::span<const std::string> tokens) {
    Vocabulary v;
    if (tokens.size() < 4 || tokens[0] != kBosText || tokens[1] != kEosText ||
        tokens[2] != kUnkText || tokens[3] != kQuoteText) {
      throw InvalidArgument("vocabulary must start with the special tokens");
    }
    for (std::size_t i = 4; i < tokens.size(); ++i) {
      if (v.contains(tokens[i])) throw InvalidArgument("duplicate vocabulary token: " + tokens[i]);
      v.add(tokens[i]);
    }
    return v;
  }

  // Specials first, then every distinct word of `lines` in first-seen order.
  static Vocabulary from_corpus(std::span<const std::string> lines) {
    Vocabulary v;
    for (const auto& line : lines) {
      for (auto& w : split_words(line)) {
        if (!v.contains(w)) v.add(std::move(w));
      }
    }
    return v;
  }

  TokenId add(std::string token) {
    if (auto it = index_.find(token); it != index_.end()) return it->second;
    const auto id = static_cast<TokenId>(tokens_.size());
    index_.emplace(token, id);
    tokens_.push_back(std::move(token));
    return id;
  }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  TokenId id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  const std::string& token(TokenId id) const {
    check(id);
    return tokens_[static_cast<std::size_t>(id)];
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  bool valid(TokenId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < tokens_.size();
  }

  void check(TokenId id) const {
    if (!valid(id)) throw InvalidToken(id, tokens_.size());
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

inline std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
  return ids;
}

inline std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out.push_back(' ');
    out += vocab.token(ids[i]);
  }
  return out;
}

}  // namespace zerogen
