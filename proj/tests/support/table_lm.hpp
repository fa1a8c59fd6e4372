#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "zerogen/lm.hpp"

namespace testing_support {

// LM whose next-token distribution is looked up from the last token of the
// prefix. Unlisted last tokens fall back to `fallback`.
class TableLm final : public zerogen::LmBackend {
 public:
  TableLm(zerogen::Vocabulary vocab, std::map<zerogen::TokenId, std::vector<double>> rows, std::vector<double> fallback)
      : vocab_(std::move(vocab)), rows_(std::move(rows)), fallback_(std::move(fallback)) {}

  const zerogen::Vocabulary& vocabulary() const override { return vocab_; }

  zerogen::LogitVector next_token_logits(std::span<const zerogen::TokenId> prefix) const override {
    for (auto t : prefix) vocab_.check(t);
    const auto* row = &fallback_;
    if (!prefix.empty()) {
      if (auto it = rows_.find(prefix.back()); it != rows_.end()) row = &it->second;
    }
    return zerogen::LogitVector::from_probabilities(*row);
  }

 private:
  zerogen::Vocabulary vocab_;
  std::map<zerogen::TokenId, std::vector<double>> rows_;
  std::vector<double> fallback_;
};

// Vocabulary of the four specials followed by `words`.
inline zerogen::Vocabulary vocab_with(std::initializer_list<const char*> words) {
  zerogen::Vocabulary v;
  for (const char* w : words) v.add(w);
  return v;
}

}  // namespace testing_support
