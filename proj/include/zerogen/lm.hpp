#pragma once

#include <span>
#include <vector>

#include "zerogen/logits.hpp"
#include "zerogen/vocabulary.hpp"

namespace zerogen {

// Any autoregressive model that can score the next token. Implementations
// are immutable after construction: next_token_logits must be a pure
// function of the prefix and safe to call concurrently.
class LmBackend {
 public:
  virtual ~LmBackend() = default;

  virtual const Vocabulary& vocabulary() const = 0;

  // Normalized log-probabilities of the next token. Throws InvalidToken when
  // the prefix holds an id outside the vocabulary.
  virtual LogitVector next_token_logits(std::span<const TokenId> prefix) const = 0;
};

// Sum over the continuation of log P(token | prefix + earlier continuation).
inline double sequence_logprob(const LmBackend& backend, std::span<const TokenId> prefix,
                               std::span<const TokenId> continuation) {
  if (continuation.empty()) throw InvalidArgument("sequence_logprob: empty continuation");
  const auto& vocab = backend.vocabulary();
  for (TokenId t : continuation) vocab.check(t);

  std::vector<TokenId> context(prefix.begin(), prefix.end());
  double total = 0.0;
  for (TokenId t : continuation) {
    total += backend.next_token_logits(context)[static_cast<std::size_t>(t)];
    context.push_back(t);
  }
  return total;
}

// Prompt text as model input: BOS followed by the tokenized text.
inline std::vector<TokenId> encode_prompt(std::string_view text, const Vocabulary& vocab) {
  std::vector<TokenId> ids{Vocabulary::kBos};
  auto body = tokenize(text, vocab);
  ids.insert(ids.end(), body.begin(), body.end());
  return ids;
}

}  // namespace zerogen
