#pragma once

// Abstract contract for any sequence-to-sequence scorer/generator. Scoring
// and generation are read-only with respect to model state; fit_step is the
// single-writer training entry point. Probabilities are post-normalization
// per-step conditionals, never logits.

#include <span>
#include <string>
#include <vector>

#include "sig/corpus.hpp"
#include "sig/tokenizer.hpp"

namespace sig {

class BackendError : public Error {
 public:
  using Error::Error;
};

struct SequencePair {
  std::vector<TokenId> source_tokens;
  std::vector<TokenId> target_tokens;
};

// Entry c is p(t_c | t_{1:c-1}, X); length equals the target token count.
using StepProbabilities = std::vector<double>;

enum class DecodeStrategy { Greedy, Beam };

struct GenerationOptions {
  DecodeStrategy strategy = DecodeStrategy::Greedy;
  int beam_width = 1;
  std::size_t max_length = 32;
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string id() const = 0;
  virtual const Tokenizer& tokenizer() const = 0;
  virtual std::size_t max_source_tokens() const = 0;

  virtual StepProbabilities teacher_forced_probs(const SequencePair& pair) const = 0;
  virtual std::vector<TokenId> free_generate(std::span<const TokenId> source_tokens,
                                             const GenerationOptions& options) const = 0;

  virtual bool trainable() const { return false; }
  virtual bool supports_embeddings() const { return false; }

  // Batch-mean negative log-likelihood of the gold targets, computed before
  // the single optimizer update this call applies.
  virtual double fit_step(std::span<const SequencePair> batch) {
    (void)batch;
    throw BackendError("backend not trainable");
  }

  // One final-decoder-layer vector per target token.
  virtual std::vector<std::vector<double>> target_token_embeddings(const SequencePair& pair) const {
    (void)pair;
    throw BackendError("embeddings unsupported");
  }

  void check_source_length(const SequencePair& pair) const {
    if (pair.source_tokens.size() > max_source_tokens()) {
      throw BackendError("source of " + std::to_string(pair.source_tokens.size()) +
                         " tokens exceeds the model maximum of " +
                         std::to_string(max_source_tokens()));
    }
  }
};

}  // namespace sig
