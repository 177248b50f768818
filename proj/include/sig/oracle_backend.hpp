#pragma once

// Deterministic table-driven backend for tests. The table maps (source text,
// target prefix) to a next-token distribution over token strings; lookups
// that miss fall back to a configurable uniform distribution, so per-step
// probabilities of any target can be computed by hand.

#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "sig/backend.hpp"
#include "sig/text.hpp"

namespace sig {

// Bare whitespace tokenization, no specials, ids interned on first sight.
// decode() joins with single spaces and drops the end-of-output token.
class WhitespaceTokenizer : public Tokenizer {
 public:
  static constexpr const char* kEndToken = "</s>";

  std::vector<std::string> pieces(std::string_view text) const override {
    return split_whitespace(text);
  }
  std::string join_pieces(std::span<const std::string> pieces) const override {
    std::string out;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (i) out.push_back(' ');
      out += pieces[i];
    }
    return out;
  }
  std::string mask_text() const override { return "<mask>"; }
  std::size_t source_overhead() const override { return 0; }

  std::vector<TokenId> encode(std::string_view text) const override {
    std::vector<TokenId> out;
    for (auto& p : pieces(text)) out.push_back(intern(p));
    return out;
  }
  std::vector<TokenId> encode_source(std::string_view text) const override {
    return encode(text);
  }
  std::vector<TokenId> encode_target(std::string_view text) const override {
    return encode(text);
  }
  std::string decode(std::span<const TokenId> ids) const override {
    std::lock_guard<std::mutex> lock(mutex_);
    std::string out;
    for (TokenId id : ids) {
      const std::string& tok = tokens_.at(static_cast<std::size_t>(id));
      if (tok == kEndToken) continue;
      if (!out.empty()) out.push_back(' ');
      out += tok;
    }
    return out;
  }
  std::size_t vocab_size() const override {
    std::lock_guard<std::mutex> lock(mutex_);
    return tokens_.size();
  }

  TokenId intern(const std::string& token) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    TokenId id = static_cast<TokenId>(tokens_.size());
    tokens_.push_back(token);
    ids_.emplace(token, id);
    return id;
  }
  std::string token(TokenId id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return tokens_.at(static_cast<std::size_t>(id));
  }

 private:
  mutable std::mutex mutex_;
  mutable std::vector<std::string> tokens_;
  mutable std::map<std::string, TokenId> ids_;
};

class OracleBackend : public Backend {
 public:
  OracleBackend() : tokenizer_(std::make_shared<WhitespaceTokenizer>()) {}

  std::string id() const override { return "oracle"; }
  const Tokenizer& tokenizer() const override { return *tokenizer_; }
  WhitespaceTokenizer& whitespace_tokenizer() { return *tokenizer_; }
  std::size_t max_source_tokens() const override { return max_source_tokens_; }
  void set_max_source_tokens(std::size_t n) { max_source_tokens_ = n; }

  // Distribution at (source, prefix). Prefix is the space-joined target
  // tokens emitted so far; empty string for the first step.
  void set_distribution(const std::string& source_text, const std::string& prefix,
                        std::map<std::string, double> dist) {
    table_[source_text][prefix] = std::move(dist);
  }

  // Scripts a full output: every prefix along `output` puts probability 1 on
  // the next token, terminated with the end-of-output token.
  void script_output(const std::string& source_text, const std::string& output) {
    auto toks = split_whitespace(output);
    toks.push_back(WhitespaceTokenizer::kEndToken);
    std::string prefix;
    for (const auto& tok : toks) {
      set_distribution(source_text, prefix, {{tok, 1.0}});
      if (!prefix.empty()) prefix.push_back(' ');
      prefix += tok;
    }
  }

  // When (source, prefix) has no table entry, every token gets 1/n.
  void set_uniform_fallback(std::size_t n) { fallback_vocab_ = n; }

  // Probability of a token missing from an existing distribution.
  void set_missing_token_prob(double p) { missing_prob_ = p; }

  StepProbabilities teacher_forced_probs(const SequencePair& pair) const override {
    check_source_length(pair);
    const std::string source = join_tokens(pair.source_tokens);
    StepProbabilities probs;
    probs.reserve(pair.target_tokens.size());
    std::string prefix;
    for (TokenId id : pair.target_tokens) {
      const std::string tok = tokenizer_->token(id);
      probs.push_back(lookup(source, prefix, tok));
      if (!prefix.empty()) prefix.push_back(' ');
      prefix += tok;
    }
    return probs;
  }

  std::vector<TokenId> free_generate(std::span<const TokenId> source_tokens,
                                     const GenerationOptions& options) const override {
    const std::string source = join_tokens(source_tokens);
    std::vector<TokenId> out;
    std::string prefix;
    for (std::size_t step = 0; step < options.max_length; ++step) {
      auto dist = distribution(source, prefix);
      if (dist.empty()) break;
      // argmax, ties by token string order
      const std::string* best = nullptr;
      double best_p = -1.0;
      for (const auto& [tok, p] : dist) {
        if (p > best_p) {
          best_p = p;
          best = &tok;
        }
      }
      out.push_back(tokenizer_->intern(*best));
      if (*best == WhitespaceTokenizer::kEndToken) break;
      if (!prefix.empty()) prefix.push_back(' ');
      prefix += *best;
    }
    return out;
  }

 private:
  std::string join_tokens(std::span<const TokenId> ids) const {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) out.push_back(' ');
      out += tokenizer_->token(ids[i]);
    }
    return out;
  }

  std::map<std::string, double> distribution(const std::string& source,
                                             const std::string& prefix) const {
    auto s = table_.find(source);
    if (s != table_.end()) {
      auto p = s->second.find(prefix);
      if (p != s->second.end()) return p->second;
    }
    return {};
  }

  double lookup(const std::string& source, const std::string& prefix,
                const std::string& token) const {
    auto dist = distribution(source, prefix);
    if (dist.empty()) return 1.0 / static_cast<double>(fallback_vocab_);
    auto it = dist.find(token);
    return it == dist.end() ? missing_prob_ : it->second;
  }

  std::shared_ptr<WhitespaceTokenizer> tokenizer_;
  std::map<std::string, std::map<std::string, std::map<std::string, double>>> table_;
  std::size_t fallback_vocab_ = 100;
  double missing_prob_ = 1e-9;
  std::size_t max_source_tokens_ = 4096;
};

}  // namespace sig
