#pragma once

// Zero-shot instruction-model client plumbing: the documented default
// prompt, a content-addressed response cache keyed by (quote, prompt hash),
// retry with backoff for transport failures, and an offline stub client so
// the test suite never needs the network. The prompt text is configuration,
// not a fidelity claim; see docs/llm_prompt.md.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sig/corpus.hpp"
#include "sig/text.hpp"

namespace sig {

class LlmTransportError : public Error {
 public:
  using Error::Error;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string id() const = 0;
  // Returns the raw model response; throws LlmTransportError when the
  // request could not be completed.
  virtual std::string complete(const std::string& prompt) = 0;
};

// Offline client with canned responses. The fixture file is a JSON object
// mapping either full prompt hashes (fnv1a64 hex) or the key "default" to
// response strings.
class StubLlmClient : public LlmClient {
 public:
  std::string id() const override { return "stub"; }

  static StubLlmClient from_fixture(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open stub fixture '" + path.string() + "'");
    nlohmann::json j = nlohmann::json::parse(in);
    StubLlmClient client;
    for (const auto& [key, value] : j.items()) {
      if (key == "default") {
        client.default_response_ = value.get<std::string>();
      } else {
        client.by_hash_[key] = value.get<std::string>();
      }
    }
    return client;
  }

  void set_response(const std::string& prompt, std::string response) {
    by_hash_[fnv1a64_hex(prompt)] = std::move(response);
  }
  void set_default(std::string response) { default_response_ = std::move(response); }
  void set_callback(std::function<std::string(const std::string&)> fn) {
    callback_ = std::move(fn);
  }

  std::string complete(const std::string& prompt) override {
    if (callback_) return callback_(prompt);
    auto it = by_hash_.find(fnv1a64_hex(prompt));
    if (it != by_hash_.end()) return it->second;
    if (default_response_) return *default_response_;
    throw Error("stub client has no response for this prompt");
  }

 private:
  std::map<std::string, std::string> by_hash_;
  std::optional<std::string> default_response_;
  std::function<std::string(const std::string&)> callback_;
};

enum class PromptStyle { Plain, ChainOfThought };

// Task instruction + context + quotation + numbered candidate list, with the
// step-by-step suffix for chain-of-thought.
inline std::string build_zero_shot_prompt(const QuotationInstance& instance,
                                          const CharacterRoster& roster, PromptStyle style) {
  std::string p;
  p += "You are given a passage from a novel and one quotation from it. ";
  p += "Identify the speaker of the quotation.\n\n";
  if (!instance.left_context.empty()) p += "Context before: " + instance.left_context + "\n";
  p += "Quotation: " + instance.text + "\n";
  if (!instance.right_context.empty()) p += "Context after: " + instance.right_context + "\n";
  p += "\nCandidate speakers:\n";
  std::size_t n = 0;
  for (const auto& entry : roster.entries) {
    p += std::to_string(++n) + ". " + entry.canonical_name;
    if (!entry.aliases.empty()) {
      p += " (also known as: ";
      for (std::size_t i = 0; i < entry.aliases.size(); ++i) {
        if (i) p += ", ";
        p += entry.aliases[i];
      }
      p += ")";
    }
    p += "\n";
  }
  p += "\n";
  if (style == PromptStyle::ChainOfThought) {
    p += "Think step by step, then answer with the name of the speaker.\n";
  } else {
    p += "Answer with the name of the speaker.\n";
  }
  return p;
}

// One file per response under the cache directory; the name carries the
// quote key and the prompt hash, so a prompt change invalidates naturally.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::optional<std::string> lookup(const QuoteKey& key, const std::string& prompt_hash) const {
    std::ifstream in(entry_path(key, prompt_hash), std::ios::binary);
    if (!in) return std::nullopt;
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j.value("response", std::string{});
  }

  void store(const QuoteKey& key, const std::string& prompt_hash,
             const std::string& response) const {
    nlohmann::ordered_json j;
    j["novel_id"] = key.novel_id;
    j["quote_id"] = key.quote_id;
    j["prompt_hash"] = prompt_hash;
    j["response"] = response;
    std::ofstream out(entry_path(key, prompt_hash), std::ios::binary);
    if (!out) throw Error("cannot write cache entry under '" + dir_.string() + "'");
    out << j.dump(2) << '\n';
  }

 private:
  static std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) {
      out.push_back(is_word_byte(static_cast<unsigned char>(c)) ? c : '_');
    }
    return out;
  }
  std::filesystem::path entry_path(const QuoteKey& key, const std::string& prompt_hash) const {
    return dir_ / (sanitize(key.novel_id) + "__" + sanitize(key.quote_id) + "__" + prompt_hash +
                   ".json");
  }

  std::filesystem::path dir_;
};

struct ZeroShotOptions {
  PromptStyle style = PromptStyle::ChainOfThought;
  int max_retries = 3;
  int backoff_ms = 200;  // doubled per retry
};

struct ZeroShotResult {
  QuoteKey key;
  std::string prompt_hash;
  std::string response;
  bool from_cache = false;
};

inline ZeroShotResult llm_zero_shot(const QuotationInstance& instance,
                                    const CharacterRoster& roster, LlmClient& client,
                                    const ZeroShotOptions& options = {},
                                    const ResponseCache* cache = nullptr) {
  const std::string prompt = build_zero_shot_prompt(instance, roster, options.style);
  ZeroShotResult result;
  result.key = {instance.novel_id, instance.quote_id};
  result.prompt_hash = fnv1a64_hex(prompt);
  if (cache) {
    if (auto hit = cache->lookup(result.key, result.prompt_hash)) {
      result.response = *hit;
      result.from_cache = true;
      return result;
    }
  }
  int attempt = 0;
  for (;;) {
    try {
      result.response = client.complete(prompt);
      break;
    } catch (const LlmTransportError&) {
      if (++attempt > options.max_retries) throw;
      std::this_thread::sleep_for(
          std::chrono::milliseconds(options.backoff_ms << (attempt - 1)));
    }
  }
  if (cache) cache->store(result.key, result.prompt_hash, result.response);
  return result;
}

}  // namespace sig
