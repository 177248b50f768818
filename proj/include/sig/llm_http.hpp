#pragma once

// HTTP client for OpenAI-compatible chat-completion endpoints. The API key
// comes from an environment variable (default SIG_LLM_API_KEY) and is never
// logged or echoed. Kept in its own header so only the CLI pays for the
// httplib include.

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "sig/llm.hpp"

namespace sig {

class HttpLlmClient : public LlmClient {
 public:
  HttpLlmClient(std::string base_url, std::string model,
                std::string api_key_env = "SIG_LLM_API_KEY")
      : base_url_(std::move(base_url)), model_(std::move(model)) {
    const char* key = std::getenv(api_key_env.c_str());
    if (key) api_key_ = key;
  }

  std::string id() const override { return "http:" + model_; }

  std::string complete(const std::string& prompt) override {
    httplib::Client client(base_url_);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    nlohmann::json body;
    body["model"] = model_;
    body["messages"] = {{{"role", "user"}, {"content", prompt}}};
    auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
    if (!res) {
      throw LlmTransportError("request to " + base_url_ + " failed: " +
                              httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw LlmTransportError("request to " + base_url_ + " returned status " +
                              std::to_string(res->status));
    }
    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw LlmTransportError("response body is not valid JSON");
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw LlmTransportError("response body lacks choices[0].message.content");
    }
  }

 private:
  std::string base_url_;
  std::string model_;
  std::string api_key_;
};

}  // namespace sig
