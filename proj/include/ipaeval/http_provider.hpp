#pragma once

// OpenAI-compatible chat-completions adapter. All of the hosted vendors this
// harness targets expose the same request/response envelope, so one adapter
// plus per-vendor presets (base URL + credential env var) covers them.
// Kept in its own header so the rest of the library does not pull in httplib.

#include <chrono>
#include <cstdlib>
#include <map>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "ipaeval/errors.hpp"
#include "ipaeval/gateway.hpp"

namespace ipaeval {

struct HttpProviderOptions {
  std::string base_url;                              // e.g. https://api.openai.com/v1
  std::string api_key_env;                           // env var holding the credential
  std::string api_key;                               // explicit key wins over the env var
  std::string completions_path = "/chat/completions";
  std::chrono::seconds read_timeout{120};
  std::map<std::string, std::string> extra_headers;
};

/// Known vendor presets. `name` may also be "custom", which reads
/// IPAEVAL_BASE_URL and IPAEVAL_API_KEY. A {NAME}_BASE_URL env var overrides
/// any preset for self-hosted or proxied endpoints.
inline HttpProviderOptions provider_preset(const std::string& name) {
  HttpProviderOptions o;
  if (name == "openai") {
    o.base_url = "https://api.openai.com/v1";
    o.api_key_env = "OPENAI_API_KEY";
  } else if (name == "mistral") {
    o.base_url = "https://api.mistral.ai/v1";
    o.api_key_env = "MISTRAL_API_KEY";
  } else if (name == "fireworks") {
    o.base_url = "https://api.fireworks.ai/inference/v1";
    o.api_key_env = "FIREWORKS_API_KEY";
  } else if (name == "together") {
    o.base_url = "https://api.together.xyz/v1";
    o.api_key_env = "TOGETHER_API_KEY";
  } else if (name == "custom") {
    o.api_key_env = "IPAEVAL_API_KEY";
    if (const char* url = std::getenv("IPAEVAL_BASE_URL")) o.base_url = url;
  } else {
    throw ConfigError("unknown provider preset: " + name);
  }
  std::string override_env = detail::to_lower(name);
  for (char& c : override_env) c = (c >= 'a' && c <= 'z') ? static_cast<char>(c - 'a' + 'A') : c;
  override_env += "_BASE_URL";
  if (const char* url = std::getenv(override_env.c_str())) o.base_url = url;
  if (o.base_url.empty())
    throw ConfigError("provider '" + name + "' has no base URL configured");
  return o;
}

class HttpChatProvider : public Provider {
 public:
  explicit HttpChatProvider(HttpProviderOptions options) : options_(std::move(options)) {
    if (options_.api_key.empty() && !options_.api_key_env.empty()) {
      if (const char* key = std::getenv(options_.api_key_env.c_str())) options_.api_key = key;
    }
    if (options_.api_key.empty())
      throw ConfigError("no API credential found; set " +
                        (options_.api_key_env.empty() ? std::string("an api_key") : options_.api_key_env));
    split_base_url();
  }

  ProviderResponse complete(const CompletionRequest& request) override {
    nlohmann::json body;
    body["model"] = request.model;
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_output_tokens;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : request.messages)
      body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});

    httplib::Client client(host_);
    client.set_read_timeout(options_.read_timeout);
    client.set_connection_timeout(std::chrono::seconds(15));
    httplib::Headers headers{{"Authorization", "Bearer " + options_.api_key}};
    for (const auto& [k, v] : options_.extra_headers) headers.emplace(k, v);

    auto started = std::chrono::steady_clock::now();
    auto result = client.Post(path_prefix_ + options_.completions_path, headers, body.dump(),
                              "application/json");
    auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);

    if (!result) {
      auto err = result.error();
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
        throw TransportError(TransportFailure::timeout,
                             "request timed out: " + httplib::to_string(err));
      throw TransportError(TransportFailure::network,
                           "transport failure: " + httplib::to_string(err));
    }
    if (result->status == 429)
      throw TransportError(TransportFailure::rate_limited, "rate limited (HTTP 429)", 429);
    if (result->status >= 500)
      throw TransportError(TransportFailure::server_error,
                           "server error (HTTP " + std::to_string(result->status) + ")",
                           result->status);
    if (result->status < 200 || result->status >= 300)
      throw TransportError(TransportFailure::http_status,
                           "unexpected HTTP status " + std::to_string(result->status) + ": " +
                               result->body,
                           result->status);

    auto j = nlohmann::json::parse(result->body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() ||
        j["choices"].empty())
      throw TransportError(TransportFailure::protocol, "response envelope is not usable");
    const auto& choice = j["choices"][0];
    if (!choice.contains("message") || !choice["message"].contains("content"))
      throw TransportError(TransportFailure::protocol, "response has no message content");

    ProviderResponse response;
    if (choice["message"]["content"].is_string())
      response.raw_text = choice["message"]["content"].get<std::string>();
    response.latency = latency;
    if (j.contains("usage") && j["usage"].is_object()) {
      TokenUsage usage;
      usage.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
      usage.completion_tokens = j["usage"].value("completion_tokens", 0L);
      response.usage = usage;
    }
    return response;
  }

  std::string name() const override { return "http:" + host_; }

 private:
  void split_base_url() {
    auto url = options_.base_url;
    auto scheme_end = url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = url.find('/', host_start);
    if (path_start == std::string::npos) {
      host_ = url;
      path_prefix_.clear();
    } else {
      host_ = url.substr(0, path_start);
      path_prefix_ = url.substr(path_start);
      while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
  }

  HttpProviderOptions options_;
  std::string host_;         // scheme://host[:port]
  std::string path_prefix_;  // e.g. /v1
};

}  // namespace ipaeval
