#pragma once

// Provider abstraction over chat-completion APIs plus the two deterministic
// providers used for tests and replays. Transport failures are retried up to
// a budget; format errors never are: they are outcomes to measure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ipaeval/errors.hpp"
#include "ipaeval/prompts.hpp"
#include "ipaeval/util.hpp"

namespace ipaeval {

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;

  bool operator==(const TokenUsage&) const = default;
};

struct CompletionRequest {
  std::vector<Message> messages;  // non-empty
  std::string model;
  double temperature = 0.0;
  int max_output_tokens = 4096;
};

struct ProviderResponse {
  std::string raw_text;  // may be empty; that becomes a decode failure downstream
  std::optional<TokenUsage> usage;
  std::chrono::milliseconds latency{0};
};

/// Deterministic fingerprint of a request: model, sampling parameters, and
/// every message. Keys scripted responses and cassette entries.
inline std::string request_digest(const CompletionRequest& request) {
  std::string canon = request.model;
  canon += '\x1f';
  canon += detail::format_double(request.temperature);
  canon += '\x1f';
  canon += std::to_string(request.max_output_tokens);
  for (const auto& m : request.messages) {
    canon += '\x1e';
    canon += to_string(m.role);
    canon += '\x1f';
    canon += m.content;
  }
  return detail::to_hex(detail::fnv1a64(canon));
}

/// A chat-completion backend. Implementations must be safe for concurrent
/// complete() calls.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual ProviderResponse complete(const CompletionRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// Retry budget for transport-level failures only. `budget` is the total
/// number of attempts.
struct RetryPolicy {
  int budget = 3;
  std::chrono::milliseconds base_backoff{200};
};

/// Call the provider, retrying retryable transport failures until the budget
/// is exhausted. Rethrows the last failure.
inline ProviderResponse complete_with_retry(Provider& provider, const CompletionRequest& request,
                                            const RetryPolicy& policy = {}) {
  if (request.messages.empty()) throw ValidationError("completion request has no messages");
  int attempts = policy.budget < 1 ? 1 : policy.budget;
  for (int attempt = 1;; ++attempt) {
    try {
      return provider.complete(request);
    } catch (const TransportError& e) {
      if (!e.retryable || attempt >= attempts) throw;
      std::this_thread::sleep_for(policy.base_backoff * attempt);
    }
  }
}

/// Replays scripted responses with zero latency. Rules are evaluated in
/// order; a rule matches by exact request digest, by all of its `contains`
/// substrings occurring in the flattened request text, or unconditionally
/// when it has neither (a default rule). Immutable once configured, hence
/// freely shareable across threads.
///
/// Script file format, a JSON array of rules:
///   [ {"digest": "<16 hex chars>", "response": "..."},
///     {"contains": ["Scoring criteria:", "Client ID: C1"], "response_json": {...}},
///     {"response": "fallback"} ]
class ScriptedProvider : public Provider {
 public:
  struct Rule {
    std::optional<std::string> digest;
    std::vector<std::string> contains;
    std::string response;
  };

  void add_rule(Rule rule) { rules_.push_back(std::move(rule)); }

  void add_digest_response(std::string digest, std::string response) {
    add_rule({std::move(digest), {}, std::move(response)});
  }

  void add_match(std::vector<std::string> contains, std::string response) {
    add_rule({std::nullopt, std::move(contains), std::move(response)});
  }

  void set_default_response(std::string response) {
    add_rule({std::nullopt, {}, std::move(response)});
  }

  static ScriptedProvider from_json(std::string_view script) {
    auto j = nlohmann::json::parse(script, nullptr, false);
    if (j.is_discarded() || !j.is_array())
      throw ParseError("script must be a JSON array of rules");
    ScriptedProvider provider;
    for (const auto& rj : j) {
      Rule rule;
      if (rj.contains("digest")) rule.digest = rj["digest"].get<std::string>();
      if (rj.contains("contains")) {
        if (rj["contains"].is_string()) {
          rule.contains.push_back(rj["contains"].get<std::string>());
        } else {
          rule.contains = rj["contains"].get<std::vector<std::string>>();
        }
      }
      if (rj.contains("response_json")) rule.response = rj["response_json"].dump(2);
      else if (rj.contains("response")) rule.response = rj["response"].get<std::string>();
      else throw ParseError("script rule has no 'response' or 'response_json'");
      provider.add_rule(std::move(rule));
    }
    return provider;
  }

  static ScriptedProvider from_file(const std::filesystem::path& path) {
    return from_json(detail::read_file(path));
  }

  ProviderResponse complete(const CompletionRequest& request) override {
    auto digest = request_digest(request);
    std::string haystack;
    for (const auto& m : request.messages) {
      haystack += to_string(m.role);
      haystack += ": ";
      haystack += m.content;
      haystack += '\n';
    }
    for (const auto& rule : rules_) {
      if (rule.digest) {
        if (*rule.digest == digest) return {rule.response, std::nullopt, {}};
        continue;
      }
      bool all = true;
      for (const auto& needle : rule.contains) {
        if (!detail::contains(haystack, needle)) {
          all = false;
          break;
        }
      }
      if (all) return {rule.response, std::nullopt, {}};
    }
    throw ConfigError("scripted provider has no rule for request digest " + digest);
  }

  std::string name() const override { return "scripted"; }

 private:
  std::vector<Rule> rules_;
};

enum class CassetteMode { record, replay };

/// Record/replay cassette keyed on request digest. In record mode every
/// response from the inner provider is appended as one JSONL line
/// {"digest": ..., "response": ...}; in replay mode responses come from the
/// cassette and a miss is a configuration error.
class CassetteProvider : public Provider {
 public:
  CassetteProvider(std::filesystem::path path, CassetteMode mode, Provider* inner = nullptr)
      : path_(std::move(path)), mode_(mode), inner_(inner) {
    if (mode_ == CassetteMode::record && inner_ == nullptr)
      throw ConfigError("cassette recording needs an inner provider");
    if (mode_ == CassetteMode::replay) load();
  }

  /// Recording variant that owns the provider it wraps.
  CassetteProvider(std::filesystem::path path, std::unique_ptr<Provider> inner)
      : CassetteProvider(std::move(path), CassetteMode::record, inner.get()) {
    owned_inner_ = std::move(inner);
  }

  ProviderResponse complete(const CompletionRequest& request) override {
    auto digest = request_digest(request);
    if (mode_ == CassetteMode::replay) {
      std::lock_guard lock(mutex_);
      auto it = entries_.find(digest);
      if (it == entries_.end())
        throw ConfigError("cassette " + path_.string() + " has no entry for digest " + digest);
      return {it->second, std::nullopt, {}};
    }
    auto response = inner_->complete(request);
    std::lock_guard lock(mutex_);
    entries_[digest] = response.raw_text;
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw ConfigError("cannot append to cassette: " + path_.string());
    out << nlohmann::json{{"digest", digest}, {"response", response.raw_text}}.dump() << '\n';
    return response;
  }

  std::string name() const override {
    return mode_ == CassetteMode::replay ? "cassette" : "cassette+" + inner_->name();
  }

 private:
  void load() {
    if (!std::filesystem::exists(path_))
      throw ConfigError("cassette file not found: " + path_.string());
    auto content = detail::read_file(path_);
    for (auto line : detail::split_lines(content)) {
      auto t = detail::trim(line);
      if (t.empty()) continue;
      auto j = nlohmann::json::parse(t, nullptr, false);
      if (j.is_discarded() || !j.is_object())
        throw ParseError("bad cassette line in " + path_.string());
      entries_[j.at("digest").get<std::string>()] = j.at("response").get<std::string>();
    }
  }

  std::filesystem::path path_;
  CassetteMode mode_;
  Provider* inner_;
  std::unique_ptr<Provider> owned_inner_;
  std::map<std::string, std::string> entries_;
  std::mutex mutex_;
};

}  // namespace ipaeval
