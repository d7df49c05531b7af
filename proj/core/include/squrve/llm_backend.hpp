// Copyright 2026-present the Squrve project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace squrve {

enum class Role { System, User, Assistant };

std::string role_name(Role r);

struct Message {
  Role role = Role::User;
  std::string content;

  bool operator==(const Message&) const = default;
};

/// Chat request: at least one user message is required.
struct ChatRequest {
  std::vector<Message> messages;
  std::optional<double> temperature_override;

  void validate() const;
  bool operator==(const ChatRequest&) const = default;
};

/// Stable fingerprint of a request's rendered messages. Mock backends key
/// their scripts on it, which also catches accidental prompt drift in tests.
std::uint64_t request_fingerprint(const ChatRequest& request);

struct ChatResponse {
  std::string text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  double latency_seconds = 0.0;
  int attempts = 1;
};

/// Connection settings for one provider. `api_key` is never serialized;
/// SQURVE_API_KEY_<PROVIDER> overrides it when set.
struct BackendConfig {
  std::string provider_name;
  std::string api_key;
  std::string base_url;
  std::string model_name;
  double temperature = 0.0;
  int max_retries = 3;
  double timeout_seconds = 60.0;

  /// Throws ConfigError on out-of-range temperature or timeout.
  void validate() const;

  /// api_key after applying the SQURVE_API_KEY_<PROVIDER> env override.
  std::string resolved_api_key() const;

  /// Redacted serialization: every field except the secret.
  nlohmann::json to_redacted_json() const;
};

/// Aggregate token/time accounting over recorded responses.
struct UsageLedger {
  std::int64_t total_prompt_tokens = 0;
  std::int64_t total_completion_tokens = 0;
  std::int64_t total_calls = 0;
  double total_latency_seconds = 0.0;

  bool operator==(const UsageLedger&) const = default;
};

UsageLedger record_usage(const UsageLedger& ledger, const ChatResponse& response);
UsageLedger merge_ledgers(const UsageLedger& a, const UsageLedger& b);

/// Single accumulation point for concurrent recorders; totals after N
/// concurrent records equal the N-element sum.
class UsageRecorder {
 public:
  void record(const ChatResponse& response);
  UsageLedger snapshot() const;

 private:
  mutable std::mutex mu_;
  UsageLedger ledger_;
};

/// Chat-completion backend. Implementations must be safe to call
/// concurrently.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// Deterministic scripted backend: a pure function of (script, request).
/// Resolution order: exact fingerprint script, then substring rules in
/// insertion order, then the default responder. An unscripted prompt with
/// no default responder is a BackendError.
class MockBackend : public Backend {
 public:
  MockBackend() = default;

  /// Scripts an exact prompt: hash(rendered request) -> response text.
  void script_exact(const ChatRequest& request, std::string response);
  void script_exact(std::uint64_t fingerprint, std::string response);

  /// Responds with `response` whenever any message contains `needle`.
  void script_contains(std::string needle, std::string response);

  /// Fallback responder for anything unscripted.
  void set_default_responder(std::function<std::string(const ChatRequest&)> fn);

  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return "mock"; }

  std::int64_t calls() const;

 private:
  std::unordered_map<std::uint64_t, std::string> exact_;
  std::vector<std::pair<std::string, std::string>> contains_;
  std::function<std::string(const ChatRequest&)> default_responder_;
  mutable std::mutex mu_;
  std::int64_t calls_ = 0;
};

/// Raw transport result used by the HTTP backend's retry loop.
struct TransportResult {
  int status = 0;
  std::string body;
  bool network_error = false;
  std::string error;
};

using Transport = std::function<TransportResult(const std::string& json_body)>;
using SleepFn = std::function<void(double seconds)>;

/// OpenAI-compatible chat-completions client: POST {base_url}/chat/completions
/// with {model, messages, temperature}; reads choices[0].message.content and
/// usage token counts. Transient failures (HTTP 429/5xx, network errors)
/// retry with exponential backoff (0.5s * 2^attempt, ±20% jitter, capped at
/// 8s) up to max_retries; other 4xx fail immediately.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig config);
  /// Test seam: custom transport and sleep function.
  HttpBackend(BackendConfig config, Transport transport, SleepFn sleep_fn);

  ChatResponse complete(const ChatRequest& request) override;
  std::string name() const override { return config_.provider_name; }

  /// Request body for one chat request, exactly as posted.
  nlohmann::json build_body(const ChatRequest& request) const;

 private:
  BackendConfig config_;
  Transport transport_;
  SleepFn sleep_fn_;
};

/// Deterministic word-count token estimate used by the mock backend.
std::int64_t approx_token_count(const std::string& text);

/// httplib-based transport for `config`; kept in its own translation unit so
/// the HTTP header stays out of the core build path.
Transport detail_default_transport(const BackendConfig& config);

}  // namespace squrve
