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

#include "squrve/llm_backend.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include "squrve/errors.hpp"
#include "squrve/util.hpp"

using nlohmann::json;

namespace squrve {

std::string role_name(Role r) {
  switch (r) {
    case Role::System:
      return "system";
    case Role::User:
      return "user";
    case Role::Assistant:
      return "assistant";
  }
  return "user";
}

void ChatRequest::validate() const {
  bool has_user = std::any_of(messages.begin(), messages.end(),
                              [](const Message& m) { return m.role == Role::User; });
  if (!has_user) {
    throw ArgumentError("chat request requires at least one user message");
  }
}

std::uint64_t request_fingerprint(const ChatRequest& request) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& m : request.messages) {
    h = fnv1a64(role_name(m.role), h);
    h = fnv1a64("\x1e", h);
    h = fnv1a64(m.content, h);
    h = fnv1a64("\x1f", h);
  }
  return h;
}

void BackendConfig::validate() const {
  if (temperature < 0.0 || temperature > 2.0) {
    throw ConfigError("temperature out of range [0, 2]: " +
                      std::to_string(temperature));
  }
  if (timeout_seconds <= 0.0) {
    throw ConfigError("timeout must be positive");
  }
  if (max_retries < 0) {
    throw ConfigError("max_retries must be non-negative");
  }
}

std::string BackendConfig::resolved_api_key() const {
  std::string var = "SQURVE_API_KEY_";
  for (char c : provider_name) {
    var.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  if (const char* env = std::getenv(var.c_str()); env && *env) {
    return env;
  }
  return api_key;
}

json BackendConfig::to_redacted_json() const {
  return json{{"provider_name", provider_name},
              {"base_url", base_url},
              {"model_name", model_name},
              {"temperature", temperature},
              {"max_retries", max_retries},
              {"timeout_seconds", timeout_seconds}};
}

UsageLedger record_usage(const UsageLedger& ledger, const ChatResponse& response) {
  UsageLedger out = ledger;
  out.total_prompt_tokens += response.prompt_tokens;
  out.total_completion_tokens += response.completion_tokens;
  out.total_calls += 1;
  out.total_latency_seconds += response.latency_seconds;
  return out;
}

UsageLedger merge_ledgers(const UsageLedger& a, const UsageLedger& b) {
  UsageLedger out = a;
  out.total_prompt_tokens += b.total_prompt_tokens;
  out.total_completion_tokens += b.total_completion_tokens;
  out.total_calls += b.total_calls;
  out.total_latency_seconds += b.total_latency_seconds;
  return out;
}

void UsageRecorder::record(const ChatResponse& response) {
  std::lock_guard<std::mutex> lk(mu_);
  ledger_ = record_usage(ledger_, response);
}

UsageLedger UsageRecorder::snapshot() const {
  std::lock_guard<std::mutex> lk(mu_);
  return ledger_;
}

std::int64_t approx_token_count(const std::string& text) {
  std::int64_t count = 0;
  bool in_word = false;
  for (char c : text) {
    bool space = std::isspace(static_cast<unsigned char>(c));
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

void MockBackend::script_exact(const ChatRequest& request, std::string response) {
  script_exact(request_fingerprint(request), std::move(response));
}

void MockBackend::script_exact(std::uint64_t fingerprint, std::string response) {
  std::lock_guard<std::mutex> lk(mu_);
  exact_[fingerprint] = std::move(response);
}

void MockBackend::script_contains(std::string needle, std::string response) {
  std::lock_guard<std::mutex> lk(mu_);
  contains_.emplace_back(std::move(needle), std::move(response));
}

void MockBackend::set_default_responder(
    std::function<std::string(const ChatRequest&)> fn) {
  std::lock_guard<std::mutex> lk(mu_);
  default_responder_ = std::move(fn);
}

ChatResponse MockBackend::complete(const ChatRequest& request) {
  request.validate();

  std::string answer;
  bool found = false;
  std::function<std::string(const ChatRequest&)> fallback;
  {
    std::lock_guard<std::mutex> lk(mu_);
    ++calls_;
    auto it = exact_.find(request_fingerprint(request));
    if (it != exact_.end()) {
      answer = it->second;
      found = true;
    }
    if (!found) {
      for (const auto& [needle, response] : contains_) {
        bool hit = std::any_of(request.messages.begin(), request.messages.end(),
                               [&](const Message& m) {
                                 return m.content.find(needle) !=
                                        std::string::npos;
                               });
        if (hit) {
          answer = response;
          found = true;
          break;
        }
      }
    }
    if (!found) fallback = default_responder_;
  }
  if (!found && fallback) {
    // user-supplied responders run outside the lock
    answer = fallback(request);
    found = true;
  }
  if (!found) {
    throw BackendError("mock backend has no script for this prompt");
  }

  std::int64_t prompt_tokens = 0;
  for (const auto& m : request.messages) {
    prompt_tokens += approx_token_count(m.content);
  }
  ChatResponse resp;
  resp.text = std::move(answer);
  resp.prompt_tokens = prompt_tokens;
  resp.completion_tokens = approx_token_count(resp.text);
  resp.latency_seconds = 0.0;
  resp.attempts = 1;
  return resp;
}

std::int64_t MockBackend::calls() const {
  std::lock_guard<std::mutex> lk(mu_);
  return calls_;
}

namespace {

constexpr double kBackoffBaseSeconds = 0.5;
constexpr double kBackoffCapSeconds = 8.0;
constexpr double kBackoffJitter = 0.2;

double backoff_delay(int attempt, std::uint64_t jitter_seed) {
  double base = kBackoffBaseSeconds * std::pow(2.0, attempt);
  base = std::min(base, kBackoffCapSeconds);
  std::minstd_rand rng(static_cast<unsigned>(jitter_seed ^ (attempt + 1)));
  std::uniform_real_distribution<double> dist(1.0 - kBackoffJitter,
                                              1.0 + kBackoffJitter);
  return std::min(base * dist(rng), kBackoffCapSeconds);
}

bool retryable(const TransportResult& r) {
  return r.network_error || r.status == 429 || r.status >= 500;
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config)
    : HttpBackend(std::move(config), Transport{}, SleepFn{}) {}

HttpBackend::HttpBackend(BackendConfig config, Transport transport,
                         SleepFn sleep_fn)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleep_fn_(std::move(sleep_fn)) {
  config_.validate();
  if (!transport_) transport_ = detail_default_transport(config_);
  if (!sleep_fn_) {
    sleep_fn_ = [](double seconds) {
      std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    };
  }
}

json HttpBackend::build_body(const ChatRequest& request) const {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back(json{{"role", role_name(m.role)}, {"content", m.content}});
  }
  double temperature = request.temperature_override.value_or(config_.temperature);
  return json{{"model", config_.model_name},
              {"messages", messages},
              {"temperature", temperature}};
}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
  request.validate();
  const std::string body = build_body(request).dump();
  const std::uint64_t jitter_seed = fnv1a64(body);

  auto start = std::chrono::steady_clock::now();
  TransportResult last;
  int attempts = 0;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    attempts = attempt + 1;
    last = transport_(body);
    if (!last.network_error && last.status == 200) break;
    if (!retryable(last)) {
      throw BackendError("backend request failed with status " +
                             std::to_string(last.status) + ": " +
                             (last.error.empty() ? last.body : last.error),
                         last.status, attempts);
    }
    if (attempt == config_.max_retries) {
      throw BackendError(
          "backend retries exhausted after " + std::to_string(attempts) +
              " attempts; last status " + std::to_string(last.status) +
              (last.error.empty() ? "" : ": " + last.error),
          last.status, attempts);
    }
    sleep_fn_(backoff_delay(attempt, jitter_seed));
  }
  auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                               start)
                     .count();

  json parsed = json::parse(last.body, nullptr, false);
  if (parsed.is_discarded()) {
    throw BackendError("backend returned invalid JSON", last.status, attempts);
  }
  ChatResponse resp;
  try {
    resp.text = parsed.at("choices").at(0).at("message").at("content")
                    .get<std::string>();
  } catch (const json::exception&) {
    throw BackendError("backend response missing choices[0].message.content",
                       last.status, attempts);
  }
  if (parsed.contains("usage")) {
    resp.prompt_tokens = parsed["usage"].value("prompt_tokens", 0);
    resp.completion_tokens = parsed["usage"].value("completion_tokens", 0);
  }
  resp.latency_seconds = elapsed;
  resp.attempts = attempts;
  return resp;
}

}  // namespace squrve
