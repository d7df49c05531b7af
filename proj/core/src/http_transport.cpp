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

#include <httplib.h>

#include "squrve/errors.hpp"
#include "squrve/llm_backend.hpp"

namespace squrve {

namespace {

// Splits "http://host:port/prefix" into the client origin and path prefix.
struct UrlParts {
  std::string origin;
  std::string path_prefix;
};

UrlParts split_url(const std::string& base_url) {
  std::string rest = base_url;
  std::string scheme = "http://";
  if (rest.rfind("https://", 0) == 0) {
    scheme = "https://";
    rest = rest.substr(8);
  } else if (rest.rfind("http://", 0) == 0) {
    rest = rest.substr(7);
  }
  auto slash = rest.find('/');
  if (slash == std::string::npos) return {scheme + rest, ""};
  std::string prefix = rest.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {scheme + rest.substr(0, slash), prefix};
}

}  // namespace

Transport detail_default_transport(const BackendConfig& config) {
  if (config.base_url.empty()) {
    throw ConfigError("backend '" + config.provider_name +
                      "' has no base_url configured");
  }
  UrlParts url = split_url(config.base_url);
  std::string api_key = config.resolved_api_key();
  double timeout = config.timeout_seconds;

  return [url, api_key, timeout](const std::string& body) -> TransportResult {
    httplib::Client client(url.origin);
    client.set_connection_timeout(std::chrono::duration<double>(timeout));
    client.set_read_timeout(std::chrono::duration<double>(timeout));
    client.set_write_timeout(std::chrono::duration<double>(timeout));

    httplib::Headers headers;
    if (!api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + api_key);
    }
    auto res = client.Post(url.path_prefix + "/chat/completions", headers, body,
                           "application/json");
    if (!res) {
      return TransportResult{0, "", true, httplib::to_string(res.error())};
    }
    return TransportResult{res->status, res->body, false, ""};
  };
}

}  // namespace squrve
