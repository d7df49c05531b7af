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

#include <map>
#include <string>

namespace squrve {

/// Prompt templates are plain UTF-8 text with {question}, {schema},
/// {context}, {candidates} and {feedback} placeholders, keyed by the actor
/// registry name. Built-in defaults cover every registered actor; a
/// templates directory of <name>.txt files overrides them.
class PromptTemplateStore {
 public:
  PromptTemplateStore() = default;

  /// Compiled-in defaults for every registered actor and the generic kinds.
  static const PromptTemplateStore& builtin();

  /// Builtin defaults plus overrides read from `dir`/<template_id>.txt.
  static PromptTemplateStore with_overrides(const std::string& dir);

  void set(const std::string& template_id, std::string text);
  bool has(const std::string& template_id) const;

  /// Exact lookup with fallback to the generic template for `kind_name`
  /// ("reduce", "parse", ...). Throws ConfigError when neither exists.
  const std::string& get(const std::string& template_id,
                         const std::string& kind_name) const;

 private:
  std::map<std::string, std::string> templates_;
};

/// Replaces every {key} occurrence with its value; unknown placeholders are
/// left untouched.
std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& values);

}  // namespace squrve
