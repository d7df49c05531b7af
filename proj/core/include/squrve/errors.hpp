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

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

namespace squrve {

/// Root of the framework's exception hierarchy.
class SqurveError : public std::runtime_error {
 public:
  explicit SqurveError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A caller passed an argument violating a precondition.
class ArgumentError : public SqurveError {
 public:
  using SqurveError::SqurveError;
};

/// Malformed or inconsistent configuration (root config, workflow encoding,
/// actor registry lookups).
class ConfigError : public SqurveError {
 public:
  using SqurveError::SqurveError;
};

/// Dataset records that cannot be mapped to QueryInstance.
class IngestionError : public SqurveError {
 public:
  using SqurveError::SqurveError;
};

/// Schema invariant violations (dangling foreign keys, duplicate columns).
class SchemaError : public SqurveError {
 public:
  using SqurveError::SqurveError;
};

/// Filesystem failures, kept distinct from in-band SQL execution errors.
class IoError : public SqurveError {
 public:
  using SqurveError::SqurveError;
};

/// LLM backend failure. Carries the last HTTP status (when any) and the
/// number of attempts that were made before giving up.
class BackendError : public SqurveError {
 public:
  BackendError(const std::string& msg, int http_status = 0, int attempts = 1)
      : SqurveError(msg), http_status_(http_status), attempts_(attempts) {}

  int http_status() const { return http_status_; }
  int attempts() const { return attempts_; }

 private:
  int http_status_;
  int attempts_;
};

/// Task binding failure; names the offending field.
class BindingError : public SqurveError {
 public:
  BindingError(const std::string& field, const std::string& msg)
      : SqurveError("binding error (" + field + "): " + msg), field_(field) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Metric computation failure for one task.
class EvalError : public SqurveError {
 public:
  using SqurveError::SqurveError;
};

}  // namespace squrve
