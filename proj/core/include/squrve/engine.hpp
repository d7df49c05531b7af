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

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "squrve/llm_backend.hpp"
#include "squrve/task_runtime.hpp"

namespace squrve {

enum class UnknownKeyMode { Error, Warn };

struct LlmSettings {
  std::string use;
  std::string model_name;
  double temperature = 0.0;
  std::string base_url;
  int max_retries = 3;
  double timeout_seconds = 60.0;
};

/// The root configuration record. Field names follow the config-file wire
/// format exactly: api_key, llm.{use, model_name, temperature},
/// dataset.data_source, database.schema_source, task.task_meta[],
/// engine.exec_process.
struct RootConfig {
  std::map<std::string, std::string> api_key;
  LlmSettings llm;
  std::string dataset_data_source;
  std::string database_schema_source;
  std::vector<TaskSpec> task_meta;
  std::vector<std::string> exec_process;

  /// Throws ConfigError when exec_process names an absent task, task ids
  /// collide, temperature is out of range, or the selected provider has no
  /// api_key (env override and the built-in "mock" provider excepted).
  void validate() const;

  nlohmann::json to_json() const;

  /// FNV-1a digest of the canonical serialization.
  std::string digest() const;
};

/// Parses and validates a config. Unknown top-level keys are an error by
/// default (or a stderr warning in Warn mode).
RootConfig parse_config(const nlohmann::json& j,
                        UnknownKeyMode mode = UnknownKeyMode::Error);

/// Accepts a file path or inline JSON text (anything starting with '{').
RootConfig load_config(const std::string& source,
                       UnknownKeyMode mode = UnknownKeyMode::Error);

/// Configuration manager: loads system settings for the engine.
class Router {
 public:
  explicit Router(const std::string& config_path,
                  UnknownKeyMode mode = UnknownKeyMode::Error);
  static Router from_inline(const std::string& json_text,
                            UnknownKeyMode mode = UnknownKeyMode::Error);

  const RootConfig& config() const { return config_; }

 private:
  explicit Router(RootConfig config) : config_(std::move(config)) {}
  RootConfig config_;
};

struct TaskRunStats {
  double wall_time_seconds = 0.0;
  UsageLedger ledger;
  std::size_t instance_count = 0;
};

struct ExecutionOutput {
  std::vector<std::string> task_order;
  std::map<std::string, std::vector<TaskResult>> results;
  std::map<std::string, TaskRunStats> stats;
};

struct TaskReport {
  std::string task_id;
  std::size_t instance_count = 0;
  std::map<std::string, double> metrics;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t llm_calls = 0;
  double wall_time_seconds = 0.0;
  std::optional<std::string> error;
};

/// The run report persisted as report.json. Wall-clock values live only in
/// the dedicated started_at / finished_at / wall_time_seconds fields.
struct RunReport {
  int schema_version = 1;
  std::string config_digest;
  std::string started_at;
  std::string finished_at;
  std::vector<TaskReport> tasks;

  nlohmann::json to_json() const;
};

struct EngineOptions {
  std::string report_dir = "reports";
  std::string benchmark_root = "benchmark";
  std::optional<int> concurrency;  // per-task instance limit override
  int task_concurrency = 2;        // concurrently running tasks
  bool sequential = false;         // strict exec_process sequencing
  std::string templates_dir;       // optional prompt template overrides
  std::string exemplar_corpus;     // optional CoT exemplar corpus path
  double sql_timeout_seconds = 30.0;
  std::ostream* log = nullptr;
  Backend* backend_override = nullptr;  // tests inject scripted mocks
};

/// Central controller: binds every task up front (fail fast), launches them
/// in exec_process order up to the task concurrency cap, persists artifacts,
/// and computes the evaluation report.
class Engine {
 public:
  Engine(RootConfig config, EngineOptions options = {});
  explicit Engine(const Router& router, EngineOptions options = {});

  /// Binds all tasks, then runs them. No LLM call is issued when any task
  /// fails binding. Results and stats are persisted per task under the
  /// report directory.
  ExecutionOutput execute();

  /// Computes each task's eval_type metrics and writes report.json. Failed
  /// metrics surface as that task's error; other tasks are still reported.
  RunReport evaluate(const ExecutionOutput& output);

  /// Recomputes metrics from artifacts persisted by a previous run.
  RunReport evaluate_persisted();

  const EngineOptions& options() const { return options_; }

 private:
  void bind_all();
  std::unique_ptr<Backend> make_backend() const;
  void log_line(const std::string& task_id, const std::string& message);
  TaskReport evaluate_task(const TaskContainer& container,
                           const std::vector<TaskResult>& results,
                           const TaskRunStats& stats);

  RootConfig config_;
  EngineOptions options_;
  std::map<std::string, TaskContainer> containers_;
  std::unique_ptr<Backend> owned_backend_;
  std::string started_at_;
};

}  // namespace squrve
