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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "squrve/actors.hpp"
#include "squrve/data_model.hpp"
#include "squrve/llm_backend.hpp"
#include "squrve/sql_eval.hpp"

namespace squrve {

/// One task definition from the root config's task_meta list.
struct TaskSpec {
  std::string task_id;
  std::string task_type = "GenerateTask";
  std::string data_source;
  std::string schema_source;
  std::vector<std::string> eval_type;
  nlohmann::json meta = nlohmann::json::object();

  /// Throws ConfigError on an empty task_id or an unknown eval_type entry.
  void validate() const;

  /// Looks up `key` under meta.task first, then meta itself.
  const nlohmann::json* meta_value(const std::string& key) const;
};

enum class TaskStatus { Pending, Running, Done, Failed };

/// Per-instance outcome of one task run. Exactly one of predicted_sql and
/// error is present.
struct TaskResult {
  std::string instance_id;
  std::optional<std::string> predicted_sql;
  std::optional<std::string> error;
  std::optional<ExecOutcome> exec_outcome;
  double duration_seconds = 0.0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t llm_calls = 0;
  double llm_latency_seconds = 0.0;

  nlohmann::json to_json() const;
  static TaskResult from_json(const nlohmann::json& j);

  bool operator==(const TaskResult&) const = default;
};

/// Maps source descriptors to concrete paths. A descriptor that names an
/// existing file or directory is used as-is (databases are expected in a
/// sibling "databases" directory); otherwise "name:split[:]" resolves to
/// {benchmark_root}/name/split/{dataset.json, schema.json|schema/, databases}.
class SourceResolver {
 public:
  explicit SourceResolver(std::string benchmark_root = "benchmark");

  std::string resolve_dataset(const std::string& descriptor) const;

  struct SchemaSource {
    std::string schema_path;
    std::string db_root;
  };
  SchemaSource resolve_schema(const std::string& descriptor) const;

 private:
  std::string root_;
};

/// A fully resolved task: dataset, schemas, workflow and runtime status.
/// Containers are independent of each other; one container's results never
/// depend on what other containers are doing.
struct TaskContainer {
  TaskSpec spec;
  Dataset dataset;
  std::map<std::string, std::shared_ptr<const DatabaseSchema>> schemas;
  ActorSpec workflow;
  std::string db_root;
  TaskStatus status = TaskStatus::Pending;
  std::vector<TaskResult> results;
};

/// Task types are an open registry; "GenerateTask" ships built in.
bool known_task_type(const std::string& task_type);
void register_task_type(const std::string& task_type);

/// Resolves everything a task needs up front, so failures happen here and
/// never mid-run. Throws BindingError naming the offending field.
TaskContainer bind_task(const TaskSpec& spec, const SourceResolver& resolver,
                        const ActorRegistry& registry = ActorRegistry::builtin());

struct TaskRunOptions {
  int concurrency_limit = 4;
  const PromptTemplateStore* templates = nullptr;
  const Embedder* embedder = nullptr;
  const VectorIndex* exemplar_index = nullptr;
  double sql_timeout_seconds = 30.0;
};

/// Runs the workflow over every instance on a fresh WorkflowState, with at
/// most concurrency_limit instances in flight. Per-instance failures are
/// captured in that instance's TaskResult; results are ordered by dataset
/// order regardless of completion order. With a deterministic backend the
/// results are identical for every concurrency limit.
std::vector<TaskResult> run_task(TaskContainer& container, Backend& backend,
                                 const TaskRunOptions& options = {});

/// Writes {report_dir}/{task_id}/results.jsonl (one TaskResult JSON per
/// line) and {report_dir}/{task_id}/pred.sql (one statement per line,
/// dataset order; inner newlines collapsed, errored instances blank).
void persist_task_results(const std::string& report_dir,
                          const std::string& task_id,
                          const std::vector<TaskResult>& results);

std::vector<TaskResult> load_task_results(const std::string& report_dir,
                                          const std::string& task_id);

}  // namespace squrve
