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

#include "squrve/task_runtime.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "squrve/errors.hpp"
#include "squrve/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace squrve {

namespace {

const std::set<std::string>& valid_eval_types() {
  static const std::set<std::string> types = {"execute_accuracy",
                                              "linking_recall_precision"};
  return types;
}

std::set<std::string>& task_type_registry() {
  static std::set<std::string> types = {"GenerateTask"};
  return types;
}

std::mutex& task_type_mutex() {
  static std::mutex mu;
  return mu;
}

}  // namespace

void TaskSpec::validate() const {
  if (task_id.empty()) throw ConfigError("task_id must be non-empty");
  for (const auto& e : eval_type) {
    if (!valid_eval_types().count(e)) {
      throw ConfigError("task '" + task_id + "' has unknown eval_type '" + e +
                        "'");
    }
  }
}

const json* TaskSpec::meta_value(const std::string& key) const {
  if (meta.contains("task") && meta["task"].is_object() &&
      meta["task"].contains(key)) {
    return &meta["task"][key];
  }
  if (meta.contains(key)) return &meta[key];
  return nullptr;
}

json TaskResult::to_json() const {
  json j{{"instance_id", instance_id},
         {"duration_seconds", duration_seconds},
         {"tokens",
          {{"prompt", prompt_tokens}, {"completion", completion_tokens}}},
         {"llm_calls", llm_calls},
         {"llm_latency_seconds", llm_latency_seconds}};
  if (predicted_sql) j["predicted_sql"] = *predicted_sql;
  if (error) j["error"] = *error;
  if (exec_outcome) j["exec_outcome"] = *exec_outcome;
  return j;
}

TaskResult TaskResult::from_json(const json& j) {
  TaskResult r;
  r.instance_id = j.at("instance_id").get<std::string>();
  if (j.contains("predicted_sql")) {
    r.predicted_sql = j["predicted_sql"].get<std::string>();
  }
  if (j.contains("error")) r.error = j["error"].get<std::string>();
  if (j.contains("exec_outcome")) {
    r.exec_outcome = j["exec_outcome"].get<ExecOutcome>();
  }
  r.duration_seconds = j.value("duration_seconds", 0.0);
  if (j.contains("tokens")) {
    r.prompt_tokens = j["tokens"].value("prompt", 0);
    r.completion_tokens = j["tokens"].value("completion", 0);
  }
  r.llm_calls = j.value("llm_calls", 0);
  r.llm_latency_seconds = j.value("llm_latency_seconds", 0.0);
  return r;
}

SourceResolver::SourceResolver(std::string benchmark_root)
    : root_(std::move(benchmark_root)) {}

namespace {

// "name:split[:]" -> {root}/name/split
std::optional<std::string> conventional_dir(const std::string& root,
                                            const std::string& descriptor) {
  auto parts = split(descriptor, ':');
  if (parts.size() < 2 || parts[0].empty() || parts[1].empty()) {
    return std::nullopt;
  }
  return (fs::path(root) / parts[0] / parts[1]).string();
}

}  // namespace

std::string SourceResolver::resolve_dataset(const std::string& descriptor) const {
  if (fs::is_regular_file(descriptor)) return descriptor;
  if (auto dir = conventional_dir(root_, descriptor)) {
    std::string path = (fs::path(*dir) / "dataset.json").string();
    if (fs::is_regular_file(path)) return path;
    throw SqurveError("dataset file not found for descriptor '" + descriptor +
                      "' (expected " + path + ")");
  }
  throw SqurveError("cannot resolve data source '" + descriptor + "'");
}

SourceResolver::SchemaSource SourceResolver::resolve_schema(
    const std::string& descriptor) const {
  if (fs::exists(descriptor)) {
    fs::path p(descriptor);
    fs::path parent = fs::is_directory(p) ? p.parent_path() : p.parent_path();
    return {descriptor, (parent / "databases").string()};
  }
  if (auto dir = conventional_dir(root_, descriptor)) {
    fs::path base(*dir);
    std::string db_root = (base / "databases").string();
    std::string file = (base / "schema.json").string();
    if (fs::is_regular_file(file)) return {file, db_root};
    std::string column_dir = (base / "schema").string();
    if (fs::is_directory(column_dir)) return {column_dir, db_root};
    throw SqurveError("schema source not found for descriptor '" + descriptor +
                      "' (expected " + file + " or " + column_dir + ")");
  }
  throw SqurveError("cannot resolve schema source '" + descriptor + "'");
}

bool known_task_type(const std::string& task_type) {
  std::lock_guard<std::mutex> lk(task_type_mutex());
  return task_type_registry().count(task_type) > 0;
}

void register_task_type(const std::string& task_type) {
  std::lock_guard<std::mutex> lk(task_type_mutex());
  task_type_registry().insert(task_type);
}

TaskContainer bind_task(const TaskSpec& spec, const SourceResolver& resolver,
                        const ActorRegistry& registry) {
  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw BindingError("task_meta", e.what());
  }
  if (!known_task_type(spec.task_type)) {
    throw BindingError("task_type", "unknown task type '" + spec.task_type +
                                        "' for task '" + spec.task_id + "'");
  }

  TaskContainer container;
  container.spec = spec;

  try {
    container.dataset = load_dataset(
        spec.data_source, resolver.resolve_dataset(spec.data_source));
  } catch (const std::exception& e) {
    throw BindingError("data_source", e.what());
  }

  SourceResolver::SchemaSource schema_source;
  try {
    schema_source = resolver.resolve_schema(spec.schema_source);
    for (auto& schema :
         load_schema(spec.schema_source, schema_source.schema_path)) {
      std::string db_id = schema.db_id;
      container.schemas.emplace(
          std::move(db_id),
          std::make_shared<const DatabaseSchema>(std::move(schema)));
    }
  } catch (const std::exception& e) {
    throw BindingError("schema_source", e.what());
  }

  container.db_root = schema_source.db_root;
  if (const json* db_root = spec.meta_value("db_root")) {
    container.db_root = db_root->get<std::string>();
  }

  const json* workflow = spec.meta_value("workflow");
  const json* generate_type = spec.meta_value("generate_type");
  try {
    if (workflow) {
      container.workflow = parse_workflow(*workflow, registry);
    } else if (generate_type) {
      container.workflow = parse_workflow(*generate_type, registry);
    } else {
      throw ConfigError("meta carries neither 'workflow' nor 'generate_type'");
    }
  } catch (const std::exception& e) {
    throw BindingError("meta", e.what());
  }

  return container;
}

namespace {

TaskResult run_one_instance(const TaskContainer& container,
                            const QueryInstance& instance, Backend& backend,
                            const TaskRunOptions& options) {
  TaskResult result;
  result.instance_id = instance.instance_id;
  UsageRecorder recorder;
  auto t0 = std::chrono::steady_clock::now();

  auto schema_it = container.schemas.find(instance.db_id);
  if (schema_it == container.schemas.end()) {
    result.error = "unknown db_id: " + instance.db_id;
  } else {
    WorkflowState state;
    state.question = instance.question;
    state.db_id = instance.db_id;
    state.full_schema = schema_it->second;
    state.context = instance.external_context;

    ActorContext ctx;
    ctx.backend = &backend;
    ctx.templates = options.templates;
    ctx.embedder = options.embedder;
    ctx.exemplar_index = options.exemplar_index;
    ctx.usage = &recorder;
    ctx.sql_timeout_seconds = options.sql_timeout_seconds;
    std::string db_root = container.db_root;
    ctx.db_path_resolver = [db_root](const std::string& db_id) {
      return (fs::path(db_root) / db_id / (db_id + ".sqlite")).string();
    };

    try {
      WorkflowState final_state = run_actor(container.workflow, state, ctx);
      if (final_state.final_sql) {
        result.predicted_sql = *final_state.final_sql;
      } else {
        result.error = "workflow produced no final SQL";
      }
    } catch (const std::exception& e) {
      result.error = e.what();
    }
  }

  UsageLedger ledger = recorder.snapshot();
  result.prompt_tokens = ledger.total_prompt_tokens;
  result.completion_tokens = ledger.total_completion_tokens;
  result.llm_calls = ledger.total_calls;
  result.llm_latency_seconds = ledger.total_latency_seconds;
  result.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

}  // namespace

std::vector<TaskResult> run_task(TaskContainer& container, Backend& backend,
                                 const TaskRunOptions& options) {
  if (container.status != TaskStatus::Pending) {
    throw ArgumentError("task '" + container.spec.task_id +
                        "' is not in the pending state");
  }
  if (options.concurrency_limit < 1) {
    throw ArgumentError("concurrency_limit must be positive");
  }
  container.status = TaskStatus::Running;

  const std::size_t n = container.dataset.instances.size();
  std::vector<TaskResult> results(n);

  try {
    // indexed result slots keep dataset order regardless of completion order
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        try {
          results[i] = run_one_instance(
              container, container.dataset.instances[i], backend, options);
        } catch (const std::exception& e) {
          // nothing may escape a worker thread
          results[i] = TaskResult{};
          results[i].instance_id = container.dataset.instances[i].instance_id;
          results[i].error = e.what();
        }
      }
    };
    std::size_t workers = std::min(
        static_cast<std::size_t>(options.concurrency_limit), std::max<std::size_t>(n, 1));
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
  } catch (...) {
    container.status = TaskStatus::Failed;
    throw;
  }

  container.status = TaskStatus::Done;
  container.results = results;
  return results;
}

void persist_task_results(const std::string& report_dir,
                          const std::string& task_id,
                          const std::vector<TaskResult>& results) {
  fs::path dir = fs::path(report_dir) / task_id;

  std::string jsonl;
  std::string pred;
  for (const auto& r : results) {
    jsonl += r.to_json().dump() + "\n";
    std::string line = r.predicted_sql.value_or("");
    for (char& c : line) {
      if (c == '\n' || c == '\r' || c == '\t') c = ' ';
    }
    pred += line + "\n";
  }
  write_file((dir / "results.jsonl").string(), jsonl);
  write_file((dir / "pred.sql").string(), pred);
}

std::vector<TaskResult> load_task_results(const std::string& report_dir,
                                          const std::string& task_id) {
  std::string path =
      (fs::path(report_dir) / task_id / "results.jsonl").string();
  std::istringstream in(read_file(path));
  std::vector<TaskResult> results;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw IoError("invalid JSON line in " + path);
    results.push_back(TaskResult::from_json(j));
  }
  return results;
}

}  // namespace squrve
