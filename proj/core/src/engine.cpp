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

#include "squrve/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include "squrve/errors.hpp"
#include "squrve/retrieval.hpp"
#include "squrve/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace squrve {

namespace {

constexpr const char* kMockProvider = "mock";

std::string api_key_env_var(const std::string& provider) {
  std::string var = "SQURVE_API_KEY_";
  for (char c : provider) {
    var.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return var;
}

}  // namespace

void RootConfig::validate() const {
  if (llm.temperature < 0.0 || llm.temperature > 2.0) {
    throw ConfigError("llm.temperature out of range [0, 2]: " +
                      std::to_string(llm.temperature));
  }

  std::set<std::string> ids;
  for (const auto& spec : task_meta) {
    spec.validate();
    if (!ids.insert(spec.task_id).second) {
      throw ConfigError("duplicate task_id: " + spec.task_id);
    }
  }
  for (const auto& id : exec_process) {
    if (!ids.count(id)) {
      throw ConfigError("exec_process references unknown task_id: " + id);
    }
  }

  if (!llm.use.empty() && llm.use != kMockProvider) {
    bool has_key = api_key.count(llm.use) && !api_key.at(llm.use).empty();
    const char* env = std::getenv(api_key_env_var(llm.use).c_str());
    if (!has_key && (!env || !*env)) {
      throw ConfigError("no api_key for provider '" + llm.use +
                        "' (and no " + api_key_env_var(llm.use) + " override)");
    }
  }
}

json RootConfig::to_json() const {
  json llm_obj{{"use", llm.use},
               {"model_name", llm.model_name},
               {"temperature", llm.temperature},
               {"base_url", llm.base_url},
               {"max_retries", llm.max_retries},
               {"timeout_seconds", llm.timeout_seconds}};

  json tasks = json::array();
  for (const auto& t : task_meta) {
    tasks.push_back(json{{"task_id", t.task_id},
                         {"task_type", t.task_type},
                         {"data_source", t.data_source},
                         {"schema_source", t.schema_source},
                         {"eval_type", t.eval_type},
                         {"meta", t.meta}});
  }
  return json{{"api_key", api_key},
              {"llm", llm_obj},
              {"dataset", {{"data_source", dataset_data_source}}},
              {"database", {{"schema_source", database_schema_source}}},
              {"task", {{"task_meta", tasks}}},
              {"engine", {{"exec_process", exec_process}}}};
}

std::string RootConfig::digest() const {
  json redacted = to_json();
  redacted["api_key"] = json::object();  // secrets never feed the digest
  return to_hex(fnv1a64(redacted.dump()));
}

RootConfig parse_config(const json& j, UnknownKeyMode mode) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  static const std::set<std::string> known = {"api_key", "llm",  "dataset",
                                              "database", "task", "engine"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) {
      if (mode == UnknownKeyMode::Error) {
        throw ConfigError("unknown top-level config key: " + key);
      }
      std::cerr << "warning: unknown top-level config key: " << key << "\n";
    }
  }

  RootConfig c;
  if (j.contains("api_key")) {
    if (!j["api_key"].is_object()) {
      throw ConfigError("api_key must be an object of provider -> key");
    }
    for (const auto& [provider, key] : j["api_key"].items()) {
      c.api_key[provider] = key.get<std::string>();
    }
  }
  if (j.contains("llm")) {
    const json& llm = j["llm"];
    c.llm.use = llm.value("use", "");
    c.llm.model_name = llm.value("model_name", "");
    c.llm.temperature = llm.value("temperature", 0.0);
    c.llm.base_url = llm.value("base_url", "");
    c.llm.max_retries = llm.value("max_retries", 3);
    c.llm.timeout_seconds = llm.value("timeout_seconds", 60.0);
  }
  if (j.contains("dataset")) {
    c.dataset_data_source = j["dataset"].value("data_source", "");
  }
  if (j.contains("database")) {
    c.database_schema_source = j["database"].value("schema_source", "");
  }
  if (j.contains("task") && j["task"].contains("task_meta")) {
    for (const auto& tm : j["task"]["task_meta"]) {
      TaskSpec spec;
      spec.task_id = tm.value("task_id", "");
      spec.task_type = tm.value("task_type", "GenerateTask");
      spec.data_source = tm.value("data_source", "");
      spec.schema_source = tm.value("schema_source", "");
      spec.eval_type = tm.value("eval_type", std::vector<std::string>{});
      spec.meta = tm.value("meta", json::object());
      c.task_meta.push_back(std::move(spec));
    }
  }
  if (j.contains("engine")) {
    c.exec_process =
        j["engine"].value("exec_process", std::vector<std::string>{});
  }

  c.validate();
  return c;
}

RootConfig load_config(const std::string& source, UnknownKeyMode mode) {
  if (source.empty()) throw ConfigError("empty config source");
  const bool inline_text = source.front() == '{';
  std::string text = inline_text ? source : read_file(source);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw ConfigError("config is not valid JSON: " +
                      (inline_text ? std::string("<inline>") : source));
  }
  return parse_config(j, mode);
}

Router::Router(const std::string& config_path, UnknownKeyMode mode)
    : config_(load_config(config_path, mode)) {}

Router Router::from_inline(const std::string& json_text, UnknownKeyMode mode) {
  return Router(load_config(json_text, mode));
}

json RunReport::to_json() const {
  json task_rows = json::array();
  for (const auto& t : tasks) {
    json row{{"task_id", t.task_id},
             {"instance_count", t.instance_count},
             {"metrics", t.metrics},
             {"tokens",
              {{"prompt", t.prompt_tokens}, {"completion", t.completion_tokens}}},
             {"llm_calls", t.llm_calls},
             {"wall_time_seconds", t.wall_time_seconds}};
    if (t.error) row["error"] = *t.error;
    task_rows.push_back(std::move(row));
  }
  return json{{"schema_version", schema_version},
              {"config_digest", config_digest},
              {"started_at", started_at},
              {"finished_at", finished_at},
              {"tasks", task_rows}};
}

Engine::Engine(RootConfig config, EngineOptions options)
    : config_(std::move(config)), options_(std::move(options)) {}

Engine::Engine(const Router& router, EngineOptions options)
    : Engine(router.config(), std::move(options)) {}

std::unique_ptr<Backend> Engine::make_backend() const {
  if (config_.llm.use == kMockProvider) {
    auto mock = std::make_unique<MockBackend>();
    // pure function of the prompt, so full runs are reproducible
    mock->set_default_responder([](const ChatRequest& req) {
      std::uint64_t h = request_fingerprint(req);
      return "```sql\nSELECT '" + to_hex(h).substr(0, 8) + "'\n```";
    });
    return mock;
  }

  BackendConfig backend;
  backend.provider_name = config_.llm.use;
  auto key = config_.api_key.find(config_.llm.use);
  backend.api_key = key == config_.api_key.end() ? "" : key->second;
  backend.base_url = config_.llm.base_url;
  backend.model_name = config_.llm.model_name;
  backend.temperature = config_.llm.temperature;
  backend.max_retries = config_.llm.max_retries;
  backend.timeout_seconds = config_.llm.timeout_seconds;
  return std::make_unique<HttpBackend>(std::move(backend));
}

void Engine::log_line(const std::string& task_id, const std::string& message) {
  static std::mutex mu;
  if (!options_.log) return;
  std::lock_guard<std::mutex> lk(mu);
  (*options_.log) << "[" << task_id << "] " << message << "\n";
}

void Engine::bind_all() {
  if (!containers_.empty()) return;
  SourceResolver resolver(options_.benchmark_root);
  for (const auto& id : config_.exec_process) {
    auto it = std::find_if(config_.task_meta.begin(), config_.task_meta.end(),
                           [&](const TaskSpec& t) { return t.task_id == id; });
    TaskSpec spec = *it;  // validated: exec_process ids always resolve
    if (spec.data_source.empty()) spec.data_source = config_.dataset_data_source;
    if (spec.schema_source.empty()) {
      spec.schema_source = config_.database_schema_source;
    }
    containers_.emplace(id, bind_task(spec, resolver));
    log_line(id, "bound " +
                     std::to_string(containers_.at(id).dataset.instances.size()) +
                     " instances");
  }
}

ExecutionOutput Engine::execute() {
  started_at_ = iso8601_now();
  bind_all();

  Backend* backend = options_.backend_override;
  if (!backend) {
    owned_backend_ = make_backend();
    backend = owned_backend_.get();
  }

  const PromptTemplateStore* templates = nullptr;
  std::optional<PromptTemplateStore> template_store;
  if (!options_.templates_dir.empty()) {
    template_store = PromptTemplateStore::with_overrides(options_.templates_dir);
    templates = &*template_store;
  }

  std::unique_ptr<VectorIndex> exemplar_index;
  if (!options_.exemplar_corpus.empty()) {
    HashingEmbedder embedder;
    exemplar_index = std::make_unique<VectorIndex>(
        build_exemplar_index(load_exemplars(options_.exemplar_corpus), embedder));
  }

  TaskRunOptions run_options;
  run_options.concurrency_limit = options_.concurrency.value_or(4);
  run_options.templates = templates;
  run_options.exemplar_index = exemplar_index.get();
  run_options.sql_timeout_seconds = options_.sql_timeout_seconds;

  ExecutionOutput out;
  out.task_order = config_.exec_process;

  std::mutex out_mu;
  std::atomic<std::size_t> next{0};
  auto run_one = [&](const std::string& id) {
    TaskContainer& container = containers_.at(id);
    log_line(id, "running " + std::to_string(container.dataset.instances.size()) +
                     " instances");
    auto t0 = std::chrono::steady_clock::now();
    std::vector<TaskResult> results = run_task(container, *backend, run_options);
    double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();

    TaskRunStats stats;
    stats.wall_time_seconds = wall;
    stats.instance_count = results.size();
    for (const auto& r : results) {
      stats.ledger.total_prompt_tokens += r.prompt_tokens;
      stats.ledger.total_completion_tokens += r.completion_tokens;
      stats.ledger.total_calls += r.llm_calls;
      stats.ledger.total_latency_seconds += r.llm_latency_seconds;
    }

    persist_task_results(options_.report_dir, id, results);
    json stats_json{
        {"wall_time_seconds", stats.wall_time_seconds},
        {"instance_count", stats.instance_count},
        {"tokens",
         {{"prompt", stats.ledger.total_prompt_tokens},
          {"completion", stats.ledger.total_completion_tokens}}},
        {"llm_calls", stats.ledger.total_calls},
        {"llm_latency_seconds", stats.ledger.total_latency_seconds}};
    write_file((fs::path(options_.report_dir) / id / "stats.json").string(),
               stats_json.dump(2) + "\n");
    log_line(id, "done");

    std::lock_guard<std::mutex> lk(out_mu);
    out.results[id] = std::move(results);
    out.stats[id] = stats;
  };

  const auto& order = config_.exec_process;
  std::size_t cap = options_.sequential
                        ? 1
                        : static_cast<std::size_t>(
                              std::max(1, options_.task_concurrency));
  if (cap <= 1 || order.size() <= 1) {
    for (const auto& id : order) run_one(id);
  } else {
    auto worker = [&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= order.size()) break;
        run_one(order[i]);
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(cap, order.size()); ++w) {
      pool.emplace_back(worker);
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

namespace {

SchemaElementSet filter_columns_only(const SchemaElementSet& set) {
  SchemaElementSet out;
  for (const auto& e : set) {
    if (e.find('.') != std::string::npos) out.insert(e);
  }
  return out;
}

}  // namespace

TaskReport Engine::evaluate_task(const TaskContainer& container,
                                 const std::vector<TaskResult>& results,
                                 const TaskRunStats& stats) {
  TaskReport report;
  report.task_id = container.spec.task_id;
  report.instance_count = results.size();
  report.prompt_tokens = stats.ledger.total_prompt_tokens;
  report.completion_tokens = stats.ledger.total_completion_tokens;
  report.llm_calls = stats.ledger.total_calls;
  report.wall_time_seconds = stats.wall_time_seconds;

  const auto& instances = container.dataset.instances;
  std::vector<json> rows(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    rows[i] = json{{"instance_id", results[i].instance_id}};
    if (results[i].predicted_sql) {
      rows[i]["predicted_sql"] = *results[i].predicted_sql;
    }
    if (results[i].error) rows[i]["error"] = *results[i].error;
  }

  try {
    if (results.size() != instances.size()) {
      throw EvalError("result count " + std::to_string(results.size()) +
                      " does not match dataset size " +
                      std::to_string(instances.size()));
    }

    for (const auto& metric : container.spec.eval_type) {
      if (metric == "execute_accuracy") {
        auto db_path = [&](const std::string& db_id) {
          return (fs::path(container.db_root) / db_id / (db_id + ".sqlite"))
              .string();
        };
        std::vector<std::tuple<ExecOutcome, ExecOutcome, std::string>> triples;
        for (std::size_t i = 0; i < results.size(); ++i) {
          const QueryInstance& q = instances[i];
          if (!q.gold_sql) {
            throw EvalError("instance " + q.instance_id +
                            " lacks gold SQL required by execute_accuracy");
          }
          ExecOutcome gold = execute_sql(db_path(q.db_id), *q.gold_sql,
                                         options_.sql_timeout_seconds);
          ExecOutcome pred =
              results[i].predicted_sql
                  ? execute_sql(db_path(q.db_id), *results[i].predicted_sql,
                                options_.sql_timeout_seconds)
                  : ExecOutcome::error("no prediction");
          bool match = compare_results(pred, gold, *q.gold_sql);
          rows[i]["match"] = match;
          if (!pred.is_ok() && !rows[i].contains("error")) {
            rows[i]["error"] = pred.status == ExecOutcome::Status::Timeout
                                   ? "timeout"
                                   : pred.message;
          }
          triples.emplace_back(std::move(pred), std::move(gold), *q.gold_sql);
        }
        report.metrics["execute_accuracy"] = execution_accuracy(triples);
      } else if (metric == "linking_recall_precision") {
        bool columns_only = false;
        if (const json* mode = container.spec.meta_value("linking_elements")) {
          columns_only = mode->is_string() && mode->get<std::string>() == "columns";
        }
        double recall_sum = 0.0, precision_sum = 0.0;
        std::size_t scored = 0;
        for (std::size_t i = 0; i < results.size(); ++i) {
          const QueryInstance& q = instances[i];
          auto schema_it = container.schemas.find(q.db_id);
          if (schema_it == container.schemas.end()) continue;
          const DatabaseSchema& schema = *schema_it->second;

          SchemaElementSet gold;
          if (q.gold_schema_elements && !q.gold_schema_elements->empty()) {
            gold = *q.gold_schema_elements;
          } else if (q.gold_sql) {
            gold = extract_schema_elements(*q.gold_sql, schema);
          }
          if (columns_only) gold = filter_columns_only(gold);
          if (gold.empty()) continue;

          SchemaElementSet pred;
          if (results[i].predicted_sql) {
            pred = extract_schema_elements(*results[i].predicted_sql, schema);
          }
          if (columns_only) pred = filter_columns_only(pred);

          auto [recall, precision] = linking_recall_precision(pred, gold);
          rows[i]["recall"] = recall;
          rows[i]["precision"] = precision;
          recall_sum += recall;
          precision_sum += precision;
          ++scored;
        }
        if (scored == 0) {
          throw EvalError(
              "no instance provides gold schema elements (gold_schema or gold "
              "SQL) required by linking_recall_precision");
        }
        report.metrics["linking_recall"] = recall_sum / scored;
        report.metrics["linking_precision"] = precision_sum / scored;
      }
    }

    std::string jsonl;
    for (const auto& row : rows) jsonl += row.dump() + "\n";
    write_file((fs::path(options_.report_dir) / container.spec.task_id /
                "eval.jsonl")
                   .string(),
               jsonl);
  } catch (const std::exception& e) {
    report.metrics.clear();
    report.error = e.what();
  }
  return report;
}

RunReport Engine::evaluate(const ExecutionOutput& output) {
  bind_all();
  RunReport report;
  report.config_digest = config_.digest();
  report.started_at = started_at_.empty() ? iso8601_now() : started_at_;

  for (const auto& id : output.task_order) {
    const TaskContainer& container = containers_.at(id);
    static const TaskRunStats empty_stats;
    auto stats_it = output.stats.find(id);
    report.tasks.push_back(evaluate_task(
        container, output.results.at(id),
        stats_it == output.stats.end() ? empty_stats : stats_it->second));
    log_line(id, "evaluated");
  }

  report.finished_at = iso8601_now();
  write_file((fs::path(options_.report_dir) / "report.json").string(),
             report.to_json().dump(2) + "\n");
  return report;
}

RunReport Engine::evaluate_persisted() {
  bind_all();
  ExecutionOutput out;
  out.task_order = config_.exec_process;
  for (const auto& id : config_.exec_process) {
    out.results[id] = load_task_results(options_.report_dir, id);
    TaskRunStats stats;
    std::string stats_path =
        (fs::path(options_.report_dir) / id / "stats.json").string();
    if (fs::is_regular_file(stats_path)) {
      json j = json::parse(read_file(stats_path), nullptr, false);
      if (!j.is_discarded()) {
        stats.wall_time_seconds = j.value("wall_time_seconds", 0.0);
        stats.instance_count = j.value("instance_count", 0u);
        if (j.contains("tokens")) {
          stats.ledger.total_prompt_tokens = j["tokens"].value("prompt", 0);
          stats.ledger.total_completion_tokens =
              j["tokens"].value("completion", 0);
        }
        stats.ledger.total_calls = j.value("llm_calls", 0);
        stats.ledger.total_latency_seconds = j.value("llm_latency_seconds", 0.0);
      }
    }
    out.stats[id] = stats;
  }
  return evaluate(out);
}

}  // namespace squrve
