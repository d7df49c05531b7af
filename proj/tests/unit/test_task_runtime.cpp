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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <thread>

#include "squrve/errors.hpp"
#include "squrve/task_runtime.hpp"
#include "squrve/util.hpp"

#include "../common/bench_fixture.hpp"

using namespace squrve;
using squrve::testing::BenchFixture;
using squrve::testing::TempDir;
using squrve::testing::make_bench_fixture;
using nlohmann::json;

namespace {

TaskSpec fixture_spec(const BenchFixture& fx, const std::string& task_id,
                      json task_meta = {{"generate_type", "generate"}}) {
  TaskSpec spec;
  spec.task_id = task_id;
  spec.task_type = "GenerateTask";
  spec.data_source = fx.dataset_path;
  spec.schema_source = fx.schema_path;
  spec.eval_type = {"execute_accuracy"};
  spec.meta = json{{"task", std::move(task_meta)}};
  return spec;
}

void script_fixture_answers(MockBackend& mock, int instances) {
  for (int i = 0; i < instances; ++i) {
    mock.script_contains(
        "fixture question " + std::to_string(i) + "?",
        "```sql\nSELECT " + std::to_string(100 + i) + "\n```");
  }
}

std::vector<TaskResult> zero_timing(std::vector<TaskResult> results) {
  for (auto& r : results) {
    r.duration_seconds = 0.0;
    r.llm_latency_seconds = 0.0;
  }
  return results;
}

}  // namespace

TEST_CASE("bind_task resolves dataset, schemas and workflow up front") {
  TempDir dir;
  BenchFixture fx = make_bench_fixture(dir, 3);
  SourceResolver resolver;

  TaskContainer container = bind_task(fixture_spec(fx, "din_gen"), resolver);
  CHECK(container.status == TaskStatus::Pending);
  CHECK(container.dataset.instances.size() == 3);
  REQUIRE(container.schemas.count("concerts") == 1);
  CHECK(container.schemas.at("concerts")->columns.size() == 6);
  CHECK(container.workflow.kind == ActorKind::Generate);
  CHECK(container.db_root == fx.db_root);
}

TEST_CASE("bind_task failures name the offending field") {
  TempDir dir;
  BenchFixture fx = make_bench_fixture(dir, 2);
  SourceResolver resolver;

  SUBCASE("unknown task type") {
    TaskSpec spec = fixture_spec(fx, "x");
    spec.task_type = "FooTask";
    try {
      bind_task(spec, resolver);
      FAIL("expected BindingError");
    } catch (const BindingError& e) {
      CHECK(e.field() == "task_type");
    }
  }

  SUBCASE("unknown actor name") {
    TaskSpec spec = fixture_spec(fx, "x", {{"generate_type", "NoSuchActor"}});
    try {
      bind_task(spec, resolver);
      FAIL("expected BindingError");
    } catch (const BindingError& e) {
      CHECK(e.field() == "meta");
    }
  }

  SUBCASE("unresolvable data source") {
    TaskSpec spec = fixture_spec(fx, "x");
    spec.data_source = "nowhere:dev:";
    try {
      bind_task(spec, resolver);
      FAIL("expected BindingError");
    } catch (const BindingError& e) {
      CHECK(e.field() == "data_source");
    }
  }

  SUBCASE("missing workflow and generate_type") {
    TaskSpec spec = fixture_spec(fx, "x", json::object());
    CHECK_THROWS_AS(bind_task(spec, resolver), BindingError);
  }

  SUBCASE("invalid eval_type") {
    TaskSpec spec = fixture_spec(fx, "x");
    spec.eval_type = {"exact_match"};
    CHECK_THROWS_AS(bind_task(spec, resolver), BindingError);
  }
}

TEST_CASE("nested workflow encodings bind too") {
  TempDir dir;
  BenchFixture fx = make_bench_fixture(dir, 1);
  SourceResolver resolver;
  json workflow = {{"pipeline", {"parse", "generate"}}};
  TaskSpec spec = fixture_spec(fx, "wf", {{"workflow", workflow}});
  TaskContainer container = bind_task(spec, resolver);
  CHECK(container.workflow.kind == ActorKind::Pipeline);
  CHECK(container.workflow.children.size() == 2);
}

TEST_CASE("run_task preserves dataset order and isolates failures") {
  TempDir dir;
  BenchFixture fx = make_bench_fixture(dir, 3);
  SourceResolver resolver;
  TaskContainer container = bind_task(fixture_spec(fx, "t"), resolver);

  MockBackend mock;
  mock.script_contains("fixture question 0", "```sql\nSELECT 100\n```");
  mock.script_contains("fixture question 1", "no sql in this reply");
  mock.script_contains("fixture question 2", "```sql\nSELECT 102\n```");

  auto results = run_task(container, mock);
  CHECK(container.status == TaskStatus::Done);
  REQUIRE(results.size() == 3);
  CHECK(results[0].instance_id == "0");
  CHECK(results[0].predicted_sql == "SELECT 100");
  CHECK_FALSE(results[0].error.has_value());
  CHECK(results[1].error.has_value());
  CHECK_FALSE(results[1].predicted_sql.has_value());
  CHECK(results[2].predicted_sql == "SELECT 102");
  CHECK(results[0].llm_calls == 1);
  CHECK(results[0].prompt_tokens > 0);

  // a container runs once
  CHECK_THROWS_AS(run_task(container, mock), ArgumentError);
}

TEST_CASE("run_task results are identical across concurrency limits") {
  TempDir dir;
  BenchFixture fx = make_bench_fixture(dir, 30);
  SourceResolver resolver;
  TaskSpec spec = fixture_spec(fx, "det");

  std::vector<TaskResult> reference;
  for (int limit : {1, 4, 8}) {
    TaskContainer container = bind_task(spec, resolver);
    MockBackend mock;
    script_fixture_answers(mock, 30);
    TaskRunOptions options;
    options.concurrency_limit = limit;
    auto results = zero_timing(run_task(container, mock, options));
    if (limit == 1) {
      reference = results;
    } else {
      CHECK(results == reference);
    }
  }
  REQUIRE(reference.size() == 30);
  CHECK(reference[17].predicted_sql == "SELECT 117");
}

TEST_CASE("task results are independent of other running tasks") {
  TempDir dir;
  BenchFixture fx = make_bench_fixture(dir, 6);
  SourceResolver resolver;

  MockBackend mock;
  script_fixture_answers(mock, 6);

  // solo run
  TaskContainer solo = bind_task(fixture_spec(fx, "solo"), resolver);
  auto solo_results = zero_timing(run_task(solo, mock));

  // the same task while a second container hammers the same backend
  TaskContainer again = bind_task(fixture_spec(fx, "again"), resolver);
  TaskContainer noise = bind_task(fixture_spec(fx, "noise"), resolver);
  std::thread noise_thread([&] {
    TaskRunOptions options;
    options.concurrency_limit = 4;
    run_task(noise, mock, options);
  });
  auto paired_results = zero_timing(run_task(again, mock));
  noise_thread.join();

  CHECK(paired_results == solo_results);
}

TEST_CASE("unknown db_id becomes a per-instance error") {
  TempDir dir;
  BenchFixture fx = make_bench_fixture(dir, 1);
  write_file(fx.dataset_path,
             R"([{"question":"q","db_id":"ghost","query":"SELECT 1"}])");
  SourceResolver resolver;
  TaskContainer container = bind_task(fixture_spec(fx, "t"), resolver);
  MockBackend mock;
  auto results = run_task(container, mock);
  REQUIRE(results.size() == 1);
  REQUIRE(results[0].error.has_value());
  CHECK(results[0].error->find("ghost") != std::string::npos);
}

TEST_CASE("persisted results round-trip and pred.sql is line-per-instance") {
  TempDir dir;
  std::vector<TaskResult> results(3);
  results[0].instance_id = "0";
  results[0].predicted_sql = "SELECT a\nFROM t";
  results[0].prompt_tokens = 12;
  results[0].completion_tokens = 4;
  results[0].llm_calls = 1;
  results[1].instance_id = "1";
  results[1].error = "boom";
  results[2].instance_id = "2";
  results[2].predicted_sql = "SELECT 2";
  results[2].exec_outcome = ExecOutcome::error("no such table: x");

  persist_task_results(dir.str(), "mytask", results);

  auto loaded = load_task_results(dir.str(), "mytask");
  CHECK(loaded == results);

  std::string pred = read_file(dir.sub("mytask/pred.sql"));
  CHECK(pred == "SELECT a FROM t\n\nSELECT 2\n");
}

TEST_CASE("task types form an open registry") {
  TempDir dir;
  BenchFixture fx = make_bench_fixture(dir, 1);
  SourceResolver resolver;
  CHECK(known_task_type("GenerateTask"));
  CHECK_FALSE(known_task_type("AuditTask"));

  register_task_type("AuditTask");
  CHECK(known_task_type("AuditTask"));
  TaskSpec spec = fixture_spec(fx, "audited");
  spec.task_type = "AuditTask";
  CHECK_NOTHROW(bind_task(spec, resolver));
}

TEST_CASE("source resolver handles conventional descriptors") {
  TempDir dir;
  BenchFixture fx = make_bench_fixture(dir, 1);
  // lay out {root}/toy/dev/{dataset.json, schema/, databases/}
  std::string conv_root = dir.sub("benchroot");
  std::filesystem::create_directories(conv_root + "/toy/dev");
  std::filesystem::copy(fx.dataset_path, conv_root + "/toy/dev/dataset.json");
  std::filesystem::copy(fx.schema_path, conv_root + "/toy/dev/schema",
                        std::filesystem::copy_options::recursive);
  std::filesystem::create_directories(conv_root + "/toy/dev/databases");

  SourceResolver resolver(conv_root);
  CHECK(resolver.resolve_dataset("toy:dev:") ==
        conv_root + "/toy/dev/dataset.json");
  auto schema = resolver.resolve_schema("toy:dev");
  CHECK(schema.schema_path == conv_root + "/toy/dev/schema");
  CHECK(schema.db_root == conv_root + "/toy/dev/databases");

  CHECK_THROWS_AS(resolver.resolve_dataset("missing:dev:"), SqurveError);
}
