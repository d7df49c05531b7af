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

#include <cstdlib>
#include <filesystem>

#include <json.hpp>

#include "squrve/util.hpp"

#include "../common/bench_fixture.hpp"

using namespace squrve;
using squrve::testing::BenchFixture;
using squrve::testing::TempDir;
using squrve::testing::make_bench_fixture;
using nlohmann::json;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const TempDir& dir, const std::string& args) {
  std::string out_path = dir.sub("cli_stdout.txt");
  std::string err_path = dir.sub("cli_stderr.txt");
  std::string cmd = std::string(SQURVE_CLI_PATH) + " " + args + " > " +
                    out_path + " 2> " + err_path;
  int raw = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = std::filesystem::exists(out_path) ? read_file(out_path) : "";
  r.err = std::filesystem::exists(err_path) ? read_file(err_path) : "";
  return r;
}

std::string mock_config_file(const TempDir& dir, const BenchFixture& fx) {
  json config{
      {"api_key", json::object()},
      {"llm", {{"use", "mock"}, {"model_name", "m"}, {"temperature", 0.0}}},
      {"dataset", {{"data_source", fx.dataset_path}}},
      {"database", {{"schema_source", fx.schema_path}}},
      {"task",
       {{"task_meta",
         json::array({json{{"task_id", "demo"},
                           {"task_type", "GenerateTask"},
                           {"eval_type", json::array({"execute_accuracy"})},
                           {"meta", {{"task", {{"generate_type", "generate"}}}}}}})}}},
      {"engine", {{"exec_process", json::array({"demo"})}}}};
  std::string path = dir.sub("config.json");
  write_file(path, config.dump(2));
  return path;
}

}  // namespace

TEST_CASE("validate mode parses the config and exits 0") {
  TempDir dir;
  BenchFixture fx = make_bench_fixture(dir, 1);
  std::string config = mock_config_file(dir, fx);
  CliResult r = run_cli(dir, "--config " + config + " --mode validate");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("config OK") != std::string::npos);
}

TEST_CASE("validate mode accepts the shipped reference config untouched") {
  // its spider:dev: sources do not exist here, which is fine: validation
  // parses the config only and never touches datasets or databases
  TempDir dir;
  std::string config =
      std::string(SQURVE_SOURCE_DIR) + "/configs/compare_generators.json";
  CliResult r = run_cli(dir, "--config " + config + " --mode validate");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("2 task(s)") != std::string::npos);
}

TEST_CASE("missing --config exits 2 with usage text") {
  TempDir dir;
  CliResult r = run_cli(dir, "--mode validate");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("--config") != std::string::npos);
}

TEST_CASE("unknown flags exit 2") {
  TempDir dir;
  CliResult r = run_cli(dir, "--config x.json --frobnicate");
  CHECK(r.exit_code == 2);
}

TEST_CASE("invalid mode value exits 2") {
  TempDir dir;
  CliResult r = run_cli(dir, "--config x.json --mode destroy");
  CHECK(r.exit_code == 2);
}

TEST_CASE("runtime failures exit 1 with a one-line diagnostic") {
  TempDir dir;
  CliResult r = run_cli(dir, "--config " + dir.sub("absent.json") +
                                 " --mode validate");
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("error:") != std::string::npos);
}

TEST_CASE("run mode produces artifacts and a report") {
  TempDir dir;
  BenchFixture fx = make_bench_fixture(dir, 3);
  std::string config = mock_config_file(dir, fx);
  std::string reports = dir.sub("reports");

  CliResult r = run_cli(dir, "--config " + config + " --report-dir " + reports +
                                 " --verbose");
  CHECK(r.exit_code == 0);
  CHECK(std::filesystem::exists(reports + "/report.json"));
  CHECK(std::filesystem::exists(reports + "/demo/pred.sql"));
  CHECK(std::filesystem::exists(reports + "/demo/results.jsonl"));
  CHECK(r.out.find("demo") != std::string::npos);
  CHECK(r.err.find("[demo]") != std::string::npos);  // verbose task logs

  json report = json::parse(read_file(reports + "/report.json"));
  CHECK(report["schema_version"] == 1);
  CHECK(report["tasks"][0]["task_id"] == "demo");
  CHECK(report["tasks"][0]["metrics"].contains("execute_accuracy"));

  SUBCASE("evaluate mode recomputes from the persisted artifacts") {
    CliResult again = run_cli(dir, "--config " + config + " --mode evaluate " +
                                       "--report-dir " + reports);
    CHECK(again.exit_code == 0);
    CHECK(again.out.find("execute_accuracy") != std::string::npos);
  }

  SUBCASE("a concurrency override and sequential flag reproduce the run") {
    std::string reports2 = dir.sub("reports2");
    CliResult again = run_cli(dir, "--config " + config + " --report-dir " +
                                       reports2 +
                                       " --concurrency 1 --sequential");
    CHECK(again.exit_code == 0);
    CHECK(read_file(reports2 + "/demo/pred.sql") ==
          read_file(reports + "/demo/pred.sql"));
  }
}
