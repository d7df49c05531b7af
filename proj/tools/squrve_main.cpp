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

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "squrve/engine.hpp"
#include "squrve/errors.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::string env_or(const char* var, const std::string& fallback) {
  const char* value = std::getenv(var);
  return value && *value ? value : fallback;
}

void print_report(const squrve::RunReport& report) {
  std::printf("run %s  (config %s)\n", report.finished_at.c_str(),
              report.config_digest.c_str());
  for (const auto& task : report.tasks) {
    std::printf("  %-16s %4zu instances  %8.2fs  tokens %lld/%lld",
                task.task_id.c_str(), task.instance_count,
                task.wall_time_seconds,
                static_cast<long long>(task.prompt_tokens),
                static_cast<long long>(task.completion_tokens));
    for (const auto& [name, value] : task.metrics) {
      std::printf("  %s=%.4f", name.c_str(), value);
    }
    if (task.error) std::printf("  ERROR: %s", task.error->c_str());
    std::printf("\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Squrve: composable Text-to-SQL workflows over one config"};
  app.get_formatter()->column_width(28);

  std::string config_path;
  std::string mode = "run";
  std::string report_dir = "reports";
  int concurrency = 0;
  bool verbose = false;
  bool sequential = false;

  app.add_option("--config", config_path, "Root configuration file (JSON)")
      ->required();
  app.add_option("--mode", mode, "run | evaluate | validate (default: run)")
      ->check(CLI::IsMember({"run", "evaluate", "validate"}));
  app.add_option("--report-dir", report_dir,
                 "Directory for results, predictions and report.json");
  app.add_option("--concurrency", concurrency,
                 "Per-task instance concurrency limit")
      ->check(CLI::PositiveNumber);
  app.add_flag("--verbose", verbose, "Log task progress to stderr");
  app.add_flag("--sequential", sequential,
               "Run exec_process tasks strictly one after another");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    squrve::Router router(config_path);

    if (mode == "validate") {
      std::printf("config OK: %zu task(s), exec order of %zu\n",
                  router.config().task_meta.size(),
                  router.config().exec_process.size());
      return kExitOk;
    }

    squrve::EngineOptions options;
    options.report_dir = report_dir;
    options.benchmark_root = env_or("SQURVE_BENCHMARK_ROOT", "benchmark");
    options.templates_dir = env_or("SQURVE_TEMPLATES_DIR", "");
    options.exemplar_corpus = env_or("SQURVE_EXEMPLARS", "");
    options.sequential = sequential;
    if (concurrency > 0) options.concurrency = concurrency;
    if (verbose) options.log = &std::cerr;

    squrve::Engine engine(router, options);
    squrve::RunReport report =
        mode == "evaluate"
            ? engine.evaluate_persisted()
            : [&] {
                auto output = engine.execute();
                return engine.evaluate(output);
              }();
    print_report(report);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
