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

#include <benchmark/benchmark.h>

#include <random>

#include "squrve/actors.hpp"
#include "squrve/data_model.hpp"
#include "squrve/retrieval.hpp"
#include "squrve/sql_eval.hpp"

using namespace squrve;

namespace {

VectorIndex make_index(std::size_t n, std::size_t dim) {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  VectorIndex index(dim);
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddingVector v(dim);
    for (auto& x : v) x = dist(rng);
    index.add("e" + std::to_string(i), std::move(v));
  }
  return index;
}

DatabaseSchema wide_schema(int tables, int columns) {
  DatabaseSchema s;
  s.db_id = "bench";
  for (int t = 0; t < tables; ++t) {
    for (int c = 0; c < columns; ++c) {
      ColumnUnit unit;
      unit.db_id = "bench";
      unit.table_name = "table_" + std::to_string(t);
      unit.column_name = "col_" + std::to_string(c);
      unit.data_type = "TEXT";
      s.columns.push_back(std::move(unit));
    }
  }
  return s;
}

ExecOutcome numbered_rows(int n, int offset = 0) {
  ResultTable t;
  for (int i = 0; i < n; ++i) {
    t.rows.push_back({Cell{static_cast<std::int64_t>((i + offset) % n)},
                      Cell{std::string("row") + std::to_string(i % 7)}});
  }
  return ExecOutcome::ok(std::move(t));
}

}  // namespace

static void BM_Embed(benchmark::State& state) {
  HashingEmbedder embedder(64);
  std::string text =
      "how many singers performed at each venue during the last season";
  for (auto _ : state) {
    benchmark::DoNotOptimize(embedder.embed(text));
  }
}
BENCHMARK(BM_Embed);

static void BM_TopK(benchmark::State& state) {
  auto index = make_index(static_cast<std::size_t>(state.range(0)), 64);
  HashingEmbedder embedder(64);
  auto query = embedder.embed("which column stores the venue name");
  for (auto _ : state) {
    benchmark::DoNotOptimize(topk(index, query, 10));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_TopK)->Range(256, 16384)->Complexity();

static void BM_CompareResultsMultiset(benchmark::State& state) {
  auto pred = numbered_rows(static_cast<int>(state.range(0)), 3);
  auto gold = numbered_rows(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(compare_results(pred, gold, "SELECT a FROM t"));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CompareResultsMultiset)->Range(64, 4096)->Complexity();

static void BM_ExtractSchemaElements(benchmark::State& state) {
  DatabaseSchema schema = wide_schema(20, 12);
  std::string sql =
      "SELECT t0.col_1, t5.col_2 FROM table_0 AS t0 JOIN table_5 AS t5 ON "
      "t0.col_0 = t5.col_0 WHERE t0.col_3 > 5 GROUP BY t0.col_1 ORDER BY "
      "t5.col_2";
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_schema_elements(sql, schema));
  }
}
BENCHMARK(BM_ExtractSchemaElements);

static void BM_SchemaToPromptText(benchmark::State& state) {
  DatabaseSchema schema = wide_schema(static_cast<int>(state.range(0)), 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(schema_to_prompt_text(schema));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SchemaToPromptText)->Range(4, 64)->Complexity();

static void BM_MockPipeline(benchmark::State& state) {
  MockBackend mock;
  mock.set_default_responder(
      [](const ChatRequest&) { return "```sql\nSELECT 1\n```"; });
  ActorContext ctx;
  ctx.backend = &mock;

  DatabaseSchema schema = wide_schema(5, 6);
  WorkflowState base;
  base.question = "bench question";
  base.db_id = "bench";
  base.full_schema = std::make_shared<const DatabaseSchema>(schema);

  ActorSpec flow =
      parse_workflow(nlohmann::json{{"pipeline", {"parse", "scale", "select"}}});
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_actor(flow, base, ctx));
  }
}
BENCHMARK(BM_MockPipeline);

BENCHMARK_MAIN();
