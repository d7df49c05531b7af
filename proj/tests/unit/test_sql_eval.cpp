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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "squrve/errors.hpp"
#include "squrve/sql_eval.hpp"

#include "../common/fixtures.hpp"

using namespace squrve;
using squrve::testing::TempDir;
using squrve::testing::make_sqlite_db;

namespace {

ExecOutcome rows_of(std::vector<std::vector<Cell>> rows) {
  ResultTable t;
  t.rows = std::move(rows);
  return ExecOutcome::ok(std::move(t));
}

}  // namespace

TEST_CASE("execute_sql basics") {
  TempDir dir;
  make_sqlite_db(dir.sub("t.sqlite"), {"CREATE TABLE t(a INTEGER);",
                                       "INSERT INTO t VALUES (1),(2);"});

  SUBCASE("SELECT 1 returns one row") {
    ExecOutcome out = execute_sql(dir.sub("t.sqlite"), "SELECT 1");
    REQUIRE(out.is_ok());
    REQUIRE(out.table.rows.size() == 1);
    CHECK(out.table.rows[0][0] == Cell{std::int64_t{1}});
  }

  SUBCASE("syntax errors come back as error outcomes") {
    ExecOutcome out = execute_sql(dir.sub("t.sqlite"), "SELEC 1");
    CHECK(out.status == ExecOutcome::Status::Error);
    CHECK_FALSE(out.message.empty());
  }

  SUBCASE("unreadable database file is an IoError, not a SQL error") {
    CHECK_THROWS_AS(execute_sql(dir.sub("missing.sqlite"), "SELECT 1"), IoError);
  }

  SUBCASE("typed cells come back with their storage class") {
    ExecOutcome out = execute_sql(dir.sub("t.sqlite"),
                                  "SELECT 1, 1.5, 'x', NULL, x'ff00'");
    REQUIRE(out.is_ok());
    const auto& row = out.table.rows[0];
    CHECK(row[0] == Cell{std::int64_t{1}});
    CHECK(row[1] == Cell{1.5});
    CHECK(row[2] == Cell{std::string("x")});
    CHECK(row[3] == Cell{std::monostate{}});
    CHECK(row[4] == Cell{Blob{std::string("\xff\x00", 2)}});
  }
}

TEST_CASE("execute_sql enforces read-only single statements") {
  TempDir dir;
  make_sqlite_db(dir.sub("t.sqlite"), {"CREATE TABLE t(a INTEGER);"});

  ExecOutcome insert = execute_sql(dir.sub("t.sqlite"), "INSERT INTO t VALUES (1)");
  CHECK(insert.status == ExecOutcome::Status::Error);

  ExecOutcome multi = execute_sql(dir.sub("t.sqlite"), "SELECT 1; SELECT 2");
  CHECK(multi.status == ExecOutcome::Status::Error);

  ExecOutcome trailing = execute_sql(dir.sub("t.sqlite"), "SELECT 1;");
  CHECK(trailing.is_ok());

  ExecOutcome cte = execute_sql(dir.sub("t.sqlite"),
                                "WITH c(x) AS (SELECT 5) SELECT x FROM c");
  REQUIRE(cte.is_ok());
  CHECK(cte.table.rows[0][0] == Cell{std::int64_t{5}});
}

TEST_CASE("execute_sql times out on runaway queries") {
  TempDir dir;
  make_sqlite_db(dir.sub("t.sqlite"), {"CREATE TABLE t(a INTEGER);"});
  ExecOutcome out = execute_sql(
      dir.sub("t.sqlite"),
      "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x+1 FROM c) "
      "SELECT count(*) FROM c",
      1.0);
  CHECK(out.status == ExecOutcome::Status::Timeout);
}

TEST_CASE("has_outer_order_by sees only depth zero") {
  CHECK(has_outer_order_by("SELECT a FROM t ORDER BY a"));
  CHECK(has_outer_order_by("WITH c AS (SELECT 1) SELECT * FROM c ORDER  BY 1"));
  CHECK(has_outer_order_by("SELECT a FROM t UNION SELECT b FROM u ORDER BY 1"));
  CHECK_FALSE(has_outer_order_by("SELECT a FROM (SELECT a FROM t ORDER BY a)"));
  CHECK_FALSE(has_outer_order_by("SELECT 'ORDER BY' FROM t"));
  CHECK_FALSE(has_outer_order_by("SELECT reorder FROM t"));
  CHECK_FALSE(has_outer_order_by("SELECT a FROM t -- ORDER BY a"));
}

TEST_CASE("compare_results cell and ordering semantics") {
  const std::string no_order = "SELECT a FROM t";
  const std::string with_order = "SELECT a FROM t ORDER BY a";

  SUBCASE("reflexive on identical tables") {
    auto t = rows_of({{Cell{std::int64_t{1}}, Cell{std::string("x")}}});
    CHECK(compare_results(t, t, no_order));
  }

  SUBCASE("order-insensitive without gold ORDER BY, sensitive with it") {
    auto a = rows_of({{Cell{std::int64_t{1}}}, {Cell{std::int64_t{2}}}});
    auto b = rows_of({{Cell{std::int64_t{2}}}, {Cell{std::int64_t{1}}}});
    CHECK(compare_results(a, b, no_order));
    CHECK(compare_results(b, a, no_order));
    CHECK_FALSE(compare_results(a, b, with_order));
  }

  SUBCASE("float tolerance hits at 1e-6 and misses beyond it") {
    auto gold = rows_of({{Cell{1000000.0}}});
    CHECK(compare_results(rows_of({{Cell{1000000.5}}}), gold, no_order));
    CHECK_FALSE(compare_results(rows_of({{Cell{1000010.0}}}), gold, no_order));
    // absolute tolerance near zero
    CHECK(compare_results(rows_of({{Cell{5e-10}}}), rows_of({{Cell{0.0}}}),
                          no_order));
  }

  SUBCASE("integer and real cells compare numerically") {
    CHECK(compare_results(rows_of({{Cell{std::int64_t{3}}}}),
                          rows_of({{Cell{3.0}}}), no_order));
    CHECK_FALSE(compare_results(rows_of({{Cell{std::int64_t{3}}}}),
                                rows_of({{Cell{std::string("3")}}}), no_order));
  }

  SUBCASE("null equals only null") {
    CHECK(compare_results(rows_of({{Cell{std::monostate{}}}}),
                          rows_of({{Cell{std::monostate{}}}}), no_order));
    CHECK_FALSE(compare_results(rows_of({{Cell{std::monostate{}}}}),
                                rows_of({{Cell{std::int64_t{0}}}}), no_order));
  }

  SUBCASE("pred error or timeout never matches") {
    auto gold = rows_of({{Cell{std::int64_t{1}}}});
    CHECK_FALSE(compare_results(ExecOutcome::error("boom"), gold, no_order));
    CHECK_FALSE(compare_results(ExecOutcome::timeout(), gold, no_order));
  }

  SUBCASE("row count and arity must match") {
    CHECK_FALSE(compare_results(rows_of({{Cell{std::int64_t{1}}}}),
                                rows_of({{Cell{std::int64_t{1}}},
                                         {Cell{std::int64_t{1}}}}),
                                no_order));
    CHECK_FALSE(compare_results(
        rows_of({{Cell{std::int64_t{1}}, Cell{std::int64_t{2}}}}),
        rows_of({{Cell{std::int64_t{1}}}}), no_order));
  }
}

TEST_CASE("execution_accuracy arithmetic and permutation invariance") {
  auto hit = rows_of({{Cell{std::int64_t{1}}}});
  auto miss = rows_of({{Cell{std::int64_t{2}}}});

  std::vector<std::tuple<ExecOutcome, ExecOutcome, std::string>> batch;
  for (int i = 0; i < 8; ++i) batch.emplace_back(hit, hit, "SELECT 1");
  for (int i = 0; i < 2; ++i) batch.emplace_back(miss, hit, "SELECT 1");
  CHECK(execution_accuracy(batch) == doctest::Approx(0.8));

  std::reverse(batch.begin(), batch.end());
  CHECK(execution_accuracy(batch) == doctest::Approx(0.8));

  std::vector<std::tuple<ExecOutcome, ExecOutcome, std::string>> all_match(
      5, {hit, hit, "SELECT 1"});
  CHECK(execution_accuracy(all_match) == doctest::Approx(1.0));

  CHECK_THROWS_AS(execution_accuracy({}), ArgumentError);
}

TEST_CASE("extract_schema_elements resolves tables, aliases and columns") {
  DatabaseSchema schema = squrve::testing::concert_schema();

  SUBCASE("simple select") {
    DatabaseSchema small;
    small.db_id = "d";
    small.columns = {squrve::testing::make_column("d", "t", "a"),
                     squrve::testing::make_column("d", "t", "b")};
    auto got = extract_schema_elements("SELECT a FROM t", small);
    CHECK(got == SchemaElementSet{"t", "t.a"});
  }

  SUBCASE("alias resolution across a join") {
    DatabaseSchema two;
    two.db_id = "d";
    two.columns = {squrve::testing::make_column("d", "t", "a"),
                   squrve::testing::make_column("d", "u", "b")};
    auto got = extract_schema_elements(
        "SELECT x.a FROM t AS x JOIN u ON x.a = u.b", two);
    CHECK(got == SchemaElementSet{"t", "t.a", "u", "u.b"});
  }

  SUBCASE("no table references yield the empty set") {
    CHECK(extract_schema_elements("SELECT 1", schema).empty());
  }

  SUBCASE("quoted identifiers and case folding normalize") {
    auto got = extract_schema_elements(
        "SELECT \"Singer\".`Name` FROM `Singer`", schema);
    CHECK(got == SchemaElementSet{"singer", "singer.name"});
  }

  SUBCASE("unqualified columns are scoped to query tables") {
    auto got = extract_schema_elements(
        "SELECT name FROM singer WHERE age > 20", schema);
    CHECK(got == SchemaElementSet{"singer", "singer.name", "singer.age"});
  }

  SUBCASE("CTE names and unknown identifiers are dropped") {
    auto got = extract_schema_elements(
        "WITH top AS (SELECT name FROM singer) SELECT * FROM top", schema);
    CHECK(got == SchemaElementSet{"singer", "singer.name"});
  }

  SUBCASE("implicit joins with commas bind every table") {
    auto got = extract_schema_elements(
        "SELECT singer.name, concert.venue FROM singer, concert "
        "WHERE concert.singer_id = singer.id",
        schema);
    CHECK(got == SchemaElementSet{"singer", "singer.name", "singer.id",
                                  "concert", "concert.venue",
                                  "concert.singer_id"});
  }

  SUBCASE("output is always a subset of the schema element set") {
    const char* queries[] = {
        "SELECT ghost FROM phantom",
        "SELECT s.name, bogus.col FROM singer s",
        "SELECT count(*) FROM concert JOIN singer ON concert.singer_id = "
        "singer.id",
        "SELECT * FROM singer WHERE name LIKE 'a%' ORDER BY age",
    };
    auto universe = schema.element_set();
    for (const char* q : queries) {
      for (const auto& e : extract_schema_elements(q, schema)) {
        CHECK(universe.count(e) == 1);
      }
    }
  }
}

TEST_CASE("linking_recall_precision definition arithmetic") {
  SchemaElementSet gold{"t.a", "t.b"};
  auto [r1, p1] = linking_recall_precision({"t.a", "u.c"}, gold);
  CHECK(r1 == doctest::Approx(0.5));
  CHECK(p1 == doctest::Approx(0.5));

  auto [r2, p2] = linking_recall_precision(gold, gold);
  CHECK(r2 == doctest::Approx(1.0));
  CHECK(p2 == doctest::Approx(1.0));

  auto [r3, p3] = linking_recall_precision({}, gold);
  CHECK(r3 == 0.0);
  CHECK(p3 == 0.0);

  CHECK_THROWS_AS(linking_recall_precision({"t.a"}, {}), ArgumentError);
}

TEST_CASE("compare_results reflexivity, symmetry and row permutation") {
  std::mt19937 rng(31);
  auto random_cell = [&]() -> Cell {
    switch (rng() % 5) {
      case 0:
        return std::monostate{};
      case 1:
        return static_cast<std::int64_t>(rng() % 100);
      case 2:
        return static_cast<double>(rng() % 1000) / 8.0;
      case 3:
        return std::string("s") + std::to_string(rng() % 20);
      default:
        return Blob{std::string(1, static_cast<char>(rng() % 256))};
    }
  };
  const std::string no_order = "SELECT a FROM t";

  for (int trial = 0; trial < 200; ++trial) {
    std::size_t arity = 1 + rng() % 3;
    std::vector<std::vector<Cell>> rows(1 + rng() % 6);
    for (auto& row : rows) {
      for (std::size_t c = 0; c < arity; ++c) row.push_back(random_cell());
    }
    ResultTable table{rows};
    auto a = ExecOutcome::ok(table);

    CHECK(compare_results(a, a, no_order));  // reflexive

    std::shuffle(rows.begin(), rows.end(), rng);
    auto b = ExecOutcome::ok(ResultTable{rows});
    CHECK(compare_results(a, b, no_order));  // row-permutation invariant
    CHECK(compare_results(b, a, no_order));  // symmetric

    // perturbing one non-null cell must break the match both ways
    auto mutated = b;
    for (auto& row : mutated.table.rows) {
      for (auto& cell : row) {
        if (std::holds_alternative<std::int64_t>(cell)) {
          cell = std::get<std::int64_t>(cell) + 1000;
          goto mutated_done;
        }
      }
    }
  mutated_done:
    if (!(mutated == b)) {
      CHECK_FALSE(compare_results(mutated, a, no_order));
      CHECK_FALSE(compare_results(a, mutated, no_order));
    }
  }
}

TEST_CASE("row canonicalization is unambiguous for separator-bearing cells") {
  // same arity, different cell boundaries: must not match
  auto crafted_a = rows_of(
      {{Cell{std::string("a\x1ft")}, Cell{std::string("c")}}});
  auto crafted_b = rows_of(
      {{Cell{std::string("a")}, Cell{std::string("t\x1f""c")}}});
  CHECK_FALSE(compare_results(crafted_a, crafted_b, "SELECT a FROM t"));
  CHECK(compare_results(crafted_a, crafted_a, "SELECT a FROM t"));
}

TEST_CASE("concurrent executions share one database safely") {
  TempDir dir;
  make_sqlite_db(dir.sub("t.sqlite"),
                 {"CREATE TABLE t(a INTEGER);",
                  "INSERT INTO t VALUES (1),(2),(3),(4),(5);"});
  constexpr int kThreads = 16;  // above the per-database permit of 8
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int i = 0; i < kThreads; ++i) {
    threads.emplace_back([&] {
      for (int k = 0; k < 5; ++k) {
        ExecOutcome out = execute_sql(dir.sub("t.sqlite"),
                                      "SELECT sum(a) FROM t", 10.0);
        if (out.is_ok() && out.table.rows[0][0] == Cell{std::int64_t{15}}) {
          ++ok;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(ok.load() == kThreads * 5);
}

TEST_CASE("exec outcome JSON round-trips") {
  auto out = rows_of({{Cell{std::int64_t{1}}, Cell{2.5}, Cell{std::string("x")},
                       Cell{std::monostate{}}, Cell{Blob{"\x01\x02"}}}});
  nlohmann::json j = out;
  ExecOutcome back = j.get<ExecOutcome>();
  CHECK(back == out);

  nlohmann::json err = ExecOutcome::error("boom");
  CHECK(err.get<ExecOutcome>().message == "boom");
  nlohmann::json to = ExecOutcome::timeout();
  CHECK(to.get<ExecOutcome>().status == ExecOutcome::Status::Timeout);
}
