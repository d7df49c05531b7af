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
#include <fstream>

#include "squrve/data_model.hpp"
#include "squrve/errors.hpp"
#include "squrve/util.hpp"

#include "../common/fixtures.hpp"

using namespace squrve;
using squrve::testing::TempDir;
using squrve::testing::make_column;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

// 10 tables x 8 columns with 6 foreign keys; the acceptance round-trip
// schema.
DatabaseSchema synthetic_schema(const std::string& db_id, int tables = 10,
                                int columns_per_table = 8) {
  DatabaseSchema s;
  s.db_id = db_id;
  for (int t = 0; t < tables; ++t) {
    std::string table = "table_" + std::to_string(t);
    for (int c = 0; c < columns_per_table; ++c) {
      ColumnUnit unit = make_column(db_id, table, "col_" + std::to_string(c),
                                    c % 2 ? "TEXT" : "INTEGER", c == 0);
      if (c == 3) {
        unit.description = "synthetic column " + std::to_string(c);
        unit.sample_values = {"a", "b"};
      }
      s.columns.push_back(std::move(unit));
    }
  }
  for (int k = 0; k < 6; ++k) {
    std::string from_table = "table_" + std::to_string(k + 1);
    std::string to_table = "table_" + std::to_string(k);
    s.columns[(k + 1) * columns_per_table + 2].foreign_key_ref =
        ColumnRef{to_table, "col_0"};
    s.foreign_keys.push_back(
        {ColumnRef{from_table, "col_2"}, ColumnRef{to_table, "col_0"}});
  }
  return s;
}

}  // namespace

TEST_CASE("load_dataset maps spider-convention records") {
  TempDir dir;
  write_text(dir.sub("data.json"),
             R"([{"question":"q","query":"SELECT 1","db_id":"d"}])");
  Dataset ds = load_dataset("spider:dev:", dir.sub("data.json"));
  REQUIRE(ds.instances.size() == 1);
  CHECK(ds.source_descriptor == "spider:dev:");
  CHECK(ds.instances[0].question == "q");
  CHECK(ds.instances[0].db_id == "d");
  CHECK(ds.instances[0].gold_sql == "SELECT 1");
  CHECK(ds.instances[0].instance_id == "0");
}

TEST_CASE("load_dataset maps bird-convention SQL key and evidence") {
  TempDir dir;
  write_text(dir.sub("data.json"),
             R"([{"question":"q","SQL":"SELECT 2","db_id":"d","evidence":"avg means mean"}])");
  Dataset ds = load_dataset("bird:dev:", dir.sub("data.json"));
  CHECK(ds.instances[0].gold_sql == "SELECT 2");
  CHECK(ds.instances[0].external_context == "avg means mean");
}

TEST_CASE("load_dataset: empty array yields empty dataset") {
  TempDir dir;
  write_text(dir.sub("data.json"), "[]");
  CHECK(load_dataset("x::", dir.sub("data.json")).instances.empty());
}

TEST_CASE("load_dataset: ids default to array index, explicit ids win") {
  TempDir dir;
  write_text(dir.sub("data.json"),
             R"([{"question":"a","db_id":"d"},
                 {"question":"b","db_id":"d"},
                 {"question":"c","db_id":"d"}])");
  Dataset ds = load_dataset("x::", dir.sub("data.json"));
  REQUIRE(ds.instances.size() == 3);
  CHECK(ds.instances[0].instance_id == "0");
  CHECK(ds.instances[1].instance_id == "1");
  CHECK(ds.instances[2].instance_id == "2");

  write_text(dir.sub("with_ids.json"),
             R"([{"question":"a","db_id":"d","id":41},
                 {"question":"b","db_id":"d","id":"custom"}])");
  Dataset ds2 = load_dataset("x::", dir.sub("with_ids.json"));
  CHECK(ds2.instances[0].instance_id == "41");
  CHECK(ds2.instances[1].instance_id == "custom");
}

TEST_CASE("load_dataset: gold_schema strings are normalized") {
  TempDir dir;
  write_text(dir.sub("data.json"),
             R"([{"question":"a","db_id":"d","gold_schema":["Singer.Name","concert"]}])");
  Dataset ds = load_dataset("x::", dir.sub("data.json"));
  REQUIRE(ds.instances[0].gold_schema_elements.has_value());
  CHECK(ds.instances[0].gold_schema_elements->count("singer.name") == 1);
  CHECK(ds.instances[0].gold_schema_elements->count("concert") == 1);
}

TEST_CASE("load_dataset errors name the offending record") {
  TempDir dir;
  write_text(dir.sub("bad.json"), R"([{"question":"ok","db_id":"d"},{"x":1}])");
  CHECK_THROWS_WITH_AS(load_dataset("x::", dir.sub("bad.json")),
                       doctest::Contains("record 1"), IngestionError);

  write_text(dir.sub("root.json"), R"({"not":"array"})");
  CHECK_THROWS_AS(load_dataset("x::", dir.sub("root.json")), IngestionError);

  CHECK_THROWS_AS(load_dataset("x::", dir.sub("absent.json")), IoError);
}

TEST_CASE("load_schema reads centralized tables.json convention") {
  TempDir dir;
  write_text(dir.sub("schema.json"), R"([
    {"db_id":"db1",
     "table_names_original":["t","u"],
     "column_names_original":[[-1,"*"],[0,"a"],[0,"b"],[1,"c"]],
     "column_types":["text","integer","text","integer"],
     "primary_keys":[1],
     "foreign_keys":[[3,1]]},
    {"db_id":"db2",
     "table_names_original":["solo"],
     "column_names_original":[[-1,"*"],[0,"x"]],
     "column_types":["text","text"]}
  ])");
  auto schemas = load_schema("spider:dev", dir.sub("schema.json"));
  REQUIRE(schemas.size() == 2);
  const DatabaseSchema& s1 = schemas[0];
  CHECK(s1.db_id == "db1");
  REQUIRE(s1.columns.size() == 3);
  CHECK(s1.columns[0].column_name == "a");
  CHECK(s1.columns[0].is_primary_key);
  CHECK(s1.columns[0].data_type == "integer");
  REQUIRE(s1.foreign_keys.size() == 1);
  CHECK(s1.foreign_keys[0].first.table == "u");
  CHECK(s1.foreign_keys[0].second.column == "a");
  CHECK(s1.columns[2].foreign_key_ref == ColumnRef{"t", "a"});
  CHECK(schemas[1].columns.size() == 1);
}

TEST_CASE("load_schema falls back to plain table_names/column_names keys") {
  TempDir dir;
  write_text(dir.sub("schema.json"), R"([
    {"db_id":"plain",
     "table_names":["t"],
     "column_names":[[-1,"*"],[0,"a"],[0,"b"]],
     "column_types":["text","integer","text"]}
  ])");
  auto schemas = load_schema("x", dir.sub("schema.json"));
  REQUIRE(schemas.size() == 1);
  CHECK(schemas[0].columns.size() == 2);
  CHECK(schemas[0].columns[1].column_name == "b");
}

TEST_CASE("load_schema rejects foreign keys to unknown columns") {
  TempDir dir;
  write_text(dir.sub("schema.json"), R"([
    {"db_id":"db1",
     "table_names_original":["t"],
     "column_names_original":[[-1,"*"],[0,"a"]],
     "column_types":["text","text"],
     "foreign_keys":[[1,7]]}
  ])");
  CHECK_THROWS_AS(load_schema("x", dir.sub("schema.json")), SchemaError);
}

TEST_CASE("decompose_schema writes one file per column") {
  TempDir dir;
  DatabaseSchema s;
  s.db_id = "mini";
  for (const char* table : {"t1", "t2"}) {
    for (const char* col : {"a", "b", "c"}) {
      s.columns.push_back(make_column("mini", table, col));
    }
  }
  CHECK(decompose_schema(s, dir.sub("out")) == 6);
  std::size_t files = 0;
  for (const auto& e :
       std::filesystem::recursive_directory_iterator(dir.sub("out"))) {
    if (e.is_regular_file()) ++files;
  }
  CHECK(files == 6);
  CHECK(std::filesystem::is_regular_file(dir.sub("out/mini/t1/a.json")));
}

TEST_CASE("decompose_schema then load_schema is the identity") {
  TempDir dir;
  DatabaseSchema original = synthetic_schema("round", 10, 8);
  REQUIRE(original.columns.size() == 80);
  CHECK(decompose_schema(original, dir.sub("cols")) == 80);
  auto reloaded = load_schema("round", dir.sub("cols"));
  REQUIRE(reloaded.size() == 1);
  CHECK(reloaded[0] == original);
}

TEST_CASE("decompose_schema fails before any write on duplicate columns") {
  TempDir dir;
  DatabaseSchema s;
  s.db_id = "dup";
  s.columns = {make_column("dup", "t", "a"), make_column("dup", "t", "A")};
  CHECK_THROWS_AS(decompose_schema(s, dir.sub("out")), SchemaError);
  CHECK_FALSE(std::filesystem::exists(dir.sub("out")));
}

TEST_CASE("schema_to_prompt_text formatting") {
  DatabaseSchema empty;
  empty.db_id = "e";
  CHECK(schema_to_prompt_text(empty).empty());

  DatabaseSchema one;
  one.db_id = "o";
  one.columns = {make_column("o", "t", "c", "INTEGER")};
  CHECK(schema_to_prompt_text(one) == "TABLE t(c INTEGER)");

  DatabaseSchema two = squrve::testing::concert_schema();
  std::string text = schema_to_prompt_text(two);
  CHECK(text ==
        "TABLE singer(id INTEGER, name TEXT, age INTEGER)\n"
        "TABLE concert(id INTEGER, singer_id INTEGER, venue TEXT)\n"
        "FK: concert.singer_id -> singer.id");
  CHECK(text == schema_to_prompt_text(two));  // byte-identical rerender
}

TEST_CASE("schema validation catches bad identifiers and duplicates") {
  DatabaseSchema s;
  s.db_id = "ok";
  s.columns = {make_column("ok", "a/b", "c")};
  CHECK_THROWS_AS(s.validate(), SchemaError);

  DatabaseSchema mismatch;
  mismatch.db_id = "one";
  mismatch.columns = {make_column("other", "t", "c")};
  CHECK_THROWS_AS(mismatch.validate(), SchemaError);
}

TEST_CASE("exemplar corpus loading validates fields") {
  TempDir dir;
  write_text(dir.sub("ex.json"),
             R"([{"question":"q","reasoning":"r","sql":"SELECT 1"}])");
  auto exemplars = load_exemplars(dir.sub("ex.json"));
  REQUIRE(exemplars.size() == 1);
  CHECK(exemplars[0].reasoning == "r");

  write_text(dir.sub("bad.json"), R"([{"question":"q","reasoning":"","sql":"s"}])");
  CHECK_THROWS_AS(load_exemplars(dir.sub("bad.json")), IngestionError);
}

TEST_CASE("the bundled exemplar corpus loads cleanly") {
  auto exemplars = load_exemplars(std::string(SQURVE_SOURCE_DIR) +
                                  "/assets/exemplars.json");
  CHECK(exemplars.size() >= 10);
  for (const auto& e : exemplars) {
    CHECK_FALSE(e.question.empty());
    CHECK_FALSE(e.reasoning.empty());
    CHECK_FALSE(e.sql.empty());
  }
}

TEST_CASE("dataset ingestion is order-preserving") {
  TempDir dir;
  std::string records = "[";
  for (int i = 0; i < 40; ++i) {
    if (i) records += ",";
    records += R"({"question":"q)" + std::to_string(i) + R"(","db_id":"d"})";
  }
  records += "]";
  write_text(dir.sub("data.json"), records);
  Dataset ds = load_dataset("x::", dir.sub("data.json"));
  REQUIRE(ds.instances.size() == 40);
  for (int i = 0; i < 40; ++i) {
    CHECK(ds.instances[i].question == "q" + std::to_string(i));
  }
}
