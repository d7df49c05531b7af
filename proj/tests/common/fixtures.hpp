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

#include <sqlite3.h>

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "squrve/data_model.hpp"
#include "squrve/workflow_state.hpp"

namespace squrve::testing {

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "squrve") {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto candidate = base / (tag + "-" + std::to_string(counter()++));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create temp directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }
  std::string sub(const std::string& rel) const { return (path_ / rel).string(); }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

/// Creates a SQLite database file and runs the given statements against it.
inline void make_sqlite_db(const std::string& path,
                           const std::vector<std::string>& statements) {
  std::filesystem::create_directories(
      std::filesystem::path(path).parent_path());
  sqlite3* db = nullptr;
  if (sqlite3_open(path.c_str(), &db) != SQLITE_OK) {
    throw std::runtime_error("cannot create fixture db: " + path);
  }
  for (const auto& sql : statements) {
    char* err = nullptr;
    if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown error";
      sqlite3_free(err);
      sqlite3_close(db);
      throw std::runtime_error("fixture statement failed (" + msg + "): " + sql);
    }
  }
  sqlite3_close(db);
}

inline ColumnUnit make_column(const std::string& db_id,
                              const std::string& table,
                              const std::string& column,
                              const std::string& type = "TEXT",
                              bool primary_key = false) {
  ColumnUnit c;
  c.db_id = db_id;
  c.table_name = table;
  c.column_name = column;
  c.data_type = type;
  c.is_primary_key = primary_key;
  return c;
}

/// Two-table toy schema used across the actor and runtime tests:
///   singer(id PK, name, age), concert(id PK, singer_id, venue)
///   FK concert.singer_id -> singer.id
inline DatabaseSchema concert_schema(const std::string& db_id = "concerts") {
  DatabaseSchema s;
  s.db_id = db_id;
  s.columns = {
      make_column(db_id, "singer", "id", "INTEGER", true),
      make_column(db_id, "singer", "name", "TEXT"),
      make_column(db_id, "singer", "age", "INTEGER"),
      make_column(db_id, "concert", "id", "INTEGER", true),
      make_column(db_id, "concert", "singer_id", "INTEGER"),
      make_column(db_id, "concert", "venue", "TEXT"),
  };
  s.columns[4].foreign_key_ref = ColumnRef{"singer", "id"};
  s.foreign_keys = {{ColumnRef{"concert", "singer_id"}, ColumnRef{"singer", "id"}}};
  return s;
}

/// Matching SQLite fixture for concert_schema.
inline void make_concert_db(const std::string& path) {
  make_sqlite_db(
      path,
      {"CREATE TABLE singer(id INTEGER PRIMARY KEY, name TEXT, age INTEGER);",
       "CREATE TABLE concert(id INTEGER PRIMARY KEY, singer_id INTEGER, "
       "venue TEXT, FOREIGN KEY(singer_id) REFERENCES singer(id));",
       "INSERT INTO singer VALUES (1, 'Ann', 30), (2, 'Ben', 25), (3, 'Cal', "
       "41);",
       "INSERT INTO concert VALUES (1, 1, 'Hall A'), (2, 1, 'Hall B'), (3, 2, "
       "'Hall A');"});
}

inline WorkflowState make_state(const DatabaseSchema& schema,
                                const std::string& question = "How many singers are there?") {
  WorkflowState s;
  s.question = question;
  s.db_id = schema.db_id;
  s.full_schema = std::make_shared<const DatabaseSchema>(schema);
  return s;
}

}  // namespace squrve::testing
