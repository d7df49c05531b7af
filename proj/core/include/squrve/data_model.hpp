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

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace squrve {

/// A (table, column) endpoint of a foreign key.
struct ColumnRef {
  std::string table;
  std::string column;

  bool operator==(const ColumnRef&) const = default;
};

/// One column of one table: the unit of schema decomposition and retrieval.
/// All types in this module are immutable after construction and safe to
/// share across concurrent tasks.
struct ColumnUnit {
  std::string db_id;
  std::string table_name;
  std::string column_name;
  std::string data_type;
  std::string description;
  std::vector<std::string> sample_values;
  bool is_primary_key = false;
  std::optional<ColumnRef> foreign_key_ref;

  bool operator==(const ColumnUnit&) const = default;
};

using ForeignKey = std::pair<ColumnRef, ColumnRef>;

/// A database schema: ordered column units plus db-level foreign keys.
struct DatabaseSchema {
  std::string db_id;
  std::vector<ColumnUnit> columns;
  std::vector<ForeignKey> foreign_keys;

  bool operator==(const DatabaseSchema&) const = default;

  /// Case-insensitive table lookup; true when any column belongs to it.
  bool has_table(const std::string& table) const;
  /// Case-insensitive (table, column) lookup.
  bool has_column(const std::string& table, const std::string& column) const;
  /// Distinct table names in first-appearance order, original casing.
  std::vector<std::string> table_names() const;
  /// Normalized "table" and "table.column" strings for every column.
  std::set<std::string> element_set() const;

  /// Throws SchemaError on empty identifiers, identifiers containing path
  /// separators, duplicate (table, column) keys, db_id mismatches, or
  /// foreign keys naming unknown columns.
  void validate() const;
};

/// One benchmark question, with optional gold SQL and gold schema elements.
struct QueryInstance {
  std::string instance_id;
  std::string db_id;
  std::string question;
  std::optional<std::string> gold_sql;
  std::optional<std::string> external_context;
  std::optional<std::set<std::string>> gold_schema_elements;

  bool operator==(const QueryInstance&) const = default;
};

/// An ordered dataset; iteration order is load order.
struct Dataset {
  std::string source_descriptor;
  std::vector<QueryInstance> instances;

  bool operator==(const Dataset&) const = default;
};

/// A stored chain-of-thought exemplar used for few-shot prompting.
struct Exemplar {
  std::string question;
  std::string reasoning;
  std::string sql;

  bool operator==(const Exemplar&) const = default;
};

void to_json(nlohmann::json& j, const ColumnRef& r);
void from_json(const nlohmann::json& j, ColumnRef& r);
void to_json(nlohmann::json& j, const ColumnUnit& c);
void from_json(const nlohmann::json& j, ColumnUnit& c);
void to_json(nlohmann::json& j, const Exemplar& e);
void from_json(const nlohmann::json& j, Exemplar& e);

/// Loads a dataset file: a UTF-8 JSON array of records following the field
/// conventions of the mainstream benchmarks. `question`, `query` | `SQL`,
/// `db_id`, optional `id`, optional `evidence` (external context) and
/// optional `gold_schema` (array of "table.column" strings) are recognized.
/// instance_id defaults to the record's array index as decimal text.
/// Throws IngestionError naming the offending record index.
Dataset load_dataset(const std::string& source_descriptor,
                     const std::string& path);

/// Loads schemas from either a centralized schema file (JSON array of
/// per-database records, tables.json convention) or a directory of
/// column-unit files written by decompose_schema. Returns one schema per
/// db_id; column order is preserved from the source.
std::vector<DatabaseSchema> load_schema(const std::string& schema_source,
                                        const std::string& path);

/// Writes one JSON file per column unit under
/// out_dir/db_id/table_name/column_name.json, each carrying the full column
/// metadata plus the db-level foreign keys touching that column. Validates
/// before the first write (all-or-nothing on duplicate keys). Returns the
/// number of files written, which equals the number of columns.
std::size_t decompose_schema(const DatabaseSchema& schema,
                             const std::string& out_dir);

/// Deterministic prompt rendering: one `TABLE t(c1 type, c2 type, ...)` line
/// per table in source order, then `FK: a.x -> b.y` lines. No trailing
/// newline; empty schema renders as empty text.
std::string schema_to_prompt_text(const DatabaseSchema& schema_subset);

/// Loads an exemplar corpus: a UTF-8 JSON array of {question, reasoning,
/// sql}. All three fields must be non-empty.
std::vector<Exemplar> load_exemplars(const std::string& path);

}  // namespace squrve
