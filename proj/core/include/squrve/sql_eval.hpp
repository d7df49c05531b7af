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

#include <cstdint>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "squrve/data_model.hpp"

namespace squrve {

/// A blob cell, kept distinct from text so the kinds never compare equal.
struct Blob {
  std::string bytes;
  bool operator==(const Blob&) const = default;
};

/// One result cell: null, integer, real, text, or bytes.
using Cell = std::variant<std::monostate, std::int64_t, double, std::string, Blob>;

/// Rows fetched from one query; all rows share the same arity.
struct ResultTable {
  std::vector<std::vector<Cell>> rows;
  bool operator==(const ResultTable&) const = default;
};

/// Outcome of executing one SQL statement.
struct ExecOutcome {
  enum class Status { Ok, Error, Timeout };

  Status status = Status::Error;
  ResultTable table;    // populated when Ok
  std::string message;  // populated when Error

  static ExecOutcome ok(ResultTable t) {
    return ExecOutcome{Status::Ok, std::move(t), {}};
  }
  static ExecOutcome error(std::string msg) {
    return ExecOutcome{Status::Error, {}, std::move(msg)};
  }
  static ExecOutcome timeout() { return ExecOutcome{Status::Timeout, {}, {}}; }

  bool is_ok() const { return status == Status::Ok; }
  bool operator==(const ExecOutcome&) const = default;
};

/// Normalized schema-element strings, each "table" or "table.column".
/// Sets are compared as given; normalization only folds case and strips
/// quotes ("table.column" does not imply its "table" is auto-added).
using SchemaElementSet = std::set<std::string>;

/// Executes one read-only SQL statement against a SQLite database file.
/// Statements that are not SELECT/WITH after comment stripping are rejected
/// as an error outcome, as is trailing content after the first statement.
/// Wall time beyond `timeout_seconds` yields the timeout outcome.
/// An unreadable database file throws IoError (distinct from SQL errors).
ExecOutcome execute_sql(const std::string& db_path, const std::string& sql,
                        double timeout_seconds = 30.0);

/// Execution-accuracy match predicate. False when pred errored or timed out.
/// Rows compare as multisets unless the gold SQL's outermost query has an
/// ORDER BY, in which case row order must match. Numeric cells compare
/// within relative 1e-6 (absolute 1e-9 near zero); text and bytes compare
/// exactly; null only equals null. Column order within rows must match.
bool compare_results(const ExecOutcome& pred, const ExecOutcome& gold,
                     const std::string& gold_sql);

/// Mean of compare_results over the batch. Throws ArgumentError when empty.
double execution_accuracy(
    const std::vector<std::tuple<ExecOutcome, ExecOutcome, std::string>>& results);

/// Tokenizes the SQL (strings and comments stripped), binds FROM/JOIN
/// tables and aliases, resolves qualified and unqualified column references
/// against the schema, and returns the referenced "table" and "table.column"
/// elements. Unresolvable identifiers are ignored; the output is always a
/// subset of the schema's element set.
SchemaElementSet extract_schema_elements(const std::string& sql,
                                         const DatabaseSchema& schema);

/// Recall = |pred ∩ gold| / |gold|, precision = |pred ∩ gold| / |pred|
/// (0 when pred is empty). Throws ArgumentError when gold is empty.
std::pair<double, double> linking_recall_precision(const SchemaElementSet& pred,
                                                   const SchemaElementSet& gold);

/// True when the outermost query of `sql` (depth 0, outside strings and
/// comments) contains an ORDER BY clause.
bool has_outer_order_by(const std::string& sql);

/// Returns the first statement of `sql` (content up to the first top-level
/// ';' outside quotes and comments, trimmed, without the semicolon) and the
/// remainder after it.
std::pair<std::string, std::string> split_first_statement(const std::string& sql);

void to_json(nlohmann::json& j, const ExecOutcome& outcome);
void from_json(const nlohmann::json& j, ExecOutcome& outcome);

}  // namespace squrve
