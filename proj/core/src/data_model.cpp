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

#include "squrve/data_model.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <unordered_set>

#include "squrve/errors.hpp"
#include "squrve/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace squrve {

namespace {

bool valid_identifier(const std::string& s) {
  return !s.empty() && s.find('/') == std::string::npos &&
         s.find('\\') == std::string::npos;
}

std::string element_key(const ColumnUnit& c) {
  return normalize_identifier(c.table_name) + "." +
         normalize_identifier(c.column_name);
}

json parse_json_file(const std::string& path) {
  std::string text = read_file(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw IngestionError("invalid JSON in " + path);
  return j;
}

}  // namespace

bool DatabaseSchema::has_table(const std::string& table) const {
  std::string t = normalize_identifier(table);
  return std::any_of(columns.begin(), columns.end(), [&](const ColumnUnit& c) {
    return normalize_identifier(c.table_name) == t;
  });
}

bool DatabaseSchema::has_column(const std::string& table,
                                const std::string& column) const {
  std::string t = normalize_identifier(table);
  std::string c = normalize_identifier(column);
  return std::any_of(columns.begin(), columns.end(), [&](const ColumnUnit& u) {
    return normalize_identifier(u.table_name) == t &&
           normalize_identifier(u.column_name) == c;
  });
}

std::vector<std::string> DatabaseSchema::table_names() const {
  std::vector<std::string> names;
  std::unordered_set<std::string> seen;
  for (const auto& c : columns) {
    std::string key = normalize_identifier(c.table_name);
    if (seen.insert(key).second) names.push_back(c.table_name);
  }
  return names;
}

std::set<std::string> DatabaseSchema::element_set() const {
  std::set<std::string> out;
  for (const auto& c : columns) {
    out.insert(normalize_identifier(c.table_name));
    out.insert(element_key(c));
  }
  return out;
}

void DatabaseSchema::validate() const {
  if (!valid_identifier(db_id)) throw SchemaError("invalid db_id: " + db_id);
  std::unordered_set<std::string> keys;
  for (const auto& c : columns) {
    if (!valid_identifier(c.table_name) || !valid_identifier(c.column_name)) {
      throw SchemaError("invalid identifier in column of db " + db_id);
    }
    if (normalize_identifier(c.db_id) != normalize_identifier(db_id)) {
      throw SchemaError("column db_id mismatch: " + c.db_id + " vs " + db_id);
    }
    if (!keys.insert(element_key(c)).second) {
      throw SchemaError("duplicate column " + element_key(c) + " in db " +
                        db_id);
    }
  }
  for (const auto& [from, to] : foreign_keys) {
    if (!has_column(from.table, from.column)) {
      throw SchemaError("foreign key references unknown column " + from.table +
                        "." + from.column + " in db " + db_id);
    }
    if (!has_column(to.table, to.column)) {
      throw SchemaError("foreign key references unknown column " + to.table +
                        "." + to.column + " in db " + db_id);
    }
  }
}

void to_json(json& j, const ColumnRef& r) {
  j = json{{"table", r.table}, {"column", r.column}};
}

void from_json(const json& j, ColumnRef& r) {
  j.at("table").get_to(r.table);
  j.at("column").get_to(r.column);
}

void to_json(json& j, const ColumnUnit& c) {
  j = json{{"db_id", c.db_id},
           {"table_name", c.table_name},
           {"column_name", c.column_name},
           {"data_type", c.data_type},
           {"description", c.description},
           {"sample_values", c.sample_values},
           {"is_primary_key", c.is_primary_key}};
  if (c.foreign_key_ref) {
    j["foreign_key_ref"] = *c.foreign_key_ref;
  } else {
    j["foreign_key_ref"] = nullptr;
  }
}

void from_json(const json& j, ColumnUnit& c) {
  j.at("db_id").get_to(c.db_id);
  j.at("table_name").get_to(c.table_name);
  j.at("column_name").get_to(c.column_name);
  c.data_type = j.value("data_type", "");
  c.description = j.value("description", "");
  c.sample_values = j.value("sample_values", std::vector<std::string>{});
  c.is_primary_key = j.value("is_primary_key", false);
  if (j.contains("foreign_key_ref") && !j["foreign_key_ref"].is_null()) {
    c.foreign_key_ref = j["foreign_key_ref"].get<ColumnRef>();
  } else {
    c.foreign_key_ref = std::nullopt;
  }
}

void to_json(json& j, const Exemplar& e) {
  j = json{{"question", e.question}, {"reasoning", e.reasoning}, {"sql", e.sql}};
}

void from_json(const json& j, Exemplar& e) {
  j.at("question").get_to(e.question);
  j.at("reasoning").get_to(e.reasoning);
  j.at("sql").get_to(e.sql);
}

Dataset load_dataset(const std::string& source_descriptor,
                     const std::string& path) {
  json root = parse_json_file(path);
  if (!root.is_array()) {
    throw IngestionError("dataset root is not a JSON array: " + path);
  }

  Dataset ds;
  ds.source_descriptor = source_descriptor;
  ds.instances.reserve(root.size());

  for (std::size_t i = 0; i < root.size(); ++i) {
    const json& rec = root[i];
    auto fail = [&](const std::string& why) -> IngestionError {
      return IngestionError("record " + std::to_string(i) + ": " + why);
    };
    if (!rec.is_object()) throw fail("not a JSON object");

    QueryInstance q;
    if (rec.contains("question") && rec["question"].is_string()) {
      q.question = rec["question"].get<std::string>();
    }
    if (rec.contains("db_id") && rec["db_id"].is_string()) {
      q.db_id = rec["db_id"].get<std::string>();
    }
    if (q.question.empty() && q.db_id.empty()) {
      throw fail("missing both question and db_id");
    }
    if (q.question.empty()) throw fail("missing or empty question");
    if (q.db_id.empty()) throw fail("missing or empty db_id");

    if (rec.contains("id")) {
      const json& id = rec["id"];
      if (id.is_string()) {
        q.instance_id = id.get<std::string>();
      } else if (id.is_number_integer()) {
        q.instance_id = std::to_string(id.get<long long>());
      } else {
        q.instance_id = std::to_string(i);
      }
    } else {
      q.instance_id = std::to_string(i);
    }

    // Spider uses `query`, Bird uses `SQL`.
    if (rec.contains("query") && rec["query"].is_string()) {
      q.gold_sql = rec["query"].get<std::string>();
    } else if (rec.contains("SQL") && rec["SQL"].is_string()) {
      q.gold_sql = rec["SQL"].get<std::string>();
    }

    if (rec.contains("evidence") && rec["evidence"].is_string()) {
      std::string ev = rec["evidence"].get<std::string>();
      if (!ev.empty()) q.external_context = ev;
    }

    if (rec.contains("gold_schema") && rec["gold_schema"].is_array()) {
      std::set<std::string> elements;
      for (const auto& e : rec["gold_schema"]) {
        if (e.is_string()) {
          elements.insert(normalize_identifier(e.get<std::string>()));
        }
      }
      q.gold_schema_elements = std::move(elements);
    }

    ds.instances.push_back(std::move(q));
  }

  std::unordered_set<std::string> ids;
  for (const auto& q : ds.instances) {
    if (!ids.insert(q.instance_id).second) {
      throw IngestionError("duplicate instance_id: " + q.instance_id);
    }
  }
  return ds;
}

namespace {

// Centralized schema files follow the tables.json convention: one record per
// database with column_names[_original] as [table_index, name] pairs. The
// pseudo-column [-1, "*"] is skipped but index positions are kept so that
// primary_keys / foreign_keys indices still resolve.
DatabaseSchema schema_from_tables_record(const json& rec) {
  DatabaseSchema schema;
  schema.db_id = rec.at("db_id").get<std::string>();

  const json& tables = rec.contains("table_names_original")
                           ? rec["table_names_original"]
                           : rec.at("table_names");
  const json& cols = rec.contains("column_names_original")
                         ? rec["column_names_original"]
                         : rec.at("column_names");
  std::vector<std::string> table_names = tables.get<std::vector<std::string>>();

  std::vector<std::string> types;
  if (rec.contains("column_types")) {
    types = rec["column_types"].get<std::vector<std::string>>();
  }

  // index in the raw column array -> (table, column); "*" slots stay empty.
  std::vector<ColumnRef> by_index(cols.size());
  for (std::size_t i = 0; i < cols.size(); ++i) {
    int t = cols[i].at(0).get<int>();
    std::string name = cols[i].at(1).get<std::string>();
    if (t < 0) continue;
    if (static_cast<std::size_t>(t) >= table_names.size()) {
      throw SchemaError("column " + name + " names unknown table index in db " +
                        schema.db_id);
    }
    ColumnUnit c;
    c.db_id = schema.db_id;
    c.table_name = table_names[static_cast<std::size_t>(t)];
    c.column_name = name;
    c.data_type = i < types.size() ? types[i] : "";
    by_index[i] = ColumnRef{c.table_name, c.column_name};
    schema.columns.push_back(std::move(c));
  }

  auto resolve = [&](int idx) -> const ColumnRef& {
    if (idx < 0 || static_cast<std::size_t>(idx) >= by_index.size() ||
        by_index[static_cast<std::size_t>(idx)].table.empty()) {
      throw SchemaError("foreign/primary key index out of range in db " +
                        schema.db_id);
    }
    return by_index[static_cast<std::size_t>(idx)];
  };

  if (rec.contains("primary_keys")) {
    for (const auto& pk : rec["primary_keys"]) {
      // Composite keys may arrive as nested arrays.
      std::vector<int> idxs;
      if (pk.is_array()) {
        idxs = pk.get<std::vector<int>>();
      } else {
        idxs.push_back(pk.get<int>());
      }
      for (int idx : idxs) {
        const ColumnRef& ref = resolve(idx);
        for (auto& c : schema.columns) {
          if (c.table_name == ref.table && c.column_name == ref.column) {
            c.is_primary_key = true;
          }
        }
      }
    }
  }

  if (rec.contains("foreign_keys")) {
    for (const auto& fk : rec["foreign_keys"]) {
      ColumnRef from = resolve(fk.at(0).get<int>());
      ColumnRef to = resolve(fk.at(1).get<int>());
      for (auto& c : schema.columns) {
        if (c.table_name == from.table && c.column_name == from.column &&
            !c.foreign_key_ref) {
          c.foreign_key_ref = to;
        }
      }
      schema.foreign_keys.emplace_back(std::move(from), std::move(to));
    }
  }
  return schema;
}

// Reads back a directory written by decompose_schema. Column files carry an
// "ordinal" and foreign keys carry their db-level "index" so that reassembly
// is the exact inverse of decomposition.
std::vector<DatabaseSchema> load_schema_dir(const std::string& path) {
  struct OrderedColumn {
    std::size_t ordinal;
    ColumnUnit unit;
  };
  std::map<std::string, std::vector<OrderedColumn>> columns_by_db;
  std::map<std::string, std::map<std::size_t, ForeignKey>> fks_by_db;

  for (const auto& entry : fs::recursive_directory_iterator(path)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") {
      continue;
    }
    json j = parse_json_file(entry.path().string());
    ColumnUnit unit = j.get<ColumnUnit>();
    std::size_t ordinal = j.value("ordinal", static_cast<std::size_t>(0));
    std::string db = unit.db_id;
    columns_by_db[db].push_back({ordinal, std::move(unit)});
    if (j.contains("foreign_keys")) {
      for (const auto& fk : j["foreign_keys"]) {
        std::size_t idx = fk.at("index").get<std::size_t>();
        ForeignKey key{fk.at("from").get<ColumnRef>(),
                       fk.at("to").get<ColumnRef>()};
        fks_by_db[db].emplace(idx, std::move(key));
      }
    }
  }

  std::vector<DatabaseSchema> schemas;
  for (auto& [db, cols] : columns_by_db) {
    std::stable_sort(cols.begin(), cols.end(),
                     [](const OrderedColumn& a, const OrderedColumn& b) {
                       return a.ordinal < b.ordinal;
                     });
    DatabaseSchema schema;
    schema.db_id = db;
    for (auto& oc : cols) schema.columns.push_back(std::move(oc.unit));
    for (auto& [idx, fk] : fks_by_db[db]) schema.foreign_keys.push_back(fk);
    schemas.push_back(std::move(schema));
  }
  return schemas;
}

}  // namespace

std::vector<DatabaseSchema> load_schema(const std::string& schema_source,
                                        const std::string& path) {
  (void)schema_source;
  std::vector<DatabaseSchema> schemas;
  if (fs::is_directory(path)) {
    schemas = load_schema_dir(path);
  } else {
    json root = parse_json_file(path);
    if (!root.is_array()) {
      throw SchemaError("centralized schema root is not a JSON array: " + path);
    }
    for (const auto& rec : root) {
      schemas.push_back(schema_from_tables_record(rec));
    }
  }
  for (const auto& s : schemas) s.validate();
  return schemas;
}

std::size_t decompose_schema(const DatabaseSchema& schema,
                             const std::string& out_dir) {
  schema.validate();  // all-or-nothing: no file is written on invalid input

  for (std::size_t i = 0; i < schema.columns.size(); ++i) {
    const ColumnUnit& c = schema.columns[i];
    json j = c;
    j["ordinal"] = i;
    json touching = json::array();
    for (std::size_t k = 0; k < schema.foreign_keys.size(); ++k) {
      const auto& [from, to] = schema.foreign_keys[k];
      auto matches = [&](const ColumnRef& r) {
        return normalize_identifier(r.table) ==
                   normalize_identifier(c.table_name) &&
               normalize_identifier(r.column) ==
                   normalize_identifier(c.column_name);
      };
      if (matches(from) || matches(to)) {
        touching.push_back(json{{"index", k}, {"from", from}, {"to", to}});
      }
    }
    if (!touching.empty()) j["foreign_keys"] = touching;

    fs::path file = fs::path(out_dir) / schema.db_id / c.table_name /
                    (c.column_name + ".json");
    write_file(file.string(), j.dump(2) + "\n");
  }
  return schema.columns.size();
}

std::string schema_to_prompt_text(const DatabaseSchema& schema_subset) {
  // one table line per first appearance, filled in a single column pass
  std::vector<std::string> lines;
  std::unordered_map<std::string, std::size_t> line_by_table;
  for (const auto& c : schema_subset.columns) {
    std::string key = normalize_identifier(c.table_name);
    auto [it, inserted] = line_by_table.emplace(key, lines.size());
    if (inserted) lines.push_back("TABLE " + c.table_name + "(");
    std::string& line = lines[it->second];
    if (line.back() != '(') line += ", ";
    line += c.column_name;
    if (!c.data_type.empty()) line += " " + c.data_type;
  }
  for (auto& line : lines) line += ")";
  for (const auto& [from, to] : schema_subset.foreign_keys) {
    lines.push_back("FK: " + from.table + "." + from.column + " -> " +
                    to.table + "." + to.column);
  }
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += "\n";
    out += lines[i];
  }
  return out;
}

std::vector<Exemplar> load_exemplars(const std::string& path) {
  json root = parse_json_file(path);
  if (!root.is_array()) {
    throw IngestionError("exemplar corpus is not a JSON array: " + path);
  }
  std::vector<Exemplar> out;
  for (std::size_t i = 0; i < root.size(); ++i) {
    Exemplar e = root[i].get<Exemplar>();
    if (e.question.empty() || e.reasoning.empty() || e.sql.empty()) {
      throw IngestionError("exemplar " + std::to_string(i) +
                           " has an empty field");
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace squrve
