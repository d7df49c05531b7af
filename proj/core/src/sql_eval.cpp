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

#include "squrve/sql_eval.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <unordered_map>
#include <unordered_set>

#include "squrve/errors.hpp"
#include "squrve/util.hpp"

namespace squrve {

namespace {

// ---------------------------------------------------------------------------
// SQL token scanning (strings and comments stripped)
// ---------------------------------------------------------------------------

enum class TokKind { Word, Quoted, Number, Punct, String };

struct Token {
  TokKind kind;
  std::string text;  // Word: lowercase folded; Quoted: unquoted original
};

std::vector<Token> tokenize_sql(const std::string& sql) {
  std::vector<Token> toks;
  std::size_t i = 0, n = sql.size();
  while (i < n) {
    char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
      while (i < n && sql[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
      i += 2;
      while (i + 1 < n && !(sql[i] == '*' && sql[i + 1] == '/')) ++i;
      i = std::min(n, i + 2);
      continue;
    }
    if (c == '\'') {
      ++i;
      std::string s;
      while (i < n) {
        if (sql[i] == '\'' && i + 1 < n && sql[i + 1] == '\'') {
          s += '\'';
          i += 2;
        } else if (sql[i] == '\'') {
          ++i;
          break;
        } else {
          s += sql[i++];
        }
      }
      toks.push_back({TokKind::String, std::move(s)});
      continue;
    }
    if (c == '"' || c == '`' || c == '[') {
      char close = c == '[' ? ']' : c;
      ++i;
      std::string s;
      while (i < n && sql[i] != close) s += sql[i++];
      if (i < n) ++i;
      toks.push_back({TokKind::Quoted, std::move(s)});
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string w;
      while (i < n && (std::isalnum(static_cast<unsigned char>(sql[i])) ||
                       sql[i] == '_')) {
        w += sql[i++];
      }
      toks.push_back({TokKind::Word, lower_ascii(w)});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string num;
      while (i < n && (std::isalnum(static_cast<unsigned char>(sql[i])) ||
                       sql[i] == '.')) {
        num += sql[i++];
      }
      toks.push_back({TokKind::Number, std::move(num)});
      continue;
    }
    toks.push_back({TokKind::Punct, std::string(1, c)});
    ++i;
  }
  return toks;
}

const std::unordered_set<std::string>& sql_keywords() {
  static const std::unordered_set<std::string> kw = {
      "select", "from",   "join",     "inner",  "left",    "right",  "full",
      "outer",  "cross",  "natural",  "on",     "where",   "group",  "order",
      "by",     "having", "limit",    "offset", "union",   "all",    "except",
      "intersect", "as",  "and",      "or",     "not",     "in",     "exists",
      "between", "like",  "is",       "null",   "distinct", "case",  "when",
      "then",   "else",   "end",      "asc",    "desc",    "with",   "recursive",
      "using",  "values", "cast",     "collate", "escape", "glob",   "regexp",
      "set",    "insert", "update",   "delete", "into",    "if",     "isnull",
      "notnull"};
  return kw;
}

bool is_identifier_token(const Token& t) {
  return t.kind == TokKind::Quoted ||
         (t.kind == TokKind::Word && !sql_keywords().count(t.text));
}

std::string token_identifier(const Token& t) {
  return t.kind == TokKind::Quoted ? lower_ascii(t.text) : t.text;
}

bool is_word(const Token& t, const char* w) {
  return t.kind == TokKind::Word && t.text == w;
}

// ---------------------------------------------------------------------------
// Statement scanning on raw text (quotes and comments respected)
// ---------------------------------------------------------------------------

// Calls `visit(i)` for each character position outside string literals,
// quoted identifiers, and comments.
template <typename F>
void scan_plain(const std::string& sql, F visit) {
  std::size_t i = 0, n = sql.size();
  while (i < n) {
    char c = sql[i];
    if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
      while (i < n && sql[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
      i += 2;
      while (i + 1 < n && !(sql[i] == '*' && sql[i + 1] == '/')) ++i;
      i = std::min(n, i + 2);
      continue;
    }
    if (c == '\'' || c == '"' || c == '`' || c == '[') {
      char close = c == '[' ? ']' : c;
      ++i;
      while (i < n) {
        if (sql[i] == close) {
          if (close == '\'' && i + 1 < n && sql[i + 1] == '\'') {
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        ++i;
      }
      continue;
    }
    visit(i);
    ++i;
  }
}

}  // namespace

bool has_outer_order_by(const std::string& sql) {
  // Depth-0 scan for the keyword pair ORDER BY.
  int depth = 0;
  bool found = false;
  std::string plain(sql.size(), ' ');
  std::vector<int> depth_at(sql.size(), -1);
  scan_plain(sql, [&](std::size_t i) {
    char c = sql[i];
    if (c == '(') {
      ++depth;
      return;
    }
    if (c == ')') {
      --depth;
      return;
    }
    plain[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    depth_at[i] = depth;
  });
  for (std::size_t i = 0; i + 5 <= plain.size() && !found; ++i) {
    if (depth_at[i] != 0) continue;
    if (plain.compare(i, 5, "order") != 0) continue;
    if (i > 0 && (std::isalnum(static_cast<unsigned char>(plain[i - 1])) ||
                  plain[i - 1] == '_')) {
      continue;
    }
    std::size_t j = i + 5;
    while (j < plain.size() && std::isspace(static_cast<unsigned char>(plain[j])))
      ++j;
    if (j + 2 <= plain.size() && plain.compare(j, 2, "by") == 0 &&
        depth_at[j] == 0) {
      found = true;
    }
  }
  return found;
}

std::pair<std::string, std::string> split_first_statement(const std::string& sql) {
  std::size_t cut = std::string::npos;
  scan_plain(sql, [&](std::size_t i) {
    if (cut == std::string::npos && sql[i] == ';') cut = i;
  });
  if (cut == std::string::npos) return {trim(sql), ""};
  return {trim(sql.substr(0, cut)), trim(sql.substr(cut + 1))};
}

namespace {

// Read-only gate: the first keyword (past opening parens) must be SELECT
// or WITH. Evaluation must never mutate benchmark databases.
bool is_read_only_statement(const std::string& sql) {
  const auto toks = tokenize_sql(sql);
  for (const auto& t : toks) {
    if (t.kind == TokKind::Punct && t.text == "(") continue;
    return is_word(t, "select") || is_word(t, "with");
  }
  return false;
}

// ---------------------------------------------------------------------------
// Per-database execution permits (default 8 concurrent open handles)
// ---------------------------------------------------------------------------

constexpr int kDbPermits = 8;

class DbPermit {
 public:
  explicit DbPermit(const std::string& db_path) {
    {
      std::lock_guard<std::mutex> lk(mu());
      auto& slot = table()[db_path];
      if (!slot) slot = std::make_shared<std::counting_semaphore<>>(kDbPermits);
      sem_ = slot;
    }
    sem_->acquire();
  }
  ~DbPermit() { sem_->release(); }

  DbPermit(const DbPermit&) = delete;
  DbPermit& operator=(const DbPermit&) = delete;

 private:
  static std::mutex& mu() {
    static std::mutex m;
    return m;
  }
  static std::map<std::string, std::shared_ptr<std::counting_semaphore<>>>&
  table() {
    static std::map<std::string, std::shared_ptr<std::counting_semaphore<>>> t;
    return t;
  }
  std::shared_ptr<std::counting_semaphore<>> sem_;
};

struct Deadline {
  std::chrono::steady_clock::time_point at;
  bool expired = false;
};

extern "C" int squrve_progress_cb(void* ctx) {
  auto* dl = static_cast<Deadline*>(ctx);
  if (std::chrono::steady_clock::now() >= dl->at) {
    dl->expired = true;
    return 1;  // interrupt
  }
  return 0;
}

}  // namespace

ExecOutcome execute_sql(const std::string& db_path, const std::string& sql,
                        double timeout_seconds) {
  if (!std::filesystem::is_regular_file(db_path)) {
    throw IoError("database file not found: " + db_path);
  }

  auto [stmt_text, rest] = split_first_statement(sql);
  if (stmt_text.empty()) return ExecOutcome::error("empty statement");
  if (!rest.empty()) {
    return ExecOutcome::error("multiple statements are not allowed");
  }
  if (!is_read_only_statement(stmt_text)) {
    return ExecOutcome::error("only SELECT/WITH statements are allowed");
  }

  DbPermit permit(db_path);

  sqlite3* raw = nullptr;
  int rc = sqlite3_open_v2(db_path.c_str(), &raw, SQLITE_OPEN_READONLY, nullptr);
  std::unique_ptr<sqlite3, decltype(&sqlite3_close)> db(raw, &sqlite3_close);
  if (rc != SQLITE_OK) {
    throw IoError("cannot open database " + db_path + ": " +
                  (raw ? sqlite3_errmsg(raw) : "unknown error"));
  }

  Deadline dl{std::chrono::steady_clock::now() +
              std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                  std::chrono::duration<double>(timeout_seconds))};
  sqlite3_progress_handler(db.get(), 500, squrve_progress_cb, &dl);

  sqlite3_stmt* raw_stmt = nullptr;
  const char* tail = nullptr;
  rc = sqlite3_prepare_v2(db.get(), stmt_text.c_str(), -1, &raw_stmt, &tail);
  std::unique_ptr<sqlite3_stmt, decltype(&sqlite3_finalize)> stmt(
      raw_stmt, &sqlite3_finalize);
  if (rc != SQLITE_OK) {
    return ExecOutcome::error(sqlite3_errmsg(db.get()));
  }
  if (!raw_stmt) return ExecOutcome::error("empty statement");

  ResultTable table;
  const int ncols = sqlite3_column_count(stmt.get());
  while (true) {
    rc = sqlite3_step(stmt.get());
    if (rc == SQLITE_ROW) {
      std::vector<Cell> row;
      row.reserve(static_cast<std::size_t>(ncols));
      for (int c = 0; c < ncols; ++c) {
        switch (sqlite3_column_type(stmt.get(), c)) {
          case SQLITE_NULL:
            row.emplace_back(std::monostate{});
            break;
          case SQLITE_INTEGER:
            row.emplace_back(
                static_cast<std::int64_t>(sqlite3_column_int64(stmt.get(), c)));
            break;
          case SQLITE_FLOAT:
            row.emplace_back(sqlite3_column_double(stmt.get(), c));
            break;
          case SQLITE_BLOB: {
            const void* data = sqlite3_column_blob(stmt.get(), c);
            int len = sqlite3_column_bytes(stmt.get(), c);
            row.emplace_back(
                Blob{std::string(static_cast<const char*>(data ? data : ""),
                                 static_cast<std::size_t>(len))});
            break;
          }
          default: {
            const unsigned char* text = sqlite3_column_text(stmt.get(), c);
            int len = sqlite3_column_bytes(stmt.get(), c);
            row.emplace_back(std::string(
                reinterpret_cast<const char*>(text ? text : nullptr),
                static_cast<std::size_t>(len)));
            break;
          }
        }
      }
      table.rows.push_back(std::move(row));
      continue;
    }
    if (rc == SQLITE_DONE) return ExecOutcome::ok(std::move(table));
    if (rc == SQLITE_INTERRUPT && dl.expired) return ExecOutcome::timeout();
    if (dl.expired) return ExecOutcome::timeout();
    return ExecOutcome::error(sqlite3_errmsg(db.get()));
  }
}

namespace {

// ---------------------------------------------------------------------------
// Result comparison
// ---------------------------------------------------------------------------

constexpr double kRelTol = 1e-6;
constexpr double kAbsTol = 1e-9;

bool numeric_equal(double a, double b) {
  double diff = std::fabs(a - b);
  return diff <= kAbsTol || diff <= kRelTol * std::max(std::fabs(a), std::fabs(b));
}

bool cell_equal(const Cell& a, const Cell& b) {
  if (std::holds_alternative<std::monostate>(a) ||
      std::holds_alternative<std::monostate>(b)) {
    return std::holds_alternative<std::monostate>(a) &&
           std::holds_alternative<std::monostate>(b);
  }
  const bool a_int = std::holds_alternative<std::int64_t>(a);
  const bool b_int = std::holds_alternative<std::int64_t>(b);
  const bool a_real = std::holds_alternative<double>(a);
  const bool b_real = std::holds_alternative<double>(b);
  if ((a_int || a_real) && (b_int || b_real)) {
    if (a_int && b_int) {
      return std::get<std::int64_t>(a) == std::get<std::int64_t>(b);
    }
    double va = a_int ? static_cast<double>(std::get<std::int64_t>(a))
                      : std::get<double>(a);
    double vb = b_int ? static_cast<double>(std::get<std::int64_t>(b))
                      : std::get<double>(b);
    return numeric_equal(va, vb);
  }
  if (std::holds_alternative<std::string>(a) &&
      std::holds_alternative<std::string>(b)) {
    return std::get<std::string>(a) == std::get<std::string>(b);
  }
  if (std::holds_alternative<Blob>(a) && std::holds_alternative<Blob>(b)) {
    return std::get<Blob>(a) == std::get<Blob>(b);
  }
  return false;
}

bool row_equal(const std::vector<Cell>& a, const std::vector<Cell>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!cell_equal(a[i], b[i])) return false;
  }
  return true;
}

bool table_has_real(const ResultTable& t) {
  for (const auto& row : t.rows) {
    for (const auto& c : row) {
      if (std::holds_alternative<double>(c)) return true;
    }
  }
  return false;
}

// Unambiguous row encoding: every cell is kind-tagged and length-prefixed,
// so cell payloads containing separator bytes cannot collide across
// different row structures.
std::string row_canon(const std::vector<Cell>& row) {
  std::string out;
  auto append = [&](char kind, const std::string& payload) {
    out += kind;
    out += std::to_string(payload.size());
    out += ':';
    out += payload;
  };
  for (const auto& c : row) {
    if (std::holds_alternative<std::monostate>(c)) {
      append('N', "");
    } else if (std::holds_alternative<std::int64_t>(c)) {
      append('i', std::to_string(std::get<std::int64_t>(c)));
    } else if (std::holds_alternative<std::string>(c)) {
      append('t', std::get<std::string>(c));
    } else if (std::holds_alternative<Blob>(c)) {
      append('b', std::get<Blob>(c).bytes);
    }
  }
  return out;
}

}  // namespace

bool compare_results(const ExecOutcome& pred, const ExecOutcome& gold,
                     const std::string& gold_sql) {
  if (!pred.is_ok() || !gold.is_ok()) return false;
  const auto& p = pred.table.rows;
  const auto& g = gold.table.rows;
  if (p.size() != g.size()) return false;

  if (has_outer_order_by(gold_sql)) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!row_equal(p[i], g[i])) return false;
    }
    return true;
  }

  // Multiset comparison. Exact sorted encodings when no real-valued cells
  // are involved, tolerant greedy matching otherwise.
  if (!table_has_real(pred.table) && !table_has_real(gold.table)) {
    std::vector<std::string> pc, gc;
    pc.reserve(p.size());
    gc.reserve(g.size());
    for (const auto& r : p) pc.push_back(row_canon(r));
    for (const auto& r : g) gc.push_back(row_canon(r));
    std::sort(pc.begin(), pc.end());
    std::sort(gc.begin(), gc.end());
    return pc == gc;
  }

  std::vector<bool> used(g.size(), false);
  for (const auto& pr : p) {
    bool matched = false;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!used[j] && row_equal(pr, g[j])) {
        used[j] = true;
        matched = true;
        break;
      }
    }
    if (!matched) return false;
  }
  return true;
}

double execution_accuracy(
    const std::vector<std::tuple<ExecOutcome, ExecOutcome, std::string>>& results) {
  if (results.empty()) {
    throw ArgumentError("execution_accuracy requires a non-empty batch");
  }
  std::size_t matches = 0;
  for (const auto& [pred, gold, gold_sql] : results) {
    if (compare_results(pred, gold, gold_sql)) ++matches;
  }
  return static_cast<double>(matches) / static_cast<double>(results.size());
}

SchemaElementSet extract_schema_elements(const std::string& sql,
                                         const DatabaseSchema& schema) {
  const auto toks = tokenize_sql(sql);
  const std::size_t n = toks.size();

  // Tables declared by the schema, and their columns, in normalized form.
  std::unordered_map<std::string, std::unordered_set<std::string>> schema_cols;
  for (const auto& c : schema.columns) {
    schema_cols[normalize_identifier(c.table_name)].insert(
        normalize_identifier(c.column_name));
  }

  SchemaElementSet out;
  std::unordered_map<std::string, std::string> alias_to_table;
  std::unordered_set<std::string> query_tables;
  std::vector<bool> consumed(n, false);

  // Pass 1: bind tables and aliases after FROM / JOIN.
  for (std::size_t i = 0; i < n; ++i) {
    const bool at_from = is_word(toks[i], "from");
    const bool at_join = is_word(toks[i], "join");
    if (!at_from && !at_join) continue;

    std::size_t j = i + 1;
    while (j < n) {
      if (toks[j].kind == TokKind::Punct && toks[j].text == "(") break;
      if (!is_identifier_token(toks[j])) break;

      std::string tname = token_identifier(toks[j]);
      consumed[j] = true;
      ++j;
      if (j + 1 < n && toks[j].kind == TokKind::Punct && toks[j].text == "." &&
          is_identifier_token(toks[j + 1])) {
        // db-qualified table reference: keep the last component
        tname = token_identifier(toks[j + 1]);
        consumed[j + 1] = true;
        j += 2;
      }

      std::string alias = tname;
      if (j < n && is_word(toks[j], "as") && j + 1 < n &&
          is_identifier_token(toks[j + 1])) {
        alias = token_identifier(toks[j + 1]);
        consumed[j + 1] = true;
        j += 2;
      } else if (j < n && is_identifier_token(toks[j])) {
        alias = token_identifier(toks[j]);
        consumed[j] = true;
        ++j;
      }

      alias_to_table[alias] = tname;
      alias_to_table.emplace(tname, tname);
      if (schema_cols.count(tname)) {
        query_tables.insert(tname);
        out.insert(tname);
      }

      // Comma-separated table lists continue only directly after FROM.
      if (at_from && j < n && toks[j].kind == TokKind::Punct &&
          toks[j].text == ",") {
        ++j;
        continue;
      }
      break;
    }
  }

  // Pass 2: resolve column references.
  for (std::size_t i = 0; i < n; ++i) {
    if (consumed[i] || !is_identifier_token(toks[i])) continue;
    // output aliases ("expr AS name") are not column references
    if (i > 0 && is_word(toks[i - 1], "as")) continue;
    // function calls
    if (i + 1 < n && toks[i + 1].kind == TokKind::Punct &&
        toks[i + 1].text == "(") {
      continue;
    }

    if (i + 2 < n && toks[i + 1].kind == TokKind::Punct &&
        toks[i + 1].text == "." && is_identifier_token(toks[i + 2])) {
      // qualified reference: alias.column
      std::string qual = token_identifier(toks[i]);
      std::string col = token_identifier(toks[i + 2]);
      auto it = alias_to_table.find(qual);
      if (it != alias_to_table.end()) {
        const std::string& table = it->second;
        auto sc = schema_cols.find(table);
        if (sc != schema_cols.end() && sc->second.count(col)) {
          out.insert(table);
          out.insert(table + "." + col);
        }
      }
      continue;
    }
    if (i > 0 && toks[i - 1].kind == TokKind::Punct && toks[i - 1].text == ".") {
      continue;  // already handled as the column part of a qualified ref
    }

    // unqualified identifier: match against columns of tables in the query
    std::string ident = token_identifier(toks[i]);
    for (const auto& table : query_tables) {
      auto sc = schema_cols.find(table);
      if (sc != schema_cols.end() && sc->second.count(ident)) {
        out.insert(table);
        out.insert(table + "." + ident);
      }
    }
  }
  return out;
}

namespace {

nlohmann::json cell_to_json(const Cell& c) {
  using nlohmann::json;
  if (std::holds_alternative<std::monostate>(c)) return nullptr;
  if (std::holds_alternative<std::int64_t>(c)) {
    return json{{"i", std::get<std::int64_t>(c)}};
  }
  if (std::holds_alternative<double>(c)) return json{{"r", std::get<double>(c)}};
  if (std::holds_alternative<std::string>(c)) {
    return json{{"t", std::get<std::string>(c)}};
  }
  std::string hex;
  for (unsigned char b : std::get<Blob>(c).bytes) {
    char buf[3];
    std::snprintf(buf, sizeof(buf), "%02x", b);
    hex += buf;
  }
  return nlohmann::json{{"b", hex}};
}

Cell cell_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::monostate{};
  if (j.contains("i")) return j["i"].get<std::int64_t>();
  if (j.contains("r")) return j["r"].get<double>();
  if (j.contains("t")) return j["t"].get<std::string>();
  std::string hex = j.value("b", "");
  std::string bytes;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    bytes.push_back(static_cast<char>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  return Blob{std::move(bytes)};
}

}  // namespace

void to_json(nlohmann::json& j, const ExecOutcome& outcome) {
  using nlohmann::json;
  switch (outcome.status) {
    case ExecOutcome::Status::Ok: {
      json rows = json::array();
      for (const auto& row : outcome.table.rows) {
        json cells = json::array();
        for (const auto& c : row) cells.push_back(cell_to_json(c));
        rows.push_back(std::move(cells));
      }
      j = json{{"status", "ok"}, {"rows", std::move(rows)}};
      return;
    }
    case ExecOutcome::Status::Timeout:
      j = json{{"status", "timeout"}};
      return;
    case ExecOutcome::Status::Error:
      break;
  }
  j = json{{"status", "error"}, {"message", outcome.message}};
}

void from_json(const nlohmann::json& j, ExecOutcome& outcome) {
  std::string status = j.at("status").get<std::string>();
  if (status == "ok") {
    ResultTable table;
    for (const auto& row : j.value("rows", nlohmann::json::array())) {
      std::vector<Cell> cells;
      for (const auto& c : row) cells.push_back(cell_from_json(c));
      table.rows.push_back(std::move(cells));
    }
    outcome = ExecOutcome::ok(std::move(table));
  } else if (status == "timeout") {
    outcome = ExecOutcome::timeout();
  } else {
    outcome = ExecOutcome::error(j.value("message", ""));
  }
}

std::pair<double, double> linking_recall_precision(const SchemaElementSet& pred,
                                                   const SchemaElementSet& gold) {
  if (gold.empty()) {
    throw ArgumentError("linking recall is undefined for an empty gold set");
  }
  std::size_t hit = 0;
  for (const auto& e : pred) {
    if (gold.count(e)) ++hit;
  }
  double recall = static_cast<double>(hit) / static_cast<double>(gold.size());
  double precision =
      pred.empty() ? 0.0
                   : static_cast<double>(hit) / static_cast<double>(pred.size());
  return {recall, precision};
}

}  // namespace squrve
