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

#include "squrve/actors.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <future>
#include <map>
#include <set>
#include <unordered_set>

#include "squrve/sql_eval.hpp"
#include "squrve/util.hpp"

using nlohmann::json;

namespace squrve {

std::string actor_kind_name(ActorKind kind) {
  switch (kind) {
    case ActorKind::Reduce:
      return "reduce";
    case ActorKind::Parse:
      return "parse";
    case ActorKind::Generate:
      return "generate";
    case ActorKind::Decompose:
      return "decompose";
    case ActorKind::Scale:
      return "scale";
    case ActorKind::Optimize:
      return "optimize";
    case ActorKind::Select:
      return "select";
    case ActorKind::Pipeline:
      return "pipeline";
    case ActorKind::Tree:
      return "tree";
  }
  return "unknown";
}

bool is_composite(ActorKind kind) {
  return kind == ActorKind::Pipeline || kind == ActorKind::Tree;
}

namespace {

void validate_shape(const ActorSpec& spec) {
  if (is_composite(spec.kind)) {
    if (spec.children.empty()) {
      throw ConfigError(actor_kind_name(spec.kind) +
                        " composition requires at least one child");
    }
  } else if (!spec.children.empty()) {
    throw ConfigError("atomic actor '" + spec.name + "' (" +
                      actor_kind_name(spec.kind) + ") cannot have children");
  }
  for (const auto& c : spec.children) validate_shape(c);
}

void collect_names(const ActorSpec& spec, std::vector<std::string>& names) {
  if (!spec.name.empty()) names.push_back(spec.name);
  for (const auto& c : spec.children) collect_names(c, names);
}

}  // namespace

void ActorSpec::validate() const {
  validate_shape(*this);
  std::vector<std::string> names;
  collect_names(*this, names);
  std::sort(names.begin(), names.end());
  auto dup = std::adjacent_find(names.begin(), names.end());
  if (dup != names.end()) {
    throw ConfigError("duplicate actor name in workflow: " + *dup);
  }
}

const PromptTemplateStore& ActorContext::template_store() const {
  return templates ? *templates : PromptTemplateStore::builtin();
}

const Embedder& ActorContext::embedder_ref() const {
  if (embedder) return *embedder;
  static const HashingEmbedder shared;
  return shared;
}

Backend& ActorContext::backend_ref() const {
  if (!backend) throw ConfigError("actor context has no LLM backend");
  return *backend;
}

// ---------------------------------------------------------------------------
// SQL extraction from completions
// ---------------------------------------------------------------------------

namespace {

bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool keyword_at(const std::string& text, std::size_t pos, std::string_view kw) {
  if (pos + kw.size() > text.size()) return false;
  if (pos > 0 && ident_char(text[pos - 1])) return false;
  for (std::size_t i = 0; i < kw.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[pos + i])) != kw[i]) {
      return false;
    }
  }
  std::size_t end = pos + kw.size();
  return end >= text.size() || !ident_char(text[end]);
}

// WITH is accepted only when it looks like a CTE head: WITH [RECURSIVE]
// <ident> [(...)] AS. Bare prose "with" would otherwise swallow sentences.
bool with_is_cte(const std::string& text, std::size_t pos) {
  std::size_t i = pos + 4;
  auto skip_ws = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
  };
  skip_ws();
  if (keyword_at(text, i, "recursive")) {
    i += 9;
    skip_ws();
  }
  if (i >= text.size() || !(ident_char(text[i]) || text[i] == '"' ||
                            text[i] == '`' || text[i] == '[')) {
    return false;
  }
  if (ident_char(text[i])) {
    while (i < text.size() && ident_char(text[i])) ++i;
  } else {
    char close = text[i] == '[' ? ']' : text[i];
    ++i;
    while (i < text.size() && text[i] != close) ++i;
    if (i < text.size()) ++i;
  }
  skip_ws();
  if (i < text.size() && text[i] == '(') {
    int depth = 0;
    while (i < text.size()) {
      if (text[i] == '(') ++depth;
      if (text[i] == ')' && --depth == 0) {
        ++i;
        break;
      }
      ++i;
    }
    skip_ws();
  }
  return keyword_at(text, i, "as");
}

std::optional<std::string> sql_from_plain_text(const std::string& text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    bool hit = keyword_at(text, i, "select") ||
               (keyword_at(text, i, "with") && with_is_cte(text, i));
    if (!hit) continue;
    auto [stmt, rest] = split_first_statement(text.substr(i));
    (void)rest;
    if (!stmt.empty()) return stmt;
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> extract_sql_from_completion(const std::string& text) {
  auto fence = text.find("```");
  if (fence != std::string::npos) {
    std::size_t start = fence + 3;
    while (start < text.size() &&
           std::isalpha(static_cast<unsigned char>(text[start]))) {
      ++start;
    }
    if (start < text.size() && text[start] == '\r') ++start;
    if (start < text.size() && text[start] == '\n') ++start;
    auto close = text.find("```", start);
    std::string fenced = close == std::string::npos
                             ? text.substr(start)
                             : text.substr(start, close - start);
    if (auto sql = sql_from_plain_text(fenced)) return sql;
  }
  return sql_from_plain_text(text);
}

// ---------------------------------------------------------------------------
// Shared actor helpers
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kSystemMessage =
    "You are a Text-to-SQL assistant for SQLite databases. Follow the "
    "instructions exactly.";

std::string element_key(const ColumnUnit& c) {
  return normalize_identifier(c.table_name) + "." +
         normalize_identifier(c.column_name);
}

std::string trace_name(const ActorSpec& spec) {
  return spec.name.empty() ? actor_kind_name(spec.kind) : spec.name;
}

struct TimedResponse {
  ChatResponse response;
  double duration_seconds = 0.0;
};

TimedResponse call_backend(ActorContext& ctx, const std::string& user_content) {
  ChatRequest req;
  req.messages.push_back({Role::System, kSystemMessage});
  req.messages.push_back({Role::User, user_content});
  auto t0 = std::chrono::steady_clock::now();
  ChatResponse resp = ctx.backend_ref().complete(req);
  double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  if (ctx.usage) ctx.usage->record(resp);
  return {std::move(resp), elapsed};
}

TraceEntry llm_entry(const std::string& name, const TimedResponse& r,
                     std::string note = "") {
  return TraceEntry{name, r.duration_seconds, r.response.prompt_tokens,
                    r.response.completion_tokens, 1, std::move(note)};
}

TraceEntry plain_entry(const std::string& name, double duration,
                       std::string note = "") {
  return TraceEntry{name, duration, 0, 0, 0, std::move(note)};
}

std::string render_candidates_block(const std::vector<std::string>& candidates) {
  std::string out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out += std::to_string(i + 1) + ". " + candidates[i] + "\n";
  }
  return out;
}

std::map<std::string, std::string> base_values(const WorkflowState& state) {
  std::map<std::string, std::string> v;
  v["question"] = render_question_block(state.question);
  v["schema"] = (state.candidate_schema || state.full_schema)
                    ? schema_to_prompt_text(state.working_schema())
                    : "";
  v["context"] = state.context ? "Context: " + *state.context : "";
  v["candidates"] = render_candidates_block(state.sql_candidates);
  v["feedback"] = "";
  return v;
}

const std::string& actor_template(const ActorContext& ctx, const ActorSpec& spec) {
  return ctx.template_store().get(spec.template_id, actor_kind_name(spec.kind));
}

// Parses schema elements out of free text and keeps only the ones present in
// `schema`. With link_tables set, linking a column also links its table (the
// parse actor's normalization); the reduce confirmation pass turns that off
// so a bare table name keeps its plain whole-table meaning.
std::set<std::string> parse_elements_from_text(const std::string& text,
                                               const DatabaseSchema& schema,
                                               bool link_tables = true) {
  std::set<std::string> out;
  std::string piece;
  auto flush = [&] {
    if (piece.empty()) return;
    std::string token = std::move(piece);
    piece.clear();
    // strip list markers and stray punctuation around the token
    std::size_t b = 0, e = token.size();
    auto ok_char = [](char c) {
      return ident_char(c) || c == '.' || c == '"' || c == '`' || c == '[' ||
             c == ']';
    };
    while (b < e && !ok_char(token[b])) ++b;
    while (e > b && !ok_char(token[e - 1])) --e;
    token = token.substr(b, e - b);
    if (token.empty()) return;

    auto dot = token.find('.');
    if (dot != std::string::npos) {
      std::string table = normalize_identifier(token.substr(0, dot));
      std::string column = normalize_identifier(token.substr(dot + 1));
      if (schema.has_column(table, column)) {
        if (link_tables) out.insert(table);
        out.insert(table + "." + column);
      }
    } else {
      std::string table = normalize_identifier(token);
      if (schema.has_table(table)) out.insert(table);
    }
  };
  for (char c : text) {
    if (c == ',' || c == ';' || c == '\n' || c == '\r' ||
        std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      piece += c;
    }
  }
  flush();
  return out;
}

std::vector<std::string> parse_numbered_list(const std::string& text) {
  std::vector<std::string> items;
  for (const auto& raw : split(text, '\n')) {
    std::string line = trim(raw);
    if (line.empty()) continue;
    std::size_t p = 0;
    if (line[0] == '-' || line[0] == '*') {
      p = 1;
    } else if (std::isdigit(static_cast<unsigned char>(line[0]))) {
      while (p < line.size() && std::isdigit(static_cast<unsigned char>(line[p])))
        ++p;
      if (p < line.size() && (line[p] == '.' || line[p] == ')')) {
        ++p;
      } else {
        continue;
      }
    } else {
      continue;
    }
    std::string content = trim(line.substr(p));
    if (!content.empty()) items.push_back(std::move(content));
  }
  return items;
}

DatabaseSchema project_schema(const DatabaseSchema& full,
                              const std::set<std::string>& column_keys) {
  DatabaseSchema out;
  out.db_id = full.db_id;
  for (const auto& c : full.columns) {
    if (column_keys.count(element_key(c))) out.columns.push_back(c);
  }
  for (const auto& fk : full.foreign_keys) {
    auto key = [](const ColumnRef& r) {
      return normalize_identifier(r.table) + "." + normalize_identifier(r.column);
    };
    if (column_keys.count(key(fk.first)) && column_keys.count(key(fk.second))) {
      out.foreign_keys.push_back(fk);
    }
  }
  return out;
}

// Primary-key columns of every table that retained at least one column are
// force-included so the reduced schema stays joinable.
void force_include_primary_keys(const DatabaseSchema& full,
                                std::set<std::string>& column_keys) {
  std::set<std::string> retained_tables;
  for (const auto& c : full.columns) {
    if (column_keys.count(element_key(c))) {
      retained_tables.insert(normalize_identifier(c.table_name));
    }
  }
  for (const auto& c : full.columns) {
    if (c.is_primary_key &&
        retained_tables.count(normalize_identifier(c.table_name))) {
      column_keys.insert(element_key(c));
    }
  }
}

// ---------------------------------------------------------------------------
// Atomic actors
// ---------------------------------------------------------------------------

WorkflowState run_reduce(const ActorSpec& spec, const WorkflowState& state,
                         ActorContext& ctx) {
  if (!state.full_schema) throw ArgumentError("reduce requires a full schema");
  if (trim(state.question).empty()) {
    throw ArgumentError("reduce requires a non-empty question");
  }
  const DatabaseSchema& full = *state.full_schema;
  std::size_t k = spec.params.value("k", 30);
  if (k == 0) throw ArgumentError("reduce k must be positive");

  WorkflowState out = state;
  auto t0 = std::chrono::steady_clock::now();

  std::set<std::string> selected;
  if (!full.columns.empty()) {
    VectorIndex index = build_column_index(full, ctx.embedder_ref());
    auto hits = topk(index, ctx.embedder_ref().embed(state.question), k);
    for (const auto& h : hits) selected.insert(h.entry_id);
  }
  force_include_primary_keys(full, selected);
  DatabaseSchema candidate = project_schema(full, selected);
  double retrieval_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  if (spec.params.value("llm_confirm", false)) {
    auto values = base_values(state);
    values["schema"] = schema_to_prompt_text(candidate);
    TimedResponse r =
        call_backend(ctx, render_template(actor_template(ctx, spec), values));
    auto confirmed =
        parse_elements_from_text(r.response.text, candidate, /*link_tables=*/false);
    std::string note;
    if (confirmed.empty()) {
      note = "confirmation pass returned no valid elements; keeping retrieval "
             "subset";
    } else {
      std::set<std::string> keys;
      for (const auto& c : candidate.columns) {
        std::string table = normalize_identifier(c.table_name);
        if (confirmed.count(element_key(c)) || confirmed.count(table)) {
          keys.insert(element_key(c));
        }
      }
      force_include_primary_keys(full, keys);
      candidate = project_schema(full, keys);
    }
    out.trace.push_back(llm_entry(trace_name(spec), r, note));
    out.trace.back().duration_seconds += retrieval_seconds;
  } else {
    out.trace.push_back(plain_entry(trace_name(spec), retrieval_seconds));
  }

  // narrowing the schema narrows earlier linking with it, keeping the
  // subset chain intact for any actor order
  if (out.linked_elements) {
    auto universe = candidate.element_set();
    std::set<std::string> kept;
    for (const auto& e : *out.linked_elements) {
      if (universe.count(e)) kept.insert(e);
    }
    out.linked_elements = std::move(kept);
  }
  out.candidate_schema = std::move(candidate);
  return out;
}

WorkflowState run_parse(const ActorSpec& spec, const WorkflowState& state,
                        ActorContext& ctx) {
  const DatabaseSchema& schema = state.working_schema();
  WorkflowState out = state;

  TimedResponse r =
      call_backend(ctx, render_template(actor_template(ctx, spec),
                                        base_values(state)));
  auto elements = parse_elements_from_text(r.response.text, schema);
  std::string note;
  if (elements.empty()) {
    note = "no valid schema elements parsed from completion";
  }
  out.linked_elements = std::move(elements);
  out.trace.push_back(llm_entry(trace_name(spec), r, note));
  return out;
}

WorkflowState run_generate(const ActorSpec& spec, const WorkflowState& state,
                           ActorContext& ctx) {
  if (trim(state.question).empty()) {
    throw ArgumentError("generate requires a non-empty question");
  }
  const DatabaseSchema& schema = state.working_schema();
  (void)schema;

  auto values = base_values(state);
  if (spec.params.value("use_exemplars", false) && ctx.exemplar_index &&
      ctx.exemplar_index->size() > 0) {
    std::size_t exemplar_k = spec.params.value("exemplar_k", 3);
    std::size_t budget = spec.params.value("prompt_budget", 4000);
    auto hits = topk(*ctx.exemplar_index,
                     ctx.embedder_ref().embed(state.question), exemplar_k);
    std::vector<Exemplar> exemplars;
    for (const auto& h : hits) {
      exemplars.push_back(
          ctx.exemplar_index->find(h.entry_id)->payload.get<Exemplar>());
    }
    values["question"] = assemble_cot_prompt(state.question, exemplars, budget);
  }

  TimedResponse r =
      call_backend(ctx, render_template(actor_template(ctx, spec), values));
  auto sql = extract_sql_from_completion(r.response.text);
  if (!sql) {
    throw SqurveError("no SQL statement found in completion");
  }
  WorkflowState out = state;
  out.final_sql = *sql;
  out.trace.push_back(llm_entry(trace_name(spec), r));
  return out;
}

WorkflowState run_decompose(const ActorSpec& spec, const WorkflowState& state,
                            ActorContext& ctx) {
  if (trim(state.question).empty()) {
    throw ArgumentError("decompose requires a non-empty question");
  }
  WorkflowState out = state;

  TimedResponse head =
      call_backend(ctx, render_template(actor_template(ctx, spec),
                                        base_values(state)));
  auto subs = parse_numbered_list(head.response.text);

  if (subs.empty()) {
    // zero sub-questions: behaves as a plain generation
    out.trace.push_back(
        llm_entry(trace_name(spec), head, "no sub-questions; generating directly"));
    auto values = base_values(state);
    TimedResponse r = call_backend(
        ctx, render_template(ctx.template_store().get("", "generate"), values));
    auto sql = extract_sql_from_completion(r.response.text);
    if (!sql) throw SqurveError("no SQL statement found in completion");
    out.final_sql = *sql;
    out.trace.push_back(llm_entry(trace_name(spec) + ".fallback", r));
    return out;
  }

  out.trace.push_back(llm_entry(trace_name(spec), head));

  const std::string& sub_template = ctx.template_store().get("", "subgenerate");
  std::vector<std::pair<std::string, std::string>> pairs;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    std::string prior;
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      prior += "Sub-question " + std::to_string(j + 1) + ": " + pairs[j].first +
               "\nSQL " + std::to_string(j + 1) + ": " + pairs[j].second + "\n";
    }
    auto values = base_values(state);
    values["question"] = state.question;
    values["feedback"] = prior + "Current sub-question: " + subs[i];
    TimedResponse r = call_backend(ctx, render_template(sub_template, values));
    auto sql = extract_sql_from_completion(r.response.text);
    if (!sql) {
      throw SqurveError("no SQL statement found for sub-question " +
                        std::to_string(i + 1));
    }
    pairs.emplace_back(subs[i], *sql);
    out.trace.push_back(
        llm_entry(trace_name(spec) + ".sub" + std::to_string(i + 1), r));
  }

  out.final_sql = pairs.back().second;
  for (auto& p : pairs) out.sub_questions.push_back(std::move(p));
  return out;
}

WorkflowState run_scale(const ActorSpec& spec, const WorkflowState& state,
                        ActorContext& ctx) {
  if (trim(state.question).empty()) {
    throw ArgumentError("scale requires a non-empty question");
  }
  int n = spec.params.value("n_candidates", 3);
  if (n < 1) throw ArgumentError("scale n_candidates must be positive");

  WorkflowState out = state;
  std::vector<std::string> collected;
  std::string last_failure;
  for (int i = 1; i <= n; ++i) {
    // the diversity tag varies the prompt per call
    std::string user =
        render_template(actor_template(ctx, spec), base_values(state)) +
        "\n\nVariant " + std::to_string(i) + " of " + std::to_string(n) +
        ": take a distinct approach from the other variants.";
    std::string entry_name = trace_name(spec) + ".cand" + std::to_string(i);
    try {
      TimedResponse r = call_backend(ctx, user);
      if (auto sql = extract_sql_from_completion(r.response.text)) {
        collected.push_back(*sql);
        out.trace.push_back(llm_entry(entry_name, r));
      } else {
        last_failure = "no SQL statement found in completion";
        out.trace.push_back(llm_entry(entry_name, r, last_failure));
      }
    } catch (const BackendError& e) {
      last_failure = e.what();
      out.trace.push_back(plain_entry(entry_name, 0.0,
                                      std::string("call failed: ") + e.what()));
    }
  }
  if (collected.empty()) {
    throw SqurveError("scale produced no SQL candidates (" + last_failure + ")");
  }

  std::unordered_set<std::string> have(out.sql_candidates.begin(),
                                       out.sql_candidates.end());
  for (auto& sql : collected) {
    if (have.insert(sql).second) out.sql_candidates.push_back(std::move(sql));
  }
  return out;
}

std::string summarize_outcome(const ExecOutcome& outcome) {
  switch (outcome.status) {
    case ExecOutcome::Status::Ok:
      return outcome.table.rows.empty()
                 ? "ok: empty result"
                 : "ok: " + std::to_string(outcome.table.rows.size()) + " rows";
    case ExecOutcome::Status::Timeout:
      return "timeout";
    case ExecOutcome::Status::Error:
      break;
  }
  return "error: " + outcome.message;
}

WorkflowState run_optimize(const ActorSpec& spec, const WorkflowState& state,
                           ActorContext& ctx) {
  if (!state.final_sql) {
    throw ArgumentError("optimize requires final_sql to be present");
  }
  if (!ctx.db_path_resolver) {
    throw ConfigError("optimize requires a database path resolver");
  }
  std::string db_path = ctx.db_path_resolver(state.db_id);
  int max_iters = spec.params.value("max_iters", 3);
  if (max_iters < 0) throw ArgumentError("optimize max_iters must be >= 0");

  WorkflowState out = state;
  std::string sql = *state.final_sql;
  for (int round = 0;; ++round) {
    auto t0 = std::chrono::steady_clock::now();
    ExecOutcome outcome = execute_sql(db_path, sql, ctx.sql_timeout_seconds);
    double exec_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::string summary = summarize_outcome(outcome);
    out.feedback_log.emplace_back(sql, summary);

    // empty results count as a soft failure worth one revision
    if (outcome.is_ok() && !outcome.table.rows.empty()) {
      out.trace.push_back(plain_entry(trace_name(spec) + ".round" +
                                          std::to_string(round + 1),
                                      exec_seconds, summary));
      break;
    }
    if (round == max_iters) {
      out.trace.push_back(plain_entry(
          trace_name(spec) + ".round" + std::to_string(round + 1), exec_seconds,
          summary + "; iteration budget exhausted"));
      break;
    }

    auto values = base_values(state);
    values["feedback"] = "SQL:\n" + sql + "\n\nFeedback: " + summary;
    TimedResponse r =
        call_backend(ctx, render_template(actor_template(ctx, spec), values));
    auto revised = extract_sql_from_completion(r.response.text);
    TraceEntry entry = llm_entry(
        trace_name(spec) + ".round" + std::to_string(round + 1), r, summary);
    entry.duration_seconds += exec_seconds;
    if (!revised) {
      entry.note += "; revision produced no SQL, keeping last statement";
      out.trace.push_back(std::move(entry));
      break;
    }
    out.trace.push_back(std::move(entry));
    sql = *revised;
  }
  out.final_sql = std::move(sql);
  return out;
}

WorkflowState run_select(const ActorSpec& spec, const WorkflowState& state,
                         ActorContext& ctx) {
  if (state.sql_candidates.empty()) {
    throw ArgumentError("select requires at least one SQL candidate");
  }
  WorkflowState out = state;
  if (state.sql_candidates.size() == 1) {
    out.final_sql = state.sql_candidates.front();
    out.trace.push_back(
        plain_entry(trace_name(spec), 0.0, "single candidate, no vote needed"));
    return out;
  }

  TimedResponse r =
      call_backend(ctx, render_template(actor_template(ctx, spec),
                                        base_values(state)));
  // the vote is the first integer in the reply, 1-based
  long vote = -1;
  const std::string& text = r.response.text;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (std::isdigit(static_cast<unsigned char>(text[i]))) {
      vote = std::strtol(text.c_str() + i, nullptr, 10);
      break;
    }
  }
  std::size_t pick = 0;
  std::string note;
  if (vote >= 1 && static_cast<std::size_t>(vote) <= state.sql_candidates.size()) {
    pick = static_cast<std::size_t>(vote) - 1;
  } else {
    note = "unparseable vote; falling back to the first candidate";
  }
  out.final_sql = state.sql_candidates[pick];
  out.trace.push_back(llm_entry(trace_name(spec), r, note));
  return out;
}

// ---------------------------------------------------------------------------
// Tree merge
// ---------------------------------------------------------------------------

DatabaseSchema schema_union(const DatabaseSchema& a, const DatabaseSchema& b,
                            const DatabaseSchema* full) {
  std::set<std::string> keys;
  for (const auto& c : a.columns) keys.insert(element_key(c));
  for (const auto& c : b.columns) keys.insert(element_key(c));
  if (full) return project_schema(*full, keys);

  DatabaseSchema out = a;
  std::set<std::string> have;
  for (const auto& c : a.columns) have.insert(element_key(c));
  for (const auto& c : b.columns) {
    if (have.insert(element_key(c)).second) out.columns.push_back(c);
  }
  for (const auto& fk : b.foreign_keys) {
    if (std::find(out.foreign_keys.begin(), out.foreign_keys.end(), fk) ==
        out.foreign_keys.end()) {
      out.foreign_keys.push_back(fk);
    }
  }
  return out;
}

WorkflowState merge_tree_outputs(const WorkflowState& root,
                                 std::vector<WorkflowState> outputs,
                                 const MergePolicy& policy) {
  WorkflowState acc = std::move(outputs.front());
  const std::size_t root_subs = root.sub_questions.size();
  const std::size_t root_feedback = root.feedback_log.size();
  const std::size_t root_trace = root.trace.size();

  for (std::size_t i = 1; i < outputs.size(); ++i) {
    WorkflowState& b = outputs[i];

    if (policy.sql_candidates == MergePolicy::UnionRule::Union) {
      std::unordered_set<std::string> have(acc.sql_candidates.begin(),
                                           acc.sql_candidates.end());
      std::vector<std::string> novel;
      for (auto& c : b.sql_candidates) {
        if (!have.count(c)) novel.push_back(std::move(c));
      }
      std::sort(novel.begin(), novel.end());
      for (auto& c : novel) acc.sql_candidates.push_back(std::move(c));
    }

    if (policy.linked_elements == MergePolicy::UnionRule::Union) {
      if (b.linked_elements) {
        if (!acc.linked_elements) {
          acc.linked_elements = std::move(b.linked_elements);
        } else {
          acc.linked_elements->insert(b.linked_elements->begin(),
                                      b.linked_elements->end());
        }
      }
    } else if (!acc.linked_elements && b.linked_elements) {
      acc.linked_elements = std::move(b.linked_elements);
    }

    if (policy.candidate_schema == MergePolicy::UnionRule::Union) {
      if (b.candidate_schema) {
        if (!acc.candidate_schema) {
          acc.candidate_schema = std::move(b.candidate_schema);
        } else {
          acc.candidate_schema =
              schema_union(*acc.candidate_schema, *b.candidate_schema,
                           root.full_schema.get());
        }
      }
    } else if (!acc.candidate_schema && b.candidate_schema) {
      acc.candidate_schema = std::move(b.candidate_schema);
    }

    if (policy.final_sql == MergePolicy::PickRule::LeftmostPresent) {
      if (!acc.final_sql && b.final_sql) acc.final_sql = std::move(b.final_sql);
    } else if (b.final_sql) {
      acc.final_sql = std::move(b.final_sql);
    }

    if (policy.context == MergePolicy::PickRule::LeftmostPresent) {
      if (!acc.context && b.context) acc.context = std::move(b.context);
    } else if (b.context) {
      acc.context = std::move(b.context);
    }

    // children only append to these lists; concatenate each child's suffix
    // beyond the shared root prefix
    for (std::size_t k = root_subs; k < b.sub_questions.size(); ++k) {
      acc.sub_questions.push_back(std::move(b.sub_questions[k]));
    }
    for (std::size_t k = root_feedback; k < b.feedback_log.size(); ++k) {
      acc.feedback_log.push_back(std::move(b.feedback_log[k]));
    }
    for (std::size_t k = root_trace; k < b.trace.size(); ++k) {
      acc.trace.push_back(std::move(b.trace[k]));
    }
  }

  // one child may have narrowed the schema while another linked against the
  // full one; the merged state must satisfy the subset chain again
  if (acc.linked_elements && acc.candidate_schema) {
    auto universe = acc.candidate_schema->element_set();
    std::set<std::string> kept;
    for (const auto& e : *acc.linked_elements) {
      if (universe.count(e)) kept.insert(e);
    }
    acc.linked_elements = std::move(kept);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

WorkflowState run_node(const ActorSpec& spec, const WorkflowState& state,
                       ActorContext& ctx);

WorkflowState run_node_impl(const ActorSpec& spec, const WorkflowState& state,
                            ActorContext& ctx) {
  switch (spec.kind) {
    case ActorKind::Reduce:
      return run_reduce(spec, state, ctx);
    case ActorKind::Parse:
      return run_parse(spec, state, ctx);
    case ActorKind::Generate:
      return run_generate(spec, state, ctx);
    case ActorKind::Decompose:
      return run_decompose(spec, state, ctx);
    case ActorKind::Scale:
      return run_scale(spec, state, ctx);
    case ActorKind::Optimize:
      return run_optimize(spec, state, ctx);
    case ActorKind::Select:
      return run_select(spec, state, ctx);
    case ActorKind::Pipeline: {
      WorkflowState cur = state;
      for (const auto& child : spec.children) {
        cur = run_node(child, cur, ctx);
      }
      return cur;
    }
    case ActorKind::Tree: {
      std::vector<WorkflowState> outputs;
      outputs.reserve(spec.children.size());
      if (spec.params.value("parallel", false)) {
        std::vector<std::future<WorkflowState>> futures;
        futures.reserve(spec.children.size());
        for (const auto& child : spec.children) {
          futures.push_back(std::async(std::launch::async, [&child, state,
                                                            &ctx] {
            return run_node(child, state, ctx);
          }));
        }
        // joined in declaration order, so concurrency cannot change the merge
        for (auto& f : futures) outputs.push_back(f.get());
      } else {
        for (const auto& child : spec.children) {
          outputs.push_back(run_node(child, state, ctx));
        }
      }
      return merge_tree_outputs(state, std::move(outputs), spec.merge);
    }
  }
  throw ConfigError("unknown actor kind");
}

WorkflowState run_node(const ActorSpec& spec, const WorkflowState& state,
                       ActorContext& ctx) {
  try {
    return run_node_impl(spec, state, ctx);
  } catch (const ActorError&) {
    throw;  // keep the innermost failing actor's name
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ActorError(trace_name(spec), state, e.what());
  }
}

void uniquify_names(ActorSpec& spec, std::map<std::string, int>& counts) {
  std::string base = spec.name.empty() ? actor_kind_name(spec.kind) : spec.name;
  int n = ++counts[base];
  spec.name = n == 1 ? base : base + "#" + std::to_string(n);
  for (auto& child : spec.children) uniquify_names(child, counts);
}

}  // namespace

WorkflowState run_actor(const ActorSpec& spec, const WorkflowState& state,
                        ActorContext& ctx) {
  spec.validate();
  return run_node(spec, state, ctx);
}

ActorSpec compose_pipeline(std::vector<ActorSpec> children) {
  if (children.empty()) {
    throw ConfigError("pipeline composition requires at least one child");
  }
  ActorSpec spec;
  spec.kind = ActorKind::Pipeline;
  spec.children = std::move(children);
  std::map<std::string, int> counts;
  uniquify_names(spec, counts);
  spec.validate();
  return spec;
}

ActorSpec compose_tree(std::vector<ActorSpec> children, MergePolicy policy) {
  if (children.empty()) {
    throw ConfigError("tree composition requires at least one child");
  }
  ActorSpec spec;
  spec.kind = ActorKind::Tree;
  spec.merge = policy;
  spec.children = std::move(children);
  std::map<std::string, int> counts;
  uniquify_names(spec, counts);
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Registry and workflow encoding
// ---------------------------------------------------------------------------

void ActorRegistry::add(const std::string& name, RegisteredActor actor) {
  actors_[name] = std::move(actor);
}

const RegisteredActor* ActorRegistry::find(const std::string& name) const {
  auto it = actors_.find(name);
  return it == actors_.end() ? nullptr : &it->second;
}

std::vector<std::string> ActorRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(actors_.size());
  for (const auto& [name, _] : actors_) out.push_back(name);
  return out;
}

const ActorRegistry& ActorRegistry::builtin() {
  static const ActorRegistry registry = [] {
    ActorRegistry r;
    auto add = [&r](const char* name, ActorKind kind, json params = json::object()) {
      r.add(name, RegisteredActor{kind, name, std::move(params)});
    };

    add("reduce", ActorKind::Reduce, {{"k", 30}});
    add("parse", ActorKind::Parse);
    add("generate", ActorKind::Generate);
    add("decompose", ActorKind::Decompose);
    add("scale", ActorKind::Scale, {{"n_candidates", 3}});
    add("optimize", ActorKind::Optimize, {{"max_iters", 3}});
    add("select", ActorKind::Select);

    add("LinkAlignReducer", ActorKind::Reduce, {{"k", 30}});

    add("LinkAlignParser", ActorKind::Parse);
    add("RSLSQLParser", ActorKind::Parse);
    add("RSLSQLBiDirParser", ActorKind::Parse);
    add("DINSQLParser", ActorKind::Parse);

    add("DINSQLGenerator", ActorKind::Generate, {{"use_exemplars", true}});
    add("CHESSGenerator", ActorKind::Generate, {{"use_exemplars", true}});
    add("MACSQLGenerator", ActorKind::Generate);
    add("RSLSQLGenerator", ActorKind::Generate);
    add("LinkAlignGenerator", ActorKind::Generate);

    add("MACSQLDecompose", ActorKind::Decompose);
    add("DINSQLDecompose", ActorKind::Decompose);

    add("RSLSQLScaler", ActorKind::Scale, {{"n_candidates", 3}});
    add("ChessScaler", ActorKind::Scale, {{"n_candidates", 3}});
    add("CHESSScaler", ActorKind::Scale, {{"n_candidates", 3}});
    add("MACSQLScaler", ActorKind::Scale, {{"n_candidates", 3}});
    add("DINSQLScaler", ActorKind::Scale, {{"n_candidates", 3}});

    add("CHESSSelector", ActorKind::Select);

    add("MACSQLOptimizer", ActorKind::Optimize, {{"max_iters", 3}});
    add("LinkAlignOptimizer", ActorKind::Optimize, {{"max_iters", 3}});
    add("DINSQLOptimizer", ActorKind::Optimize, {{"max_iters", 3}});
    add("CHESSOptimizer", ActorKind::Optimize, {{"max_iters", 3}});
    return r;
  }();
  return registry;
}

namespace {

MergePolicy parse_merge_policy(const json& m) {
  MergePolicy p;
  auto union_rule = [](const json& v) {
    std::string s = v.get<std::string>();
    if (s == "union") return MergePolicy::UnionRule::Union;
    if (s == "prefer_left") return MergePolicy::UnionRule::PreferLeft;
    throw ConfigError("unknown merge rule: " + s);
  };
  auto pick_rule = [](const json& v) {
    std::string s = v.get<std::string>();
    if (s == "leftmost") return MergePolicy::PickRule::LeftmostPresent;
    if (s == "rightmost") return MergePolicy::PickRule::RightmostPresent;
    throw ConfigError("unknown merge rule: " + s);
  };
  if (m.contains("sql_candidates")) p.sql_candidates = union_rule(m["sql_candidates"]);
  if (m.contains("linked_elements")) p.linked_elements = union_rule(m["linked_elements"]);
  if (m.contains("candidate_schema")) p.candidate_schema = union_rule(m["candidate_schema"]);
  if (m.contains("final_sql")) p.final_sql = pick_rule(m["final_sql"]);
  if (m.contains("context")) p.context = pick_rule(m["context"]);
  return p;
}

ActorSpec parse_node(const json& encoding, const ActorRegistry& registry) {
  if (encoding.is_string()) {
    std::string name = encoding.get<std::string>();
    const RegisteredActor* reg = registry.find(name);
    if (!reg) {
      std::string known;
      for (const auto& n : registry.names()) {
        if (!known.empty()) known += ", ";
        known += n;
      }
      throw ConfigError("unknown actor '" + name + "'; registered actors: " +
                        known);
    }
    ActorSpec spec;
    spec.kind = reg->kind;
    spec.name = name;
    spec.template_id = reg->template_id;
    spec.params = reg->default_params;
    return spec;
  }

  if (encoding.is_object()) {
    if (encoding.contains("pipeline") || encoding.contains("tree")) {
      const bool is_tree = encoding.contains("tree");
      const json& kids = is_tree ? encoding["tree"] : encoding["pipeline"];
      if (!kids.is_array() || kids.empty()) {
        throw ConfigError(std::string(is_tree ? "tree" : "pipeline") +
                          " encoding requires a non-empty child array");
      }
      ActorSpec spec;
      spec.kind = is_tree ? ActorKind::Tree : ActorKind::Pipeline;
      for (const auto& k : kids) spec.children.push_back(parse_node(k, registry));
      if (encoding.contains("params")) spec.params = encoding["params"];
      if (encoding.contains("merge")) {
        spec.merge = parse_merge_policy(encoding["merge"]);
      }
      return spec;
    }
    if (encoding.contains("actor")) {
      ActorSpec spec = parse_node(encoding["actor"], registry);
      if (encoding.contains("params") && encoding["params"].is_object()) {
        for (const auto& [key, value] : encoding["params"].items()) {
          spec.params[key] = value;
        }
      }
      if (spec.params.contains("prompt_template_id")) {
        spec.template_id = spec.params["prompt_template_id"].get<std::string>();
        spec.params.erase("prompt_template_id");
      }
      return spec;
    }
  }
  throw ConfigError(
      "workflow encoding must be an actor name, {\"pipeline\": [...]}, "
      "{\"tree\": [...]}, or {\"actor\": name, \"params\": {...}}");
}

}  // namespace

ActorSpec parse_workflow(const json& encoding, const ActorRegistry& registry) {
  ActorSpec spec = parse_node(encoding, registry);
  std::map<std::string, int> counts;
  uniquify_names(spec, counts);
  spec.validate();
  return spec;
}

}  // namespace squrve
