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

#include "squrve/prompts.hpp"

#include <filesystem>

#include "squrve/errors.hpp"
#include "squrve/util.hpp"

namespace fs = std::filesystem;

namespace squrve {

namespace {

constexpr const char* kReduceTemplate =
    "The schema below was pre-selected for the question. List the schema "
    "elements that are actually needed, one per line, as table.column.\n\n"
    "Schema:\n{schema}\n\nQuestion: {question}\n\nNeeded elements:";

constexpr const char* kParseTemplate =
    "Identify the tables and columns of the schema that the question refers "
    "to. Answer with a comma-separated list of table.column entries (bare "
    "table names are allowed).\n\nSchema:\n{schema}\n\n{context}\n"
    "Question: {question}\n\nElements:";

constexpr const char* kGenerateTemplate =
    "Write a single SQLite query that answers the question.\n\n"
    "Schema:\n{schema}\n\n{context}\n{question}\n\n"
    "Respond with the SQL inside a ```sql fenced block.";

constexpr const char* kDecomposeTemplate =
    "Break the question into a short numbered list of logically progressive "
    "sub-questions. The final sub-question must restate the full question.\n\n"
    "Schema:\n{schema}\n\nQuestion: {question}\n\nSub-questions:";

constexpr const char* kSubGenerateTemplate =
    "Write a single SQLite query for the current sub-question.\n\n"
    "Schema:\n{schema}\n\n{context}\nOriginal question: {question}\n"
    "{feedback}\n"
    "Respond with the SQL inside a ```sql fenced block.";

constexpr const char* kScaleTemplate =
    "Write a single SQLite query that answers the question.\n\n"
    "Schema:\n{schema}\n\n{context}\nQuestion: {question}\n\n"
    "Respond with the SQL inside a ```sql fenced block.";

constexpr const char* kOptimizeTemplate =
    "The SQL below did not produce a usable result. Revise it.\n\n"
    "Schema:\n{schema}\n\nQuestion: {question}\n\n{feedback}\n\n"
    "Respond with the corrected SQL inside a ```sql fenced block.";

constexpr const char* kSelectTemplate =
    "Choose the candidate SQL that best answers the question. Reply with the "
    "number of the best candidate.\n\nQuestion: {question}\n\n"
    "Candidates:\n{candidates}\n\nBest candidate number:";

struct NamedTemplate {
  const char* id;
  const char* kind;
  const char* style;
};

// Registry-named actors share their kind's template body plus one style
// line. These are original prompts for this framework, not reproductions of
// the upstream methods' prompt suites.
constexpr NamedTemplate kNamedTemplates[] = {
    {"LinkAlignReducer", "reduce",
     "Prefer dropping whole unrelated tables before individual columns."},
    {"LinkAlignParser", "parse",
     "Resolve ambiguous mentions against every candidate table before "
     "answering."},
    {"RSLSQLParser", "parse",
     "Work in two passes: shortlist likely elements, then keep only the ones "
     "the query needs."},
    {"RSLSQLBiDirParser", "parse",
     "Link in both directions: from question phrases to columns and from "
     "columns back to question phrases."},
    {"DINSQLParser", "parse",
     "Classify the question first (simple, join, nested) and link elements "
     "for that class."},
    {"DINSQLGenerator", "generate",
     "Decompose the problem, draft intermediate steps, then produce the final "
     "query."},
    {"CHESSGenerator", "generate",
     "Ground every predicate in concrete column values before writing the "
     "query."},
    {"MACSQLGenerator", "generate",
     "Act as a team of planner and writer: plan the joins, then write the "
     "query."},
    {"RSLSQLGenerator", "generate",
     "Draft a skeleton of the query first, then fill in columns and "
     "predicates."},
    {"LinkAlignGenerator", "generate",
     "Double-check that every referenced column exists in the schema."},
    {"MACSQLDecompose", "decompose",
     "Each sub-question should add exactly one clause or join to the "
     "previous one."},
    {"DINSQLDecompose", "decompose",
     "Order sub-questions from the innermost condition outward."},
    {"RSLSQLScaler", "scale",
     "Vary the join order and predicate formulation across candidates."},
    {"ChessScaler", "scale",
     "Vary the aggregation strategy across candidates."},
    {"CHESSScaler", "scale",
     "Vary the aggregation strategy across candidates."},
    {"MACSQLScaler", "scale",
     "Vary subquery versus join formulations across candidates."},
    {"DINSQLScaler", "scale",
     "Vary the decomposition granularity across candidates."},
    {"CHESSSelector", "select",
     "Prefer the candidate whose predicates are grounded in real column "
     "values."},
    {"MACSQLOptimizer", "optimize",
     "Fix the first error exactly; do not restructure working parts."},
    {"LinkAlignOptimizer", "optimize",
     "Re-check schema links before revising the query logic."},
    {"DINSQLOptimizer", "optimize",
     "Apply self-correction: explain the defect, then fix it."},
    {"CHESSOptimizer", "optimize",
     "Verify the revised query against the sample values."},
};

const char* generic_template_for(const std::string& kind) {
  if (kind == "reduce") return kReduceTemplate;
  if (kind == "parse") return kParseTemplate;
  if (kind == "generate") return kGenerateTemplate;
  if (kind == "decompose") return kDecomposeTemplate;
  if (kind == "subgenerate") return kSubGenerateTemplate;
  if (kind == "scale") return kScaleTemplate;
  if (kind == "optimize") return kOptimizeTemplate;
  if (kind == "select") return kSelectTemplate;
  return nullptr;
}

}  // namespace

const PromptTemplateStore& PromptTemplateStore::builtin() {
  static const PromptTemplateStore store = [] {
    PromptTemplateStore s;
    for (const char* kind : {"reduce", "parse", "generate", "decompose",
                             "subgenerate", "scale", "optimize", "select"}) {
      s.set(kind, generic_template_for(kind));
    }
    for (const auto& t : kNamedTemplates) {
      s.set(t.id, std::string(t.style) + "\n\n" + generic_template_for(t.kind));
    }
    return s;
  }();
  return store;
}

PromptTemplateStore PromptTemplateStore::with_overrides(const std::string& dir) {
  PromptTemplateStore store = builtin();
  if (!fs::is_directory(dir)) {
    throw IoError("template directory not found: " + dir);
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    store.set(entry.path().stem().string(), read_file(entry.path().string()));
  }
  return store;
}

void PromptTemplateStore::set(const std::string& template_id, std::string text) {
  templates_[template_id] = std::move(text);
}

bool PromptTemplateStore::has(const std::string& template_id) const {
  return templates_.count(template_id) > 0;
}

const std::string& PromptTemplateStore::get(const std::string& template_id,
                                            const std::string& kind_name) const {
  if (!template_id.empty()) {
    auto it = templates_.find(template_id);
    if (it != templates_.end()) return it->second;
  }
  auto it = templates_.find(kind_name);
  if (it != templates_.end()) return it->second;
  throw ConfigError("no prompt template for '" + template_id + "' (kind " +
                    kind_name + ")");
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i);
      if (close != std::string::npos) {
        std::string key = tmpl.substr(i + 1, close - i - 1);
        auto it = values.find(key);
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

}  // namespace squrve
