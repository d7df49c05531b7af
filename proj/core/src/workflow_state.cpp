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

#include "squrve/workflow_state.hpp"

#include <unordered_set>

#include "squrve/errors.hpp"
#include "squrve/util.hpp"

namespace squrve {

const DatabaseSchema& WorkflowState::working_schema() const {
  if (candidate_schema) return *candidate_schema;
  if (full_schema) return *full_schema;
  throw ArgumentError("workflow state carries no schema");
}

void WorkflowState::check_invariants() const {
  if (candidate_schema) {
    if (!full_schema) {
      throw SqurveError("candidate schema present without a full schema");
    }
    for (const auto& c : candidate_schema->columns) {
      if (!full_schema->has_column(c.table_name, c.column_name)) {
        throw SqurveError("candidate schema column " + c.table_name + "." +
                          c.column_name + " is not in the full schema");
      }
    }
  }
  if (linked_elements && (candidate_schema || full_schema)) {
    auto universe = working_schema().element_set();
    for (const auto& e : *linked_elements) {
      if (!universe.count(e)) {
        throw SqurveError("linked element '" + e +
                          "' is not in the working schema");
      }
    }
  }
  std::unordered_set<std::string> seen;
  for (const auto& c : sql_candidates) {
    if (!seen.insert(c).second) {
      throw SqurveError("duplicate SQL candidate: " + c);
    }
  }
}

bool WorkflowState::operator==(const WorkflowState& other) const {
  auto schema_equal = [](const std::shared_ptr<const DatabaseSchema>& a,
                         const std::shared_ptr<const DatabaseSchema>& b) {
    if (!a || !b) return static_cast<bool>(a) == static_cast<bool>(b);
    return *a == *b;
  };
  return question == other.question && db_id == other.db_id &&
         schema_equal(full_schema, other.full_schema) &&
         context == other.context &&
         candidate_schema == other.candidate_schema &&
         linked_elements == other.linked_elements &&
         sub_questions == other.sub_questions &&
         sql_candidates == other.sql_candidates &&
         feedback_log == other.feedback_log && final_sql == other.final_sql &&
         trace == other.trace;
}

WorkflowState normalized_timing(const WorkflowState& state) {
  WorkflowState out = state;
  for (auto& t : out.trace) t.duration_seconds = 0.0;
  return out;
}

std::pair<std::int64_t, std::int64_t> trace_token_totals(
    const WorkflowState& state) {
  std::int64_t prompt = 0, completion = 0;
  for (const auto& t : state.trace) {
    prompt += t.prompt_tokens;
    completion += t.completion_tokens;
  }
  return {prompt, completion};
}

}  // namespace squrve
