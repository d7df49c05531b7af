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
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "squrve/data_model.hpp"

namespace squrve {

/// One attributed step of a workflow run. Wall-clock durations live only
/// here and in dedicated report fields; semantic state comparison zeroes
/// them first (see normalized_timing).
struct TraceEntry {
  std::string actor;
  double duration_seconds = 0.0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  int llm_calls = 0;
  std::string note;

  bool operator==(const TraceEntry&) const = default;
};

/// The shared blackboard every actor reads and writes. A state is mutable
/// only inside one actor invocation; composition always passes value copies,
/// so states are immutable between steps and safe to fan out.
struct WorkflowState {
  std::string question;
  std::string db_id;
  std::shared_ptr<const DatabaseSchema> full_schema;
  std::optional<std::string> context;
  std::optional<DatabaseSchema> candidate_schema;
  std::optional<std::set<std::string>> linked_elements;
  std::vector<std::pair<std::string, std::string>> sub_questions;
  std::vector<std::string> sql_candidates;
  std::vector<std::pair<std::string, std::string>> feedback_log;
  std::optional<std::string> final_sql;
  std::vector<TraceEntry> trace;

  /// The schema an actor should work against: the candidate subset when a
  /// reduce ran, the full schema otherwise. Throws ArgumentError when
  /// neither is present.
  const DatabaseSchema& working_schema() const;

  /// Structural checks: candidate_schema ⊆ full_schema, linked_elements ⊆
  /// working schema elements, sql_candidates free of duplicates. Throws
  /// SqurveError on violation.
  void check_invariants() const;

  bool operator==(const WorkflowState& other) const;
};

/// Copy with trace durations zeroed; the equality domain for composition
/// laws and determinism checks, where wall-clock noise is not semantic.
WorkflowState normalized_timing(const WorkflowState& state);

/// Sum of (prompt, completion) tokens over the trace.
std::pair<std::int64_t, std::int64_t> trace_token_totals(const WorkflowState& state);

}  // namespace squrve
