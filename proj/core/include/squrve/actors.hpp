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

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "squrve/errors.hpp"
#include "squrve/llm_backend.hpp"
#include "squrve/prompts.hpp"
#include "squrve/retrieval.hpp"
#include "squrve/workflow_state.hpp"

namespace squrve {

/// The seven atomic capabilities plus the two composition strategies.
enum class ActorKind {
  Reduce,
  Parse,
  Generate,
  Decompose,
  Scale,
  Optimize,
  Select,
  Pipeline,
  Tree
};

std::string actor_kind_name(ActorKind kind);
bool is_composite(ActorKind kind);

/// Per-field merge rules for Tree composition. sub_questions, feedback_log
/// and trace always concatenate child suffixes in child-declaration order.
struct MergePolicy {
  enum class UnionRule { Union, PreferLeft };
  enum class PickRule { LeftmostPresent, RightmostPresent };

  UnionRule sql_candidates = UnionRule::Union;
  UnionRule linked_elements = UnionRule::Union;
  UnionRule candidate_schema = UnionRule::Union;
  PickRule final_sql = PickRule::LeftmostPresent;
  PickRule context = PickRule::LeftmostPresent;

  bool operator==(const MergePolicy&) const = default;
};

/// Recursive description of an atomic or composite actor: the in-memory form
/// of the nested-list workflow encoding.
struct ActorSpec {
  ActorKind kind = ActorKind::Generate;
  std::string name;
  std::string template_id;
  nlohmann::json params = nlohmann::json::object();
  std::vector<ActorSpec> children;
  MergePolicy merge;

  bool operator==(const ActorSpec&) const = default;

  /// Shape checks: atomic kinds have zero children, composite kinds at
  /// least one, names unique across the whole workflow. Throws ConfigError.
  void validate() const;
};

/// Everything an actor may need beyond the state: the LLM backend, prompt
/// templates, the embedder, the optional exemplar index, database access for
/// Optimize, and the usage accumulation point.
struct ActorContext {
  Backend* backend = nullptr;
  const PromptTemplateStore* templates = nullptr;  // builtin() when null
  const Embedder* embedder = nullptr;              // shared default when null
  const VectorIndex* exemplar_index = nullptr;
  std::function<std::string(const std::string& db_id)> db_path_resolver;
  UsageRecorder* usage = nullptr;
  double sql_timeout_seconds = 30.0;

  const PromptTemplateStore& template_store() const;
  const Embedder& embedder_ref() const;
  Backend& backend_ref() const;
};

/// Actor failure: carries the failing actor's name and a snapshot of the
/// state it was invoked with.
class ActorError : public SqurveError {
 public:
  ActorError(const std::string& actor_name, WorkflowState snapshot,
             const std::string& msg)
      : SqurveError("actor '" + actor_name + "' failed: " + msg),
        actor_name_(actor_name),
        snapshot_(std::make_shared<WorkflowState>(std::move(snapshot))) {}

  const std::string& actor_name() const { return actor_name_; }
  const WorkflowState& state_snapshot() const { return *snapshot_; }

 private:
  std::string actor_name_;
  std::shared_ptr<WorkflowState> snapshot_;
};

/// Executes one actor (atomic or composite) over the state and returns the
/// new state; the input state is never mutated. Pipeline threads the state
/// through its children left to right; Tree dispatches a value copy of the
/// root state to every child and folds the outputs under the merge policy.
/// Failures surface as ActorError naming the innermost failing actor.
WorkflowState run_actor(const ActorSpec& spec, const WorkflowState& state,
                        ActorContext& ctx);

/// Sequential composition; throws ConfigError on zero children.
ActorSpec compose_pipeline(std::vector<ActorSpec> children);

/// Fan-out composition with merged outputs; throws ConfigError on zero
/// children.
ActorSpec compose_tree(std::vector<ActorSpec> children, MergePolicy policy = {});

/// A registry entry: a named actor is a prompt-template-parameterized
/// instance of one atomic kind.
struct RegisteredActor {
  ActorKind kind = ActorKind::Generate;
  std::string template_id;
  nlohmann::json default_params = nlohmann::json::object();
};

class ActorRegistry {
 public:
  /// The built-in names: the generic lowercase kinds plus the named method
  /// families (DINSQLGenerator, LinkAlignParser, RSLSQLScaler, ...).
  static const ActorRegistry& builtin();

  void add(const std::string& name, RegisteredActor actor);
  const RegisteredActor* find(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, RegisteredActor> actors_;
};

/// Parses the nested-list workflow encoding: a JSON string names a
/// registered actor; {"pipeline": [...]} and {"tree": [...]} nest;
/// {"actor": name, "params": {...}} parameterizes one actor. Unknown names
/// raise ConfigError listing the registry. Node names are uniquified.
ActorSpec parse_workflow(const nlohmann::json& encoding,
                         const ActorRegistry& registry = ActorRegistry::builtin());

/// Pulls the first SQL statement out of an LLM completion: the first fenced
/// code block when present, otherwise the first SELECT/WITH keyword; in
/// either case truncated at the first top-level ';'.
std::optional<std::string> extract_sql_from_completion(const std::string& text);

}  // namespace squrve
