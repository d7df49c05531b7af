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
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "squrve/data_model.hpp"
#include "squrve/llm_backend.hpp"

namespace squrve {

using EmbeddingVector = std::vector<double>;

/// Deterministic text embedder: identical input yields identical vectors.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  /// Throws ArgumentError when text is empty after whitespace trim.
  virtual EmbeddingVector embed(const std::string& text) const = 0;
};

/// Reference embedder: token unigrams and adjacent bigrams are hashed into D
/// signed buckets (FNV-1a with a seed-mixed basis; the hash's top bit picks
/// the sign) and the result is L2-normalized. Hermetic and deterministic, so
/// tests and CI need no remote embedding service.
class HashingEmbedder : public Embedder {
 public:
  static constexpr std::uint64_t kDefaultSeed = 0x53515256ull;  // "SQRV"

  explicit HashingEmbedder(std::size_t dimension = 64,
                           std::uint64_t seed = kDefaultSeed);

  std::string name() const override { return "hashing"; }
  std::size_t dimension() const override { return dimension_; }
  EmbeddingVector embed(const std::string& text) const override;

  std::uint64_t seed() const { return seed_; }

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

enum class PayloadKind { None, Column, Exemplar };

std::string payload_kind_name(PayloadKind k);
PayloadKind payload_kind_from_name(const std::string& name);

/// Immutable-after-build vector index over opaque payloads. Building is
/// single-threaded; concurrent readers are safe once built.
class VectorIndex {
 public:
  struct Entry {
    std::string id;
    EmbeddingVector vector;
    PayloadKind payload_kind = PayloadKind::None;
    nlohmann::json payload;
  };

  explicit VectorIndex(std::size_t dimension);

  /// Throws ArgumentError on dimension mismatch, non-finite entries, or a
  /// duplicate entry id.
  void add(std::string id, EmbeddingVector vector,
           PayloadKind kind = PayloadKind::None,
           nlohmann::json payload = nullptr);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  const Entry* find(const std::string& id) const;

  /// Persists as a single JSON file {dimension, entries: [...]}.
  void save(const std::string& path) const;
  static VectorIndex load(const std::string& path);

 private:
  std::size_t dimension_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Scored hit, highest cosine similarity first.
struct ScoredId {
  std::string entry_id;
  double score = 0.0;

  bool operator==(const ScoredId&) const = default;
};

/// Exhaustive cosine-similarity ranking: descending score, ties broken by
/// ascending entry_id, min(k, |entries|) results. Throws ArgumentError on a
/// dimension mismatch or non-positive k. Never mutates the index.
std::vector<ScoredId> topk(const VectorIndex& index, const EmbeddingVector& query,
                           std::size_t k);

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Deterministic text rendering of a column unit for embedding.
std::string column_entry_text(const ColumnUnit& column);

/// Builds a column-level index over one schema; entry ids are the normalized
/// "table.column" strings.
VectorIndex build_column_index(const DatabaseSchema& schema,
                               const Embedder& embedder);

/// Builds an exemplar index; entry ids are zero-padded corpus positions.
VectorIndex build_exemplar_index(const std::vector<Exemplar>& exemplars,
                                 const Embedder& embedder);

/// Fixed pieces of the chain-of-thought prompt. Exposed so tests can compute
/// rendered lengths independently.
std::string cot_header();
std::string render_exemplar_block(const Exemplar& exemplar);
std::string render_question_block(const std::string& question);

/// Assembles header + exemplar blocks (in the given order) + question block,
/// keeping whole exemplars only: inclusion stops at the first exemplar that
/// would push the total past `budget_chars`. Monotone in the budget. Throws
/// ArgumentError when even header + question exceed the budget.
std::string assemble_cot_prompt(const std::string& question,
                                const std::vector<Exemplar>& exemplars,
                                std::size_t budget_chars);

/// Asks the backend to pull concept definitions and metric calculation
/// formulas relevant to the question out of the documents. Throws
/// ArgumentError when `documents` is empty; backend failures propagate.
std::string extract_context(const std::vector<std::string>& documents,
                            const std::string& question, Backend& backend);

}  // namespace squrve
