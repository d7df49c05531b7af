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

#include "squrve/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "squrve/errors.hpp"
#include "squrve/util.hpp"

using nlohmann::json;

namespace squrve {

HashingEmbedder::HashingEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension_ == 0) throw ArgumentError("embedder dimension must be positive");
}

namespace {

std::vector<std::string> embed_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace

EmbeddingVector HashingEmbedder::embed(const std::string& text) const {
  std::string trimmed = trim(text);
  if (trimmed.empty()) {
    throw ArgumentError("cannot embed empty text");
  }

  const std::uint64_t basis = 0xcbf29ce484222325ull ^ (seed_ * 0x9e3779b97f4a7c15ull);
  EmbeddingVector vec(dimension_, 0.0);

  auto tokens = embed_tokens(trimmed);
  std::vector<std::string> features;
  features.reserve(tokens.size() * 2);
  for (const auto& t : tokens) features.push_back(t);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    features.push_back(tokens[i] + " " + tokens[i + 1]);
  }
  if (features.empty()) features.push_back(trimmed);

  for (const auto& f : features) {
    std::uint64_t h = fnv1a64(f, basis);
    std::size_t bucket = static_cast<std::size_t>(h % dimension_);
    double sign = (h >> 63) ? -1.0 : 1.0;
    vec[bucket] += sign;
  }

  double norm_sq = 0.0;
  for (double v : vec) norm_sq += v * v;
  if (norm_sq == 0.0) {
    vec[static_cast<std::size_t>(fnv1a64(trimmed, basis) % dimension_)] = 1.0;
    norm_sq = 1.0;
  }
  double norm = std::sqrt(norm_sq);
  for (double& v : vec) v /= norm;
  return vec;
}

std::string payload_kind_name(PayloadKind k) {
  switch (k) {
    case PayloadKind::Column:
      return "column_unit";
    case PayloadKind::Exemplar:
      return "exemplar";
    case PayloadKind::None:
      break;
  }
  return "none";
}

PayloadKind payload_kind_from_name(const std::string& name) {
  if (name == "column_unit") return PayloadKind::Column;
  if (name == "exemplar") return PayloadKind::Exemplar;
  return PayloadKind::None;
}

VectorIndex::VectorIndex(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw ArgumentError("index dimension must be positive");
}

void VectorIndex::add(std::string id, EmbeddingVector vector, PayloadKind kind,
                      json payload) {
  if (vector.size() != dimension_) {
    throw ArgumentError("vector length " + std::to_string(vector.size()) +
                        " does not match index dimension " +
                        std::to_string(dimension_));
  }
  for (double v : vector) {
    if (!std::isfinite(v)) throw ArgumentError("vector entry is not finite");
  }
  if (by_id_.count(id)) throw ArgumentError("duplicate entry id: " + id);
  by_id_.emplace(id, entries_.size());
  entries_.push_back(Entry{std::move(id), std::move(vector), kind, std::move(payload)});
}

const VectorIndex::Entry* VectorIndex::find(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &entries_[it->second];
}

void VectorIndex::save(const std::string& path) const {
  json entries = json::array();
  for (const auto& e : entries_) {
    entries.push_back(json{{"id", e.id},
                           {"vector", e.vector},
                           {"payload_kind", payload_kind_name(e.payload_kind)},
                           {"payload", e.payload}});
  }
  json j{{"dimension", dimension_}, {"entries", entries}};
  write_file(path, j.dump(2) + "\n");
}

VectorIndex VectorIndex::load(const std::string& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw IoError("invalid index file: " + path);
  }
  VectorIndex index(j.at("dimension").get<std::size_t>());
  for (const auto& e : j.at("entries")) {
    index.add(e.at("id").get<std::string>(),
              e.at("vector").get<EmbeddingVector>(),
              payload_kind_from_name(e.value("payload_kind", "none")),
              e.value("payload", json(nullptr)));
  }
  return index;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<ScoredId> topk(const VectorIndex& index, const EmbeddingVector& query,
                           std::size_t k) {
  if (k == 0) throw ArgumentError("k must be positive");
  if (query.size() != index.dimension()) {
    throw ArgumentError("query length " + std::to_string(query.size()) +
                        " does not match index dimension " +
                        std::to_string(index.dimension()));
  }
  std::vector<ScoredId> scored;
  scored.reserve(index.size());
  for (const auto& e : index.entries()) {
    scored.push_back(ScoredId{e.id, cosine_similarity(query, e.vector)});
  }
  std::sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entry_id < b.entry_id;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

std::string column_entry_text(const ColumnUnit& column) {
  std::string text = column.table_name + " " + column.column_name;
  if (!column.data_type.empty()) text += " " + column.data_type;
  if (!column.description.empty()) text += " " + column.description;
  for (const auto& v : column.sample_values) text += " " + v;
  return text;
}

VectorIndex build_column_index(const DatabaseSchema& schema,
                               const Embedder& embedder) {
  VectorIndex index(embedder.dimension());
  for (const auto& c : schema.columns) {
    std::string id = normalize_identifier(c.table_name) + "." +
                     normalize_identifier(c.column_name);
    index.add(std::move(id), embedder.embed(column_entry_text(c)),
              PayloadKind::Column, json(c));
  }
  return index;
}

VectorIndex build_exemplar_index(const std::vector<Exemplar>& exemplars,
                                 const Embedder& embedder) {
  VectorIndex index(embedder.dimension());
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "%06zu", i);
    index.add(id, embedder.embed(exemplars[i].question), PayloadKind::Exemplar,
              json(exemplars[i]));
  }
  return index;
}

std::string cot_header() {
  return "Solved examples, each reasoning step by step from a question to its "
         "SQL query:\n\n";
}

std::string render_exemplar_block(const Exemplar& exemplar) {
  return "Question: " + exemplar.question + "\nReasoning: " + exemplar.reasoning +
         "\nSQL: " + exemplar.sql + "\n\n";
}

std::string render_question_block(const std::string& question) {
  return "Question: " + question;
}

std::string assemble_cot_prompt(const std::string& question,
                                const std::vector<Exemplar>& exemplars,
                                std::size_t budget_chars) {
  const std::string header = cot_header();
  const std::string tail = render_question_block(question);
  if (header.size() + tail.size() > budget_chars) {
    throw ArgumentError("prompt budget smaller than header plus question");
  }
  std::string body;
  for (const auto& e : exemplars) {
    std::string block = render_exemplar_block(e);
    if (header.size() + body.size() + block.size() + tail.size() > budget_chars) {
      break;
    }
    body += block;
  }
  return header + body + tail;
}

std::string extract_context(const std::vector<std::string>& documents,
                            const std::string& question, Backend& backend) {
  if (documents.empty()) {
    throw ArgumentError("extract_context requires at least one document");
  }
  std::string docs;
  for (std::size_t i = 0; i < documents.size(); ++i) {
    docs += "Document " + std::to_string(i + 1) + ":\n" + documents[i] + "\n\n";
  }
  ChatRequest req;
  req.messages.push_back(
      {Role::System,
       "Extract the concept definitions and metric calculation formulas from "
       "the documents that are relevant to the question. Respond with the "
       "extracted context only."});
  req.messages.push_back(
      {Role::User, docs + "Question: " + question + "\n\nRelevant context:"});
  return backend.complete(req).text;
}

}  // namespace squrve
