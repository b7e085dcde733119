#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragred/corpus.hpp"
#include "ragred/embedding.hpp"

namespace ragred {

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;

  bool operator==(const ScoredDoc&) const = default;
};

struct RetrievalResult {
  std::vector<ScoredDoc> ranked;  // scores non-increasing, ties by ascending id
  size_t k = 0;
  Metric metric = Metric::cosine;
};

// Exact dense index: one embedding per document in corpus order. Immutable
// after build; rebuild after injection.
class DenseIndex {
public:
  DenseIndex() = default;
  DenseIndex(std::vector<std::string> doc_ids, std::vector<EmbeddingVector> matrix,
             EmbedderSpec embedder, Metric metric_default)
      : doc_ids_(std::move(doc_ids)),
        matrix_(std::move(matrix)),
        embedder_(std::move(embedder)),
        metric_default_(metric_default) {
    if (doc_ids_.size() != matrix_.size()) throw Error("index rows do not match ids");
  }

  const std::vector<std::string>& doc_ids() const { return doc_ids_; }
  const std::vector<EmbeddingVector>& matrix() const { return matrix_; }
  const EmbedderSpec& embedder() const { return embedder_; }
  Metric metric_default() const { return metric_default_; }
  size_t size() const { return doc_ids_.size(); }
  size_t dim() const { return matrix_.empty() ? embedder_.dim : matrix_[0].dim(); }

  bool operator==(const DenseIndex& other) const {
    return doc_ids_ == other.doc_ids_ && matrix_ == other.matrix_ &&
           metric_default_ == other.metric_default_ &&
           embedder_.fingerprint() == other.embedder_.fingerprint();
  }

private:
  std::vector<std::string> doc_ids_;
  std::vector<EmbeddingVector> matrix_;
  EmbedderSpec embedder_;
  Metric metric_default_ = Metric::cosine;
};

inline DenseIndex build_index(const KnowledgeBase& kb, const EmbedderSpec& spec,
                              Metric metric_default = Metric::cosine) {
  if (kb.empty()) throw PreconditionError("cannot index an empty knowledge base");
  std::vector<std::string> ids;
  std::vector<EmbeddingVector> matrix;
  ids.reserve(kb.size());
  matrix.reserve(kb.size());
  for (const auto& doc : kb.documents()) {
    try {
      matrix.push_back(embed_text(spec, doc.text, Role::document));
    } catch (const Error& e) {
      throw Error("failed to embed document " + doc.id + ": " + e.what());
    }
    ids.push_back(doc.id);
  }
  return DenseIndex(std::move(ids), std::move(matrix), spec, metric_default);
}

// Exact scoring of every document; stable ranking with ascending-id
// tie-break. Returns min(k, corpus size) entries.
inline RetrievalResult search_topk(const DenseIndex& index, const EmbeddingVector& query, size_t k,
                                   std::optional<Metric> metric = std::nullopt) {
  if (k < 1) throw PreconditionError("search_topk requires k >= 1");
  if (query.dim() != index.dim()) {
    throw PreconditionError("query dimension " + std::to_string(query.dim()) +
                            " does not match index dimension " + std::to_string(index.dim()));
  }
  const Metric m = metric.value_or(index.metric_default());
  std::vector<double> scores(index.size());
  for (size_t i = 0; i < index.size(); ++i) {
    scores[i] = similarity(m, index.matrix()[i], query);
  }
  std::vector<size_t> order(index.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return index.doc_ids()[a] < index.doc_ids()[b];
  });
  RetrievalResult result;
  result.k = k;
  result.metric = m;
  const size_t n = std::min(k, index.size());
  result.ranked.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    result.ranked.push_back({index.doc_ids()[order[i]], scores[order[i]]});
  }
  return result;
}

// Index snapshot: header with {dim, count, metric_default, embedder
// fingerprint} plus row-major vectors. JSON doubles round-trip exactly.
inline void save_index(const DenseIndex& index, const std::filesystem::path& path) {
  nlohmann::json j;
  j["version"] = kArtifactFormatVersion;
  j["dim"] = index.dim();
  j["count"] = index.size();
  j["metric_default"] = to_string(index.metric_default());
  j["embedder_fingerprint"] = index.embedder().fingerprint();
  nlohmann::json spec;
  spec["kind"] = index.embedder().kind == EmbedderSpec::Kind::local_hash ? "local_hash" : "remote";
  spec["dim"] = index.embedder().dim;
  spec["role_split"] = index.embedder().role_split;
  spec["endpoint"] = index.embedder().endpoint;
  spec["model"] = index.embedder().model;
  spec["credential_env"] = index.embedder().credential_env;
  j["embedder"] = spec;
  j["doc_ids"] = index.doc_ids();
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : index.matrix()) rows.push_back(row.values);
  j["matrix"] = std::move(rows);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write index snapshot: " + path.string());
  out << j.dump();
}

inline DenseIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open index snapshot: " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError(path.string() + ": invalid index snapshot");
  if (j["version"].get<int>() != kArtifactFormatVersion) {
    throw ParseError(path.string() + ": index snapshot version mismatch");
  }
  EmbedderSpec spec;
  spec.kind = j["embedder"]["kind"].get<std::string>() == "remote" ? EmbedderSpec::Kind::remote
                                                                   : EmbedderSpec::Kind::local_hash;
  spec.dim = j["embedder"]["dim"].get<size_t>();
  spec.role_split = j["embedder"]["role_split"].get<bool>();
  spec.endpoint = j["embedder"]["endpoint"].get<std::string>();
  spec.model = j["embedder"]["model"].get<std::string>();
  spec.credential_env = j["embedder"]["credential_env"].get<std::string>();
  if (j["embedder_fingerprint"].get<std::string>() != spec.fingerprint()) {
    throw ParseError(path.string() + ": embedder fingerprint mismatch");
  }
  std::vector<std::string> ids = j["doc_ids"].get<std::vector<std::string>>();
  std::vector<EmbeddingVector> matrix;
  matrix.reserve(j["matrix"].size());
  for (const auto& row : j["matrix"]) {
    EmbeddingVector v;
    v.values = row.get<std::vector<double>>();
    matrix.push_back(std::move(v));
  }
  if (ids.size() != j["count"].get<size_t>()) {
    throw ParseError(path.string() + ": index snapshot count mismatch");
  }
  return DenseIndex(std::move(ids), std::move(matrix), spec,
                    metric_from_string(j["metric_default"].get<std::string>()));
}

}  // namespace ragred
