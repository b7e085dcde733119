#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ragred/error.hpp"
#include "ragred/http_client.hpp"
#include "ragred/text.hpp"

namespace ragred {

enum class Role { query, document };

inline std::string to_string(Role r) { return r == Role::query ? "query" : "document"; }

enum class Metric { cosine, dot };

inline std::string to_string(Metric m) { return m == Metric::cosine ? "cosine" : "dot"; }

inline Metric metric_from_string(std::string_view s) {
  if (s == "cosine") return Metric::cosine;
  if (s == "dot") return Metric::dot;
  throw ConfigError("unknown metric: " + std::string(s));
}

struct EmbeddingVector {
  std::vector<double> values;

  size_t dim() const { return values.size(); }

  double norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }

  bool operator==(const EmbeddingVector&) const = default;
};

// Stands in for a dual-encoder retriever. The local kind is a feature-hashed
// bag of unigrams: lowercase, split on non-alphanumeric runs, each token
// adds 1.0 to bucket fnv1a64(token) % dim, then L2-normalize. Deterministic
// on every platform; both roles share the encoder unless role_split is set
// on a remote spec.
struct EmbedderSpec {
  enum class Kind { local_hash, remote };

  Kind kind = Kind::local_hash;
  size_t dim = 256;
  bool role_split = false;

  // remote only
  std::string endpoint;
  std::string model;
  std::string credential_env;
  RetryPolicy retry;
  int max_in_flight = 4;

  static EmbedderSpec local(size_t dim = 256) {
    EmbedderSpec spec;
    spec.kind = Kind::local_hash;
    spec.dim = dim;
    spec.validate();
    return spec;
  }

  static EmbedderSpec remote(std::string endpoint, std::string model, std::string credential_env,
                             size_t dim, bool role_split = false) {
    EmbedderSpec spec;
    spec.kind = Kind::remote;
    spec.endpoint = std::move(endpoint);
    spec.model = std::move(model);
    spec.credential_env = std::move(credential_env);
    spec.dim = dim;
    spec.role_split = role_split;
    spec.validate();
    return spec;
  }

  void validate() const {
    if (dim < 8) throw ConfigError("embedder dim must be >= 8");
    const bool has_remote_fields = !endpoint.empty() || !model.empty() || !credential_env.empty();
    if (kind == Kind::remote) {
      if (endpoint.empty() || model.empty()) {
        throw ConfigError("remote embedder requires endpoint and model");
      }
    } else if (has_remote_fields) {
      throw ConfigError("local embedder must not carry remote endpoint fields");
    }
  }

  // Stable identity recorded in index and queryset artifacts.
  std::string fingerprint() const {
    std::string canon = (kind == Kind::local_hash ? "local_hash" : "remote");
    canon += "|" + std::to_string(dim) + "|" + (role_split ? "1" : "0");
    canon += "|" + endpoint + "|" + model;
    return to_hex(fnv1a64(canon));
  }
};

namespace detail {

inline EmbeddingVector embed_local(const EmbedderSpec& spec, std::string_view text) {
  const auto tokens = tokenize(text);
  if (tokens.empty()) {
    throw PreconditionError("cannot embed text with no alphanumeric tokens");
  }
  EmbeddingVector vec;
  vec.values.assign(spec.dim, 0.0);
  for (const auto& tok : tokens) {
    vec.values[fnv1a64(tok) % spec.dim] += 1.0;
  }
  const double n = vec.norm();
  for (double& v : vec.values) v /= n;
  return vec;
}

inline EmbeddingVector embed_remote(const EmbedderSpec& spec, std::string_view text, Role role) {
  nlohmann::json body;
  body["model"] = spec.model;
  body["input"] = std::vector<std::string>{std::string(text)};
  body["role"] = spec.role_split ? to_string(role) : std::string("query");
  auto response =
      post_json_with_retry(spec.endpoint, body, spec.credential_env, spec.retry, spec.max_in_flight);
  if (!response.contains("data") || !response["data"].is_array() || response["data"].empty() ||
      !response["data"][0].contains("embedding")) {
    throw ProviderError("embedding response missing data[0].embedding");
  }
  EmbeddingVector vec;
  vec.values = response["data"][0]["embedding"].get<std::vector<double>>();
  if (vec.dim() != spec.dim) {
    throw ProviderError("embedding dimension mismatch: expected " + std::to_string(spec.dim) +
                        ", got " + std::to_string(vec.dim()));
  }
  for (double v : vec.values) {
    if (!std::isfinite(v)) throw ProviderError("embedding contains non-finite values");
  }
  return vec;
}

}  // namespace detail

inline EmbeddingVector embed_text(const EmbedderSpec& spec, std::string_view text, Role role) {
  spec.validate();
  if (spec.kind == EmbedderSpec::Kind::local_hash) return detail::embed_local(spec, text);
  return detail::embed_remote(spec, text, role);
}

// Joint prompt-plus-query embedding: plain concatenation with one space,
// encoded with the query role.
inline EmbeddingVector joint_embed(const EmbedderSpec& spec, std::string_view prompt,
                                   std::string_view query) {
  std::string joined;
  joined.reserve(prompt.size() + query.size() + 1);
  joined.append(prompt);
  joined.push_back(' ');
  joined.append(query);
  return embed_text(spec, joined, Role::query);
}

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
  return s;
}

inline double similarity(Metric metric, const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw PreconditionError("similarity: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()) + ")");
  }
  if (metric == Metric::dot) return dot(a, b);
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw PreconditionError("cosine similarity of zero-norm vector");
  return dot(a, b) / (na * nb);
}

}  // namespace ragred
