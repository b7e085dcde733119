#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ragred/embedding.hpp"
#include "ragred/error.hpp"
#include "ragred/prompts.hpp"
#include "ragred/textgen.hpp"

namespace ragred {

enum class Concept { targeted, untargeted };

inline std::string to_string(Concept c) {
  return c == Concept::targeted ? "targeted" : "untargeted";
}

inline Concept concept_from_string(std::string_view s) {
  if (s == "targeted") return Concept::targeted;
  if (s == "untargeted") return Concept::untargeted;
  throw ParseError("unknown concept tag: " + std::string(s));
}

struct QuerySet {
  std::string seed_query;
  std::vector<std::string> queries;  // queries[0] == seed_query
  Concept concept_tag = Concept::targeted;
  double tau = 0.90;
};

struct DiversityConfig {
  double tau = 0.90;
  int target_size = 21;
  int max_attempts = 0;  // 0 -> 20 * target_size

  void validate() const {
    if (tau <= 0.0 || tau > 1.0) throw ConfigError("diversity tau must lie in (0, 1]");
    if (target_size < 1) throw ConfigError("target_size must be >= 1");
  }

  int effective_max_attempts() const { return max_attempts > 0 ? max_attempts : 20 * target_size; }
};

// Diversity gate: accept iff the candidate's maximum cosine to every
// current member stays below tau. Empty sets accept anything.
inline bool accept_candidate(const EmbedderSpec& spec, const QuerySet& qs,
                             const std::string& q_new) {
  const auto cand = embed_text(spec, q_new, Role::query);
  for (const auto& q : qs.queries) {
    if (similarity(Metric::cosine, embed_text(spec, q, Role::query), cand) >= qs.tau) return false;
  }
  return true;
}

// Grows a query set from one seed by cycling the variational instructions
// in fixed order (index = attempt mod 6) and alternating the rewrite base
// between the seed and the latest accepted member.
inline QuerySet generate_diverse_queries(const ProviderSpec& provider, const EmbedderSpec& spec,
                                         const std::string& seed_query, const DiversityConfig& cfg,
                                         Concept concept_tag) {
  cfg.validate();
  if (trim(seed_query).empty()) throw PreconditionError("seed query is empty");

  QuerySet qs;
  qs.seed_query = seed_query;
  qs.concept_tag = concept_tag;
  qs.tau = cfg.tau;
  qs.queries.push_back(seed_query);
  if (cfg.target_size == 1) return qs;

  const auto& instructions = prompts::variational_instructions();
  const int max_attempts = cfg.effective_max_attempts();
  int attempts = 0;
  while (static_cast<int>(qs.queries.size()) < cfg.target_size && attempts < max_attempts) {
    const auto& instruction = instructions[static_cast<size_t>(attempts) % instructions.size()];
    const std::string& base = (attempts % 2 == 0) ? seed_query : qs.queries.back();
    GenerationRequest req;
    req.system = std::string(prompts::kQueryRewriteSystem);
    req.prompt = prompts::query_rewrite_prompt(instruction, base);
    const std::string candidate = trim(generate(provider, req));
    ++attempts;
    if (!candidate.empty() && accept_candidate(spec, qs, candidate)) {
      qs.queries.push_back(candidate);
    }
  }
  if (static_cast<int>(qs.queries.size()) < cfg.target_size) {
    throw Error("diverse query generation exhausted " + std::to_string(max_attempts) +
                " attempts with " + std::to_string(qs.queries.size()) + " of " +
                std::to_string(cfg.target_size) + " queries accepted");
  }
  return qs;
}

// Builds the targeted and untargeted evaluation sets from their seeds. The
// diversity constraint is intra-set only; overlap across sets is allowed.
inline std::pair<QuerySet, QuerySet> build_eval_sets(const ProviderSpec& provider,
                                                     const EmbedderSpec& spec,
                                                     const std::string& targeted_seed,
                                                     const std::string& untargeted_seed,
                                                     const DiversityConfig& cfg) {
  auto targeted = generate_diverse_queries(provider, spec, targeted_seed, cfg, Concept::targeted);
  auto untargeted =
      generate_diverse_queries(provider, spec, untargeted_seed, cfg, Concept::untargeted);
  return {std::move(targeted), std::move(untargeted)};
}

inline nlohmann::json to_json(const QuerySet& qs, const EmbedderSpec& spec) {
  nlohmann::json j;
  j["seed"] = qs.seed_query;
  j["concept"] = to_string(qs.concept_tag);
  j["tau"] = qs.tau;
  j["queries"] = qs.queries;
  j["embedder_fingerprint"] = spec.fingerprint();
  return j;
}

inline QuerySet queryset_from_json(const nlohmann::json& j) {
  QuerySet qs;
  qs.seed_query = j.at("seed").get<std::string>();
  qs.concept_tag = concept_from_string(j.at("concept").get<std::string>());
  qs.tau = j.at("tau").get<double>();
  qs.queries = j.at("queries").get<std::vector<std::string>>();
  if (qs.queries.empty() || qs.queries[0] != qs.seed_query) {
    throw ParseError("queryset artifact does not start with its seed query");
  }
  return qs;
}

}  // namespace ragred
