#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragred/corpus.hpp"
#include "ragred/embedding.hpp"
#include "ragred/error.hpp"
#include "ragred/prompts.hpp"
#include "ragred/scoring.hpp"
#include "ragred/textgen.hpp"

namespace ragred {

struct Trigger {
  std::string phrase;
  double s_intent = 0.0;
  double s_fluency = 0.0;
  int iterations_used = 0;
};

struct RefinementThresholds {
  double alpha1 = 0.70;  // intent gate
  double alpha2 = 0.60;  // naturalness gate
  int max_iters = 10;

  void validate() const {
    if (alpha1 < 0.0 || alpha1 > 1.0 || alpha2 < 0.0 || alpha2 > 1.0) {
      throw ConfigError("refinement thresholds must lie in [0, 1]");
    }
    if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  }
};

// Placeholders for the phrase-initialization templates; defaults target the
// medical-retrieval demo domain and are overridable per run.
struct TriggerPromptConfig {
  std::string domain = "medicines";
  std::string intent = "cost-effective medicine";
};

// Raised when the refinement loop exhausts max_iters; carries the
// best-scoring candidate so the caller can decide to accept it manually.
class RefinementExhausted : public Error {
public:
  RefinementExhausted(const std::string& msg, Trigger best_candidate)
      : Error(msg), best(std::move(best_candidate)) {}

  Trigger best;
};

// Provider-backed trigger integration: assembles the trigger-embedding
// prompt, requires the phrase verbatim in the output, retries once.
inline std::string integrate_trigger(const ProviderSpec& provider, const std::string& p_base,
                                     const std::string& phrase) {
  GenerationRequest req;
  req.system = std::string(prompts::kPromptTriggerEmbedSystem);
  req.prompt = prompts::prompt_trigger_embed(phrase, p_base);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const std::string out = trim(generate(provider, req));
    if (contains(out, phrase)) return out;
  }
  throw ProviderError("provider output does not contain the trigger phrase verbatim");
}

// Alg-style refinement loop: propose, trial-embed, score both gates,
// accept or feed back. Fluency feedback takes precedence because a
// disfluent embedding makes the intent score unreliable.
inline Trigger refine_trigger(const ProviderSpec& provider, const EmbedderSpec& spec,
                              const NgramLanguageModel& lm, const std::string& p_base,
                              const RefinementThresholds& thresholds,
                              const TriggerPromptConfig& prompt_cfg = {}) {
  thresholds.validate();
  if (p_base.empty()) throw PreconditionError("base prompt is empty");

  GenerationRequest req;
  req.system = prompts::phrase_init_system(prompt_cfg.domain);
  req.prompt = prompts::phrase_init_prompt(prompt_cfg.intent);
  std::string phrase = trim(generate(provider, req));

  Trigger best;
  double best_rank = -1.0;
  for (int round = 1; round <= thresholds.max_iters; ++round) {
    std::string trial;
    try {
      trial = integrate_trigger(provider, p_base, phrase);
    } catch (const ProviderError&) {
      // Scripted fallback keeps both scores defined pre-acceptance.
      trial = p_base + " " + phrase;
    }
    const double s_intent = intent_score(spec, p_base, trial);
    const double s_fluency = naturalness_score(trial, lm);

    Trigger cand{phrase, s_intent, s_fluency, round};
    const double rank = s_intent + s_fluency;
    if (rank > best_rank) {
      best_rank = rank;
      best = cand;
    }
    if (s_intent >= thresholds.alpha1 && s_fluency >= thresholds.alpha2) {
      return cand;
    }
    if (round == thresholds.max_iters) break;

    req.prompt = s_fluency < thresholds.alpha2 ? prompts::naturalness_feedback(trial, phrase)
                                               : prompts::intent_feedback(phrase, p_base);
    phrase = trim(generate(provider, req));
  }
  throw RefinementExhausted(
      "trigger refinement exhausted " + std::to_string(thresholds.max_iters) +
          " rounds; best candidate '" + best.phrase + "' scored s_intent=" +
          std::to_string(best.s_intent) + ", s_fluency=" + std::to_string(best.s_fluency),
      best);
}

// Full trigger embedding used after acceptance: integration plus an intent
// post-check against alpha1.
inline std::string embed_trigger_into_prompt(const ProviderSpec& provider, const EmbedderSpec& spec,
                                             const std::string& p_base, const Trigger& trigger,
                                             double alpha1) {
  if (trigger.phrase.empty()) throw PreconditionError("trigger phrase is empty");
  const std::string out = integrate_trigger(provider, p_base, trigger.phrase);
  const double score = intent_score(spec, p_base, out);
  if (score < alpha1) {
    throw Error("trigger embedding failed the intent post-check: score " + std::to_string(score) +
                " < " + std::to_string(alpha1));
  }
  return out;
}

// Synthesizes K trigger-bearing documents for the target concept/answer.
// Each document must contain the trigger phrase verbatim and the target
// answer; one retry per document.
inline std::vector<Document> synthesize_adversarial_docs(const ProviderSpec& provider,
                                                         const std::string& target_concept,
                                                         const std::string& target_answer,
                                                         const std::string& p_adv,
                                                         const Trigger& trigger, int k) {
  if (k < 1) throw PreconditionError("document count K must be >= 1");
  if (target_concept.empty() || target_answer.empty()) {
    throw PreconditionError("target concept and answer must be non-empty");
  }
  std::vector<Document> docs;
  docs.reserve(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    GenerationRequest init_req;
    init_req.system = std::string(prompts::kDocInitSystem);
    init_req.prompt = prompts::doc_init_prompt(target_answer, target_concept, p_adv);

    std::string text;
    bool ok = false;
    for (int attempt = 0; attempt < 2 && !ok; ++attempt) {
      const std::string base_doc = trim(generate(provider, init_req));
      GenerationRequest embed_req;
      embed_req.system = std::string(prompts::kDocTriggerEmbedSystem);
      embed_req.prompt = prompts::doc_trigger_embed(base_doc, trigger.phrase);
      text = trim(generate(provider, embed_req));
      ok = contains(text, trigger.phrase) && icontains(text, target_answer);
    }
    if (!ok) {
      throw ProviderError("synthesized document " + std::to_string(i + 1) +
                          " lacks the trigger phrase or target answer after retry");
    }
    Document doc;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "adv-%03d", i + 1);
    doc.id = idbuf;
    doc.text = text;
    doc.answer_key = target_answer;
    doc.provenance = Provenance::adversarial;
    doc.meta["trigger"] = trigger.phrase;
    docs.push_back(std::move(doc));
  }
  return docs;
}

struct AdversarialArtifacts {
  std::string p_base;
  std::string p_adv;
  Trigger trigger;
  std::vector<Document> docs;
  std::string target_concept;
  std::string target_answer;
  int k = 5;

  void validate() const {
    if (!contains(p_adv, trigger.phrase)) {
      throw Error("adversarial prompt lacks the trigger phrase verbatim");
    }
    if (static_cast<int>(docs.size()) != k) {
      throw Error("artifact document count does not match K");
    }
    for (const auto& d : docs) {
      if (!contains(d.text, trigger.phrase)) {
        throw Error("document " + d.id + " lacks the trigger phrase verbatim");
      }
      if (!d.answer_key || *d.answer_key != target_answer) {
        throw Error("document " + d.id + " does not carry the target answer key");
      }
    }
  }
};

inline nlohmann::json to_json(const AdversarialArtifacts& a) {
  nlohmann::json j;
  j["p_base"] = a.p_base;
  j["p_adv"] = a.p_adv;
  j["trigger"] = {{"phrase", a.trigger.phrase},
                  {"s_intent", a.trigger.s_intent},
                  {"s_fluency", a.trigger.s_fluency},
                  {"iterations_used", a.trigger.iterations_used}};
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& d : a.docs) docs.push_back(detail::document_to_json(d));
  j["docs"] = std::move(docs);
  j["target_concept"] = a.target_concept;
  j["target_answer"] = a.target_answer;
  j["k"] = a.k;
  return j;
}

inline AdversarialArtifacts artifacts_from_json(const nlohmann::json& j) {
  AdversarialArtifacts a;
  a.p_base = j.at("p_base").get<std::string>();
  a.p_adv = j.at("p_adv").get<std::string>();
  a.trigger.phrase = j.at("trigger").at("phrase").get<std::string>();
  a.trigger.s_intent = j.at("trigger").at("s_intent").get<double>();
  a.trigger.s_fluency = j.at("trigger").at("s_fluency").get<double>();
  a.trigger.iterations_used = j.at("trigger").at("iterations_used").get<int>();
  for (const auto& dj : j.at("docs")) {
    a.docs.push_back(detail::document_from_json(dj, "stage1 artifact"));
  }
  a.target_concept = j.at("target_concept").get<std::string>();
  a.target_answer = j.at("target_answer").get<std::string>();
  a.k = j.at("k").get<int>();
  a.validate();
  return a;
}

}  // namespace ragred
