#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ragred/artifacts.hpp"
#include "ragred/corpus.hpp"
#include "ragred/embedding.hpp"
#include "ragred/evaluate.hpp"
#include "ragred/retrieval.hpp"
#include "ragred/scoring.hpp"
#include "ragred/stage1.hpp"
#include "ragred/stage2.hpp"
#include "ragred/stage3.hpp"
#include "ragred/textgen.hpp"
#include "ragred/version.hpp"

namespace ragred {

// Everything a run needs, loadable from a JSON config file with flag
// overrides. Credentials are named environment variables, never values.
struct RunConfig {
  std::string corpus_path;
  std::string run_dir = "runs/default";

  // embedder
  std::string embedder_kind = "local_hash";
  size_t embedder_dim = 256;
  bool embedder_role_split = false;
  std::string embedder_endpoint;
  std::string embedder_model;
  std::string embedder_credential_env;

  // generation provider
  std::string provider_kind = "scripted";
  std::string provider_rules_path;
  std::string provider_endpoint;
  std::string provider_model;
  std::string provider_credential_env;

  // stage-1 thresholds and prompts
  double alpha1 = 0.70;
  double alpha2 = 0.60;
  int max_iters = 10;
  std::string trigger_domain = "medicines";
  std::string trigger_intent = "cost-effective medicine";
  std::string p_base;
  std::string target_concept;
  std::string target_answer;
  std::string intent_keyword;
  int stage1_docs = 5;

  // stage-2 query generation
  double tau = 0.90;
  int query_target_size = 21;
  int query_max_attempts = 0;  // 0 -> 20 * target_size
  std::string targeted_seed;
  std::string untargeted_seed;
  std::string gold_answer;
  double optimize_fraction = 0.70;  // leading slice of each set seen by the optimizer

  // stage-3 GA
  FitnessWeights weights;
  GAConfig ga;
  std::string thesaurus_path;

  // retrieval + evaluation
  size_t k = 5;
  std::string metric = "cosine";
  std::vector<size_t> sweep_ks = {3, 5, 10, 20};
  bool eval_sweep = false;
  bool eval_rephrase = false;
  int rephrase_words = 5;
  uint64_t rephrase_seed = 17;

  EmbedderSpec embedder() const {
    if (embedder_kind == "local_hash") return EmbedderSpec::local(embedder_dim);
    if (embedder_kind == "remote") {
      return EmbedderSpec::remote(embedder_endpoint, embedder_model, embedder_credential_env,
                                  embedder_dim, embedder_role_split);
    }
    throw ConfigError("unknown embedder kind: " + embedder_kind);
  }

  ProviderSpec provider() const {
    if (provider_kind == "scripted") {
      if (provider_rules_path.empty()) {
        throw ConfigError("scripted provider requires provider.rules (path to a rule file)");
      }
      if (!std::filesystem::exists(provider_rules_path)) {
        throw ConfigError("scripted rule file does not exist: " + provider_rules_path);
      }
      return load_scripted_rules(provider_rules_path);
    }
    if (provider_kind == "remote") {
      return ProviderSpec::remote(provider_endpoint, provider_model, provider_credential_env);
    }
    throw ConfigError("unknown provider kind: " + provider_kind);
  }

  Metric retrieval_metric() const { return metric_from_string(metric); }

  Thesaurus thesaurus() const {
    if (thesaurus_path.empty()) throw ConfigError("thesaurus path is not configured");
    if (!std::filesystem::exists(thesaurus_path)) {
      throw ConfigError("thesaurus file does not exist: " + thesaurus_path);
    }
    return Thesaurus::load(thesaurus_path);
  }
};

inline nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["corpus"] = cfg.corpus_path;
  j["run_dir"] = cfg.run_dir;
  j["embedder"] = {{"kind", cfg.embedder_kind},
                   {"dim", cfg.embedder_dim},
                   {"role_split", cfg.embedder_role_split},
                   {"endpoint", cfg.embedder_endpoint},
                   {"model", cfg.embedder_model},
                   {"credential_env", cfg.embedder_credential_env}};
  j["provider"] = {{"kind", cfg.provider_kind},
                   {"rules", cfg.provider_rules_path},
                   {"endpoint", cfg.provider_endpoint},
                   {"model", cfg.provider_model},
                   {"credential_env", cfg.provider_credential_env}};
  j["thresholds"] = {{"alpha1", cfg.alpha1}, {"alpha2", cfg.alpha2}, {"max_iters", cfg.max_iters},
                     {"tau", cfg.tau}};
  j["target"] = {{"concept", cfg.target_concept},
                 {"answer", cfg.target_answer},
                 {"intent_keyword", cfg.intent_keyword},
                 {"p_base", cfg.p_base},
                 {"trigger_domain", cfg.trigger_domain},
                 {"trigger_intent", cfg.trigger_intent},
                 {"stage1_docs", cfg.stage1_docs}};
  j["queries"] = {{"targeted_seed", cfg.targeted_seed},
                  {"untargeted_seed", cfg.untargeted_seed},
                  {"target_size", cfg.query_target_size},
                  {"max_attempts", cfg.query_max_attempts},
                  {"gold_answer", cfg.gold_answer},
                  {"optimize_fraction", cfg.optimize_fraction}};
  j["weights"] = {{"lambda1", cfg.weights.lambda1},
                  {"lambda2", cfg.weights.lambda2},
                  {"lambda3", cfg.weights.lambda3}};
  j["ga"] = {{"population", cfg.ga.population},
             {"elite_fraction", cfg.ga.elite_fraction},
             {"mutation_rate", cfg.ga.mutation_rate},
             {"max_generations", cfg.ga.max_generations},
             {"patience", cfg.ga.patience},
             {"epsilon", cfg.ga.epsilon},
             {"rng_seed", cfg.ga.rng_seed},
             {"clean_sample_size", cfg.ga.clean_sample_size}};
  j["thesaurus"] = cfg.thesaurus_path;
  j["retrieval"] = {{"k", cfg.k}, {"metric", cfg.metric}};
  j["eval"] = {{"sweep_ks", cfg.sweep_ks},
               {"sweep", cfg.eval_sweep},
               {"rephrase", cfg.eval_rephrase},
               {"rephrase_words", cfg.rephrase_words},
               {"rephrase_seed", cfg.rephrase_seed}};
  return j;
}

namespace detail {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

}  // namespace detail

inline void apply_config_json(const nlohmann::json& j, RunConfig& cfg) {
  detail::maybe(j, "corpus", cfg.corpus_path);
  detail::maybe(j, "run_dir", cfg.run_dir);
  if (j.contains("embedder")) {
    const auto& e = j["embedder"];
    detail::maybe(e, "kind", cfg.embedder_kind);
    detail::maybe(e, "dim", cfg.embedder_dim);
    detail::maybe(e, "role_split", cfg.embedder_role_split);
    detail::maybe(e, "endpoint", cfg.embedder_endpoint);
    detail::maybe(e, "model", cfg.embedder_model);
    detail::maybe(e, "credential_env", cfg.embedder_credential_env);
  }
  if (j.contains("provider")) {
    const auto& p = j["provider"];
    detail::maybe(p, "kind", cfg.provider_kind);
    detail::maybe(p, "rules", cfg.provider_rules_path);
    detail::maybe(p, "endpoint", cfg.provider_endpoint);
    detail::maybe(p, "model", cfg.provider_model);
    detail::maybe(p, "credential_env", cfg.provider_credential_env);
  }
  if (j.contains("thresholds")) {
    const auto& t = j["thresholds"];
    detail::maybe(t, "alpha1", cfg.alpha1);
    detail::maybe(t, "alpha2", cfg.alpha2);
    detail::maybe(t, "max_iters", cfg.max_iters);
    detail::maybe(t, "tau", cfg.tau);
  }
  if (j.contains("target")) {
    const auto& t = j["target"];
    detail::maybe(t, "concept", cfg.target_concept);
    detail::maybe(t, "answer", cfg.target_answer);
    detail::maybe(t, "intent_keyword", cfg.intent_keyword);
    detail::maybe(t, "p_base", cfg.p_base);
    detail::maybe(t, "trigger_domain", cfg.trigger_domain);
    detail::maybe(t, "trigger_intent", cfg.trigger_intent);
    detail::maybe(t, "stage1_docs", cfg.stage1_docs);
  }
  if (j.contains("queries")) {
    const auto& q = j["queries"];
    detail::maybe(q, "targeted_seed", cfg.targeted_seed);
    detail::maybe(q, "untargeted_seed", cfg.untargeted_seed);
    detail::maybe(q, "target_size", cfg.query_target_size);
    detail::maybe(q, "max_attempts", cfg.query_max_attempts);
    detail::maybe(q, "gold_answer", cfg.gold_answer);
    detail::maybe(q, "optimize_fraction", cfg.optimize_fraction);
  }
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    detail::maybe(w, "lambda1", cfg.weights.lambda1);
    detail::maybe(w, "lambda2", cfg.weights.lambda2);
    detail::maybe(w, "lambda3", cfg.weights.lambda3);
  }
  if (j.contains("ga")) {
    const auto& g = j["ga"];
    detail::maybe(g, "population", cfg.ga.population);
    detail::maybe(g, "elite_fraction", cfg.ga.elite_fraction);
    detail::maybe(g, "mutation_rate", cfg.ga.mutation_rate);
    detail::maybe(g, "max_generations", cfg.ga.max_generations);
    detail::maybe(g, "patience", cfg.ga.patience);
    detail::maybe(g, "epsilon", cfg.ga.epsilon);
    detail::maybe(g, "rng_seed", cfg.ga.rng_seed);
    detail::maybe(g, "clean_sample_size", cfg.ga.clean_sample_size);
  }
  detail::maybe(j, "thesaurus", cfg.thesaurus_path);
  if (j.contains("retrieval")) {
    const auto& r = j["retrieval"];
    detail::maybe(r, "k", cfg.k);
    detail::maybe(r, "metric", cfg.metric);
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    detail::maybe(e, "sweep_ks", cfg.sweep_ks);
    detail::maybe(e, "sweep", cfg.eval_sweep);
    detail::maybe(e, "rephrase", cfg.eval_rephrase);
    detail::maybe(e, "rephrase_words", cfg.rephrase_words);
    detail::maybe(e, "rephrase_seed", cfg.rephrase_seed);
  }
}

namespace detail {

inline std::string config_fingerprint(const RunConfig& cfg) {
  return to_hex(fnv1a64(to_json(cfg).dump()));
}

inline nlohmann::json artifact_header(const RunConfig& cfg) {
  nlohmann::json j;
  j["artifact_format"] = kArtifactFormatVersion;
  j["tool_version"] = kVersion;
  j["config_fingerprint"] = config_fingerprint(cfg);
  j["config"] = to_json(cfg);
  return j;
}

inline void echo_config(const RunConfig& cfg) {
  write_json_artifact(next_artifact_path(cfg.run_dir, "config", "json"), to_json(cfg));
}

inline KnowledgeBase load_corpus(const RunConfig& cfg) {
  return load_snapshot(require_artifact(cfg.run_dir, "corpus", "snap", "ingest"));
}

inline KnowledgeBase load_injected(const RunConfig& cfg) {
  return load_snapshot(require_artifact(cfg.run_dir, "corpus_injected", "snap", "inject"));
}

inline AdversarialArtifacts load_stage1(const RunConfig& cfg) {
  return artifacts_from_json(
      read_json_artifact(require_artifact(cfg.run_dir, "stage1", "json", "attack-init")));
}

inline QuerySet load_queries(const RunConfig& cfg, const std::string& name) {
  return queryset_from_json(
      read_json_artifact(require_artifact(cfg.run_dir, name, "json", "attack-queries")));
}

// The prompt/docs a stage-3-aware step should use: the optimized artifact
// when it exists, otherwise the stage-1 initialization (the unoptimized
// ablation mode).
struct AttackPayload {
  std::string source;  // artifact filename the payload came from
  std::string p_adv;
  std::string trigger_phrase;
  std::string target_answer;
  std::vector<Document> docs;
};

inline AttackPayload load_attack_payload(const RunConfig& cfg) {
  AttackPayload payload;
  const auto stage1 = load_stage1(cfg);
  payload.trigger_phrase = stage1.trigger.phrase;
  payload.target_answer = stage1.target_answer;
  if (auto stage3_path = latest_artifact(cfg.run_dir, "stage3", "json")) {
    const auto j = read_json_artifact(*stage3_path);
    payload.source = stage3_path->filename().string();
    payload.p_adv = j.at("p_adv").get<std::string>();
    for (const auto& dj : j.at("docs")) {
      payload.docs.push_back(document_from_json(dj, payload.source));
    }
  } else {
    const auto stage1_path = latest_artifact(cfg.run_dir, "stage1", "json");
    payload.source = stage1_path->filename().string();
    payload.p_adv = stage1.p_adv;
    payload.docs = stage1.docs;
  }
  return payload;
}

inline size_t optimize_slice_size(double fraction, size_t n) {
  const auto count = static_cast<size_t>(std::ceil(fraction * static_cast<double>(n)));
  return std::min(std::max<size_t>(count, 1), n);
}

inline int cmd_ingest(const RunConfig& cfg) {
  if (cfg.corpus_path.empty()) throw ConfigError("ingest requires --corpus");
  if (!std::filesystem::exists(cfg.corpus_path)) {
    throw ConfigError("corpus file does not exist: " + cfg.corpus_path);
  }
  const auto kb = ingest_jsonl(cfg.corpus_path);
  const auto snap_path = next_artifact_path(cfg.run_dir, "corpus", "snap");
  snapshot(kb, snap_path);
  auto j = artifact_header(cfg);
  j["source"] = cfg.corpus_path;
  j["snapshot"] = snap_path.filename().string();
  j["counts"] = {{"clean", kb.counts().clean},
                 {"adversarial", kb.counts().adversarial},
                 {"baseline", kb.counts().baseline}};
  write_json_artifact(next_artifact_path(cfg.run_dir, "ingest", "json"), j);
  std::cout << "ingested " << kb.size() << " documents -> " << snap_path.string() << "\n";
  return 0;
}

inline int cmd_index(const RunConfig& cfg) {
  const auto kb = load_corpus(cfg);
  const auto index = build_index(kb, cfg.embedder(), cfg.retrieval_metric());
  const auto path = next_artifact_path(cfg.run_dir, "index", "json");
  save_index(index, path);
  std::cout << "indexed " << index.size() << " documents (dim " << index.dim() << ") -> "
            << path.string() << "\n";
  return 0;
}

inline int cmd_attack_init(const RunConfig& cfg) {
  if (cfg.p_base.empty()) throw ConfigError("attack-init requires target.p_base");
  if (cfg.target_concept.empty() || cfg.target_answer.empty()) {
    throw ConfigError("attack-init requires target.concept and target.answer");
  }
  const auto kb = load_corpus(cfg);
  const auto clean = kb.with_provenance(Provenance::clean);
  if (clean.empty()) throw ConfigError("corpus has no clean documents to train the language model");
  const auto lm = NgramLanguageModel::train(clean);
  const auto provider = cfg.provider();
  const auto spec = cfg.embedder();

  RefinementThresholds thresholds{cfg.alpha1, cfg.alpha2, cfg.max_iters};
  TriggerPromptConfig prompt_cfg{cfg.trigger_domain, cfg.trigger_intent};
  const auto trigger = refine_trigger(provider, spec, lm, cfg.p_base, thresholds, prompt_cfg);
  const auto p_adv = embed_trigger_into_prompt(provider, spec, cfg.p_base, trigger, cfg.alpha1);

  AdversarialArtifacts artifacts;
  artifacts.p_base = cfg.p_base;
  artifacts.p_adv = p_adv;
  artifacts.trigger = trigger;
  artifacts.target_concept = cfg.target_concept;
  artifacts.target_answer = cfg.target_answer;
  artifacts.k = cfg.stage1_docs;
  artifacts.docs = synthesize_adversarial_docs(provider, cfg.target_concept, cfg.target_answer,
                                               p_adv, trigger, cfg.stage1_docs);
  artifacts.validate();

  auto j = artifact_header(cfg);
  j.update(to_json(artifacts));
  const auto path = next_artifact_path(cfg.run_dir, "stage1", "json");
  write_json_artifact(path, j);
  std::cout << "trigger '" << trigger.phrase << "' accepted after " << trigger.iterations_used
            << " round(s) (s_intent=" << trigger.s_intent << ", s_fluency=" << trigger.s_fluency
            << ") -> " << path.string() << "\n";
  return 0;
}

inline int cmd_attack_queries(const RunConfig& cfg) {
  if (cfg.targeted_seed.empty() || cfg.untargeted_seed.empty()) {
    throw ConfigError("attack-queries requires queries.targeted_seed and queries.untargeted_seed");
  }
  const auto provider = cfg.provider();
  const auto spec = cfg.embedder();
  DiversityConfig dc;
  dc.tau = cfg.tau;
  dc.target_size = cfg.query_target_size;
  dc.max_attempts = cfg.query_max_attempts;
  const auto [targeted, untargeted] =
      build_eval_sets(provider, spec, cfg.targeted_seed, cfg.untargeted_seed, dc);

  auto jt = artifact_header(cfg);
  jt.update(to_json(targeted, spec));
  write_json_artifact(next_artifact_path(cfg.run_dir, "queries_targeted", "json"), jt);
  auto ju = artifact_header(cfg);
  ju.update(to_json(untargeted, spec));
  write_json_artifact(next_artifact_path(cfg.run_dir, "queries_untargeted", "json"), ju);
  std::cout << "generated " << targeted.queries.size() << " targeted and "
            << untargeted.queries.size() << " untargeted queries\n";
  return 0;
}

inline int cmd_attack_optimize(const RunConfig& cfg) {
  const auto artifacts = load_stage1(cfg);
  const auto targeted = load_queries(cfg, "queries_targeted");
  const auto untargeted = load_queries(cfg, "queries_untargeted");
  const auto kb = load_corpus(cfg);
  const auto spec = cfg.embedder();
  const auto thesaurus = cfg.thesaurus();

  const auto sample = CleanDocSample::sample(kb, cfg.ga.clean_sample_size, cfg.ga.rng_seed);
  if (sample.docs.empty()) throw ConfigError("corpus has no clean documents to sample");

  // The optimizer sees only the leading slice of each query set; the
  // held-out tail is reserved for evaluation.
  std::vector<std::string> qt(targeted.queries.begin(),
                              targeted.queries.begin() +
                                  static_cast<long>(optimize_slice_size(
                                      cfg.optimize_fraction, targeted.queries.size())));
  std::vector<std::string> qc(untargeted.queries.begin(),
                              untargeted.queries.begin() +
                                  static_cast<long>(optimize_slice_size(
                                      cfg.optimize_fraction, untargeted.queries.size())));

  const auto result =
      optimize(artifacts, qt, qc, sample.docs, spec, cfg.weights, thesaurus, cfg.ga);

  auto j = artifact_header(cfg);
  j["p_adv"] = result.p_adv;
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& d : result.docs) docs.push_back(document_to_json(d));
  j["docs"] = std::move(docs);
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : result.history) history.push_back(to_json(h));
  j["history"] = std::move(history);
  j["optimized_queries"] = {{"targeted", qt.size()}, {"untargeted", qc.size()}};
  const auto path = next_artifact_path(cfg.run_dir, "stage3", "json");
  write_json_artifact(path, j);
  write_history_csv(result.history, next_artifact_path(cfg.run_dir, "stage3_history", "csv"));
  std::cout << "optimized over " << result.history.size() << " generation(s); best f_total "
            << result.history.back().f_total << " -> " << path.string() << "\n";
  return 0;
}

inline int cmd_inject(const RunConfig& cfg) {
  const auto kb = load_corpus(cfg);
  const auto payload = load_attack_payload(cfg);
  const auto injected = inject_documents(kb, payload.docs);
  const auto snap_path = next_artifact_path(cfg.run_dir, "corpus_injected", "snap");
  snapshot(injected, snap_path);

  auto j = artifact_header(cfg);
  j["source_artifact"] = payload.source;
  j["snapshot"] = snap_path.filename().string();
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& d : payload.docs) ids.push_back(d.id);
  j["injected_ids"] = std::move(ids);
  write_json_artifact(next_artifact_path(cfg.run_dir, "inject", "json"), j);
  std::cout << "injected " << payload.docs.size() << " documents from " << payload.source << " -> "
            << snap_path.string() << "\n";
  return 0;
}

inline int cmd_eval(const RunConfig& cfg) {
  const auto clean_kb = load_corpus(cfg);
  const auto injected_kb = load_injected(cfg);
  const auto inject_info =
      read_json_artifact(require_artifact(cfg.run_dir, "inject", "json", "inject"));
  const auto payload = load_attack_payload(cfg);
  if (inject_info.at("source_artifact").get<std::string>() != payload.source) {
    throw ConfigError("injected corpus came from " +
                      inject_info.at("source_artifact").get<std::string>() +
                      " but the latest attack artifact is " + payload.source +
                      "; re-run inject to align them");
  }
  const auto targeted = load_queries(cfg, "queries_targeted");
  const auto untargeted = load_queries(cfg, "queries_untargeted");
  if (cfg.gold_answer.empty()) throw ConfigError("eval requires queries.gold_answer");

  const auto spec = cfg.embedder();
  const auto provider = cfg.provider();
  const auto pre_index = build_index(clean_kb, spec, cfg.retrieval_metric());
  const auto post_index = build_index(injected_kb, spec, cfg.retrieval_metric());

  EvalParams params;
  params.k = cfg.k;
  params.metric = cfg.retrieval_metric();
  params.config_fingerprint = config_fingerprint(cfg);

  const auto asr = compute_metric(MetricKind::ASR, post_index, injected_kb, provider,
                                  payload.p_adv, targeted, payload.target_answer, params);
  const auto aca = compute_metric(MetricKind::ACA, post_index, injected_kb, provider,
                                  payload.p_adv, untargeted, cfg.gold_answer, params);
  const auto bca = compute_metric(MetricKind::BCA, pre_index, clean_kb, provider, std::nullopt,
                                  untargeted, cfg.gold_answer, params, cfg.intent_keyword);

  auto j = artifact_header(cfg);
  j["source_artifact"] = payload.source;
  j["asr"] = to_json(asr);
  j["aca"] = to_json(aca);
  j["bca"] = to_json(bca);

  if (cfg.eval_sweep) {
    const auto rows = topk_sweep(post_index, injected_kb, provider, payload.p_adv, targeted,
                                 untargeted, cfg.sweep_ks, payload.target_answer, cfg.gold_answer,
                                 params);
    nlohmann::json sweep = nlohmann::json::array();
    for (const auto& row : rows) {
      sweep.push_back({{"k", row.k}, {"asr", to_json(row.asr)}, {"aca", to_json(row.aca)}});
    }
    j["sweep"] = std::move(sweep);
  }
  if (cfg.eval_rephrase) {
    const auto rows = rephrase_robustness(post_index, injected_kb, provider, payload.p_adv,
                                          targeted, cfg.rephrase_words, cfg.rephrase_seed,
                                          cfg.thesaurus(), payload.trigger_phrase,
                                          payload.target_answer, params);
    nlohmann::json rep = nlohmann::json::array();
    for (const auto& row : rows) {
      rep.push_back({{"n_modified", row.n_modified},
                     {"prompt", row.prompt},
                     {"asr", to_json(row.asr)}});
    }
    j["rephrase"] = std::move(rep);
  }

  const auto path = next_artifact_path(cfg.run_dir, "metrics", "json");
  write_json_artifact(path, j);
  std::cout << render_metrics_table({asr, aca, bca}) << "-> " << path.string() << "\n";
  return 0;
}

inline int cmd_defend(const RunConfig& cfg) {
  const auto clean_kb = load_corpus(cfg);
  const auto injected_kb = load_injected(cfg);
  const auto clean = clean_kb.with_provenance(Provenance::clean);
  auto adversarial = injected_kb.with_provenance(Provenance::adversarial);
  {
    auto baseline = injected_kb.with_provenance(Provenance::baseline);
    adversarial.insert(adversarial.end(), baseline.begin(), baseline.end());
  }
  if (adversarial.empty()) {
    throw MissingArtifactError("injected corpus contains no adversarial documents; run the "
                               "'inject' subcommand first");
  }
  const auto report = detection_rate(clean, adversarial);
  auto j = artifact_header(cfg);
  j.update(to_json(report));
  const auto path = next_artifact_path(cfg.run_dir, "defense", "json");
  write_json_artifact(path, j);
  std::cout << render_defense_table(report) << "-> " << path.string() << "\n";
  return 0;
}

inline int cmd_report(const RunConfig& cfg) {
  const auto metrics_path = require_artifact(cfg.run_dir, "metrics", "json", "eval");
  const auto metrics = read_json_artifact(metrics_path);
  std::ostringstream out;
  std::ostringstream csv;
  csv << "metric,k,numerator,denominator,fraction\n";
  out << "Attack evaluation (" << metrics.at("source_artifact").get<std::string>() << ")\n\n";
  out << "Metric   Success   Rate (%)\n";
  for (const char* key : {"asr", "aca", "bca"}) {
    const auto& m = metrics.at(key);
    out << m.at("kind").get<std::string>() << "      " << m.at("numerator").get<size_t>() << "/"
        << m.at("denominator").get<size_t>() << "     "
        << render_percent(m.at("fraction").get<double>()) << "\n";
    csv << m.at("kind").get<std::string>() << ',' << m.at("k").get<size_t>() << ','
        << m.at("numerator").get<size_t>() << ',' << m.at("denominator").get<size_t>() << ','
        << m.at("fraction").get<double>() << "\n";
  }
  if (metrics.contains("sweep")) {
    out << "\nTop-k   ASR (%)   ACA (%)\n";
    for (const auto& row : metrics["sweep"]) {
      out << "Top-" << row.at("k").get<size_t>() << "   "
          << render_percent(row.at("asr").at("fraction").get<double>()) << "     "
          << render_percent(row.at("aca").at("fraction").get<double>()) << "\n";
      csv << "ASR_sweep," << row.at("k").get<size_t>() << ','
          << row.at("asr").at("numerator").get<size_t>() << ','
          << row.at("asr").at("denominator").get<size_t>() << ','
          << row.at("asr").at("fraction").get<double>() << "\n";
      csv << "ACA_sweep," << row.at("k").get<size_t>() << ','
          << row.at("aca").at("numerator").get<size_t>() << ','
          << row.at("aca").at("denominator").get<size_t>() << ','
          << row.at("aca").at("fraction").get<double>() << "\n";
    }
  }
  if (metrics.contains("rephrase")) {
    out << "\nModified words   ASR (%)\n";
    for (const auto& row : metrics["rephrase"]) {
      out << row.at("n_modified").get<int>() << "                "
          << render_percent(row.at("asr").at("fraction").get<double>()) << "\n";
      csv << "ASR_rephrase," << row.at("n_modified").get<int>() << ','
          << row.at("asr").at("numerator").get<size_t>() << ','
          << row.at("asr").at("denominator").get<size_t>() << ','
          << row.at("asr").at("fraction").get<double>() << "\n";
    }
  }
  if (auto defense_path = latest_artifact(cfg.run_dir, "defense", "json")) {
    const auto defense = read_json_artifact(*defense_path);
    out << "\nDetector     Detection Rate (%)   Clean FPR (%)\n";
    for (const auto& d : defense.at("detectors")) {
      out << d.at("name").get<std::string>() << "   "
          << render_percent(d.at("detection_rate").get<double>()) << "   "
          << render_percent(d.at("clean_false_positive_rate").get<double>()) << "\n";
    }
  }

  const auto report_path = next_artifact_path(cfg.run_dir, "report", "txt");
  {
    std::ofstream f(report_path, std::ios::trunc);
    if (!f) throw IoError("cannot write report: " + report_path.string());
    f << out.str();
  }
  const auto csv_path = next_artifact_path(cfg.run_dir, "report", "csv");
  {
    std::ofstream f(csv_path, std::ios::trunc);
    if (!f) throw IoError("cannot write report CSV: " + csv_path.string());
    f << csv.str();
  }
  std::cout << out.str() << "\n-> " << report_path.string() << "\n";
  return 0;
}

}  // namespace detail

// Entry point shared by the binary and the tests. Exit codes: 0 success,
// 1 generic failure, 2 config error, 3 missing artifact, 4 provider
// failure.
inline int run_subcommand(std::vector<std::string> args) {
  CLI::App app{"Red-team toolkit for retrieval-augmented generation pipelines"};
  app.set_version_flag("--version", std::string(kVersion));

  std::string command;
  app.add_option("command", command,
                 "Subcommand: ingest | index | attack-init | attack-queries | attack-optimize | "
                 "inject | eval | defend | report")
      ->required();

  // Config file is applied first; every flag below overrides it.
  std::string config_path;
  for (size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--config") config_path = args[i + 1];
  }
  RunConfig cfg;
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config file: " + config_path);
      nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
      if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + config_path);
      apply_config_json(j, cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  app.add_option("--config", config_path, "JSON config file (flags override its values)");
  app.add_option("--corpus", cfg.corpus_path, "Corpus JSONL file")->capture_default_str();
  app.add_option("--run-dir", cfg.run_dir, "Run directory for artifacts")->capture_default_str();
  app.add_option("--embedder-kind", cfg.embedder_kind, "local_hash | remote")
      ->capture_default_str();
  app.add_option("--embedder-dim", cfg.embedder_dim, "Embedding dimension")->capture_default_str();
  app.add_flag("--embedder-role-split", cfg.embedder_role_split,
               "Remote embedder uses distinct query/document encoders");
  app.add_option("--embedder-endpoint", cfg.embedder_endpoint, "Remote embedder URL")
      ->capture_default_str();
  app.add_option("--embedder-model", cfg.embedder_model, "Remote embedder model name")
      ->capture_default_str();
  app.add_option("--embedder-credential-env", cfg.embedder_credential_env,
                 "Environment variable holding the embedder credential")
      ->capture_default_str();
  app.add_option("--provider-kind", cfg.provider_kind, "scripted | remote")->capture_default_str();
  app.add_option("--provider-rules", cfg.provider_rules_path, "Scripted provider rule file")
      ->capture_default_str();
  app.add_option("--provider-endpoint", cfg.provider_endpoint, "Remote provider URL")
      ->capture_default_str();
  app.add_option("--provider-model", cfg.provider_model, "Remote provider model name")
      ->capture_default_str();
  app.add_option("--provider-credential-env", cfg.provider_credential_env,
                 "Environment variable holding the provider credential")
      ->capture_default_str();
  app.add_option("--alpha1", cfg.alpha1, "Intent-alignment acceptance threshold")
      ->capture_default_str();
  app.add_option("--alpha2", cfg.alpha2, "Naturalness acceptance threshold")
      ->capture_default_str();
  app.add_option("--max-iters", cfg.max_iters, "Trigger refinement round budget")
      ->capture_default_str();
  app.add_option("--tau", cfg.tau, "Query diversity threshold")->capture_default_str();
  app.add_option("--p-base", cfg.p_base, "Base instructional prompt")->capture_default_str();
  app.add_option("--target-concept", cfg.target_concept, "Targeted concept keyword")
      ->capture_default_str();
  app.add_option("--target-answer", cfg.target_answer, "Attacker's target answer")
      ->capture_default_str();
  app.add_option("--intent-keyword", cfg.intent_keyword,
                 "Intent keyword appended to untargeted queries for the pre-injection baseline")
      ->capture_default_str();
  app.add_option("--trigger-domain", cfg.trigger_domain, "Phrase-initialization domain slot")
      ->capture_default_str();
  app.add_option("--trigger-intent", cfg.trigger_intent, "Phrase-initialization intent slot")
      ->capture_default_str();
  app.add_option("--stage1-docs", cfg.stage1_docs, "Number of synthesized documents (K)")
      ->capture_default_str();
  app.add_option("--targeted-seed", cfg.targeted_seed, "Targeted base query")
      ->capture_default_str();
  app.add_option("--untargeted-seed", cfg.untargeted_seed, "Untargeted base query")
      ->capture_default_str();
  app.add_option("--target-size", cfg.query_target_size, "Query set size")->capture_default_str();
  app.add_option("--query-max-attempts", cfg.query_max_attempts,
                 "Rewrite attempt budget (0 = 20x target size)")
      ->capture_default_str();
  app.add_option("--gold-answer", cfg.gold_answer, "Gold answer for untargeted queries")
      ->capture_default_str();
  app.add_option("--optimize-fraction", cfg.optimize_fraction,
                 "Leading fraction of each query set visible to the optimizer")
      ->capture_default_str();
  app.add_option("--lambda1", cfg.weights.lambda1, "Attack-effectiveness weight")
      ->capture_default_str();
  app.add_option("--lambda2", cfg.weights.lambda2, "False-retrieval repulsion weight")
      ->capture_default_str();
  app.add_option("--lambda3", cfg.weights.lambda3, "Clean-performance weight")
      ->capture_default_str();
  app.add_option("--population", cfg.ga.population, "GA population size")->capture_default_str();
  app.add_option("--elite-fraction", cfg.ga.elite_fraction, "GA elite fraction")
      ->capture_default_str();
  app.add_option("--mutation-rate", cfg.ga.mutation_rate, "Per-token mutation probability")
      ->capture_default_str();
  app.add_option("--max-generations", cfg.ga.max_generations, "GA generation budget")
      ->capture_default_str();
  app.add_option("--patience", cfg.ga.patience, "Generations of stall before stopping")
      ->capture_default_str();
  app.add_option("--epsilon", cfg.ga.epsilon, "Minimum improvement that resets patience")
      ->capture_default_str();
  app.add_option("--rng-seed", cfg.ga.rng_seed, "GA random seed")->capture_default_str();
  app.add_option("--clean-sample-size", cfg.ga.clean_sample_size,
                 "Clean documents sampled for the fitness context")
      ->capture_default_str();
  app.add_option("--thesaurus", cfg.thesaurus_path, "Synonym table JSON file")
      ->capture_default_str();
  app.add_option("--k", cfg.k, "Retrieval depth")->capture_default_str();
  app.add_option("--metric", cfg.metric, "cosine | dot")->capture_default_str();
  app.add_option("--sweep-ks", cfg.sweep_ks, "Ascending k values for the sweep")
      ->capture_default_str();
  app.add_flag("--eval-sweep", cfg.eval_sweep, "Include the top-k sweep in eval");
  app.add_flag("--eval-rephrase", cfg.eval_rephrase, "Include rephrase robustness in eval");
  app.add_option("--rephrase-words", cfg.rephrase_words, "Maximum words replaced in rephrase mode")
      ->capture_default_str();
  app.add_option("--rephrase-seed", cfg.rephrase_seed, "Seed for rephrase word selection")
      ->capture_default_str();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // --help / --version
      std::cout << app.help();
      return 0;
    }
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    RunLock lock(cfg.run_dir);
    detail::echo_config(cfg);
    if (command == "ingest") return detail::cmd_ingest(cfg);
    if (command == "index") return detail::cmd_index(cfg);
    if (command == "attack-init") return detail::cmd_attack_init(cfg);
    if (command == "attack-queries") return detail::cmd_attack_queries(cfg);
    if (command == "attack-optimize") return detail::cmd_attack_optimize(cfg);
    if (command == "inject") return detail::cmd_inject(cfg);
    if (command == "eval") return detail::cmd_eval(cfg);
    if (command == "defend") return detail::cmd_defend(cfg);
    if (command == "report") return detail::cmd_report(cfg);
    std::cerr << "config error: unknown subcommand '" << command << "'\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const MissingArtifactError& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return 3;
  } catch (const ProviderError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ragred
