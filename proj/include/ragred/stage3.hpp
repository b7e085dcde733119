#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragred/corpus.hpp"
#include "ragred/embedding.hpp"
#include "ragred/error.hpp"
#include "ragred/stage1.hpp"
#include "ragred/stage2.hpp"
#include "ragred/text.hpp"

namespace ragred {

struct FitnessComponents {
  double f1 = 0.0;  // adversarial docs vs targeted joint queries (maximize)
  double f2 = 0.0;  // clean docs vs targeted joint queries (minimize)
  double f3 = 0.0;  // clean docs vs untargeted joint queries (maximize)
  double f_total = 0.0;
};

struct FitnessWeights {
  double lambda1 = 1.0;
  double lambda2 = 0.5;
  double lambda3 = 0.5;

  void validate() const {
    for (double l : {lambda1, lambda2, lambda3}) {
      if (l < 0.0 || l > 1.0) throw ConfigError("fitness weights must lie in [0, 1]");
    }
  }

  double combine(double f1, double f2, double f3) const {
    return lambda1 * f1 - lambda2 * f2 + lambda3 * f3;
  }
};

struct GAConfig {
  int population = 24;
  double elite_fraction = 0.25;
  double mutation_rate = 0.10;
  int max_generations = 50;
  int patience = 5;
  double epsilon = 1e-4;
  uint64_t rng_seed = 20240901;
  int clean_sample_size = 20;

  void validate() const {
    if (population < 4) throw ConfigError("GA population must be >= 4");
    if (elite_fraction <= 0.0 || elite_fraction >= 1.0) {
      throw ConfigError("elite_fraction must lie in (0, 1)");
    }
    if (mutation_rate < 0.0 || mutation_rate > 1.0) {
      throw ConfigError("mutation_rate must lie in [0, 1]");
    }
    if (max_generations < 1) throw ConfigError("max_generations must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (epsilon < 0.0) throw ConfigError("epsilon must be >= 0");
    if (clean_sample_size < 1) throw ConfigError("clean_sample_size must be >= 1");
  }
};

// The adversary's clean-document subset: a seeded sample of the knowledge
// base's clean documents (all of them when fewer than requested).
struct CleanDocSample {
  std::vector<Document> docs;
  uint64_t seed = 0;

  static CleanDocSample sample(const KnowledgeBase& kb, int size, uint64_t seed) {
    auto clean = kb.with_provenance(Provenance::clean);
    CleanDocSample out;
    out.seed = seed;
    if (static_cast<int>(clean.size()) <= size) {
      out.docs = std::move(clean);
      return out;
    }
    SeededRng rng(seed);
    for (size_t idx : rng.sample_indices(clean.size(), static_cast<size_t>(size))) {
      out.docs.push_back(clean[idx]);
    }
    return out;
  }
};

// Offline word -> synonym-list table backing GA mutation.
class Thesaurus {
public:
  Thesaurus() = default;

  static Thesaurus from_map(std::map<std::string, std::vector<std::string>> entries) {
    Thesaurus t;
    t.entries_ = std::move(entries);
    return t;
  }

  static Thesaurus load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open thesaurus: " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(path.string() + ": invalid thesaurus");
    Thesaurus t;
    for (const auto& [word, syns] : j.items()) {
      t.entries_[word] = syns.get<std::vector<std::string>>();
    }
    return t;
  }

  const std::vector<std::string>* lookup(const std::string& word) const {
    auto it = entries_.find(word);
    if (it == entries_.end() || it->second.empty()) return nullptr;
    return &it->second;
  }

  size_t size() const { return entries_.size(); }

private:
  std::map<std::string, std::vector<std::string>> entries_;
};

// Whitespace-word genome slot. Token count is fixed at construction
// (mutation substitutes in place and crossover swaps aligned tails), so
// immutable positions carry their original token forever.
struct TokenSeq {
  std::vector<std::string> tokens;
  std::vector<uint8_t> is_mutable;

  std::string detokenize() const { return join_words(tokens); }
};

struct CandidatePair {
  TokenSeq prompt;
  std::vector<TokenSeq> docs;
  std::optional<FitnessComponents> fitness;
};

using Population = std::vector<CandidatePair>;

namespace detail {

// filter_words: stopwords + trigger tokens + target-answer tokens. A word
// is frozen when any of its alphanumeric subtokens is filtered.
inline std::set<std::string> build_filter_words(const std::string& trigger_phrase,
                                                const std::string& target_answer) {
  std::set<std::string> filter(stopwords().begin(), stopwords().end());
  for (const auto& t : tokenize(trigger_phrase)) filter.insert(t);
  for (const auto& t : tokenize(target_answer)) filter.insert(t);
  return filter;
}

inline TokenSeq make_token_seq(const std::string& text, const std::set<std::string>& filter) {
  TokenSeq seq;
  seq.tokens = split_words(text);
  seq.is_mutable.reserve(seq.tokens.size());
  for (const auto& word : seq.tokens) {
    bool frozen = false;
    const auto subtokens = tokenize(word);
    if (subtokens.empty()) frozen = true;
    for (const auto& sub : subtokens) {
      if (filter.count(sub)) {
        frozen = true;
        break;
      }
    }
    seq.is_mutable.push_back(frozen ? 0 : 1);
  }
  return seq;
}

// Per-token synonym substitution at the given rate. Replacement preserves
// edge punctuation and leading capitalization of the original word.
inline void mutate_tokens(TokenSeq& seq, const Thesaurus& thesaurus, double rate, SeededRng& rng) {
  for (size_t i = 0; i < seq.tokens.size(); ++i) {
    if (!seq.is_mutable[i]) continue;
    if (rng.uniform01() >= rate) continue;
    const std::string core = word_core(seq.tokens[i]);
    const auto* syns = thesaurus.lookup(core);
    if (syns == nullptr) continue;
    const std::string& pick = (*syns)[rng.uniform(syns->size())];
    std::map<std::string, std::string> one{{core, pick}};
    seq.tokens[i] = map_word(seq.tokens[i], one);
  }
}

// Single-point crossover between aligned equal-length slots. Cut points in
// [1, len-1]; slots shorter than two tokens copy the first parent.
inline TokenSeq crossover_slot(const TokenSeq& a, const TokenSeq& b, SeededRng& rng) {
  if (a.tokens.size() != b.tokens.size()) {
    throw Error("crossover requires aligned slots of equal length");
  }
  const size_t len = a.tokens.size();
  if (len < 2) return a;
  const size_t cut = 1 + rng.uniform(len - 1);
  TokenSeq child;
  child.is_mutable = a.is_mutable;
  child.tokens.reserve(len);
  for (size_t i = 0; i < cut; ++i) child.tokens.push_back(a.tokens[i]);
  for (size_t i = cut; i < len; ++i) child.tokens.push_back(b.tokens[i]);
  return child;
}

// Tournament of 3 over cached total fitness; ties go to the lower index.
inline size_t tournament_select(const Population& pop, SeededRng& rng) {
  size_t best = rng.uniform(pop.size());
  for (int i = 1; i < 3; ++i) {
    const size_t challenger = rng.uniform(pop.size());
    const double cb = pop[challenger].fitness->f_total;
    const double bb = pop[best].fitness->f_total;
    if (cb > bb || (cb == bb && challenger < best)) best = challenger;
  }
  return best;
}

}  // namespace detail

// Precomputed fitness inputs shared by every candidate: clean-document
// embeddings are fixed, joint prompt-query embeddings are per candidate.
struct FitnessContext {
  EmbedderSpec spec;
  FitnessWeights weights;
  std::vector<std::string> targeted_queries;
  std::vector<std::string> untargeted_queries;
  std::vector<EmbeddingVector> clean_doc_embeddings;

  FitnessContext(const EmbedderSpec& embedder, FitnessWeights w,
                 std::vector<std::string> targeted, std::vector<std::string> untargeted,
                 std::span<const Document> clean_docs)
      : spec(embedder),
        weights(w),
        targeted_queries(std::move(targeted)),
        untargeted_queries(std::move(untargeted)) {
    weights.validate();
    if (targeted_queries.empty() || untargeted_queries.empty() || clean_docs.empty()) {
      throw PreconditionError("fitness requires non-empty Q_t, Q_c and clean documents");
    }
    clean_doc_embeddings.reserve(clean_docs.size());
    for (const auto& d : clean_docs) {
      clean_doc_embeddings.push_back(embed_text(spec, d.text, Role::document));
    }
  }
};

// Double-mean objectives:
//   f1 = mean_{q in Q_t} mean_{d in D_a} cos(E_d(d), joint(p, q))
//   f2 = mean_{q in Q_t} mean_{d in D_c} cos(E_d(d), joint(p, q))
//   f3 = mean_{q in Q_c} mean_{d in D_c} cos(E_d(d), joint(p, q))
//   f_total = l1*f1 - l2*f2 + l3*f3
inline FitnessComponents fitness_components(const CandidatePair& cand, const FitnessContext& ctx) {
  const std::string prompt_text = cand.prompt.detokenize();
  std::vector<EmbeddingVector> adv_embeddings;
  adv_embeddings.reserve(cand.docs.size());
  for (const auto& doc : cand.docs) {
    adv_embeddings.push_back(embed_text(ctx.spec, doc.detokenize(), Role::document));
  }
  if (adv_embeddings.empty()) throw PreconditionError("candidate has no adversarial documents");

  auto mean_sim = [](const std::vector<EmbeddingVector>& docs, const EmbeddingVector& joint) {
    double sum = 0.0;
    for (const auto& d : docs) sum += similarity(Metric::cosine, d, joint);
    return sum / static_cast<double>(docs.size());
  };

  FitnessComponents out;
  for (const auto& q : ctx.targeted_queries) {
    const auto joint = joint_embed(ctx.spec, prompt_text, q);
    out.f1 += mean_sim(adv_embeddings, joint);
    out.f2 += mean_sim(ctx.clean_doc_embeddings, joint);
  }
  out.f1 /= static_cast<double>(ctx.targeted_queries.size());
  out.f2 /= static_cast<double>(ctx.targeted_queries.size());
  for (const auto& q : ctx.untargeted_queries) {
    const auto joint = joint_embed(ctx.spec, prompt_text, q);
    out.f3 += mean_sim(ctx.clean_doc_embeddings, joint);
  }
  out.f3 /= static_cast<double>(ctx.untargeted_queries.size());
  out.f_total = ctx.weights.combine(out.f1, out.f2, out.f3);
  return out;
}

// Convenience overload matching the operation contract directly.
inline FitnessComponents fitness_components(const CandidatePair& cand,
                                            const std::vector<std::string>& targeted_queries,
                                            const std::vector<std::string>& untargeted_queries,
                                            std::span<const Document> clean_docs,
                                            const EmbedderSpec& spec, FitnessWeights weights) {
  FitnessContext ctx(spec, weights, targeted_queries, untargeted_queries, clean_docs);
  return fitness_components(cand, ctx);
}

inline void score_population(Population& pop, const FitnessContext& ctx) {
  for (auto& cand : pop) {
    if (!cand.fitness) cand.fitness = fitness_components(cand, ctx);
  }
}

// Candidate 0 is the unmodified stage-1 pair; the rest are synonym-seeded
// variants mutated across the whole genome at mutation_rate.
inline Population init_population(const AdversarialArtifacts& artifacts, const Thesaurus& thesaurus,
                                  const GAConfig& cfg, SeededRng& rng) {
  cfg.validate();
  artifacts.validate();
  const auto filter =
      detail::build_filter_words(artifacts.trigger.phrase, artifacts.target_answer);
  CandidatePair base;
  base.prompt = detail::make_token_seq(artifacts.p_adv, filter);
  for (const auto& doc : artifacts.docs) {
    base.docs.push_back(detail::make_token_seq(doc.text, filter));
  }
  Population pop;
  pop.reserve(static_cast<size_t>(cfg.population));
  pop.push_back(base);
  for (int i = 1; i < cfg.population; ++i) {
    CandidatePair cand = base;
    detail::mutate_tokens(cand.prompt, thesaurus, cfg.mutation_rate, rng);
    for (auto& doc : cand.docs) detail::mutate_tokens(doc, thesaurus, cfg.mutation_rate, rng);
    pop.push_back(std::move(cand));
  }
  return pop;
}

// One generation: rank by cached fitness (ties by candidate index), copy
// the elite unchanged, refill with tournament parents crossed per aligned
// slot; each offspring then mutates one uniformly chosen component.
inline Population evolve_generation(const Population& pop, const FitnessContext& ctx,
                                    const Thesaurus& thesaurus, const GAConfig& cfg,
                                    SeededRng& rng) {
  Population scored = pop;
  score_population(scored, ctx);

  std::vector<size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const double fa = scored[a].fitness->f_total;
    const double fb = scored[b].fitness->f_total;
    if (fa != fb) return fa > fb;
    return a < b;
  });

  const auto elite_count =
      static_cast<size_t>(std::ceil(cfg.elite_fraction * static_cast<double>(scored.size())));
  Population next;
  next.reserve(scored.size());
  for (size_t i = 0; i < elite_count && i < scored.size(); ++i) {
    next.push_back(scored[order[i]]);
  }
  while (next.size() < scored.size()) {
    const auto& parent_a = scored[detail::tournament_select(scored, rng)];
    const auto& parent_b = scored[detail::tournament_select(scored, rng)];
    CandidatePair child;
    child.prompt = detail::crossover_slot(parent_a.prompt, parent_b.prompt, rng);
    child.docs.reserve(parent_a.docs.size());
    for (size_t j = 0; j < parent_a.docs.size(); ++j) {
      child.docs.push_back(detail::crossover_slot(parent_a.docs[j], parent_b.docs[j], rng));
    }
    const size_t component = rng.uniform(1 + child.docs.size());
    if (component == 0) {
      detail::mutate_tokens(child.prompt, thesaurus, cfg.mutation_rate, rng);
    } else {
      detail::mutate_tokens(child.docs[component - 1], thesaurus, cfg.mutation_rate, rng);
    }
    next.push_back(std::move(child));
  }
  return next;
}

struct OptimizeResult {
  std::string p_adv;
  std::vector<Document> docs;
  std::vector<FitnessComponents> history;  // per-generation best, non-decreasing
};

// Runs the generational loop until the best fitness improves by less than
// epsilon for `patience` consecutive generations or max_generations is
// reached. Generation 1 is the scored initial population.
inline OptimizeResult optimize(const AdversarialArtifacts& artifacts,
                               const std::vector<std::string>& targeted_queries,
                               const std::vector<std::string>& untargeted_queries,
                               std::span<const Document> clean_docs, const EmbedderSpec& spec,
                               FitnessWeights weights, const Thesaurus& thesaurus,
                               const GAConfig& cfg) {
  cfg.validate();
  weights.validate();
  FitnessContext ctx(spec, weights, targeted_queries, untargeted_queries, clean_docs);
  SeededRng rng(cfg.rng_seed);

  Population pop = init_population(artifacts, thesaurus, cfg, rng);
  score_population(pop, ctx);

  auto best_of = [](const Population& p) {
    size_t best = 0;
    for (size_t i = 1; i < p.size(); ++i) {
      if (p[i].fitness->f_total > p[best].fitness->f_total) best = i;
    }
    return best;
  };

  std::vector<FitnessComponents> history;
  CandidatePair best = pop[best_of(pop)];
  history.push_back(*best.fitness);

  int stall = 0;
  for (int gen = 2; gen <= cfg.max_generations; ++gen) {
    pop = evolve_generation(pop, ctx, thesaurus, cfg, rng);
    score_population(pop, ctx);
    const CandidatePair& gen_best = pop[best_of(pop)];
    const double improvement = gen_best.fitness->f_total - history.back().f_total;
    if (gen_best.fitness->f_total > best.fitness->f_total) best = gen_best;
    history.push_back(*best.fitness);
    stall = improvement < cfg.epsilon ? stall + 1 : 0;
    if (stall >= cfg.patience) break;
  }

  OptimizeResult result;
  result.p_adv = best.prompt.detokenize();
  result.history = std::move(history);
  result.docs.reserve(artifacts.docs.size());
  for (size_t i = 0; i < artifacts.docs.size(); ++i) {
    Document doc = artifacts.docs[i];
    doc.text = best.docs[i].detokenize();
    result.docs.push_back(std::move(doc));
  }
  return result;
}

inline nlohmann::json to_json(const FitnessComponents& f) {
  return nlohmann::json{{"f1", f.f1}, {"f2", f.f2}, {"f3", f.f3}, {"f_total", f.f_total}};
}

inline FitnessComponents fitness_from_json(const nlohmann::json& j) {
  FitnessComponents f;
  f.f1 = j.at("f1").get<double>();
  f.f2 = j.at("f2").get<double>();
  f.f3 = j.at("f3").get<double>();
  f.f_total = j.at("f_total").get<double>();
  return f;
}

inline void write_history_csv(const std::vector<FitnessComponents>& history,
                              const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write history CSV: " + path.string());
  out << "generation,f1,f2,f3,f_total\n";
  out.precision(17);
  for (size_t i = 0; i < history.size(); ++i) {
    out << (i + 1) << ',' << history[i].f1 << ',' << history[i].f2 << ',' << history[i].f3 << ','
        << history[i].f_total << '\n';
  }
}

}  // namespace ragred
