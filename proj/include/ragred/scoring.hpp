#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ragred/corpus.hpp"
#include "ragred/embedding.hpp"
#include "ragred/error.hpp"
#include "ragred/text.hpp"

namespace ragred {

// Add-1 smoothed bigram model trained on clean documents. The first token
// of a text is scored by the unigram distribution, later tokens by the
// bigram conditional whose denominator is the row total, so probabilities
// sum to 1 over vocab + UNK in both cases:
//
//   P(w)        = (c(w) + 1) / (T + V)
//   P(w | prev) = (c(prev, w) + 1) / (sum_x c(prev, x) + V)
//
// with V = |vocab| + 1 and out-of-vocabulary tokens mapped to UNK.
class NgramLanguageModel {
public:
  static constexpr int kOrder = 2;

  static NgramLanguageModel train_texts(std::span<const std::string> texts) {
    NgramLanguageModel lm;
    for (const auto& text : texts) {
      const auto toks = tokenize(text);
      for (size_t i = 0; i < toks.size(); ++i) {
        ++lm.unigram_[toks[i]];
        ++lm.total_tokens_;
        if (i + 1 < toks.size()) {
          ++lm.bigram_[toks[i]][toks[i + 1]];
          ++lm.row_total_[toks[i]];
        }
      }
    }
    return lm;
  }

  static NgramLanguageModel train(std::span<const Document> docs) {
    std::vector<std::string> texts;
    texts.reserve(docs.size());
    for (const auto& d : docs) texts.push_back(d.text);
    return train_texts(texts);
  }

  size_t vocab_size() const { return unigram_.size(); }
  size_t total_tokens() const { return total_tokens_; }

  size_t unigram_count(const std::string& tok) const {
    auto it = unigram_.find(tok);
    return it == unigram_.end() ? 0 : it->second;
  }

  size_t bigram_count(const std::string& prev, const std::string& tok) const {
    auto it = bigram_.find(prev);
    if (it == bigram_.end()) return 0;
    auto jt = it->second.find(tok);
    return jt == it->second.end() ? 0 : jt->second;
  }

  // Natural-log probability of the first token of a text.
  double unigram_logprob(const std::string& tok) const {
    const double v = smoothing_span();
    const double c = in_vocab(tok) ? static_cast<double>(unigram_.at(tok)) : 0.0;
    return std::log((c + 1.0) / (static_cast<double>(total_tokens_) + v));
  }

  double bigram_logprob(const std::string& prev, const std::string& tok) const {
    const double v = smoothing_span();
    const std::string p = in_vocab(prev) ? prev : std::string();
    double c = 0.0;
    double row = 0.0;
    if (!p.empty()) {
      c = static_cast<double>(bigram_count(p, in_vocab(tok) ? tok : std::string("\x1d")));
      auto it = row_total_.find(p);
      row = it == row_total_.end() ? 0.0 : static_cast<double>(it->second);
    }
    return std::log((c + 1.0) / (row + v));
  }

  // Mean natural-log token probability of the text.
  double avg_loglik(std::string_view text) const {
    const auto toks = tokenize(text);
    if (toks.empty()) throw PreconditionError("cannot score text with no tokens");
    double sum = unigram_logprob(toks[0]);
    for (size_t i = 1; i < toks.size(); ++i) {
      sum += bigram_logprob(toks[i - 1], toks[i]);
    }
    return sum / static_cast<double>(toks.size());
  }

  double perplexity(std::string_view text) const { return std::exp(-avg_loglik(text)); }

  void save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["version"] = kArtifactFormatVersion;
    j["order"] = kOrder;
    j["total_tokens"] = total_tokens_;
    j["unigram"] = std::map<std::string, size_t>(unigram_.begin(), unigram_.end());
    nlohmann::json bj = nlohmann::json::object();
    for (const auto& [prev, row] : bigram_) {
      bj[prev] = std::map<std::string, size_t>(row.begin(), row.end());
    }
    j["bigram"] = std::move(bj);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write language model: " + path.string());
    out << j.dump();
  }

  static NgramLanguageModel load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open language model: " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ParseError(path.string() + ": invalid language model file");
    if (j["order"].get<int>() != kOrder) {
      throw ParseError(path.string() + ": unsupported model order");
    }
    NgramLanguageModel lm;
    lm.total_tokens_ = j["total_tokens"].get<size_t>();
    for (const auto& [k, v] : j["unigram"].items()) lm.unigram_[k] = v.get<size_t>();
    for (const auto& [prev, row] : j["bigram"].items()) {
      for (const auto& [tok, c] : row.items()) {
        lm.bigram_[prev][tok] = c.get<size_t>();
        lm.row_total_[prev] += c.get<size_t>();
      }
    }
    return lm;
  }

private:
  bool in_vocab(const std::string& tok) const { return unigram_.count(tok) > 0; }
  double smoothing_span() const { return static_cast<double>(unigram_.size()) + 1.0; }

  std::unordered_map<std::string, size_t> unigram_;
  std::unordered_map<std::string, std::unordered_map<std::string, size_t>> bigram_;
  std::unordered_map<std::string, size_t> row_total_;
  size_t total_tokens_ = 0;
};

// Intent alignment: cosine similarity of the two prompts under the query
// encoder.
inline double intent_score(const EmbedderSpec& spec, std::string_view p_base,
                           std::string_view p_adv) {
  return similarity(Metric::cosine, embed_text(spec, p_base, Role::query),
                    embed_text(spec, p_adv, Role::query));
}

struct NaturalnessWeights {
  double loglik = 0.6;
  double repetition = 0.3;
  double length_regularity = 0.1;
};

namespace detail {

// Fraction of adjacent-token bigram occurrences that repeat an earlier
// bigram of the same text: (m - distinct) / m over m = n - 1 pairs.
inline double repeated_bigram_fraction(const std::vector<std::string>& toks) {
  if (toks.size() < 2) return 0.0;
  std::set<std::pair<std::string, std::string>> distinct;
  for (size_t i = 0; i + 1 < toks.size(); ++i) {
    distinct.emplace(toks[i], toks[i + 1]);
  }
  const double m = static_cast<double>(toks.size() - 1);
  return (m - static_cast<double>(distinct.size())) / m;
}

// 1 / (1 + cv) over tokenized sentence lengths, sentences split on .!?
// runs; 1.0 when the text has at most one sentence.
inline double sentence_length_regularity(std::string_view text) {
  std::vector<double> lengths;
  std::string cur;
  auto flush = [&] {
    const auto toks = tokenize(cur);
    if (!toks.empty()) lengths.push_back(static_cast<double>(toks.size()));
    cur.clear();
  };
  for (char c : text) {
    if (c == '.' || c == '!' || c == '?') {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();
  if (lengths.size() <= 1) return 1.0;
  double mean = 0.0;
  for (double l : lengths) mean += l;
  mean /= static_cast<double>(lengths.size());
  double var = 0.0;
  for (double l : lengths) var += (l - mean) * (l - mean);
  var /= static_cast<double>(lengths.size());
  const double cv = std::sqrt(var) / mean;
  return 1.0 / (1.0 + cv);
}

}  // namespace detail

// Deterministic naturalness composite in [0, 1]:
//   w1 * exp(avg_loglik) + w2 * (1 - repeated_bigram_fraction)
//     + w3 * sentence_length_regularity
// Monotone increasing in model likelihood and decreasing in repetition.
inline double naturalness_score(std::string_view text, const NgramLanguageModel& lm,
                                const NaturalnessWeights& w = {}) {
  const auto toks = tokenize(text);
  if (toks.empty()) throw PreconditionError("cannot score empty text");
  const double likelihood = std::exp(lm.avg_loglik(text));
  const double repetition = 1.0 - detail::repeated_bigram_fraction(toks);
  const double regularity = detail::sentence_length_regularity(text);
  return w.loglik * likelihood + w.repetition * repetition + w.length_regularity * regularity;
}

inline double perplexity_score(std::string_view text, const NgramLanguageModel& lm) {
  return lm.perplexity(text);
}

inline double avg_token_loglik(std::string_view text, const NgramLanguageModel& lm) {
  return lm.avg_loglik(text);
}

// Dominance of the most-repeated content term: max over non-stopword
// tokens of count(token) / total tokens. All-stopword text scores 0.
inline double spamicity_score(std::string_view text,
                              const std::set<std::string>& stop = stopwords()) {
  const auto toks = tokenize(text);
  if (toks.empty()) throw PreconditionError("cannot score empty text");
  std::unordered_map<std::string, size_t> counts;
  for (const auto& t : toks) {
    if (stop.count(t) == 0) ++counts[t];
  }
  if (counts.empty()) return 0.0;
  size_t max_count = 0;
  for (const auto& [_, c] : counts) max_count = std::max(max_count, c);
  return static_cast<double>(max_count) / static_cast<double>(toks.size());
}

struct ScoreReport {
  std::optional<double> s_intent;
  std::optional<double> s_fluency;
  std::optional<double> perplexity;
  std::optional<double> avg_loglik;
  std::optional<double> spamicity;
};

}  // namespace ragred
