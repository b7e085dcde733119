#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragred/corpus.hpp"
#include "ragred/error.hpp"
#include "ragred/http_client.hpp"
#include "ragred/prompts.hpp"
#include "ragred/text.hpp"

namespace ragred {

struct GenerationRequest {
  std::string system;
  std::string prompt;
  int max_tokens = 256;
  double temperature = 0.0;
  std::optional<uint64_t> seed;
};

// Ordered pattern -> template rule for the scripted provider. Patterns are
// ECMAScript regexes searched against "system\nprompt"; templates may
// reference capture groups as {1}..{9}, the whole match as {0}, and
// {syn:N} applies the provider's fixed synonym map to each word of
// capture N.
struct ScriptedRule {
  std::string pattern;
  std::string output_template;
  bool is_default = false;
};

struct ProviderSpec {
  enum class Kind { scripted, remote };

  Kind kind = Kind::scripted;

  // scripted
  std::vector<ScriptedRule> rules;
  std::map<std::string, std::string> synonyms;

  // remote
  std::string endpoint;
  std::string model;
  std::string credential_env;
  RetryPolicy retry;
  int max_in_flight = 4;

  static ProviderSpec scripted(std::vector<ScriptedRule> rules,
                               std::map<std::string, std::string> synonyms = {}) {
    ProviderSpec spec;
    spec.kind = Kind::scripted;
    spec.rules = std::move(rules);
    spec.synonyms = std::move(synonyms);
    spec.validate();
    return spec;
  }

  static ProviderSpec remote(std::string endpoint, std::string model, std::string credential_env,
                             RetryPolicy retry = {}) {
    ProviderSpec spec;
    spec.kind = Kind::remote;
    spec.endpoint = std::move(endpoint);
    spec.model = std::move(model);
    spec.credential_env = std::move(credential_env);
    spec.retry = retry;
    spec.validate();
    return spec;
  }

  void validate() const {
    if (kind == Kind::scripted) {
      if (rules.empty()) throw ConfigError("scripted provider requires a non-empty rule table");
      size_t defaults = 0;
      for (const auto& r : rules) defaults += r.is_default ? 1 : 0;
      if (defaults != 1) {
        throw ConfigError("scripted provider requires exactly one default rule, found " +
                          std::to_string(defaults));
      }
    } else {
      if (endpoint.empty() || model.empty()) {
        throw ConfigError("remote provider requires endpoint and model");
      }
    }
  }
};

// Rule file layout: {"rules": [{"pattern": ..., "template": ..., "default":
// bool?}, ...], "synonyms": {word: replacement, ...}?}
inline ProviderSpec load_scripted_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scripted rules: " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ParseError(path.string() + ": invalid rule JSON");
  std::vector<ScriptedRule> rules;
  for (const auto& rj : j.at("rules")) {
    ScriptedRule rule;
    rule.pattern = rj.value("pattern", std::string());
    rule.output_template = rj.at("template").get<std::string>();
    rule.is_default = rj.value("default", false);
    rules.push_back(std::move(rule));
  }
  std::map<std::string, std::string> synonyms;
  if (j.contains("synonyms")) synonyms = j["synonyms"].get<std::map<std::string, std::string>>();
  return ProviderSpec::scripted(std::move(rules), std::move(synonyms));
}

namespace detail {

// Maps a word through the scripted synonym table, preserving surrounding
// punctuation and leading capitalization.
inline std::string map_word(const std::string& word,
                            const std::map<std::string, std::string>& synonyms) {
  const std::string core = word_core(word);
  auto it = synonyms.find(core);
  if (core.empty() || it == synonyms.end()) return word;
  size_t b = 0;
  size_t e = word.size();
  while (b < e && !is_token_char(word[b])) ++b;
  while (e > b && !is_token_char(word[e - 1])) --e;
  std::string replacement = it->second;
  if (b < e && word[b] >= 'A' && word[b] <= 'Z' && !replacement.empty() &&
      replacement[0] >= 'a' && replacement[0] <= 'z') {
    replacement[0] = static_cast<char>(replacement[0] - ('a' - 'A'));
  }
  return word.substr(0, b) + replacement + word.substr(e);
}

inline std::string apply_synonyms(const std::string& text,
                                  const std::map<std::string, std::string>& synonyms) {
  auto words = split_words(text);
  for (auto& w : words) w = map_word(w, synonyms);
  return join_words(words);
}

inline std::string instantiate_template(const std::string& tmpl, const std::smatch& match,
                                        const std::map<std::string, std::string>& synonyms) {
  std::string out;
  size_t i = 0;
  auto group = [&](size_t n) -> std::string {
    if (n < match.size()) return match[n].str();
    return {};
  };
  while (i < tmpl.size()) {
    if (tmpl[i] == '{' && i + 2 < tmpl.size()) {
      // {N}
      if (tmpl[i + 1] >= '0' && tmpl[i + 1] <= '9' && tmpl[i + 2] == '}') {
        out += group(static_cast<size_t>(tmpl[i + 1] - '0'));
        i += 3;
        continue;
      }
      // {syn:N}
      if (tmpl.compare(i, 5, "{syn:") == 0 && i + 6 < tmpl.size() && tmpl[i + 5] >= '0' &&
          tmpl[i + 5] <= '9' && tmpl[i + 6] == '}') {
        out += apply_synonyms(group(static_cast<size_t>(tmpl[i + 5] - '0')), synonyms);
        i += 7;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

inline std::string generate_scripted(const ProviderSpec& spec, const GenerationRequest& req) {
  const std::string text = req.system + "\n" + req.prompt;
  const ScriptedRule* fallback = nullptr;
  for (const auto& rule : spec.rules) {
    if (rule.is_default) {
      fallback = &rule;
      continue;
    }
    std::regex re(rule.pattern, std::regex::ECMAScript);
    std::smatch match;
    if (std::regex_search(text, match, re)) {
      return instantiate_template(rule.output_template, match, spec.synonyms);
    }
  }
  // validate() guarantees a default exists
  std::smatch whole;
  std::regex_search(text, whole, std::regex("[\\s\\S]*"));
  return instantiate_template(fallback->output_template, whole, spec.synonyms);
}

inline std::string generate_remote(const ProviderSpec& spec, const GenerationRequest& req) {
  nlohmann::json body;
  body["model"] = spec.model;
  body["system"] = req.system;
  body["prompt"] = req.prompt;
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_tokens;
  if (req.seed) body["seed"] = *req.seed;
  auto response =
      post_json_with_retry(spec.endpoint, body, spec.credential_env, spec.retry, spec.max_in_flight);
  if (!response.contains("text") || !response["text"].is_string()) {
    throw ProviderError("completion response missing 'text' field");
  }
  return response["text"].get<std::string>();
}

}  // namespace detail

inline std::string generate(const ProviderSpec& spec, const GenerationRequest& req) {
  spec.validate();
  if (req.prompt.empty()) throw PreconditionError("generation request prompt is empty");
  if (spec.kind == ProviderSpec::Kind::scripted && req.temperature != 0.0 && !req.seed) {
    throw ConfigError("scripted provider requires temperature 0 or an explicit seed");
  }
  std::string out = spec.kind == ProviderSpec::Kind::scripted ? detail::generate_scripted(spec, req)
                                                              : detail::generate_remote(spec, req);
  if (trim(out).empty()) throw ProviderError("provider returned an empty completion");
  return out;
}

// RAG answering over ranked contexts. The scripted provider implements the
// desk-scale semantics: the answer is the answer_key of the highest-ranked
// context that has one, or the literal fallback when none does. The remote
// provider receives the assembled answer-generation prompt.
inline std::string rag_answer(const ProviderSpec& spec, const std::string& query,
                              std::span<const Document> contexts) {
  spec.validate();
  if (spec.kind == ProviderSpec::Kind::scripted) {
    for (const auto& doc : contexts) {
      if (doc.answer_key && !doc.answer_key->empty()) return *doc.answer_key;
    }
    return std::string(prompts::kAnswerFallback);
  }
  std::vector<std::string> texts;
  texts.reserve(contexts.size());
  for (const auto& doc : contexts) texts.push_back(doc.text);
  GenerationRequest req;
  req.system = std::string(prompts::kRagAnswerSystem);
  req.prompt = prompts::rag_answer_prompt(texts, query);
  return generate(spec, req);
}

}  // namespace ragred
