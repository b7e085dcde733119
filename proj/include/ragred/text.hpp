#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ragred/error.hpp"

namespace ragred {

// Stable 64-bit FNV-1a. This is the published hash behind the local
// embedder's token buckets: h = 14695981039346656037; per byte
// h ^= byte, h *= 1099511628211 (mod 2^64).
inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= static_cast<uint64_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string to_hex(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

inline bool is_token_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c + ('a' - 'A')) : c;
}

inline std::string lowercase(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) out.push_back(ascii_lower(c));
  return out;
}

// Lowercase and split on runs of non-alphanumeric bytes. Multi-byte UTF-8
// sequences act as separators, which keeps the output identical on every
// platform regardless of locale.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (is_token_char(c)) {
      cur.push_back(ascii_lower(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

// Whitespace-split words, punctuation kept attached. Used for the GA
// genome where join(" ") must invert the split.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) {
        words.push_back(std::move(cur));
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

inline std::string join_words(const std::vector<std::string>& words, std::string_view sep = " ") {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out.append(sep);
    out.append(words[i]);
  }
  return out;
}

// Strips leading/trailing non-alphanumeric characters from a word and
// lowercases it: "Budget-friendly," -> "budget-friendly".
inline std::string word_core(std::string_view word) {
  size_t b = 0;
  size_t e = word.size();
  while (b < e && !is_token_char(word[b])) ++b;
  while (e > b && !is_token_char(word[e - 1])) --e;
  return lowercase(word.substr(b, e - b));
}

inline bool contains(std::string_view haystack, std::string_view needle) {
  return haystack.find(needle) != std::string_view::npos;
}

inline bool icontains(std::string_view haystack, std::string_view needle) {
  return contains(lowercase(haystack), lowercase(needle));
}

inline std::string trim(std::string_view s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  if (from.empty()) return text;
  size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

// Canonical shared stopword list: these are the content-free tokens
// excluded from spamicity scoring and frozen out of GA mutation.
// data/stopwords.txt ships the same list; a test keeps them in sync.
inline const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "a",     "about",  "again",   "all",   "also",  "an",    "and",   "any",
      "are",   "as",     "at",      "be",    "been",  "being", "both",  "but",
      "by",    "can",    "could",   "did",   "do",    "does",  "done",  "each",
      "else",  "few",    "for",     "from",  "further", "had", "has",   "have",
      "having", "he",    "her",     "here",  "his",   "how",   "i",     "if",
      "in",    "into",   "is",      "it",    "its",   "just",  "may",   "me",
      "might", "mine",   "more",    "most",  "must",  "my",    "no",    "nor",
      "not",   "of",     "on",      "once",  "only",  "or",    "other", "others",
      "our",   "over",   "own",     "same",  "shall", "she",   "should", "so",
      "some",  "such",   "than",    "that",  "the",   "their", "them",  "then",
      "there", "these",  "they",    "this",  "those", "to",    "too",   "under",
      "us",    "very",   "was",     "we",    "were",  "what",  "when",  "where",
      "which", "who",    "whom",    "whose", "why",   "will",  "with",  "would",
      "you",   "your",
  };
  return words;
}

// Nearest-rank percentile: sort ascending, take element at rank
// ceil(p/100 * n) (1-based, clamped). Crisp arithmetic for threshold
// tests; no interpolation.
inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw PreconditionError("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<size_t>(std::ceil(p / 100.0 * n));
  rank = std::min(std::max<size_t>(rank, 1), values.size());
  return values[rank - 1];
}

// Deterministic RNG wrapper. mt19937_64 output is pinned by the standard;
// the derived draws below avoid std::uniform_*_distribution, whose
// sequences differ between standard library implementations.
class SeededRng {
public:
  explicit SeededRng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform integer in [0, n). Multiply-shift reduction.
  size_t uniform(size_t n) {
    if (n == 0) throw PreconditionError("uniform(0)");
    return static_cast<size_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Uniform double in [0, 1) with 53 bits of entropy.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Sample k distinct indices from [0, n) via partial Fisher-Yates,
  // returned in draw order.
  std::vector<size_t> sample_indices(size_t n, size_t k) {
    if (k > n) throw PreconditionError("sample_indices: k > n");
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    std::vector<size_t> out;
    out.reserve(k);
    for (size_t i = 0; i < k; ++i) {
      size_t j = i + uniform(n - i);
      std::swap(idx[i], idx[j]);
      out.push_back(idx[i]);
    }
    return out;
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace ragred
