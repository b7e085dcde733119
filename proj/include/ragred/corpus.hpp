#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ragred/error.hpp"
#include "ragred/text.hpp"
#include "ragred/version.hpp"

namespace ragred {

enum class Provenance { clean, adversarial, baseline };

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::clean: return "clean";
    case Provenance::adversarial: return "adversarial";
    case Provenance::baseline: return "baseline";
  }
  throw Error("unknown provenance");
}

inline Provenance provenance_from_string(std::string_view s) {
  if (s == "clean") return Provenance::clean;
  if (s == "adversarial") return Provenance::adversarial;
  if (s == "baseline") return Provenance::baseline;
  throw ParseError("unknown provenance value: " + std::string(s));
}

struct Document {
  std::string id;
  std::string text;
  std::optional<std::string> answer_key;
  Provenance provenance = Provenance::clean;
  std::map<std::string, std::string> meta;

  bool operator==(const Document&) const = default;
};

struct ProvenanceCounts {
  size_t clean = 0;
  size_t adversarial = 0;
  size_t baseline = 0;

  bool operator==(const ProvenanceCounts&) const = default;

  size_t total() const { return clean + adversarial + baseline; }

  void add(Provenance p) {
    switch (p) {
      case Provenance::clean: ++clean; break;
      case Provenance::adversarial: ++adversarial; break;
      case Provenance::baseline: ++baseline; break;
    }
  }
};

namespace detail {

// id/text non-empty; adversarial documents must declare their trigger in
// meta and carry it verbatim in the text.
inline void validate_document(const Document& doc, const std::string& where) {
  if (doc.id.empty()) throw ParseError(where + ": document id is empty");
  if (doc.text.empty()) throw ParseError(where + ": document text is empty (id=" + doc.id + ")");
  if (doc.provenance == Provenance::adversarial) {
    auto it = doc.meta.find("trigger");
    if (it == doc.meta.end() || it->second.empty()) {
      throw ParseError(where + ": adversarial document " + doc.id +
                       " does not declare its trigger phrase in meta");
    }
    if (!contains(doc.text, it->second)) {
      throw ParseError(where + ": adversarial document " + doc.id +
                       " lacks its declared trigger phrase verbatim");
    }
  }
}

inline nlohmann::json document_to_json(const Document& doc) {
  nlohmann::json j;
  j["id"] = doc.id;
  j["text"] = doc.text;
  if (doc.answer_key) j["answer_key"] = *doc.answer_key;
  j["provenance"] = to_string(doc.provenance);
  if (!doc.meta.empty()) j["meta"] = doc.meta;
  return j;
}

inline Document document_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": record is not an object");
  if (!j.contains("id") || !j["id"].is_string()) throw ParseError(where + ": missing string field 'id'");
  if (!j.contains("text") || !j["text"].is_string()) {
    throw ParseError(where + ": missing string field 'text'");
  }
  Document doc;
  doc.id = j["id"].get<std::string>();
  doc.text = j["text"].get<std::string>();
  if (j.contains("answer_key") && !j["answer_key"].is_null()) {
    doc.answer_key = j["answer_key"].get<std::string>();
  }
  if (j.contains("provenance") && !j["provenance"].is_null()) {
    doc.provenance = provenance_from_string(j["provenance"].get<std::string>());
  }
  if (j.contains("meta") && !j["meta"].is_null()) {
    doc.meta = j["meta"].get<std::map<std::string, std::string>>();
  }
  return doc;
}

}  // namespace detail

// Ordered document collection. Immutable after construction; mutating
// operations (inject_documents) return new values.
class KnowledgeBase {
public:
  KnowledgeBase() = default;

  static KnowledgeBase from_documents(std::vector<Document> docs) {
    KnowledgeBase kb;
    for (auto& d : docs) kb.append(std::move(d), "from_documents");
    return kb;
  }

  const std::vector<Document>& documents() const { return docs_; }
  const ProvenanceCounts& counts() const { return counts_; }
  size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }

  bool has_id(const std::string& id) const { return by_id_.count(id) > 0; }

  const Document& at(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw Error("no document with id " + id);
    return docs_[it->second];
  }

  std::vector<Document> with_provenance(Provenance p) const {
    std::vector<Document> out;
    for (const auto& d : docs_) {
      if (d.provenance == p) out.push_back(d);
    }
    return out;
  }

  bool operator==(const KnowledgeBase& other) const {
    return docs_ == other.docs_ && counts_ == other.counts_;
  }

private:
  friend KnowledgeBase ingest_jsonl(const std::filesystem::path&);
  friend KnowledgeBase inject_documents(const KnowledgeBase&, std::span<const Document>);
  friend KnowledgeBase load_snapshot(const std::filesystem::path&);

  void append(Document doc, const std::string& where) {
    detail::validate_document(doc, where);
    if (has_id(doc.id)) throw ParseError(where + ": duplicate document id " + doc.id);
    by_id_.emplace(doc.id, docs_.size());
    counts_.add(doc.provenance);
    docs_.push_back(std::move(doc));
  }

  std::vector<Document> docs_;
  ProvenanceCounts counts_;
  std::unordered_map<std::string, size_t> by_id_;
};

// One JSON record per line: {id, text, answer_key?, provenance?, meta?}.
// Blank lines are skipped; anything else malformed reports its line number.
inline KnowledgeBase ingest_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path.string());
  KnowledgeBase kb;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError(where + ": invalid JSON record");
    kb.append(detail::document_from_json(j, where), where);
  }
  return kb;
}

// Append-only injection with value semantics: the input corpus is left
// untouched and pre-existing ids/order are preserved.
inline KnowledgeBase inject_documents(const KnowledgeBase& kb, std::span<const Document> docs) {
  KnowledgeBase out = kb;
  for (const auto& d : docs) out.append(d, "inject");
  return out;
}

// Snapshot layout: a one-line JSON header {checksum, count, version}
// followed by one JSON document record per line. The checksum covers the
// payload bytes so a corrupted snapshot fails loudly at load time.
inline void snapshot(const KnowledgeBase& kb, const std::filesystem::path& path) {
  std::string payload;
  for (const auto& doc : kb.documents()) {
    payload += detail::document_to_json(doc).dump();
    payload += '\n';
  }
  nlohmann::json header;
  header["version"] = kArtifactFormatVersion;
  header["count"] = kb.size();
  header["checksum"] = to_hex(fnv1a64(payload));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write snapshot: " + path.string());
  out << header.dump() << '\n' << payload;
  if (!out) throw IoError("short write to snapshot: " + path.string());
}

inline KnowledgeBase load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open snapshot: " + path.string());
  std::string header_line;
  if (!std::getline(in, header_line)) throw ParseError(path.string() + ": missing snapshot header");
  nlohmann::json header = nlohmann::json::parse(header_line, nullptr, false);
  if (header.is_discarded() || !header.is_object()) {
    throw ParseError(path.string() + ": malformed snapshot header");
  }
  if (!header.contains("version") || header["version"].get<int>() != kArtifactFormatVersion) {
    throw ParseError(path.string() + ": snapshot version mismatch");
  }
  const auto count = header["count"].get<size_t>();
  const auto want_checksum = header["checksum"].get<std::string>();

  std::string payload;
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    payload += line;
    payload += '\n';
    lines.push_back(std::move(line));
  }
  if (lines.size() != count) {
    throw ParseError(path.string() + ": snapshot record count mismatch (header says " +
                     std::to_string(count) + ", found " + std::to_string(lines.size()) + ")");
  }
  if (to_hex(fnv1a64(payload)) != want_checksum) {
    throw ParseError(path.string() + ": snapshot checksum mismatch");
  }
  KnowledgeBase kb;
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string where = path.filename().string() + ":" + std::to_string(i + 2);
    nlohmann::json j = nlohmann::json::parse(lines[i], nullptr, false);
    if (j.is_discarded()) throw ParseError(where + ": invalid JSON record");
    kb.append(detail::document_from_json(j, where), where);
  }
  return kb;
}

}  // namespace ragred
