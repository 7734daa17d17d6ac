#pragma once

// Training corpus: paragraphs from plain text files and flattened dialogue
// records, each a Document with content-derived id. The persisted layout is
//
//   <dir>/manifest.json        format, corpus_hash, sources, ordered doc ids
//   <dir>/docs/<doc_id>.json   one record per document
//   <dir>/ingest_log.jsonl     append-only ingestion timestamps
//
// manifest.json and docs/ are byte-deterministic for identical inputs.

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "xchat/error.hpp"
#include "xchat/text_pipeline.hpp"
#include "xchat/util.hpp"

namespace xchat::corpus {

struct SourceRef {
  std::string path;
  size_t record = 0;  // paragraph or dialogue index within the file

  bool operator==(const SourceRef&) const = default;
};

struct Document {
  std::string doc_id;
  std::string text;
  std::vector<text::Sentence> sentences;
  std::set<std::string> topics;
  SourceRef source;
  // Dialogue turns in order; empty for plain-text paragraphs.
  std::vector<std::string> utterances;
  std::vector<std::string> persona;
};

struct SourceEntry {
  std::string path;
  std::string kind;  // "text" | "dialogue"
  std::optional<std::string> topic;
  size_t documents_added = 0;

  bool operator==(const SourceEntry&) const = default;
};

inline constexpr const char* kCorpusFormat = "xchat-corpus-1";

class Corpus {
 public:
  const std::vector<Document>& documents() const { return documents_; }
  const std::vector<SourceEntry>& sources() const { return sources_; }
  size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }

  const Document& get_document(const std::string& doc_id) const {
    auto it = by_id_.find(doc_id);
    if (it == by_id_.end()) throw Error(ErrorCode::UnknownDocId, doc_id);
    return documents_[it->second];
  }

  bool contains(const std::string& doc_id) const { return by_id_.count(doc_id) > 0; }

  std::vector<std::string> list_documents(const std::optional<std::string>& topic = std::nullopt) const {
    std::vector<std::string> out;
    for (const auto& d : documents_) {
      if (!topic || d.topics.count(*topic)) out.push_back(d.doc_id);
    }
    return out;
  }

  /// Hash over ids, texts, persona and topics in document order.
  std::string hash() const {
    uint64_t h = util::fnv1a(kCorpusFormat);
    for (const auto& d : documents_) {
      h = util::fnv1a(d.doc_id, h);
      h = util::fnv1a(std::string_view("\x1f", 1), h);
      h = util::fnv1a(d.text, h);
      for (const auto& u : d.utterances) h = util::fnv1a("\x1eu" + u, h);
      for (const auto& p : d.persona) h = util::fnv1a("\x1ep" + p, h);
      for (const auto& t : d.topics) h = util::fnv1a("\x1et" + t, h);
    }
    return util::hex64(h);
  }

  /// Appends a document; the id is `<content hash prefix>-<ordinal>`.
  const Document& add(Document doc) {
    uint64_t h = util::fnv1a(doc.text);
    for (const auto& p : doc.persona) h = util::fnv1a("\x1ep" + p, h);
    std::ostringstream id;
    id << util::hex64(h).substr(0, 8) << '-' << std::setw(4) << std::setfill('0') << documents_.size();
    doc.doc_id = id.str();
    for (auto& s : doc.sentences) s.doc_id = doc.doc_id;
    by_id_[doc.doc_id] = documents_.size();
    documents_.push_back(std::move(doc));
    return documents_.back();
  }

  void add_source(SourceEntry entry) { sources_.push_back(std::move(entry)); }

 private:
  std::vector<Document> documents_;
  std::vector<SourceEntry> sources_;
  std::unordered_map<std::string, size_t> by_id_;
};

namespace detail {

// Paragraphs separated by one or more blank lines.
inline std::vector<std::string> paragraphs(const std::string& content) {
  std::vector<std::string> out;
  std::string current;
  for (const auto& line : util::split(content, '\n')) {
    if (util::trim(line).empty()) {
      if (!util::trim(current).empty()) out.push_back(current);
      current.clear();
    } else {
      if (!current.empty()) current += '\n';
      current += std::string(util::trim(line));
    }
  }
  if (!util::trim(current).empty()) out.push_back(current);
  return out;
}

inline std::vector<text::Sentence> analyze_all(const std::vector<std::string>& pieces, const text::Lexicon& lex,
                                               std::vector<text::Sentence> into = {}) {
  for (const auto& piece : pieces) {
    auto more = text::analyze_text(piece, lex, {}, into.size());
    for (auto& s : more) into.push_back(std::move(s));
  }
  return into;
}

}  // namespace detail

/// Adds one Document per blank-line separated paragraph of `path`.
inline size_t ingest_text(Corpus& corpus, const std::filesystem::path& path, const text::Lexicon& lex,
                          const std::optional<std::string>& topic = std::nullopt) {
  auto content = util::read_file(path);
  auto paras = detail::paragraphs(content);
  if (paras.empty()) throw Error(ErrorCode::EmptyFile, path.string() + " has no non-blank paragraphs");
  size_t record = 0;
  for (const auto& p : paras) {
    Document doc;
    doc.text = p;
    doc.sentences = text::analyze_text(p, lex);
    if (topic) doc.topics.insert(*topic);
    doc.source = {path.generic_string(), record++};
    corpus.add(std::move(doc));
  }
  corpus.add_source({path.generic_string(), "text", topic, paras.size()});
  return paras.size();
}

inline std::vector<std::string> string_list(const nlohmann::json& j, const char* field, size_t record,
                                            const std::string& where) {
  std::vector<std::string> out;
  if (!j.contains(field)) return out;
  const auto& arr = j.at(field);
  if (!arr.is_array()) {
    throw Error(ErrorCode::MalformedRecord, where + " record " + std::to_string(record) + ": '" + field + "' is not a list");
  }
  for (const auto& item : arr) {
    if (!item.is_string()) {
      throw Error(ErrorCode::MalformedRecord, where + " record " + std::to_string(record) + ": '" + field + "' holds a non-string");
    }
    auto s = util::normalize_ws(item.get<std::string>());
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

/// Flattens each dialogue record into one Document: utterances joined with
/// single spaces form the text; each utterance and persona line is split into
/// sentences on its own, so turn boundaries are sentence boundaries.
inline size_t ingest_dialogue_json(Corpus& corpus, const std::filesystem::path& path, const text::Lexicon& lex,
                                   const std::optional<std::string>& topic = std::nullopt) {
  auto content = util::read_file(path);
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedRecord, path.string() + ": byte " + std::to_string(e.byte) + ": " + e.what());
  }
  if (!root.is_array()) throw Error(ErrorCode::MalformedRecord, path.string() + ": top level must be a list of dialogues");
  std::vector<Document> docs;
  for (size_t i = 0; i < root.size(); ++i) {
    const auto& rec = root[i];
    if (!rec.is_object() || !rec.contains("utterances")) {
      throw Error(ErrorCode::MalformedRecord, path.string() + " record " + std::to_string(i) + ": expected {persona, utterances}");
    }
    Document doc;
    doc.utterances = string_list(rec, "utterances", i, path.string());
    doc.persona = string_list(rec, "persona", i, path.string());
    if (doc.utterances.empty()) {
      throw Error(ErrorCode::MalformedRecord, path.string() + " record " + std::to_string(i) + ": no utterances");
    }
    doc.text = util::join(doc.utterances, " ");
    doc.sentences = detail::analyze_all(doc.persona, lex, detail::analyze_all(doc.utterances, lex));
    if (topic) doc.topics.insert(*topic);
    doc.source = {path.generic_string(), i};
    docs.push_back(std::move(doc));
  }
  for (auto& d : docs) corpus.add(std::move(d));
  corpus.add_source({path.generic_string(), "dialogue", topic, docs.size()});
  return docs.size();
}

// ---------------------------------------------------------------------------
// Persistence

inline nlohmann::json document_to_json(const Document& d) {
  nlohmann::json sentences = nlohmann::json::array();
  for (const auto& s : d.sentences) sentences.push_back(s.raw);
  return {{"doc_id", d.doc_id},
          {"text", d.text},
          {"topics", d.topics},
          {"source", {{"path", d.source.path}, {"record", d.source.record}}},
          {"utterances", d.utterances},
          {"persona", d.persona},
          {"sentences", sentences}};
}

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "docs");
  nlohmann::json sources = nlohmann::json::array();
  for (const auto& s : corpus.sources()) {
    sources.push_back({{"path", s.path},
                       {"kind", s.kind},
                       {"topic", s.topic ? nlohmann::json(*s.topic) : nlohmann::json(nullptr)},
                       {"documents_added", s.documents_added}});
  }
  nlohmann::json manifest = {{"format", kCorpusFormat},
                             {"corpus_hash", corpus.hash()},
                             {"document_count", corpus.size()},
                             {"sources", sources},
                             {"documents", corpus.list_documents()}};
  // Stale records from a previous larger corpus must not survive.
  std::set<std::string> keep;
  for (const auto& d : corpus.documents()) {
    keep.insert(d.doc_id + ".json");
    util::write_file(dir / "docs" / (d.doc_id + ".json"), document_to_json(d).dump(2) + "\n");
  }
  for (const auto& entry : fs::directory_iterator(dir / "docs")) {
    if (!keep.count(entry.path().filename().string())) fs::remove(entry.path());
  }
  util::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  std::ofstream log(dir / "ingest_log.jsonl", std::ios::app);
  log << nlohmann::json{{"saved_at", util::utc_timestamp()}, {"corpus_hash", corpus.hash()}, {"document_count", corpus.size()}}.dump()
      << "\n";
}

inline bool corpus_exists(const std::filesystem::path& dir) { return std::filesystem::exists(dir / "manifest.json"); }

inline Corpus load_corpus(const std::filesystem::path& dir, const text::Lexicon& lex) {
  if (!corpus_exists(dir)) throw Error(ErrorCode::SnapshotMissing, "no corpus at " + dir.string() + " (run `ingest`)");
  auto manifest = nlohmann::json::parse(util::read_file(dir / "manifest.json"));
  if (manifest.value("format", "") != kCorpusFormat) throw Error(ErrorCode::MalformedRecord, "unknown corpus format");
  Corpus corpus;
  for (const auto& id : manifest.at("documents")) {
    auto rec = nlohmann::json::parse(util::read_file(dir / "docs" / (id.get<std::string>() + ".json")));
    Document d;
    d.text = rec.at("text").get<std::string>();
    d.topics = rec.at("topics").get<std::set<std::string>>();
    d.source = {rec.at("source").at("path").get<std::string>(), rec.at("source").at("record").get<size_t>()};
    d.utterances = rec.at("utterances").get<std::vector<std::string>>();
    d.persona = rec.at("persona").get<std::vector<std::string>>();
    size_t sid = 0;
    for (const auto& raw : rec.at("sentences")) d.sentences.push_back(text::analyze_sentence(raw.get<std::string>(), lex, {}, sid++));
    const auto& added = corpus.add(std::move(d));
    if (added.doc_id != id.get<std::string>()) {
      throw Error(ErrorCode::MalformedRecord, "document id mismatch for " + id.get<std::string>());
    }
  }
  for (const auto& s : manifest.at("sources")) {
    SourceEntry e;
    e.path = s.at("path").get<std::string>();
    e.kind = s.at("kind").get<std::string>();
    if (!s.at("topic").is_null()) e.topic = s.at("topic").get<std::string>();
    e.documents_added = s.at("documents_added").get<size_t>();
    corpus.add_source(std::move(e));
  }
  if (corpus.hash() != manifest.at("corpus_hash").get<std::string>()) {
    throw Error(ErrorCode::SnapshotMismatch, "corpus hash differs from manifest");
  }
  return corpus;
}

}  // namespace xchat::corpus
