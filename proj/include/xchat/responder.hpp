#pragma once

// Chat sessions and response generation.
//
// The retrieval generator indexes every corpus utterance and answers with
// the utterance that follows the best match in its dialogue. The external
// generator is any callable speaking the /generate wire contract; when it
// fails the turn falls back to retrieval and the report says so.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xchat/corpus_store.hpp"
#include "xchat/error.hpp"
#include "xchat/explainer.hpp"
#include "xchat/text_pipeline.hpp"
#include "xchat/tfidf_index.hpp"
#include "xchat/util.hpp"

namespace xchat::responder {

inline constexpr const char* kFallbackReply = "could you tell me more about that?";

enum class Level { L1, L2, L3 };
enum class GeneratorKind { Retrieval, External };

inline std::string_view to_string(Level l) {
  switch (l) {
    case Level::L1: return "l1";
    case Level::L2: return "l2";
    case Level::L3: return "l3";
  }
  return "l3";
}

inline Level parse_level(std::string_view s) {
  auto l = util::to_lower(s);
  if (l == "l1") return Level::L1;
  if (l == "l2" || l == "l2_domain") return Level::L2;
  if (l == "l3" || l == "l3_free") return Level::L3;
  throw Error(ErrorCode::InvalidArgument, "unknown level '" + std::string(s) + "' (expected l2 or l3)");
}

inline std::string_view to_string(GeneratorKind g) { return g == GeneratorKind::Retrieval ? "retrieval" : "external"; }

inline GeneratorKind parse_generator(std::string_view s) {
  if (s == "retrieval") return GeneratorKind::Retrieval;
  if (s == "external") return GeneratorKind::External;
  throw Error(ErrorCode::InvalidArgument, "unknown generator '" + std::string(s) + "' (expected retrieval or external)");
}

struct Turn {
  std::string speaker;  // "user" or "bot"
  std::string text;
  std::string response_id;
  bool operator==(const Turn&) const = default;
};

struct ChatSession {
  std::string session_id;
  Level level = Level::L3;
  std::optional<std::string> topic;
  GeneratorKind generator = GeneratorKind::Retrieval;
  std::vector<Turn> history;

  size_t bot_turns() const {
    size_t n = 0;
    for (const auto& t : history) n += t.speaker == "bot";
    return n;
  }

  std::vector<std::string> user_turns() const {
    std::vector<std::string> out;
    for (const auto& t : history) {
      if (t.speaker == "user") out.push_back(t.text);
    }
    return out;
  }
};

struct GeneratorConfig {
  std::string endpoint;
  double timeout_s = 5.0;
  size_t max_history_turns = 6;

  void validate() const {
    if (timeout_s <= 0) throw Error(ErrorCode::InvalidArgument, "generator timeout must be positive");
    if (max_history_turns < 1) throw Error(ErrorCode::InvalidArgument, "max_history_turns must be at least 1");
  }
};

/// Body of POST <endpoint>/generate.
struct GenerateRequest {
  std::string session_id;
  std::vector<Turn> history;
  std::string message;
};

inline nlohmann::json request_to_json(const GenerateRequest& r) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& t : r.history) history.push_back({{"speaker", t.speaker}, {"text", t.text}});
  return {{"session_id", r.session_id}, {"history", history}, {"message", r.message}};
}

/// Returns the generated text or throws GeneratorUnavailable.
using GeneratorFn = std::function<std::string(const GenerateRequest&)>;

/// Parses a /generate reply body; anything but {"text": string} is a contract violation.
inline std::string parse_generate_reply(const std::string& body) {
  try {
    auto j = nlohmann::json::parse(body);
    if (!j.is_object() || !j.contains("text") || !j.at("text").is_string()) {
      throw Error(ErrorCode::GeneratorUnavailable, "reply lacks a text field");
    }
    return j.at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::GeneratorUnavailable, std::string("reply is not JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Utterance index

/// TF-IDF over single utterances. Keys are "<doc_id>#<nnnn>".
class UtteranceIndex {
 public:
  UtteranceIndex() = default;

  UtteranceIndex(const corpus::Corpus& corpus, const text::Lexicon& lex, std::set<std::string> stopwords)
      : index_(std::move(stopwords)) {
    for (const auto& d : corpus.documents()) {
      auto utterances = d.utterances;
      if (utterances.empty()) {
        for (const auto& s : d.sentences) utterances.push_back(s.raw);
      }
      // Only turns that have a successor can be answered.
      for (size_t i = 0; i + 1 < utterances.size(); ++i) {
        auto key = make_key(d.doc_id, i);
        auto sentences = text::analyze_text(utterances[i], lex, d.doc_id);
        index_.add_document(key, tfidf::count_terms(tfidf::terms_of(sentences, index_.stopwords())), d.topics);
        entries_.emplace(key, Entry{dialogues_.size(), i});
      }
      dialogues_.push_back(std::move(utterances));
    }
    index_.finalize();
  }

  static std::string make_key(const std::string& doc_id, size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%04zu", i);
    return doc_id + buf;
  }

  bool empty() const { return index_.empty(); }
  size_t size() const { return index_.size(); }
  const tfidf::TfIdfIndex& index() const { return index_; }

  struct Reply {
    std::string text;
    std::optional<std::string> matched_key;
    double score = 0.0;
  };

  Reply reply_to(const std::string& message, const text::Lexicon& lex, const std::optional<std::string>& topic) const {
    if (empty()) throw Error(ErrorCode::IndexUnavailable, "utterance index is empty");
    auto hits = index_.top_k(message, 1, lex, topic);
    if (hits.empty()) return {kFallbackReply, std::nullopt, 0.0};
    const auto& e = entries_.at(hits[0].doc_id);
    return {dialogues_[e.dialogue][e.position + 1], hits[0].doc_id, hits[0].score};
  }

 private:
  struct Entry {
    size_t dialogue;
    size_t position;
  };
  tfidf::TfIdfIndex index_;
  std::vector<std::vector<std::string>> dialogues_;
  std::map<std::string, Entry> entries_;
};

// ---------------------------------------------------------------------------
// Stores

/// One append-only JSON-lines file per session under <dir>/sessions.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  ChatSession create(Level level, std::optional<std::string> topic, GeneratorKind generator) {
    if (level == Level::L1) throw Error(ErrorCode::Unimplemented, "level l1 (phonetics/speech) is not implemented");
    if (level == Level::L2 && (!topic || topic->empty())) throw Error(ErrorCode::InvalidArgument, "level l2 requires a topic");
    std::lock_guard lock(mu_);
    size_t n = 1;
    std::string id;
    do {
      char buf[16];
      std::snprintf(buf, sizeof buf, "s%04zu", n++);
      id = buf;
    } while (std::filesystem::exists(path(id)));
    ChatSession s{id, level, level == Level::L2 ? topic : std::nullopt, generator, {}};
    nlohmann::json head = {{"type", "session"},
                           {"session_id", s.session_id},
                           {"level", std::string(to_string(level))},
                           {"topic", s.topic ? nlohmann::json(*s.topic) : nlohmann::json(nullptr)},
                           {"generator", std::string(to_string(generator))}};
    util::write_file(path(id), head.dump() + "\n");
    return s;
  }

  void append(const ChatSession& s, const Turn& t) {
    std::lock_guard lock(mu_);
    std::ofstream out(path(s.session_id), std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::FileUnreadable, "cannot append to session " + s.session_id);
    nlohmann::json j = {{"type", "turn"}, {"speaker", t.speaker}, {"text", t.text}};
    if (!t.response_id.empty()) j["response_id"] = t.response_id;
    out << j.dump() << "\n";
  }

  bool exists(const std::string& id) const { return valid_id(id) && std::filesystem::exists(path(id)); }

  ChatSession load(const std::string& id) const {
    if (!exists(id)) throw Error(ErrorCode::UnknownSession, id);
    ChatSession s;
    bool head = false;
    for (const auto& line : util::split(util::read_file(path(id)), '\n')) {
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw Error(ErrorCode::MalformedRecord, "session " + id);
      if (j.value("type", "") == "session") {
        s.session_id = j.at("session_id").get<std::string>();
        s.level = parse_level(j.at("level").get<std::string>());
        if (!j.at("topic").is_null()) s.topic = j.at("topic").get<std::string>();
        s.generator = parse_generator(j.at("generator").get<std::string>());
        head = true;
      } else {
        s.history.push_back({j.at("speaker").get<std::string>(), j.at("text").get<std::string>(), j.value("response_id", "")});
      }
    }
    if (!head) throw Error(ErrorCode::MalformedRecord, "session " + id + " has no header");
    return s;
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  static bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    for (char c : id) {
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
    }
    return true;
  }
  std::filesystem::path path(const std::string& id) const { return dir_ / (id + ".jsonl"); }

  std::filesystem::path dir_;
  mutable std::mutex mu_;
};

/// One JSON file per response under <dir>/reports.
class ReportStore {
 public:
  explicit ReportStore(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  void save(const explain::ExplanationReport& r) {
    util::write_file(path(r.response_id), explain::report_to_json(r).dump(2) + "\n");
  }

  bool exists(const std::string& response_id) const {
    if (response_id.empty() || response_id.find_first_of("/\\.") != std::string::npos) return false;
    return std::filesystem::exists(path(response_id));
  }

  explain::ExplanationReport load(const std::string& response_id) const {
    if (!exists(response_id)) throw Error(ErrorCode::UnknownResponse, response_id);
    return explain::report_from_json(nlohmann::json::parse(util::read_file(path(response_id))));
  }

  std::filesystem::path path(const std::string& response_id) const { return dir_ / (response_id + ".json"); }

 private:
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Responder

struct Response {
  std::string text;
  std::string response_id;
  std::string generator;  // "retrieval", "external" or "fallback"
};

struct ConverseResult {
  std::string response;
  std::string response_id;
  explain::ExplanationReport report;
};

class Responder {
 public:
  Responder(const text::Lexicon& lex, const UtteranceIndex& utterances, const explain::Explainer& explainer,
            SessionStore& sessions, ReportStore& reports)
      : lex_(lex), utterances_(utterances), explainer_(explainer), sessions_(sessions), reports_(reports) {}

  void set_external(GeneratorFn fn, GeneratorConfig cfg) {
    cfg.validate();
    external_ = std::move(fn);
    external_cfg_ = std::move(cfg);
  }

  static std::string next_response_id(const ChatSession& s) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "-r%04zu", s.bot_turns() + 1);
    return s.session_id + buf;
  }

  Response respond_retrieval(const ChatSession& s, const std::string& message) const {
    auto reply = utterances_.reply_to(message, lex_, s.level == Level::L2 ? s.topic : std::nullopt);
    return {reply.text, next_response_id(s), "retrieval"};
  }

  /// Throws GeneratorUnavailable when no client is configured or the call fails.
  Response respond_external(const ChatSession& s, const std::string& message) const {
    if (!external_) throw Error(ErrorCode::GeneratorUnavailable, "no external generator configured");
    GenerateRequest req;
    req.session_id = s.session_id;
    req.message = message;
    size_t n = std::min(external_cfg_.max_history_turns, s.history.size());
    req.history.assign(s.history.end() - static_cast<std::ptrdiff_t>(n), s.history.end());
    return {external_(req), next_response_id(s), "external"};
  }

  /// One full turn: generate, record both turns, explain, persist the report.
  ConverseResult converse(ChatSession& s, const std::string& message) {
    auto text = util::normalize_ws(message);
    if (text.empty()) throw Error(ErrorCode::InvalidArgument, "message is empty");
    Response r;
    if (s.generator == GeneratorKind::External) {
      try {
        r = respond_external(s, text);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::GeneratorUnavailable) throw;
        r = respond_retrieval(s, text);
        r.generator = "fallback";
      }
    } else {
      r = respond_retrieval(s, text);
    }
    Turn user{"user", text, {}};
    Turn bot{"bot", r.text, r.response_id};
    s.history.push_back(user);
    s.history.push_back(bot);
    sessions_.append(s, user);
    sessions_.append(s, bot);
    auto report = explainer_.explain(r.response_id, r.text, s.user_turns(), s.level == Level::L2 ? s.topic : std::nullopt);
    report.generator = r.generator;
    reports_.save(report);
    return {r.text, r.response_id, std::move(report)};
  }

 private:
  const text::Lexicon& lex_;
  const UtteranceIndex& utterances_;
  const explain::Explainer& explainer_;
  SessionStore& sessions_;
  ReportStore& reports_;
  GeneratorFn external_;
  GeneratorConfig external_cfg_;
};

}  // namespace xchat::responder
