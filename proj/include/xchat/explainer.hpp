#pragma once

// Response explanation: TF-IDF provenance plus triple alignment against the
// ontology graph.
//
// Slot score: |L(a) ∩ L(b)| / max(|L(a)|, |L(b)|) over content lemmas, where
// two empty slots score 1 and one empty slot scores 0. Triple score is the
// weighted sum of subject, predicate and object slot scores.

#include <algorithm>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xchat/corpus_store.hpp"
#include "xchat/error.hpp"
#include "xchat/ontology_graph.hpp"
#include "xchat/text_pipeline.hpp"
#include "xchat/tfidf_index.hpp"
#include "xchat/triple_extractor.hpp"
#include "xchat/util.hpp"

namespace xchat::explain {

using extract::Triple;
using text::Pos;

struct ExplainConfig {
  double subject_weight = 0.3;
  double predicate_weight = 0.3;
  double object_weight = 0.4;
  double threshold = 0.3;
  size_t k = 3;
  size_t context_turns = 2;
};

struct SlotScores {
  double subject = 0.0;
  double predicate = 0.0;
  double object = 0.0;
  bool operator==(const SlotScores&) const = default;
};

struct GraphTriple {
  std::string subject;  // canonical
  std::string predicate;
  std::string object;  // canonical
  size_t edge_id = 0;
  std::string subject_surface;
  std::string object_surface;
  extract::Method method = extract::Method::Auto;
  bool operator==(const GraphTriple&) const = default;
};

struct TripleMatch {
  Triple response_triple;
  GraphTriple graph_triple;
  double score = 0.0;
  SlotScores slot_scores;
  std::string scope;  // "provenance" or "global"
  bool operator==(const TripleMatch&) const = default;
};

struct ExplanationReport {
  std::string response_id;
  std::string response_text;
  std::string query_text;
  std::vector<std::string> context;
  std::string generator = "none";
  std::string corpus_hash;
  std::string index_id;
  std::string graph_id;
  std::vector<std::string> response_sentences;
  std::vector<tfidf::RankedHit> provenance;
  std::vector<TripleMatch> alignments;
  std::vector<Triple> unmatched;
  std::string generated_at;
};

enum class Slot { Subject, Predicate, Object };

/// Content lemmas of a slot: determiners, prepositions, particles,
/// conjunctions and punctuation are dropped; pronouns stay.
inline std::set<std::string> slot_lemmas(std::string_view phrase, Slot slot, const text::Lexicon& lex) {
  std::set<std::string> out;
  for (auto& [lemma, pos] : text::phrase_lemmas(phrase, slot == Slot::Predicate ? Pos::VERB : Pos::NOUN, lex)) {
    if (pos == Pos::DET || pos == Pos::PREP || pos == Pos::PART || pos == Pos::CONJ || pos == Pos::PUNCT) continue;
    out.insert(lemma);
  }
  return out;
}

inline double overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  size_t common = 0;
  for (const auto& x : a) common += b.count(x);
  return static_cast<double>(common) / static_cast<double>(std::max(a.size(), b.size()));
}

struct SlotLemmas {
  std::set<std::string> subject, predicate, object;
};

inline SlotLemmas lemmas_of(const std::string& s, const std::string& p, const std::string& o, const text::Lexicon& lex) {
  return {slot_lemmas(s, Slot::Subject, lex), slot_lemmas(p, Slot::Predicate, lex), slot_lemmas(o, Slot::Object, lex)};
}

inline std::pair<double, SlotScores> score_lemmas(const SlotLemmas& a, const SlotLemmas& b, const ExplainConfig& cfg = {}) {
  SlotScores s{overlap(a.subject, b.subject), overlap(a.predicate, b.predicate), overlap(a.object, b.object)};
  double total = cfg.subject_weight * s.subject + cfg.predicate_weight * s.predicate + cfg.object_weight * s.object;
  return {total, s};
}

inline std::pair<double, SlotScores> triple_match_score(const Triple& a, const GraphTriple& b, const text::Lexicon& lex,
                                                        const ExplainConfig& cfg = {}) {
  return score_lemmas(lemmas_of(a.subject, a.predicate, a.object, lex), lemmas_of(b.subject, b.predicate, b.object, lex), cfg);
}

inline GraphTriple graph_triple(const graph::OntologyGraph& g, size_t edge_id) {
  const auto& e = g.edge(edge_id);
  return {g.node(e.from).canonical, e.predicate, g.node(e.to).canonical, e.edge_id, e.subject_surface, e.object_surface, e.method};
}

/// Response text first, then up to `turns` most recent user turns.
inline std::string compose_query(const std::string& response, const std::vector<std::string>& user_turns, size_t turns) {
  std::string q = response;
  size_t start = user_turns.size() > turns ? user_turns.size() - turns : 0;
  for (size_t i = start; i < user_turns.size(); ++i) q += " " + user_turns[i];
  return q;
}

class Explainer {
 public:
  Explainer(const corpus::Corpus& corpus, const tfidf::TfIdfIndex& index, const graph::OntologyGraph& graph,
            const text::Lexicon& lex, ExplainConfig cfg = {})
      : corpus_(corpus), index_(index), graph_(graph), lex_(lex), cfg_(cfg), corpus_hash_(corpus.hash()) {
    check_snapshot();
    for (size_t id = 0; id < graph.edge_count(); ++id) {
      auto gt = graph_triple(graph, id);
      edge_lemmas_.push_back(lemmas_of(gt.subject, gt.predicate, gt.object, lex));
    }
  }

  const ExplainConfig& config() const { return cfg_; }

  void check_snapshot() const {
    if (index_.corpus_hash != corpus_hash_ || graph_.corpus_hash != corpus_hash_) {
      throw Error(ErrorCode::SnapshotMismatch, "index, graph and corpus were built from different corpus states");
    }
  }

  /// Best edge among `scope` (ascending ids), ties to the lowest edge id.
  std::optional<std::pair<size_t, std::pair<double, SlotScores>>> best_match(const Triple& t, const std::vector<size_t>& scope) const {
    auto lt = lemmas_of(t.subject, t.predicate, t.object, lex_);
    std::optional<std::pair<size_t, std::pair<double, SlotScores>>> best;
    for (auto id : scope) {
      auto s = score_lemmas(lt, edge_lemmas_[id], cfg_);
      if (!best || s.first > best->second.first) best = {id, s};
    }
    return best;
  }

  /// Edges with a manual source or a sentence in one of the given documents.
  std::vector<size_t> scope_for(const std::set<std::string>& doc_ids) const {
    std::vector<size_t> out;
    for (const auto& e : graph_.edges()) {
      for (const auto& p : e.provenance) {
        if (p.is_manual() || doc_ids.count(p.doc_id)) {
          out.push_back(e.edge_id);
          break;
        }
      }
    }
    return out;
  }

  std::vector<size_t> all_edges() const {
    std::vector<size_t> out(graph_.edge_count());
    for (size_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
  }

  ExplanationReport explain(const std::string& response_id, const std::string& response_text,
                            const std::vector<std::string>& user_turns, const std::optional<std::string>& topic = std::nullopt) const {
    check_snapshot();
    ExplanationReport r;
    r.response_id = response_id;
    r.response_text = response_text;
    size_t start = user_turns.size() > cfg_.context_turns ? user_turns.size() - cfg_.context_turns : 0;
    r.context.assign(user_turns.begin() + static_cast<std::ptrdiff_t>(start), user_turns.end());
    r.query_text = compose_query(response_text, user_turns, cfg_.context_turns);
    r.corpus_hash = corpus_hash_;
    r.index_id = index_.index_id();
    r.graph_id = graph_.graph_id();
    r.provenance = index_.top_k(r.query_text, cfg_.k, lex_, topic);

    std::set<std::string> docs;
    for (const auto& h : r.provenance) docs.insert(h.doc_id);
    auto restricted = scope_for(docs);
    auto global = all_edges();

    extract::ExtractOptions opts;
    opts.attribute_objects = true;
    auto sentences = text::analyze_text(response_text, lex_, response_id);
    for (const auto& s : sentences) {
      r.response_sentences.push_back(s.raw);
      for (auto& t : extract::extract_triples(s, opts)) {
        auto best = best_match(t, restricted);
        std::string scope = "provenance";
        if (!best || best->second.first < cfg_.threshold) {
          best = best_match(t, global);
          scope = "global";
        }
        if (!best || best->second.first < cfg_.threshold) {
          r.unmatched.push_back(std::move(t));
          continue;
        }
        r.alignments.push_back({std::move(t), graph_triple(graph_, best->first), best->second.first, best->second.second, scope});
      }
    }
    std::stable_sort(r.alignments.begin(), r.alignments.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    r.generated_at = util::utc_timestamp();
    return r;
  }

 private:
  const corpus::Corpus& corpus_;
  const tfidf::TfIdfIndex& index_;
  const graph::OntologyGraph& graph_;
  const text::Lexicon& lex_;
  ExplainConfig cfg_;
  std::string corpus_hash_;
  std::vector<SlotLemmas> edge_lemmas_;
};

inline ExplanationReport explain(const std::string& response_text, const std::vector<std::string>& user_turns,
                                 const tfidf::TfIdfIndex& index, const graph::OntologyGraph& graph, const corpus::Corpus& corpus,
                                 const text::Lexicon& lex, size_t k = 3) {
  ExplainConfig cfg;
  cfg.k = k;
  return Explainer(corpus, index, graph, lex, cfg).explain("response", response_text, user_turns);
}

// ---------------------------------------------------------------------------
// Rendering

inline nlohmann::json hit_to_json(const tfidf::RankedHit& h) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [term, c] : h.matched_terms) terms.push_back({{"term", term}, {"contribution", c}});
  return {{"doc_id", h.doc_id}, {"score", h.score}, {"matched_terms", terms}};
}

inline tfidf::RankedHit hit_from_json(const nlohmann::json& j) {
  tfidf::RankedHit h;
  h.doc_id = j.at("doc_id").get<std::string>();
  h.score = j.at("score").get<double>();
  for (const auto& t : j.at("matched_terms")) h.matched_terms.emplace_back(t.at("term").get<std::string>(), t.at("contribution").get<double>());
  return h;
}

inline nlohmann::json report_to_json(const ExplanationReport& r) {
  nlohmann::json prov = nlohmann::json::array();
  for (const auto& h : r.provenance) prov.push_back(hit_to_json(h));
  nlohmann::json al = nlohmann::json::array();
  for (const auto& m : r.alignments) {
    const auto& g = m.graph_triple;
    al.push_back({{"response_triple", graph::triple_to_json(m.response_triple)},
                  {"graph_triple",
                   {{"subject", g.subject},
                    {"predicate", g.predicate},
                    {"object", g.object},
                    {"edge_id", g.edge_id},
                    {"subject_surface", g.subject_surface},
                    {"object_surface", g.object_surface},
                    {"method", std::string(extract::to_string(g.method))}}},
                  {"score", m.score},
                  {"slot_scores", {{"subject", m.slot_scores.subject}, {"predicate", m.slot_scores.predicate}, {"object", m.slot_scores.object}}},
                  {"scope", m.scope}});
  }
  nlohmann::json un = nlohmann::json::array();
  for (const auto& t : r.unmatched) un.push_back(graph::triple_to_json(t));
  return {{"response_id", r.response_id},
          {"response_text", r.response_text},
          {"query_text", r.query_text},
          {"context", r.context},
          {"generator", r.generator},
          {"snapshot", {{"corpus_hash", r.corpus_hash}, {"index_id", r.index_id}, {"graph_id", r.graph_id}}},
          {"response_sentences", r.response_sentences},
          {"provenance", prov},
          {"alignments", al},
          {"unmatched", un},
          {"generated_at", r.generated_at}};
}

inline ExplanationReport report_from_json(const nlohmann::json& j) {
  ExplanationReport r;
  r.response_id = j.at("response_id").get<std::string>();
  r.response_text = j.at("response_text").get<std::string>();
  r.query_text = j.at("query_text").get<std::string>();
  r.context = j.at("context").get<std::vector<std::string>>();
  r.generator = j.at("generator").get<std::string>();
  r.corpus_hash = j.at("snapshot").at("corpus_hash").get<std::string>();
  r.index_id = j.at("snapshot").at("index_id").get<std::string>();
  r.graph_id = j.at("snapshot").at("graph_id").get<std::string>();
  r.response_sentences = j.at("response_sentences").get<std::vector<std::string>>();
  for (const auto& h : j.at("provenance")) r.provenance.push_back(hit_from_json(h));
  for (const auto& a : j.at("alignments")) {
    TripleMatch m;
    m.response_triple = graph::triple_from_json(a.at("response_triple"));
    const auto& g = a.at("graph_triple");
    m.graph_triple = {g.at("subject").get<std::string>(),         g.at("predicate").get<std::string>(),
                      g.at("object").get<std::string>(),          g.at("edge_id").get<size_t>(),
                      g.at("subject_surface").get<std::string>(), g.at("object_surface").get<std::string>(),
                      extract::parse_method(g.at("method").get<std::string>())};
    m.score = a.at("score").get<double>();
    const auto& s = a.at("slot_scores");
    m.slot_scores = {s.at("subject").get<double>(), s.at("predicate").get<double>(), s.at("object").get<double>()};
    m.scope = a.at("scope").get<std::string>();
    r.alignments.push_back(std::move(m));
  }
  for (const auto& t : j.at("unmatched")) r.unmatched.push_back(graph::triple_from_json(t));
  r.generated_at = j.at("generated_at").get<std::string>();
  return r;
}

/// Structured form without the timestamp, for byte comparisons across runs.
inline std::string canonical_report(const ExplanationReport& r) {
  auto j = report_to_json(r);
  j.erase("generated_at");
  return j.dump();
}

namespace detail {

inline std::string pad(const std::string& s, size_t width) { return s.size() >= width ? s : s + std::string(width - s.size(), ' '); }

inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline std::string sentence_of(const ExplanationReport& r, const Triple& t) {
  auto i = t.provenance.sent_id;
  return i < r.response_sentences.size() ? r.response_sentences[i] : r.response_text;
}

}  // namespace detail

/// Two-column table: generated sentence vs training-data triple.
inline std::string render_text(const ExplanationReport& r) {
  using detail::pad;
  size_t left = std::string("system generated").size();
  for (const auto& m : r.alignments) left = std::max(left, detail::sentence_of(r, m.response_triple).size());
  for (const auto& t : r.unmatched) left = std::max(left, detail::sentence_of(r, t).size());
  std::ostringstream out;
  out << pad("system generated", left) << " | " << pad("training data triple", 36) << " | score\n";
  out << std::string(left, '-') << "-+-" << std::string(36, '-') << "-+------\n";
  for (const auto& m : r.alignments) {
    const auto& g = m.graph_triple;
    auto right = g.subject_surface + " " + g.predicate + " " + g.object_surface;
    out << pad(detail::sentence_of(r, m.response_triple), left) << " | " << pad(right, 36) << " | " << detail::fixed(m.score, 3) << "\n";
  }
  for (const auto& t : r.unmatched) {
    out << pad(detail::sentence_of(r, t), left) << " | " << pad("(no match)", 36) << " |\n";
  }
  if (!r.provenance.empty()) {
    out << "\nprovenance (query: " << r.query_text << ")\n";
    for (size_t i = 0; i < r.provenance.size(); ++i) {
      const auto& h = r.provenance[i];
      out << "  " << i + 1 << ". " << h.doc_id << "  score " << detail::fixed(h.score, 4) << "  terms:";
      for (size_t t = 0; t < h.matched_terms.size() && t < 5; ++t) {
        out << " " << h.matched_terms[t].first << "=" << detail::fixed(h.matched_terms[t].second, 4);
      }
      out << "\n";
    }
  }
  return out.str();
}

enum class Format { Text, Structured };

inline std::string render_report(const ExplanationReport& r, Format f) {
  return f == Format::Text ? render_text(r) : report_to_json(r).dump(2) + "\n";
}

}  // namespace xchat::explain
