#pragma once

// Five-pattern subject/predicate/object extraction over tagged sentences.
//
// A sentence is cut into clauses at punctuation, conjunctions and at a
// nominative pronoun that starts a new subject-verb pair after a verb has
// been seen. Each clause yields at most one triple:
//   subject   first nominal run followed by a verb group
//   predicate main verb of the group (auxiliaries dropped, copula kept)
//   object    head of the first object phrase, per sentence pattern

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "xchat/corpus_store.hpp"
#include "xchat/error.hpp"
#include "xchat/text_pipeline.hpp"
#include "xchat/util.hpp"

namespace xchat::extract {

using text::Pos;

enum class Pattern { SVO, SVOO, SVOC, SV, SVP };
enum class Method { Auto, Manual };

inline std::string_view to_string(Pattern p) {
  switch (p) {
    case Pattern::SVO: return "SVO";
    case Pattern::SVOO: return "SVOO";
    case Pattern::SVOC: return "SVOC";
    case Pattern::SV: return "SV";
    case Pattern::SVP: return "SVP";
  }
  return "SV";
}

inline std::optional<Pattern> parse_pattern(std::string_view s) {
  for (auto p : {Pattern::SVO, Pattern::SVOO, Pattern::SVOC, Pattern::SV, Pattern::SVP}) {
    if (to_string(p) == s) return p;
  }
  return std::nullopt;
}

inline std::string_view to_string(Method m) { return m == Method::Auto ? "auto" : "manual"; }

inline Method parse_method(std::string_view s) {
  if (s == "auto") return Method::Auto;
  if (s == "manual") return Method::Manual;
  throw Error(ErrorCode::MalformedRecord, "unknown method " + std::string(s));
}

/// Where a triple came from: a corpus sentence, or a manual-source tag.
struct Provenance {
  std::string doc_id;
  size_t sent_id = 0;
  std::string manual_tag;

  bool is_manual() const { return !manual_tag.empty(); }
  std::string str() const { return is_manual() ? manual_tag : doc_id + ":" + std::to_string(sent_id); }
  auto operator<=>(const Provenance&) const = default;
};

struct Triple {
  std::string subject;
  std::string predicate;
  std::string object;
  Pattern pattern = Pattern::SVO;
  Method method = Method::Auto;
  Provenance provenance;

  std::tuple<std::string, std::string, std::string> spo() const { return {subject, predicate, object}; }
  bool operator==(const Triple&) const = default;
};

/// Ordered, de-duplicated triples with a per-document index.
class TripleSet {
 public:
  /// Returns false when an identical triple (same s/p/o and provenance) is already stored.
  bool add(Triple t) {
    auto key = std::make_tuple(t.subject, t.predicate, t.object, t.provenance);
    if (!seen_.insert(key).second) return false;
    if (!t.provenance.is_manual()) index_by_doc_[t.provenance.doc_id].push_back(triples_.size());
    triples_.push_back(std::move(t));
    return true;
  }

  const std::vector<Triple>& triples() const { return triples_; }
  size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }

  std::vector<size_t> for_doc(const std::string& doc_id) const {
    auto it = index_by_doc_.find(doc_id);
    return it == index_by_doc_.end() ? std::vector<size_t>{} : it->second;
  }

  std::set<std::tuple<std::string, std::string, std::string>> distinct_spo() const {
    std::set<std::tuple<std::string, std::string, std::string>> out;
    for (const auto& t : triples_) out.insert(t.spo());
    return out;
  }

 private:
  std::vector<Triple> triples_;
  std::map<std::string, std::vector<size_t>> index_by_doc_;
  std::set<std::tuple<std::string, std::string, std::string, Provenance>> seen_;
};

/// Entity objects only by default. With attribute_objects a bare predicative
/// adjective ("that is awesome") or a prepositional predicative ("been around
/// dogs") also fills the object slot.
struct ExtractOptions {
  bool attribute_objects = false;
};

namespace detail {

using Tokens = std::vector<const text::Token*>;

inline std::string lower(const text::Token* t) { return util::to_lower(t->surface); }

inline bool is_nominative(const std::string& w) {
  return w == "i" || w == "you" || w == "he" || w == "she" || w == "it" || w == "we" || w == "they" || w == "that";
}

inline bool is_np_start(Pos p) {
  return p == Pos::DET || p == Pos::ADJ || p == Pos::NOUN || p == Pos::PROPN || p == Pos::PRON || p == Pos::NUM;
}

inline bool is_not(const text::Token* t) { return t->pos == Pos::PART && lower(t) == "not"; }

inline size_t skip_adverbs(const Tokens& c, size_t i) {
  while (i < c.size() && (c[i]->pos == Pos::ADV || is_not(c[i]))) ++i;
  return i;
}

inline std::vector<Tokens> split_clauses(const text::Sentence& s) {
  std::vector<Tokens> out;
  Tokens cur;
  bool verb_seen = false;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
    verb_seen = false;
  };
  const auto& toks = s.tokens;
  for (size_t i = 0; i < toks.size(); ++i) {
    const auto* t = &toks[i];
    if (t->pos == Pos::CONJ && !verb_seen && !cur.empty() && text::is_nominal(cur.back()->pos) && i + 1 < toks.size() &&
        (is_np_start(toks[i + 1].pos))) {
      cur.push_back(t);  // coordinated subject: "me and the wife and kids love ..."
      continue;
    }
    if (t->pos == Pos::PUNCT || t->pos == Pos::CONJ) {
      flush();
      continue;
    }
    if (verb_seen && t->pos == Pos::PRON && is_nominative(lower(t))) {
      size_t j = i + 1;
      while (j < toks.size() && (toks[j].pos == Pos::ADV || (toks[j].pos == Pos::PART && util::to_lower(toks[j].surface) == "not"))) ++j;
      if (j < toks.size() && text::is_verbal(toks[j].pos)) flush();
    }
    if (t->pos == Pos::VERB || t->pos == Pos::LINK) verb_seen = true;
    cur.push_back(t);
  }
  flush();
  return out;
}

struct NounPhrase {
  std::string head;
  size_t end = 0;
  bool nominal = false;     // false: head is an adjective
  bool determined = false;  // a determiner precedes the head ("my favorite")
};

inline std::string join_surfaces(const Tokens& c, size_t b, size_t e) {
  std::string out;
  for (size_t i = b; i < e; ++i) {
    if (i > b) out += ' ';
    out += c[i]->surface;
  }
  return out;
}

// Head of the phrase starting at i: determiners and adjectives are stripped,
// a contiguous noun run is kept whole, an "of" complement replaces the head.
inline std::optional<NounPhrase> parse_np(const Tokens& c, size_t i) {
  size_t k = i;
  std::optional<size_t> last_adj;
  bool determined = false;
  while (k < c.size() && (c[k]->pos == Pos::DET || c[k]->pos == Pos::ADJ || c[k]->pos == Pos::NUM || c[k]->pos == Pos::ADV)) {
    if (c[k]->pos == Pos::ADJ) last_adj = k;
    if (c[k]->pos == Pos::DET) determined = true;
    ++k;
  }
  if (k < c.size() && c[k]->pos == Pos::PRON) return NounPhrase{c[k]->surface, k + 1, true};
  if (k < c.size() && (c[k]->pos == Pos::NOUN || c[k]->pos == Pos::PROPN)) {
    size_t e = k;
    while (e < c.size() && (c[e]->pos == Pos::NOUN || c[e]->pos == Pos::PROPN)) ++e;
    NounPhrase np{join_surfaces(c, k, e), e, true};
    if (e + 1 < c.size() && c[e]->pos == Pos::PREP && lower(c[e]) == "of") {
      if (auto inner = parse_np(c, e + 1); inner && inner->nominal) return inner;
    }
    return np;
  }
  if (last_adj) return NounPhrase{c[*last_adj]->surface, *last_adj + 1, false, determined};
  return std::nullopt;
}

struct ClauseParse {
  std::string subject;
  std::string predicate;
  std::string object;
  Pattern pattern;
};

struct SubjectVerb {
  size_t subj_begin;
  size_t subj_end;
  size_t main;
};

// Main verb of the group starting at j: auxiliaries, a copula followed by a
// verb, and perfect "have" are dropped.
inline std::optional<size_t> main_verb(const Tokens& c, size_t j) {
  std::optional<size_t> last_aux;
  size_t k = j;
  while (k < c.size()) {
    auto p = c[k]->pos;
    if (p == Pos::AUX) {
      last_aux = k++;
      continue;
    }
    if (p == Pos::ADV || is_not(c[k])) {
      ++k;
      continue;
    }
    if (p == Pos::LINK || p == Pos::VERB) {
      size_t m = skip_adverbs(c, k + 1);
      bool next_verbal = m < c.size() && (c[m]->pos == Pos::VERB || c[m]->pos == Pos::LINK);
      if (p == Pos::LINK && next_verbal) {
        k = m;
        continue;
      }
      if (p == Pos::VERB && c[k]->lemma == "have" && next_verbal &&
          (c[m]->pos == Pos::LINK || (c[m]->surface != c[m]->lemma && !util::ends_with(lower(c[m]), "ing") &&
                                      !util::ends_with(lower(c[m]), "s")))) {
        k = m;
        continue;
      }
      return k;
    }
    break;
  }
  return last_aux;
}

inline size_t nominal_end(const Tokens& c, size_t i) {
  size_t e = i + 1;
  if (c[i]->pos != Pos::PRON) {
    while (e < c.size() && (c[e]->pos == Pos::NOUN || c[e]->pos == Pos::PROPN)) ++e;
  }
  return e;
}

inline std::optional<SubjectVerb> find_subject_verb(const Tokens& c) {
  size_t i = 0;
  while (i < c.size()) {
    if (!text::is_nominal(c[i]->pos)) {
      ++i;
      continue;
    }
    size_t e = nominal_end(c, i);
    // conjuncts kept inside the clause by split_clauses
    while (e < c.size() && c[e]->pos == Pos::CONJ) {
      size_t m = e + 1;
      while (m < c.size() && (c[m]->pos == Pos::DET || c[m]->pos == Pos::ADJ || c[m]->pos == Pos::NUM)) ++m;
      if (m >= c.size() || !text::is_nominal(c[m]->pos)) break;
      e = nominal_end(c, m);
    }
    size_t j = skip_adverbs(c, e);
    if (j < c.size() && text::is_verbal(c[j]->pos)) {
      if (auto m = main_verb(c, j)) return SubjectVerb{i, e, *m};
    }
    i = e;
  }
  // Fronted copula or auxiliary: "are you a teacher", "where are you from".
  for (size_t j = 0; j < c.size(); ++j) {
    if (c[j]->pos != Pos::LINK && c[j]->pos != Pos::AUX) continue;
    size_t s = j + 1;
    if (s < c.size() && text::is_nominal(c[s]->pos)) {
      size_t e = s + 1;
      if (c[s]->pos != Pos::PRON) {
        while (e < c.size() && (c[e]->pos == Pos::NOUN || c[e]->pos == Pos::PROPN)) ++e;
      }
      if (c[j]->pos == Pos::LINK) return SubjectVerb{s, e, j};
    }
    break;
  }
  return std::nullopt;
}

inline std::optional<ClauseParse> parse_clause(const Tokens& c, const ExtractOptions& opts) {
  auto sv = find_subject_verb(c);
  if (!sv) return std::nullopt;
  ClauseParse out;
  out.subject = join_surfaces(c, sv->subj_begin, sv->subj_end);
  out.predicate = c[sv->main]->surface;
  // Object material starts after the verb, or after an inverted subject.
  size_t p = std::max(sv->main + 1, sv->main < sv->subj_begin ? sv->subj_end : sv->main + 1);
  size_t q = skip_adverbs(c, p);

  if (c[sv->main]->pos == Pos::LINK) {
    out.pattern = Pattern::SV;
    if (q >= c.size()) return out;
    std::optional<NounPhrase> np;
    if (c[q]->pos == Pos::PREP) {
      if (opts.attribute_objects) np = parse_np(c, q + 1);
      if (np && !np->nominal) np.reset();
    } else {
      np = parse_np(c, q);
      if (np && !np->nominal && !np->determined && !opts.attribute_objects) np.reset();
    }
    if (np) {
      out.object = np->head;
      out.pattern = Pattern::SVP;
    }
    return out;
  }

  out.pattern = Pattern::SV;
  if (q >= c.size()) return out;
  // infinitive: "have to talk", "like to ride horses"
  if (c[q]->pos == Pos::PART && lower(c[q]) == "to" && q + 1 < c.size() && text::is_verbal(c[q + 1]->pos)) {
    size_t r = q + 2;
    if (r < c.size() && is_np_start(c[r]->pos)) {
      auto np = parse_np(c, r);
      if (np && np->nominal) {
        out.predicate += " to " + c[q + 1]->surface;
        out.object = np->head;
        out.pattern = Pattern::SVO;
        return out;
      }
    }
    out.object = "to " + c[q + 1]->surface;
    out.pattern = Pattern::SVO;
    return out;
  }
  // gerund object: "enjoy taking"
  if (c[q]->pos == Pos::VERB && util::ends_with(lower(c[q]), "ing")) {
    out.object = c[q]->surface;
    out.pattern = Pattern::SVO;
    return out;
  }
  if (!is_np_start(c[q]->pos)) return out;
  auto np1 = parse_np(c, q);
  if (!np1 || !np1->nominal) return out;
  out.object = np1->head;
  out.pattern = Pattern::SVO;
  size_t r = skip_adverbs(c, np1->end);
  if (r < c.size()) {
    auto rp = c[r]->pos;
    if (rp == Pos::ADJ) {
      auto np2 = parse_np(c, r);
      out.pattern = (np2 && np2->nominal) ? Pattern::SVOO : Pattern::SVOC;
    } else if (is_np_start(rp)) {
      auto np2 = parse_np(c, r);
      if (np2 && np2->nominal) out.pattern = Pattern::SVOO;
    }
  }
  return out;
}

}  // namespace detail

/// Pattern of the first clause that has a recoverable subject and verb.
inline std::optional<Pattern> classify_pattern(const text::Sentence& sentence, const ExtractOptions& opts = {}) {
  for (const auto& clause : detail::split_clauses(sentence)) {
    if (auto parse = detail::parse_clause(clause, opts)) return parse->pattern;
  }
  return std::nullopt;
}

/// At most one triple per clause; an unextractable sentence yields none.
inline std::vector<Triple> extract_triples(const text::Sentence& sentence, const ExtractOptions& opts = {}) {
  std::vector<Triple> out;
  for (const auto& clause : detail::split_clauses(sentence)) {
    auto parse = detail::parse_clause(clause, opts);
    if (!parse) continue;
    Triple t;
    t.subject = std::move(parse->subject);
    t.predicate = std::move(parse->predicate);
    t.object = std::move(parse->object);
    t.pattern = parse->pattern;
    t.method = Method::Auto;
    t.provenance = {sentence.doc_id, sentence.sent_id, {}};
    out.push_back(std::move(t));
  }
  return out;
}

/// Per-sentence extraction over every document, in corpus order.
inline TripleSet extract_corpus(const corpus::Corpus& corpus) {
  TripleSet set;
  for (const auto& doc : corpus.documents()) {
    for (const auto& s : doc.sentences) {
      for (auto& t : extract_triples(s)) set.add(std::move(t));
    }
  }
  return set;
}

inline Pattern infer_manual_pattern(const Triple& t, const text::Lexicon& lex) {
  if (t.object.empty()) return Pattern::SV;
  auto first = util::split(t.predicate, ' ').front();
  return lex.is_linking(first) ? Pattern::SVP : Pattern::SVO;
}

/// Parses a manual triple TSV: subject, predicate, object, optional note.
inline std::vector<Triple> load_manual_triples(const std::filesystem::path& path, const text::Lexicon& lex) {
  auto content = util::read_file(path);
  std::vector<Triple> out;
  size_t line_no = 0;
  auto tag_base = path.filename().generic_string();
  for (const auto& raw : util::split(content, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (util::trim(line).empty() || util::trim(line).front() == '#') continue;
    auto cols = util::split(line, '\t');
    if (cols.size() < 3) {
      throw Error(ErrorCode::MalformedLine, path.string() + ":" + std::to_string(line_no) + ": expected subject<TAB>predicate<TAB>object");
    }
    Triple t;
    t.subject = util::normalize_ws(cols[0]);
    t.predicate = util::normalize_ws(cols[1]);
    t.object = util::normalize_ws(cols[2]);
    if (t.subject.empty() || t.predicate.empty()) {
      throw Error(ErrorCode::MalformedLine, path.string() + ":" + std::to_string(line_no) + ": empty subject or predicate");
    }
    t.method = Method::Manual;
    t.provenance.manual_tag = tag_base + ":" + std::to_string(line_no);
    t.pattern = infer_manual_pattern(t, lex);
    out.push_back(std::move(t));
  }
  if (out.empty()) throw Error(ErrorCode::EmptyFile, path.string() + " has no triples");
  return out;
}

struct GoldenReport {
  std::vector<std::tuple<std::string, std::string, std::string>> matched;
  std::vector<std::tuple<std::string, std::string, std::string>> missing;
  std::vector<std::tuple<std::string, std::string, std::string>> extra;
};

/// Exact string comparison of extracted (s, p, o) against an expected list.
inline GoldenReport compare_golden(const TripleSet& set,
                                   const std::vector<std::tuple<std::string, std::string, std::string>>& golden) {
  GoldenReport r;
  auto have = set.distinct_spo();
  std::set<std::tuple<std::string, std::string, std::string>> want(golden.begin(), golden.end());
  for (const auto& g : golden) (have.count(g) ? r.matched : r.missing).push_back(g);
  for (const auto& h : have) {
    if (!want.count(h)) r.extra.push_back(h);
  }
  return r;
}

inline std::vector<std::tuple<std::string, std::string, std::string>> load_golden(const std::filesystem::path& path) {
  std::vector<std::tuple<std::string, std::string, std::string>> out;
  for (const auto& line : util::split(util::read_file(path), '\n')) {
    if (util::trim(line).empty() || util::trim(line).front() == '#') continue;
    auto cols = util::split(line, '\t');
    if (cols.size() < 3) throw Error(ErrorCode::MalformedLine, path.string());
    out.emplace_back(cols[0], cols[1], std::string(util::trim(cols[2])));
  }
  return out;
}

}  // namespace xchat::extract
