#pragma once

// Paragraph-level TF-IDF index with cosine ranking.
//
//   tf(t, d)  raw count of lemma t in d
//   idf(t)    ln((1 + N) / (1 + df(t))) + 1
//   w(t, d)   tf * idf, L2-normalized per document
//
// Raw tf is stored per document and never touched by later additions; idf
// and weights are recomputed by finalize().

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "xchat/corpus_store.hpp"
#include "xchat/error.hpp"
#include "xchat/text_pipeline.hpp"
#include "xchat/util.hpp"

namespace xchat::tfidf {

using TermId = uint32_t;
/// Sorted by term id.
using SparseVector = std::vector<std::pair<TermId, double>>;

struct RankedHit {
  std::string doc_id;
  double score = 0.0;
  std::vector<std::pair<std::string, double>> matched_terms;
};

inline std::set<std::string> load_stopwords(const std::filesystem::path& path) {
  std::set<std::string> out;
  for (const auto& line : util::split(util::read_file(path), '\n')) {
    auto w = util::trim(line);
    if (w.empty() || w.front() == '#') continue;
    out.insert(util::to_lower(w));
  }
  return out;
}

/// Index terms of tagged sentences: lemmas minus punctuation and stopwords.
inline std::vector<std::string> terms_of(const std::vector<text::Sentence>& sentences, const std::set<std::string>& stopwords) {
  std::vector<std::string> out;
  for (const auto& s : sentences) {
    for (const auto& t : s.tokens) {
      if (t.pos == text::Pos::PUNCT || stopwords.count(t.lemma)) continue;
      out.push_back(t.lemma);
    }
  }
  return out;
}

inline std::map<std::string, uint32_t> count_terms(const std::vector<std::string>& terms) {
  std::map<std::string, uint32_t> tf;
  for (const auto& t : terms) ++tf[t];
  return tf;
}

inline double smoothed_idf(size_t n, size_t df) {
  return std::log((1.0 + static_cast<double>(n)) / (1.0 + static_cast<double>(df))) + 1.0;
}

namespace detail {

// Scores are compared at 1e-12 resolution so that mathematically equal
// cosines computed in different summation orders still tie on doc_id.
inline int64_t rank_key(double score) { return std::llround(score * 1e12); }

}  // namespace detail

class TfIdfIndex {
 public:
  TfIdfIndex() = default;
  explicit TfIdfIndex(std::set<std::string> stopwords) : stopwords_(std::move(stopwords)) {}

  /// Adds (or replaces) a document's raw term counts. Call finalize() before querying.
  void add_document(const std::string& doc_id, std::map<std::string, uint32_t> tf, std::set<std::string> topics = {}) {
    auto it = doc_pos_.find(doc_id);
    if (it == doc_pos_.end()) {
      doc_pos_.emplace(doc_id, docs_.size());
      docs_.push_back({doc_id, std::move(tf), std::move(topics), {}});
    } else {
      docs_[it->second].tf = std::move(tf);
      docs_[it->second].topics = std::move(topics);
    }
    finalized_ = false;
  }

  void finalize() {
    std::map<std::string, size_t> df;
    for (const auto& d : docs_) {
      for (const auto& [term, count] : d.tf) {
        if (count > 0) ++df[term];
      }
    }
    terms_.clear();
    vocab_.clear();
    df_.clear();
    idf_.clear();
    for (const auto& [term, n] : df) {
      vocab_.emplace(term, static_cast<TermId>(terms_.size()));
      terms_.push_back(term);
      df_.push_back(n);
      idf_.push_back(smoothed_idf(docs_.size(), n));
    }
    postings_.assign(terms_.size(), {});
    for (size_t di = 0; di < docs_.size(); ++di) {
      auto& d = docs_[di];
      d.vec.clear();
      for (const auto& [term, count] : d.tf) {
        if (count == 0) continue;
        auto id = vocab_.at(term);
        d.vec.emplace_back(id, count * idf_[id]);
      }
      normalize(d.vec);
      for (const auto& [id, w] : d.vec) postings_[id].emplace_back(di, w);
    }
    finalized_ = true;
  }

  size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }
  bool finalized() const { return finalized_; }
  const std::set<std::string>& stopwords() const { return stopwords_; }
  const std::vector<std::string>& terms() const { return terms_; }

  std::optional<TermId> term_id(const std::string& term) const {
    auto it = vocab_.find(term);
    return it == vocab_.end() ? std::nullopt : std::optional<TermId>(it->second);
  }
  size_t df(const std::string& term) const { return term_id(term) ? df_[*term_id(term)] : 0; }
  std::optional<double> idf(const std::string& term) const {
    auto id = term_id(term);
    return id ? std::optional<double>(idf_[*id]) : std::nullopt;
  }
  double idf_at(TermId id) const { return idf_.at(id); }
  size_t df_at(TermId id) const { return df_.at(id); }

  std::vector<std::string> doc_ids() const {
    std::vector<std::string> out;
    for (const auto& d : docs_) out.push_back(d.doc_id);
    return out;
  }
  bool contains(const std::string& doc_id) const { return doc_pos_.count(doc_id) > 0; }
  const SparseVector& vector(const std::string& doc_id) const { return doc(doc_id).vec; }
  const std::map<std::string, uint32_t>& tf(const std::string& doc_id) const { return doc(doc_id).tf; }
  const std::set<std::string>& topics(const std::string& doc_id) const { return doc(doc_id).topics; }

  /// tf-idf of already-extracted terms; out-of-vocabulary terms are dropped.
  SparseVector vectorize_terms(const std::vector<std::string>& terms) const {
    std::map<TermId, double> acc;
    for (const auto& t : terms) {
      if (auto id = term_id(t)) acc[*id] += idf_[*id];
    }
    SparseVector v(acc.begin(), acc.end());
    normalize(v);
    return v;
  }

  SparseVector vectorize(std::string_view text, const text::Lexicon& lex) const {
    return vectorize_terms(terms_of(text::analyze_text(text, lex), stopwords_));
  }

  /// Nonzero-score documents by descending cosine, ties by doc_id.
  std::vector<RankedHit> rank(const SparseVector& query, size_t k, const std::optional<std::string>& topic = std::nullopt) const {
    if (!finalized_) throw Error(ErrorCode::IndexUnavailable, "index not finalized");
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
    std::vector<double> score(docs_.size(), 0.0);
    std::vector<bool> touched(docs_.size(), false);
    for (const auto& [id, qw] : query) {
      for (const auto& [di, dw] : postings_[id]) {
        score[di] += qw * dw;
        touched[di] = true;
      }
    }
    std::vector<size_t> cand;
    for (size_t di = 0; di < docs_.size(); ++di) {
      if (!touched[di] || score[di] <= 0.0) continue;
      if (topic && !docs_[di].topics.count(*topic)) continue;
      cand.push_back(di);
    }
    std::sort(cand.begin(), cand.end(), [&](size_t a, size_t b) {
      auto ka = detail::rank_key(score[a]);
      auto kb = detail::rank_key(score[b]);
      if (ka != kb) return ka > kb;
      return docs_[a].doc_id < docs_[b].doc_id;
    });
    if (cand.size() > k) cand.resize(k);
    std::vector<RankedHit> out;
    for (auto di : cand) {
      RankedHit hit;
      hit.doc_id = docs_[di].doc_id;
      hit.score = std::min(score[di], 1.0);
      hit.matched_terms = contributions(query, docs_[di].vec);
      out.push_back(std::move(hit));
    }
    return out;
  }

  std::vector<RankedHit> top_k(std::string_view query, size_t k, const text::Lexicon& lex,
                               const std::optional<std::string>& topic = std::nullopt) const {
    return rank(vectorize(query, lex), k, topic);
  }

  /// Per-term products q_t * d_t, largest first, ties by term.
  std::vector<std::pair<std::string, double>> contributions(const SparseVector& q, const SparseVector& d) const {
    std::vector<std::pair<std::string, double>> out;
    size_t i = 0, j = 0;
    while (i < q.size() && j < d.size()) {
      if (q[i].first < d[j].first) {
        ++i;
      } else if (d[j].first < q[i].first) {
        ++j;
      } else {
        out.emplace_back(terms_[q[i].first], q[i].second * d[j].second);
        ++i;
        ++j;
      }
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    return out;
  }

  std::string corpus_hash;  // snapshot the index was built from
  std::string index_id() const { return corpus_hash.empty() ? std::string() : "index-" + corpus_hash.substr(0, 16); }

 private:
  struct Doc {
    std::string doc_id;
    std::map<std::string, uint32_t> tf;
    std::set<std::string> topics;
    SparseVector vec;
  };

  static void normalize(SparseVector& v) {
    double norm = 0.0;
    for (const auto& [_, w] : v) norm += w * w;
    norm = std::sqrt(norm);
    if (norm == 0.0) return;
    for (auto& [_, w] : v) w /= norm;
  }

  const Doc& doc(const std::string& doc_id) const {
    auto it = doc_pos_.find(doc_id);
    if (it == doc_pos_.end()) throw Error(ErrorCode::UnknownDocId, doc_id);
    return docs_[it->second];
  }

  std::set<std::string> stopwords_;
  std::vector<Doc> docs_;
  std::unordered_map<std::string, size_t> doc_pos_;
  std::vector<std::string> terms_;
  std::map<std::string, TermId> vocab_;
  std::vector<size_t> df_;
  std::vector<double> idf_;
  std::vector<std::vector<std::pair<size_t, double>>> postings_;
  bool finalized_ = false;
};

inline TfIdfIndex build_index(const corpus::Corpus& corpus, std::set<std::string> stopwords) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot index an empty corpus");
  TfIdfIndex index(std::move(stopwords));
  for (const auto& d : corpus.documents()) {
    index.add_document(d.doc_id, count_terms(terms_of(d.sentences, index.stopwords())), d.topics);
  }
  index.finalize();
  index.corpus_hash = corpus.hash();
  return index;
}

inline double cosine(const SparseVector& a, const SparseVector& b) {
  double dot = 0.0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (b[j].first < a[i].first) {
      ++j;
    } else {
      dot += a[i++].second * b[j++].second;
    }
  }
  return std::clamp(dot, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Persistence: <dir>/manifest.tsv, <dir>/vectors.tsv, <dir>/stopwords.txt

inline constexpr const char* kIndexFormat = "xchat-index-1";

inline void save_index(const TfIdfIndex& index, const std::filesystem::path& dir) {
  std::ostringstream m;
  m << "format\t" << kIndexFormat << "\n";
  m << "documents\t" << index.size() << "\n";
  m << "corpus_hash\t" << index.corpus_hash << "\n";
  m << "index_id\t" << index.index_id() << "\n";
  for (TermId id = 0; id < index.terms().size(); ++id) {
    m << "term\t" << id << "\t" << index.terms()[id] << "\t" << index.df_at(id) << "\t" << util::exact_double(index.idf_at(id)) << "\n";
  }
  std::ostringstream v;
  for (const auto& doc_id : index.doc_ids()) {
    std::vector<std::string> topics(index.topics(doc_id).begin(), index.topics(doc_id).end());
    v << doc_id << "\t" << util::join(topics, ",") << "\t";
    const auto& tf = index.tf(doc_id);
    bool first = true;
    for (const auto& [term, count] : tf) {
      v << (first ? "" : " ") << *index.term_id(term) << ":" << count;
      first = false;
    }
    v << "\n";
  }
  std::ostringstream s;
  for (const auto& w : index.stopwords()) s << w << "\n";
  util::write_file(dir / "manifest.tsv", m.str());
  util::write_file(dir / "vectors.tsv", v.str());
  util::write_file(dir / "stopwords.txt", s.str());
}

inline bool index_exists(const std::filesystem::path& dir) { return std::filesystem::exists(dir / "manifest.tsv"); }

/// Weights are rebuilt from the stored tf records; the stored idf values are
/// checked against the recomputation.
inline TfIdfIndex load_index(const std::filesystem::path& dir) {
  if (!index_exists(dir)) throw Error(ErrorCode::IndexUnavailable, "no index at " + dir.string() + " (run `index build`)");
  std::vector<std::string> terms;
  std::string corpus_hash;
  for (const auto& line : util::split(util::read_file(dir / "manifest.tsv"), '\n')) {
    if (line.empty()) continue;
    auto cols = util::split(line, '\t');
    if (cols[0] == "format" && (cols.size() < 2 || cols[1] != kIndexFormat)) {
      throw Error(ErrorCode::SnapshotMismatch, "unsupported index format");
    } else if (cols[0] == "corpus_hash" && cols.size() >= 2) {
      corpus_hash = cols[1];
    } else if (cols[0] == "term") {
      if (cols.size() < 5) throw Error(ErrorCode::MalformedLine, "manifest term line: " + line);
      terms.push_back(cols[2]);
    }
  }
  TfIdfIndex index(load_stopwords(dir / "stopwords.txt"));
  for (const auto& line : util::split(util::read_file(dir / "vectors.tsv"), '\n')) {
    if (line.empty()) continue;
    auto cols = util::split(line, '\t');
    if (cols.size() != 3) throw Error(ErrorCode::MalformedLine, "vector line: " + line);
    std::set<std::string> topics;
    if (!cols[1].empty()) {
      for (auto& t : util::split(cols[1], ',')) topics.insert(t);
    }
    std::map<std::string, uint32_t> tf;
    if (!cols[2].empty()) {
      for (const auto& pair : util::split(cols[2], ' ')) {
        auto colon = pair.find(':');
        if (colon == std::string::npos) throw Error(ErrorCode::MalformedLine, "vector entry: " + pair);
        auto id = std::stoul(pair.substr(0, colon));
        if (id >= terms.size()) throw Error(ErrorCode::MalformedLine, "term id out of range: " + pair);
        tf[terms[id]] = static_cast<uint32_t>(std::stoul(pair.substr(colon + 1)));
      }
    }
    index.add_document(cols[0], std::move(tf), std::move(topics));
  }
  index.finalize();
  if (index.terms() != terms) throw Error(ErrorCode::SnapshotMismatch, "index vocabulary does not match its vectors");
  index.corpus_hash = corpus_hash;
  return index;
}

}  // namespace xchat::tfidf
