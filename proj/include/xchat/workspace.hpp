#pragma once

// Data directory layout and the loaded engine snapshot.
//
//   <data_dir>/corpus/    manifest.json, docs/<doc_id>.json, ingest_log.jsonl
//   <data_dir>/index/     manifest.tsv, vectors.tsv, stopwords.txt
//   <data_dir>/graph/     graph.json, snapshot.json
//   <data_dir>/sessions/  <session_id>.jsonl
//   <data_dir>/reports/   <response_id>.json

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xchat/corpus_store.hpp"
#include "xchat/error.hpp"
#include "xchat/explainer.hpp"
#include "xchat/ontology_graph.hpp"
#include "xchat/responder.hpp"
#include "xchat/text_pipeline.hpp"
#include "xchat/tfidf_index.hpp"
#include "xchat/triple_extractor.hpp"
#include "xchat/util.hpp"

namespace xchat::workspace {

namespace fs = std::filesystem;

struct Paths {
  fs::path root;
  fs::path corpus() const { return root / "corpus"; }
  fs::path index() const { return root / "index"; }
  fs::path graph() const { return root / "graph"; }
  fs::path sessions() const { return root / "sessions"; }
  fs::path reports() const { return root / "reports"; }
};

struct Snapshot {
  std::string corpus_hash;
  std::string index_id;
  std::string graph_id;
  std::string built_at;
};

inline nlohmann::json snapshot_to_json(const Snapshot& s) {
  return {{"corpus_hash", s.corpus_hash}, {"index_id", s.index_id}, {"graph_id", s.graph_id}, {"built_at", s.built_at}};
}

inline corpus::Corpus load_corpus(const Paths& p, const text::Lexicon& lex) { return corpus::load_corpus(p.corpus(), lex); }

inline tfidf::TfIdfIndex build_index(const Paths& p, const text::Lexicon& lex, const fs::path& stopwords) {
  auto corpus = load_corpus(p, lex);
  auto index = tfidf::build_index(corpus, tfidf::load_stopwords(stopwords));
  tfidf::save_index(index, p.index());
  return index;
}

/// Auto triples of the whole corpus plus manual files, linked offline.
inline graph::OntologyGraph build_graph(const Paths& p, const text::Lexicon& lex, const std::vector<fs::path>& manual_files) {
  auto corpus = load_corpus(p, lex);
  std::vector<extract::Triple> manual;
  for (const auto& f : manual_files) {
    auto rows = extract::load_manual_triples(f, lex);
    manual.insert(manual.end(), rows.begin(), rows.end());
  }
  auto g = graph::build_graph(extract::extract_corpus(corpus), manual, lex);
  g.corpus_hash = corpus.hash();
  graph::link_all(g, lex);
  graph::save_graph(g, p.graph());
  Snapshot snap{g.corpus_hash, "index-" + g.corpus_hash.substr(0, 16), g.graph_id(), util::utc_timestamp()};
  util::write_file(p.graph() / "snapshot.json", snapshot_to_json(snap).dump(2) + "\n");
  return g;
}

/// Immutable corpus/index/graph snapshot plus everything derived from it.
class Engine {
 public:
  static std::unique_ptr<Engine> open(const fs::path& data_dir, text::Lexicon lex, explain::ExplainConfig cfg = {}) {
    Paths p{data_dir};
    if (!corpus::corpus_exists(p.corpus())) throw Error(ErrorCode::SnapshotMissing, "no corpus in " + data_dir.string() + " (run `ingest`)");
    if (!tfidf::index_exists(p.index())) throw Error(ErrorCode::SnapshotMissing, "no index in " + data_dir.string() + " (run `index build`)");
    if (!graph::graph_exists(p.graph())) throw Error(ErrorCode::SnapshotMissing, "no graph in " + data_dir.string() + " (run `graph build`)");
    auto e = std::unique_ptr<Engine>(new Engine());
    e->paths = p;
    e->lex = std::move(lex);
    e->corpus = corpus::load_corpus(p.corpus(), e->lex);
    e->index = tfidf::load_index(p.index());
    e->graph = graph::load_graph(p.graph());
    e->explainer = std::make_unique<explain::Explainer>(e->corpus, e->index, e->graph, e->lex, cfg);
    e->utterances = responder::UtteranceIndex(e->corpus, e->lex, e->index.stopwords());
    e->snapshot = {e->corpus.hash(), e->index.index_id(), e->graph.graph_id(), {}};
    if (fs::exists(p.graph() / "snapshot.json")) {
      auto j = nlohmann::json::parse(util::read_file(p.graph() / "snapshot.json"), nullptr, false);
      if (!j.is_discarded()) e->snapshot.built_at = j.value("built_at", "");
    }
    return e;
  }

  Paths paths;
  text::Lexicon lex;
  corpus::Corpus corpus;
  tfidf::TfIdfIndex index;
  graph::OntologyGraph graph;
  std::unique_ptr<explain::Explainer> explainer;
  responder::UtteranceIndex utterances;
  Snapshot snapshot;

 private:
  Engine() = default;
};

}  // namespace xchat::workspace
