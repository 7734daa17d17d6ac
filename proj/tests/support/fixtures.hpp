#pragma once

// Shared paths, cached lexicon and temporary directories for the test binaries.

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "xchat/corpus_store.hpp"
#include "xchat/ontology_graph.hpp"
#include "xchat/text_pipeline.hpp"
#include "xchat/tfidf_index.hpp"
#include "xchat/triple_extractor.hpp"
#include "xchat/util.hpp"
#include "xchat/workspace.hpp"

namespace xchat::testing {

namespace fs = std::filesystem;

inline fs::path fixtures_dir() { return XCHAT_FIXTURES_DIR; }
inline fs::path fixture(const std::string& name) { return fixtures_dir() / name; }
inline fs::path lexicon_dir() { return XCHAT_DEFAULT_LEXICON_DIR; }
inline fs::path stopwords_file() { return XCHAT_DEFAULT_STOPWORDS; }

inline const text::Lexicon& lexicon() {
  static const text::Lexicon lex = text::Lexicon::load(lexicon_dir());
  return lex;
}

inline const std::set<std::string>& stopwords() {
  static const std::set<std::string> sw = tfidf::load_stopwords(stopwords_file());
  return sw;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "xchat") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() / (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

  fs::path write(const std::string& name, const std::string& content) const {
    util::write_file(path_ / name, content);
    return path_ / name;
  }

 private:
  fs::path path_;
};

inline corpus::Corpus sample_corpus() {
  corpus::Corpus c;
  corpus::ingest_text(c, fixture("sample_paragraph.txt"), lexicon());
  return c;
}

/// Sample paragraph followed by the distractor paragraphs.
inline corpus::Corpus retrieval_corpus() {
  auto c = sample_corpus();
  corpus::ingest_text(c, fixture("distractors.txt"), lexicon());
  return c;
}

/// Everything shipped: paragraph, distractors and the dialogue file.
inline corpus::Corpus full_fixture_corpus() {
  auto c = retrieval_corpus();
  corpus::ingest_dialogue_json(c, fixture("sample_dialogue.json"), lexicon());
  return c;
}

inline std::vector<extract::Triple> manual_triples() { return extract::load_manual_triples(fixture("sample_manual.tsv"), lexicon()); }

/// Auto triples of `c` plus the manual fixture, stamped with the corpus hash.
inline graph::OntologyGraph snapshot_graph(const corpus::Corpus& c) {
  auto g = graph::build_graph(extract::extract_corpus(c), manual_triples(), lexicon());
  g.corpus_hash = c.hash();
  return g;
}

struct AlignmentCase {
  std::string generated;
  std::string subject, predicate, object;
  std::vector<std::string> context;
};

inline std::vector<AlignmentCase> alignment_cases() {
  std::vector<AlignmentCase> rows;
  for (const auto& line : util::split(util::read_file(fixture("alignment_cases.tsv")), '\n')) {
    if (line.empty() || line[0] == '#') continue;
    auto f = util::split(line, '\t');
    AlignmentCase r{f.at(0), f.at(1), f.at(2), f.at(3), {}};
    if (f.size() > 4 && !f[4].empty()) r.context.push_back(f[4]);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<std::string> script_lines(const std::string& name = "chat_script.txt") {
  std::vector<std::string> out;
  for (const auto& line : util::split(util::read_file(fixture(name)), '\n')) {
    if (!util::trim(line).empty()) out.emplace_back(util::trim(line));
  }
  return out;
}

/// Ingests the fixture corpus into `dir` and builds index and graph there,
/// the same steps as `ingest`, `index build` and `graph build --manual`.
inline void build_data_dir(const fs::path& dir, const std::optional<std::string>& dialogue_topic = std::nullopt) {
  workspace::Paths p{dir};
  auto c = retrieval_corpus();
  corpus::ingest_dialogue_json(c, fixture("sample_dialogue.json"), lexicon(), dialogue_topic);
  corpus::save_corpus(c, p.corpus());
  workspace::build_index(p, lexicon(), stopwords_file());
  workspace::build_graph(p, lexicon(), {fixture("sample_manual.tsv")});
}

}  // namespace xchat::testing
