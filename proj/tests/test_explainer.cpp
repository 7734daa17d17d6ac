#include <gtest/gtest.h>

#include <random>

#include "support/fixtures.hpp"
#include "support/properties.hpp"
#include "xchat/explainer.hpp"

using namespace xchat;
using namespace xchat::explain;
using extract::Triple;
using xchat::testing::lexicon;

namespace {

struct Snapshot {
  corpus::Corpus corpus = xchat::testing::retrieval_corpus();
  tfidf::TfIdfIndex index = tfidf::build_index(corpus, xchat::testing::stopwords());
  graph::OntologyGraph graph = xchat::testing::snapshot_graph(corpus);
  Explainer explainer{corpus, index, graph, lexicon()};
};

const Snapshot& snapshot() {
  static const Snapshot s;
  return s;
}

Triple resp(std::string s, std::string p, std::string o) { return {std::move(s), std::move(p), std::move(o), {}, {}, {}}; }

GraphTriple gt(std::string s, std::string p, std::string o) { return {std::move(s), std::move(p), std::move(o), 0, {}, {}, {}}; }

}  // namespace

TEST(MatchScore, HorsePair) {
  auto [score, slots] = triple_match_score(resp("I", "like to ride", "horses"), gt("i", "taking care of", "horse"), lexicon());
  EXPECT_DOUBLE_EQ(slots.subject, 1.0);
  EXPECT_DOUBLE_EQ(slots.predicate, 0.0);
  EXPECT_DOUBLE_EQ(slots.object, 1.0);
  EXPECT_NEAR(score, 0.7, 1e-12);
}

TEST(MatchScore, IdenticalAndDisjoint) {
  EXPECT_NEAR(triple_match_score(resp("that", "is", "awesome"), gt("that", "is", "awesome"), lexicon()).first, 1.0, 1e-12);
  EXPECT_NEAR(triple_match_score(resp("dogs", "chase", "cats"), gt("madonna", "sing", "song"), lexicon()).first, 0.0, 1e-12);
}

TEST(MatchScore, PartialOverlapByHand) {
  // object {animal, shelter} vs {shelter}: 1/2
  auto [score, slots] = triple_match_score(resp("I", "volunteer", "the animal shelter"), gt("i", "work at", "shelter"), lexicon());
  EXPECT_DOUBLE_EQ(slots.object, 0.5);
  EXPECT_DOUBLE_EQ(slots.predicate, 0.0);
  EXPECT_NEAR(score, 0.3 + 0.4 * 0.5, 1e-12);
}

TEST(MatchScore, EmptySlots) {
  EXPECT_DOUBLE_EQ(overlap({}, {}), 1.0);
  EXPECT_DOUBLE_EQ(overlap({"a"}, {}), 0.0);
  EXPECT_NEAR(triple_match_score(resp("I", "work", ""), gt("i", "work", "night shift"), lexicon()).first, 0.6, 1e-12);
}

TEST(MatchScore, BoundsAndSymmetry) {
  std::mt19937 rng(29);
  auto pool = xchat::testing::random_triples(rng, 200);
  for (size_t i = 0; i + 1 < pool.size(); i += 2) {
    const auto& a = pool[i];
    const auto& b = pool[i + 1];
    auto ab = triple_match_score(a, gt(b.subject, b.predicate, b.object), lexicon()).first;
    auto ba = triple_match_score(b, gt(a.subject, a.predicate, a.object), lexicon()).first;
    EXPECT_DOUBLE_EQ(ab, ba);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(Explain, AlignmentCases) {
  const auto& s = snapshot();
  for (const auto& row : xchat::testing::alignment_cases()) {
    auto r = s.explainer.explain("r", row.generated, row.context);
    ASSERT_FALSE(r.alignments.empty()) << row.generated;
    const auto& top = r.alignments.front();
    EXPECT_EQ(top.graph_triple.subject_surface, row.subject) << row.generated;
    EXPECT_EQ(top.graph_triple.predicate, row.predicate) << row.generated;
    EXPECT_EQ(top.graph_triple.object_surface, row.object) << row.generated;
    EXPECT_GE(top.score, 0.3);
  }
}

TEST(Explain, ThatIsAwesomeScoresOne) {
  auto r = snapshot().explainer.explain("r", "that is awesome", {});
  ASSERT_FALSE(r.alignments.empty());
  EXPECT_NEAR(r.alignments.front().score, 1.0, 1e-9);
}

TEST(Explain, QueryIncludesLastTwoUserTurns) {
  auto r = snapshot().explainer.explain("r", "I like horses", {"one", "two", "three"});
  EXPECT_EQ(r.query_text, "I like horses two three");
  EXPECT_EQ(r.context, (std::vector<std::string>{"two", "three"}));
}

TEST(Explain, ProvenanceFollowsIndexOrder) {
  const auto& s = snapshot();
  auto r = s.explainer.explain("r", "I volunteer at an animal shelter", {});
  auto hits = s.index.top_k(r.query_text, 3, lexicon());
  ASSERT_EQ(r.provenance.size(), hits.size());
  for (size_t i = 0; i < hits.size(); ++i) EXPECT_EQ(r.provenance[i].doc_id, hits[i].doc_id);
  EXPECT_EQ(r.provenance.front().doc_id, s.corpus.documents().front().doc_id);
}

TEST(Explain, OovResponse) {
  auto r = snapshot().explainer.explain("r", "zzz qqq", {});
  EXPECT_TRUE(r.provenance.empty());
  EXPECT_TRUE(r.alignments.empty());
}

TEST(Explain, UnmatchedWhenNothingClose) {
  auto r = snapshot().explainer.explain("r", "Zorgons sell quasars.", {});
  EXPECT_TRUE(r.alignments.empty());
  EXPECT_FALSE(r.unmatched.empty());
}

TEST(Explain, ThresholdIsInclusive) {
  // only the predicate matches: 0.3 * 1.0 sits exactly on the threshold
  auto r = snapshot().explainer.explain("r", "Zorgons eat quasars.", {});
  ASSERT_EQ(r.alignments.size(), 1u);
  EXPECT_NEAR(r.alignments.front().score, 0.3, 1e-12);
  EXPECT_EQ(r.alignments.front().graph_triple.predicate, "eat");
}

TEST(Explain, SnapshotMismatch) {
  const auto& s = snapshot();
  auto other = s.graph;
  other.corpus_hash = "ffffffffffffffff";
  try {
    Explainer bad(s.corpus, s.index, other, lexicon());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SnapshotMismatch);
  }
}

TEST(Explain, BestMatchOptimality) {
  auto r = xchat::testing::explainer_optimality();
  EXPECT_TRUE(r.ok) << r.detail;
  EXPECT_GT(r.cases, 100u);
}

TEST(Explain, FixtureReportsSatisfyOptimality) {
  const auto& s = snapshot();
  xchat::testing::PropertyResult acc;
  for (const auto& row : xchat::testing::alignment_cases()) acc = xchat::testing::check_report(s.explainer.explain("r", row.generated, row.context), s.explainer, s.graph, acc);
  EXPECT_TRUE(acc.ok) << acc.detail;
}

TEST(Explain, Deterministic) {
  const auto& s = snapshot();
  auto a = s.explainer.explain("r", "I have a big collection of books and artwork.", {"do you collect anything?"});
  auto b = s.explainer.explain("r", "I have a big collection of books and artwork.", {"do you collect anything?"});
  EXPECT_EQ(canonical_report(a), canonical_report(b));
}

TEST(Render, StructuredRoundTrip) {
  auto r = snapshot().explainer.explain("s0001-r0001", "I like to ride horses. that is awesome", {"do you like animals?"});
  r.generator = "retrieval";
  auto text = render_report(r, Format::Structured);
  auto back = report_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(canonical_report(back), canonical_report(r));
  EXPECT_EQ(back.generated_at, r.generated_at);
  EXPECT_EQ(render_report(back, Format::Structured), text);
}

TEST(Render, TextTableHasBothColumns) {
  const auto& s = snapshot();
  std::string all;
  for (const auto& row : xchat::testing::alignment_cases()) all += render_report(s.explainer.explain("r", row.generated, row.context), Format::Text);
  EXPECT_NE(all.find("system generated"), std::string::npos);
  EXPECT_NE(all.find("training data triple"), std::string::npos);
  for (const auto& row : xchat::testing::alignment_cases()) {
    EXPECT_NE(all.find(row.generated), std::string::npos) << row.generated;
    EXPECT_NE(all.find(row.subject + " " + row.predicate + " " + row.object), std::string::npos) << row.predicate;
  }
}

TEST(Render, EmptyReportIsHeaderOnly) {
  auto text = render_text(ExplanationReport{});
  auto lines = util::split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_NE(lines[0].find("system generated"), std::string::npos);
}
