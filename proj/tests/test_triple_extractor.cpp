#include <gtest/gtest.h>

#include <random>

#include "support/fixtures.hpp"
#include "support/properties.hpp"
#include "xchat/triple_extractor.hpp"

using namespace xchat;
using namespace xchat::extract;
using xchat::testing::fixture;
using xchat::testing::lexicon;
using xchat::testing::TempDir;

namespace {

text::Sentence sentence(std::string_view raw) { return text::analyze_sentence(raw, lexicon(), "doc", 0); }

std::vector<std::tuple<std::string, std::string, std::string>> spo(std::string_view raw, ExtractOptions opts = {}) {
  std::vector<std::tuple<std::string, std::string, std::string>> out;
  for (const auto& t : extract_triples(sentence(raw), opts)) out.push_back(t.spo());
  return out;
}

using SPO = std::tuple<std::string, std::string, std::string>;

}  // namespace

TEST(ClassifyPattern, Examples) {
  EXPECT_EQ(classify_pattern(sentence("I am an attorney.")), Pattern::SVP);
  EXPECT_EQ(classify_pattern(sentence("hello")), std::nullopt);
  EXPECT_EQ(classify_pattern(sentence("I wish you luck.")), Pattern::SVOO);
  EXPECT_EQ(classify_pattern(sentence("I drive an old dodge.")), Pattern::SVO);
  EXPECT_EQ(classify_pattern(sentence("I work.")), Pattern::SV);
}

TEST(ExtractTriples, SampleParagraphExamples) {
  EXPECT_EQ(spo("lady gaga is my current favorite singer."), (std::vector<SPO>{{"lady gaga", "is", "singer"}}));
  EXPECT_EQ(spo("that makes complete sense."), (std::vector<SPO>{{"that", "makes", "sense"}}));
  EXPECT_EQ(spo("do you have any recommendations on shows to watch...?"), (std::vector<SPO>{{"you", "have", "recommendations"}}));
  EXPECT_EQ(spo("I wish you luck."), (std::vector<SPO>{{"I", "wish", "you"}}));
}

TEST(ExtractTriples, VerbGroupShapes) {
  EXPECT_EQ(spo("I have to talk to people."), (std::vector<SPO>{{"I", "have", "to talk"}}));
  EXPECT_EQ(spo("i enjoy taking care of my horse."), (std::vector<SPO>{{"i", "enjoy", "taking"}}));
  EXPECT_EQ(spo("I am getting a dog."), (std::vector<SPO>{{"I", "getting", "dog"}}));
}

TEST(ExtractTriples, IntransitiveHasEmptyObject) {
  auto t = extract_triples(sentence("I work."));
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].pattern, Pattern::SV);
  EXPECT_TRUE(t[0].object.empty());
}

TEST(ExtractTriples, UnextractableGivesNothing) {
  EXPECT_TRUE(spo("hello").empty());
  EXPECT_TRUE(spo("wow!").empty());
  EXPECT_TRUE(spo("").empty());
}

TEST(ExtractTriples, AttributeObjectsOption) {
  EXPECT_EQ(spo("that is awesome", {true}), (std::vector<SPO>{{"that", "is", "awesome"}}));
  auto plain = extract_triples(sentence("that is awesome"));
  for (const auto& t : plain) EXPECT_NE(t.object, "awesome");
}

TEST(ExtractTriples, CarriesProvenance) {
  auto s = text::analyze_sentence("I drive an old dodge.", lexicon(), "abc-0001", 7);
  auto t = extract_triples(s);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].provenance.doc_id, "abc-0001");
  EXPECT_EQ(t[0].provenance.sent_id, 7u);
  EXPECT_EQ(t[0].method, Method::Auto);
}

TEST(ExtractCorpus, GoldenSample) {
  auto set = extract_corpus(xchat::testing::sample_corpus());
  auto report = compare_golden(set, load_golden(fixture("sample_golden.tsv")));
  EXPECT_GE(report.matched.size(), 8u);
  EXPECT_EQ(report.matched.size() + report.missing.size(), 10u);
}

TEST(ExtractCorpus, NoFunctionWordSubjectsOrPredicates) {
  auto c = xchat::testing::full_fixture_corpus();
  auto set = extract_corpus(c);
  for (const auto& t : set.triples()) {
    const auto& s = c.get_document(t.provenance.doc_id).sentences.at(t.provenance.sent_id);
    auto head_pos = [&](const std::string& phrase) {
      auto head = util::split(phrase, ' ').back();
      for (const auto& tok : s.tokens) {
        if (tok.surface == head) return tok.pos;
      }
      return text::Pos::OTHER;
    };
    for (const auto* slot : {&t.subject, &t.predicate}) {
      auto p = head_pos(*slot);
      EXPECT_NE(p, text::Pos::DET) << *slot << " in " << s.raw;
      EXPECT_NE(p, text::Pos::PREP) << *slot << " in " << s.raw;
      EXPECT_NE(p, text::Pos::PUNCT) << *slot << " in " << s.raw;
    }
  }
}

TEST(ExtractCorpus, EmptyCorpus) { EXPECT_TRUE(extract_corpus(corpus::Corpus{}).empty()); }

TEST(ExtractCorpus, DuplicateDocumentsShareSpoSet) {
  corpus::Corpus one, two;
  corpus::ingest_text(one, fixture("sample_paragraph.txt"), lexicon());
  corpus::ingest_text(two, fixture("sample_paragraph.txt"), lexicon());
  corpus::ingest_text(two, fixture("sample_paragraph.txt"), lexicon());
  auto a = extract_corpus(one);
  auto b = extract_corpus(two);
  EXPECT_EQ(a.distinct_spo(), b.distinct_spo());
  EXPECT_EQ(b.size(), 2 * a.size());
  for (const auto& d : two.documents()) EXPECT_EQ(b.for_doc(d.doc_id).size(), a.size());
}

TEST(ExtractCorpus, OrderFollowsDocumentsAndSentences) {
  auto set = extract_corpus(xchat::testing::retrieval_corpus());
  std::map<std::string, size_t> order;
  auto c = xchat::testing::retrieval_corpus();
  for (const auto& d : c.documents()) order.emplace(d.doc_id, order.size());
  for (size_t i = 1; i < set.size(); ++i) {
    const auto& a = set.triples()[i - 1].provenance;
    const auto& b = set.triples()[i].provenance;
    EXPECT_LE(std::make_pair(order[a.doc_id], a.sent_id), std::make_pair(order[b.doc_id], b.sent_id));
  }
}

TEST(ExtractCorpus, TripleSetDedups) {
  TripleSet set;
  Triple t{"I", "drive", "dodge", Pattern::SVO, Method::Auto, {"d", 1, {}}};
  EXPECT_TRUE(set.add(t));
  EXPECT_FALSE(set.add(t));
  t.provenance.sent_id = 2;
  EXPECT_TRUE(set.add(t));
  EXPECT_EQ(set.size(), 2u);
  EXPECT_EQ(set.distinct_spo().size(), 1u);
}

TEST(ExtractCorpus, OrderIndependentSpoSet) {
  TempDir tmp;
  auto paras = corpus::detail::paragraphs(util::read_file(fixture("distractors.txt")));
  paras.push_back(util::read_file(fixture("sample_paragraph.txt")));
  std::mt19937 rng(21);
  std::optional<std::set<SPO>> first;
  for (int trial = 0; trial < 4; ++trial) {
    std::shuffle(paras.begin(), paras.end(), rng);
    auto path = tmp.write("shuffled.txt", util::join(paras, "\n\n"));
    corpus::Corpus c;
    corpus::ingest_text(c, path, lexicon());
    auto distinct = extract_corpus(c).distinct_spo();
    if (!first) {
      first = distinct;
    } else {
      EXPECT_EQ(distinct, *first) << "trial " << trial;
    }
  }
}

TEST(ExtractCorpus, ProvenanceSoundness) {
  auto r = xchat::testing::provenance_soundness(xchat::testing::full_fixture_corpus());
  EXPECT_TRUE(r.ok) << r.detail;
  EXPECT_GT(r.cases, 50u);
}

TEST(ExtractCorpus, SvpUsesLinkingVerbs) {
  auto c = xchat::testing::full_fixture_corpus();
  auto set = extract_corpus(c);
  for (const auto& t : set.triples()) {
    if (t.pattern == Pattern::SVP) {
      EXPECT_TRUE(lexicon().is_linking(util::split(t.predicate, ' ').back())) << t.predicate;
    }
  }
}

TEST(ManualTriples, LoadsFixture) {
  auto rows = xchat::testing::manual_triples();
  ASSERT_EQ(rows.size(), 12u);
  EXPECT_EQ(rows[0].spo(), (SPO{"I", "volunteer", "at animal shelter"}));
  EXPECT_EQ(rows[1].spo(), (SPO{"I", "taking care of", "horse"}));
  for (const auto& t : rows) {
    EXPECT_EQ(t.method, Method::Manual);
    EXPECT_TRUE(t.provenance.is_manual());
    EXPECT_EQ(t.provenance.manual_tag.rfind("sample_manual.tsv:", 0), 0u);
  }
  EXPECT_EQ(rows[3].pattern, Pattern::SVP);
}

TEST(ManualTriples, Errors) {
  TempDir tmp;
  auto one_field = tmp.write("one.tsv", "# header\nI\n");
  try {
    load_manual_triples(one_field, lexicon());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedLine);
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
  }
  auto empty = tmp.write("empty.tsv", "# nothing\n\n");
  try {
    load_manual_triples(empty, lexicon());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyFile);
  }
  auto blank_subject = tmp.write("blank.tsv", "\tlike\tdogs\n");
  EXPECT_THROW(load_manual_triples(blank_subject, lexicon()), Error);
}
