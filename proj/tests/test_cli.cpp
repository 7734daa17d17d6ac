#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "support/run.hpp"

using nlohmann::json;
using xchat::testing::fixture;
using xchat::testing::TempDir;

namespace {

struct Cli {
  TempDir tmp{"xchat-cli"};
  std::string data = (tmp / "data").string();

  xchat::testing::RunResult operator()(std::vector<std::string> args, const std::string& stdin_text = {}) const {
    args.insert(args.begin(), {"--data-dir", data});
    return xchat::testing::run(XCHAT_CLI_PATH, args, tmp / "stderr.txt", stdin_text);
  }

  void build() const {
    ASSERT_EQ((*this)({"ingest", "--text", fixture("sample_paragraph.txt"), "--text", fixture("distractors.txt"), "--dialogue",
                       fixture("sample_dialogue.json")})
                  .exit_code,
              0);
    ASSERT_EQ((*this)({"index", "build"}).exit_code, 0);
    ASSERT_EQ((*this)({"graph", "build", "--manual", fixture("sample_manual.tsv")}).exit_code, 0);
  }
};

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  Cli cli;
  EXPECT_EQ(cli({}).exit_code, 1);
  EXPECT_EQ(cli({"frobnicate"}).exit_code, 1);
  EXPECT_EQ(cli({"graph", "export", "--format", "csv"}).exit_code, 1);
  EXPECT_EQ(cli({"ingest"}).exit_code, 1);
  EXPECT_EQ(cli({"--help"}).exit_code, 0);
}

TEST(Cli, MissingArtifactsExitThree) {
  Cli cli;
  auto r = cli({"index", "query", "shelter"});
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.err.find("index build"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"chat", "--script", fixture("chat_script.txt")}).exit_code, 3);
  EXPECT_EQ(cli({"graph", "stats"}).exit_code, 3);
}

TEST(Cli, DataErrorsExitTwo) {
  Cli cli;
  auto bad = cli.tmp.write("bad.json", "[{\"utterances\": 3}]");
  auto r = cli({"ingest", "--dialogue", bad.string()});
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.err.find("record 0"), std::string::npos) << r.err;
}

TEST(Cli, GoldenExtraction) {
  Cli cli;
  auto r = cli({"--json", "extract", "--golden"});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  auto j = json::parse(r.out);
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_GE(j["matched"].size(), 8u);
  EXPECT_LT(j["runtime_ms"].get<double>(), 1000.0);
}

TEST(Cli, PipelineCommands) {
  Cli cli;
  cli.build();

  auto stats = cli({"--json", "graph", "stats"});
  ASSERT_EQ(stats.exit_code, 0) << stats.err;
  auto s = json::parse(stats.out);
  EXPECT_GT(s["edges"].get<int>(), 0);
  EXPECT_EQ(s["max_out_degree"]["entity"], "i");

  auto q = cli({"--json", "index", "query", "animal shelter", "--k", "3"});
  ASSERT_EQ(q.exit_code, 0) << q.err;
  auto hits = json::parse(q.out)["hits"];
  ASSERT_FALSE(hits.empty());
  auto first_doc = xchat::testing::sample_corpus().documents().front().doc_id;
  EXPECT_EQ(hits[0]["doc_id"], first_doc);

  auto text = cli({"index", "query", "animal shelter"});
  EXPECT_NE(text.out.find("shelter="), std::string::npos);

  auto nb = cli({"--json", "graph", "neighborhood", "I", "--depth", "1"});
  ASSERT_EQ(nb.exit_code, 0) << nb.err;
  EXPECT_EQ(json::parse(nb.out)["center"], "i");
  EXPECT_EQ(cli({"graph", "neighborhood", "zorgon"}).exit_code, 2);
  EXPECT_EQ(cli({"graph", "neighborhood", "I", "--depth", "9"}).exit_code, 1);

  auto script = cli({"graph", "export", "--format", "import-script"});
  ASSERT_EQ(script.exit_code, 0);
  EXPECT_NE(script.out.find("MERGE"), std::string::npos);
  auto out = cli.tmp / "g.json";
  ASSERT_EQ(cli({"graph", "export", "--format", "structured", "--out", out.string()}).exit_code, 0);
  EXPECT_EQ(json::parse(xchat::util::read_file(out))["edges"].size(), s["edges"].get<size_t>());

  auto ex = cli({"explain", "I like to ride horses."});
  ASSERT_EQ(ex.exit_code, 0) << ex.err;
  EXPECT_NE(ex.out.find("system generated"), std::string::npos);
  auto exj = cli({"--json", "explain", "I like to ride horses."});
  EXPECT_EQ(json::parse(exj.out)["response_text"], "I like to ride horses.");

  auto tsv = cli({"extract", "--doc", first_doc});
  EXPECT_EQ(tsv.exit_code, 0);
  EXPECT_EQ(tsv.out.rfind("subject\tpredicate\tobject", 0), 0u);
  EXPECT_EQ(cli({"extract", "--doc", "ffffffff-9999"}).exit_code, 2);
}

TEST(Cli, ChatScriptAndStdin) {
  Cli cli;
  cli.build();
  auto r = cli({"--json", "chat", "--script", fixture("chat_script.txt")});
  ASSERT_EQ(r.exit_code, 0) << r.err;
  auto lines = xchat::util::split(r.out, '\n');
  size_t n = 0;
  for (const auto& l : lines) {
    if (l.empty()) continue;
    auto j = json::parse(l);
    EXPECT_FALSE(j["response"].get<std::string>().empty());
    ++n;
  }
  EXPECT_EQ(n, xchat::testing::script_lines().size());

  auto text = cli({"chat"}, "do you like animals?\n\n");
  ASSERT_EQ(text.exit_code, 0) << text.err;
  EXPECT_NE(text.out.find("bot> "), std::string::npos);
  EXPECT_NE(text.out.find("provenance:"), std::string::npos);

  EXPECT_EQ(cli({"chat", "--level", "L1"}).exit_code, 1);
  EXPECT_EQ(cli({"chat", "--level", "l2"}).exit_code, 1);
}
