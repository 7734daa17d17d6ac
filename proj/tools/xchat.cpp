// xchat: command-line driver for the corpus -> index -> graph -> chat pipeline.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 missing artifact.

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "xchat/corpus_store.hpp"
#include "xchat/error.hpp"
#include "xchat/explainer.hpp"
#include "xchat/generator_client.hpp"
#include "xchat/ontology_graph.hpp"
#include "xchat/responder.hpp"
#include "xchat/service.hpp"
#include "xchat/tfidf_index.hpp"
#include "xchat/triple_extractor.hpp"
#include "xchat/workspace.hpp"

#ifndef XCHAT_DEFAULT_LEXICON_DIR
#define XCHAT_DEFAULT_LEXICON_DIR "data/lexicon"
#endif
#ifndef XCHAT_DEFAULT_STOPWORDS
#define XCHAT_DEFAULT_STOPWORDS "data/stopwords.txt"
#endif
#ifndef XCHAT_FIXTURES_DIR
#define XCHAT_FIXTURES_DIR "fixtures"
#endif

using namespace xchat;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string data_dir = "xchat-data";
  std::string lexicon_dir = XCHAT_DEFAULT_LEXICON_DIR;
  std::string stopwords = XCHAT_DEFAULT_STOPWORDS;
  bool json = false;
};

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::Unimplemented:
      return 1;
    case ErrorCode::SnapshotMissing:
    case ErrorCode::IndexUnavailable:
      return 3;
    default:
      return 2;
  }
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

workspace::Paths paths(const Globals& g) { return {g.data_dir}; }
text::Lexicon lexicon(const Globals& g) { return text::Lexicon::load(g.lexicon_dir); }

// ---------------------------------------------------------------------------

int cmd_ingest(const Globals& g, const std::vector<std::string>& texts, const std::vector<std::string>& dialogues,
               const std::optional<std::string>& topic, bool reset) {
  if (texts.empty() && dialogues.empty()) throw Error(ErrorCode::InvalidArgument, "give at least one --text or --dialogue file");
  auto lex = lexicon(g);
  auto p = paths(g);
  corpus::Corpus c;
  if (!reset && corpus::corpus_exists(p.corpus())) c = corpus::load_corpus(p.corpus(), lex);
  size_t added = 0;
  for (const auto& t : texts) added += corpus::ingest_text(c, t, lex, topic);
  for (const auto& d : dialogues) added += corpus::ingest_dialogue_json(c, d, lex, topic);
  corpus::save_corpus(c, p.corpus());
  if (g.json) {
    std::cout << json{{"added", added}, {"documents", c.size()}, {"corpus_hash", c.hash()}}.dump() << "\n";
  } else {
    std::cout << "added " << added << " documents (" << c.size() << " total) to " << p.corpus().string() << "\n";
  }
  return 0;
}

int cmd_index_build(const Globals& g) {
  auto index = workspace::build_index(paths(g), lexicon(g), g.stopwords);
  if (g.json) {
    std::cout << json{{"documents", index.size()}, {"terms", index.terms().size()}, {"index_id", index.index_id()}}.dump() << "\n";
  } else {
    std::cout << "indexed " << index.size() << " documents, " << index.terms().size() << " terms (" << index.index_id() << ")\n";
  }
  return 0;
}

int cmd_index_query(const Globals& g, const std::string& query, size_t k, const std::optional<std::string>& topic) {
  auto p = paths(g);
  auto index = tfidf::load_index(p.index());
  auto hits = index.top_k(query, k, lexicon(g), topic);
  if (g.json) {
    json arr = json::array();
    for (const auto& h : hits) arr.push_back(explain::hit_to_json(h));
    std::cout << json{{"query", query}, {"k", k}, {"hits", arr}}.dump() << "\n";
    return 0;
  }
  std::cout << std::left << std::setw(6) << "rank" << std::setw(20) << "doc_id" << std::setw(10) << "score" << "terms\n";
  for (size_t i = 0; i < hits.size(); ++i) {
    std::cout << std::setw(6) << i + 1 << std::setw(20) << hits[i].doc_id << std::setw(10) << fmt(hits[i].score);
    for (const auto& [term, c] : hits[i].matched_terms) std::cout << term << "=" << fmt(c) << " ";
    std::cout << "\n";
  }
  if (hits.empty()) std::cout << "(no matching documents)\n";
  return 0;
}

void print_triples(const Globals& g, const std::vector<extract::Triple>& triples) {
  if (g.json) {
    json arr = json::array();
    for (const auto& t : triples) arr.push_back(graph::triple_to_json(t));
    std::cout << json{{"triples", arr}}.dump() << "\n";
    return;
  }
  std::cout << "subject\tpredicate\tobject\tpattern\tprovenance\n";
  for (const auto& t : triples) {
    std::cout << t.subject << "\t" << t.predicate << "\t" << t.object << "\t" << extract::to_string(t.pattern) << "\t"
              << t.provenance.str() << "\n";
  }
}

int cmd_extract(const Globals& g, const std::optional<std::string>& doc) {
  auto lex = lexicon(g);
  auto c = corpus::load_corpus(paths(g).corpus(), lex);
  std::vector<extract::Triple> out;
  if (doc) {
    for (const auto& s : c.get_document(*doc).sentences) {
      for (auto& t : extract::extract_triples(s)) out.push_back(std::move(t));
    }
  } else {
    out = extract::extract_corpus(c).triples();
  }
  print_triples(g, out);
  return 0;
}

int cmd_extract_golden(const Globals& g, const std::string& text_path, const std::string& expected_path, size_t min_matched) {
  auto start = std::chrono::steady_clock::now();
  auto lex = lexicon(g);
  corpus::Corpus c;
  corpus::ingest_text(c, text_path, lex);
  auto set = extract::extract_corpus(c);
  auto golden = extract::load_golden(expected_path);
  auto report = extract::compare_golden(set, golden);
  auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  bool ok = report.matched.size() >= min_matched;
  auto row = [](const auto& t) { return std::get<0>(t) + "\t" + std::get<1>(t) + "\t" + std::get<2>(t); };
  if (g.json) {
    auto list = [&](const auto& v) {
      json arr = json::array();
      for (const auto& t : v) arr.push_back({std::get<0>(t), std::get<1>(t), std::get<2>(t)});
      return arr;
    };
    std::cout << json{{"matched", list(report.matched)}, {"missing", list(report.missing)}, {"extra", list(report.extra)},
                      {"expected", golden.size()}, {"passed", ok}, {"runtime_ms", ms}}.dump()
              << "\n";
  } else {
    for (const auto& t : report.matched) std::cout << "  " << row(t) << "\n";
    for (const auto& t : report.missing) std::cout << "- " << row(t) << "\n";
    for (const auto& t : report.extra) std::cout << "+ " << row(t) << "\n";
    std::cout << report.matched.size() << "/" << golden.size() << " matched (" << fmt(ms, 1) << " ms)\n";
  }
  return ok ? 0 : 2;
}

int cmd_graph_build(const Globals& g, const std::vector<std::string>& manual) {
  std::vector<fs::path> files(manual.begin(), manual.end());
  auto gr = workspace::build_graph(paths(g), lexicon(g), files);
  if (g.json) {
    std::cout << json{{"nodes", gr.node_count()}, {"edges", gr.edge_count()}, {"graph_id", gr.graph_id()}}.dump() << "\n";
  } else {
    std::cout << "graph " << gr.graph_id() << ": " << gr.node_count() << " nodes, " << gr.edge_count() << " edges, "
              << gr.skipped().size() << " skipped intransitive triples\n";
  }
  return 0;
}

int cmd_graph_export(const Globals& g, const std::string& format, const std::optional<std::string>& out) {
  auto gr = graph::load_graph(paths(g).graph());
  std::string content;
  if (format == "import-script") {
    content = graph::export_import_script(gr);
  } else if (format == "structured") {
    content = graph::export_structured(gr).dump(1) + "\n";
  } else {
    throw Error(ErrorCode::InvalidArgument, "format must be import-script or structured");
  }
  if (out) {
    util::write_file(*out, content);
    if (!g.json) std::cout << "wrote " << *out << "\n";
  } else {
    std::cout << content;
  }
  return 0;
}

int cmd_graph_stats(const Globals& g) {
  auto gr = graph::load_graph(paths(g).graph());
  std::optional<size_t> top;
  for (size_t i = 0; i < gr.node_count(); ++i) {
    if (!top || gr.out_degree(i) > gr.out_degree(*top)) top = i;
  }
  size_t manual = 0;
  for (const auto& e : gr.edges()) manual += e.method == extract::Method::Manual;
  if (g.json) {
    json j = {{"graph_id", gr.graph_id()},       {"nodes", gr.node_count()},
              {"edges", gr.edge_count()},        {"auto_edges", gr.edge_count() - manual},
              {"manual_edges", manual},          {"predicate_types", gr.predicate_types().size()},
              {"skipped", gr.skipped().size()}};
    j["max_out_degree"] = top ? json{{"entity", gr.node(*top).canonical}, {"degree", gr.out_degree(*top)}} : json(nullptr);
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "nodes            " << gr.node_count() << "\n"
              << "edges            " << gr.edge_count() << " (" << gr.edge_count() - manual << " auto, " << manual << " manual)\n"
              << "predicate types  " << gr.predicate_types().size() << "\n"
              << "skipped (SV)     " << gr.skipped().size() << "\n";
    if (top) std::cout << "max out-degree   " << gr.node(*top).canonical << " (" << gr.out_degree(*top) << ")\n";
  }
  return 0;
}

int cmd_graph_neighborhood(const Globals& g, const std::string& entity, int depth) {
  auto lex = lexicon(g);
  auto gr = graph::load_graph(paths(g).graph());
  auto sub = graph::neighborhood(gr, graph::canonical_label(entity, lex), depth);
  if (g.json) {
    std::cout << graph::subgraph_to_json(sub).dump() << "\n";
    return 0;
  }
  for (const auto& e : sub.edges) {
    std::cout << gr.node(e.from).canonical << " -[" << e.predicate << "]-> " << gr.node(e.to).canonical << "\n";
  }
  std::cout << sub.nodes.size() << " nodes, " << sub.edges.size() << " edges\n";
  return 0;
}

int cmd_explain(const Globals& g, const std::string& response, const std::optional<std::string>& context_file, size_t k) {
  explain::ExplainConfig cfg;
  cfg.k = k;
  auto eng = workspace::Engine::open(g.data_dir, lexicon(g), cfg);
  std::vector<std::string> context;
  if (context_file) {
    for (const auto& line : util::split(util::read_file(*context_file), '\n')) {
      if (!util::trim(line).empty()) context.emplace_back(util::trim(line));
    }
  }
  auto report = eng->explainer->explain("cli", response, context);
  std::cout << explain::render_report(report, g.json ? explain::Format::Structured : explain::Format::Text);
  return 0;
}

void print_compact(const explain::ExplanationReport& r) {
  if (!r.provenance.empty()) {
    const auto& h = r.provenance.front();
    std::cout << "  provenance: " << h.doc_id << " (" << fmt(h.score) << ")";
    for (size_t i = 0; i < h.matched_terms.size() && i < 3; ++i) std::cout << " " << h.matched_terms[i].first;
    std::cout << "\n";
  } else {
    std::cout << "  provenance: none\n";
  }
  for (const auto& m : r.alignments) {
    const auto& t = m.response_triple;
    const auto& gt = m.graph_triple;
    std::cout << "  (" << t.subject << ", " << t.predicate << ", " << t.object << ") ~ (" << gt.subject_surface << ", " << gt.predicate
              << ", " << gt.object_surface << ") " << fmt(m.score, 3) << "\n";
  }
  for (const auto& t : r.unmatched) std::cout << "  (" << t.subject << ", " << t.predicate << ", " << t.object << ") unmatched\n";
  if (r.generator == "fallback") std::cout << "  generator unavailable, retrieval fallback used\n";
}

int cmd_chat(const Globals& g, const std::string& level, const std::optional<std::string>& topic, const std::string& generator,
             const std::optional<std::string>& endpoint, const std::optional<std::string>& script) {
  auto eng = workspace::Engine::open(g.data_dir, lexicon(g));
  responder::SessionStore sessions(eng->paths.sessions());
  responder::ReportStore reports(eng->paths.reports());
  auto session = sessions.create(responder::parse_level(level), topic, responder::parse_generator(generator));
  responder::Responder r(eng->lex, eng->utterances, *eng->explainer, sessions, reports);
  if (endpoint) {
    responder::GeneratorConfig cfg;
    cfg.endpoint = *endpoint;
    r.set_external(generator::http_generator(cfg), cfg);
  }
  std::ifstream file;
  std::istream* in = &std::cin;
  if (script) {
    file.open(*script);
    if (!file) throw Error(ErrorCode::FileUnreadable, *script);
    in = &file;
  }
  bool interactive = !script && !g.json;
  if (interactive) std::cout << "session " << session.session_id << " (empty line or EOF quits)\n";
  std::string line;
  while (true) {
    if (interactive) std::cout << "you> " << std::flush;
    if (!std::getline(*in, line)) break;
    if (util::trim(line).empty()) {
      if (interactive) break;
      continue;
    }
    auto out = r.converse(session, line);
    if (g.json) {
      std::cout << json{{"session_id", session.session_id}, {"message", util::normalize_ws(line)}, {"response", out.response},
                        {"response_id", out.response_id}, {"generator", out.report.generator}}
                       .dump()
                << "\n";
    } else {
      if (script) std::cout << "you> " << line << "\n";
      std::cout << "bot> " << out.response << "   [" << out.response_id << "]\n";
      print_compact(out.report);
    }
  }
  return 0;
}

service::Service* g_service = nullptr;

int cmd_serve(const Globals& g, const std::optional<std::string>& config, std::optional<int> port) {
  service::ServerConfig base;
  base.data_dir = g.data_dir;
  base.lexicon_dir = g.lexicon_dir;
  auto cfg = service::load_config(config ? std::optional<fs::path>(*config) : std::nullopt, base);
  if (port) cfg.port = *port;
  service::Service svc(cfg);
  g_service = &svc;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->shutdown();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->shutdown();
  });
  int bound = svc.start();
  std::cout << "serving on http://" << cfg.host << ":" << bound << std::endl;
  svc.wait();
  g_service = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xchat: explainable chat pipeline (ingest, index, extract, graph, explain, chat, serve)"};
  app.require_subcommand(1);
  Globals g;
  if (const char* env = std::getenv("XCHAT_DATA_DIR")) g.data_dir = env;
  if (const char* env = std::getenv("XCHAT_LEXICON_DIR")) g.lexicon_dir = env;
  app.add_option("--data-dir", g.data_dir, "Data directory (env XCHAT_DATA_DIR)");
  app.add_option("--lexicon", g.lexicon_dir, "Lexicon directory");
  app.add_option("--stopwords", g.stopwords, "Stopword list used by `index build`");
  app.add_flag("--json", g.json, "Structured output");

  std::vector<std::string> texts, dialogues, manual;
  std::optional<std::string> topic, doc, out, context, endpoint, script, config;
  std::string query, format = "structured", level = "l3", generator = "retrieval", response, entity;
  size_t k = 5;
  int depth = 1;
  std::optional<int> port;
  bool reset = false;
  std::string golden_text = std::string(XCHAT_FIXTURES_DIR) + "/sample_paragraph.txt";
  std::string golden_expected = std::string(XCHAT_FIXTURES_DIR) + "/sample_golden.tsv";
  size_t golden_min = 8;
  bool golden = false;

  auto* ingest = app.add_subcommand("ingest", "Add text or dialogue files to the corpus");
  ingest->add_option("--text", texts, "Plain-text corpus file (paragraphs separated by blank lines)")->check(CLI::ExistingFile);
  ingest->add_option("--dialogue", dialogues, "Dialogue JSON file")->check(CLI::ExistingFile);
  ingest->add_option("--topic", topic, "Topic label for the added documents");
  ingest->add_flag("--reset", reset, "Start a new corpus instead of appending");

  auto* index = app.add_subcommand("index", "TF-IDF index");
  index->require_subcommand(1);
  auto* index_build = index->add_subcommand("build", "Build the index from the corpus");
  auto* index_query = index->add_subcommand("query", "Rank documents for a query");
  index_query->add_option("query", query, "Query text")->required();
  index_query->add_option("--k", k, "Number of hits")->check(CLI::PositiveNumber);
  index_query->add_option("--topic", topic, "Restrict to a topic");

  auto* extract = app.add_subcommand("extract", "Print extracted triples as TSV");
  extract->add_option("--doc", doc, "Only this document");
  extract->add_flag("--golden", golden, "Compare the bundled sample paragraph against its expected triples");
  extract->add_option("--golden-text", golden_text, "Paragraph file for --golden");
  extract->add_option("--golden-expected", golden_expected, "Expected triples TSV for --golden");
  extract->add_option("--golden-min", golden_min, "Matches required for success");

  auto* graph_cmd = app.add_subcommand("graph", "Ontology graph");
  graph_cmd->require_subcommand(1);
  auto* graph_build = graph_cmd->add_subcommand("build", "Build the graph from corpus triples and manual triples");
  graph_build->add_option("--manual", manual, "Manual triple TSV")->check(CLI::ExistingFile);
  auto* graph_export = graph_cmd->add_subcommand("export", "Export the graph");
  graph_export->add_option("--format", format, "import-script or structured")->check(CLI::IsMember({"import-script", "structured"}));
  graph_export->add_option("--out", out, "Output file (stdout when omitted)");
  auto* graph_stats = graph_cmd->add_subcommand("stats", "Node, edge and predicate-type counts");
  auto* graph_nb = graph_cmd->add_subcommand("neighborhood", "Subgraph around an entity");
  graph_nb->add_option("entity", entity, "Entity label")->required();
  graph_nb->add_option("--depth", depth, "Hops (1..3)")->check(CLI::Range(1, 3));

  auto* explain_cmd = app.add_subcommand("explain", "Explain a response against the training data");
  explain_cmd->add_option("response", response, "Response text")->required();
  explain_cmd->add_option("--context", context, "File with recent user turns, one per line")->check(CLI::ExistingFile);
  size_t explain_k = 3;
  explain_cmd->add_option("--k", explain_k, "Provenance depth")->check(CLI::PositiveNumber);

  auto* chat = app.add_subcommand("chat", "Terminal chat with inline explanations");
  chat->add_option("--level", level, "l2 or l3")->check(CLI::IsMember({"l1", "l2", "l3"}, CLI::ignore_case));
  chat->add_option("--topic", topic, "Topic (required for l2)");
  chat->add_option("--generator", generator, "retrieval or external")->check(CLI::IsMember({"retrieval", "external"}));
  chat->add_option("--endpoint", endpoint, "External generator base URL");
  chat->add_option("--script", script, "Read user turns from a file instead of stdin")->check(CLI::ExistingFile);

  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  serve->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  serve->add_option("--port", port, "Override the configured port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*ingest) return cmd_ingest(g, texts, dialogues, topic, reset);
    if (*index_build) return cmd_index_build(g);
    if (*index_query) return cmd_index_query(g, query, k, topic);
    if (*extract) return golden ? cmd_extract_golden(g, golden_text, golden_expected, golden_min) : cmd_extract(g, doc);
    if (*graph_build) return cmd_graph_build(g, manual);
    if (*graph_export) return cmd_graph_export(g, format, out);
    if (*graph_stats) return cmd_graph_stats(g);
    if (*graph_nb) return cmd_graph_neighborhood(g, entity, depth);
    if (*explain_cmd) return cmd_explain(g, response, context, explain_k);
    if (*chat) return cmd_chat(g, level, topic, generator, endpoint, script);
    if (*serve) return cmd_serve(g, config, port);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
