#pragma once

// Entity/relation property graph built from triples.
//
// Nodes merge on the canonical label (lemmatized, lowercase). Edges are keyed
// by (from, predicate surface, to); inserting an existing edge only appends
// provenance. Triples without an object register their subject node and go
// to the skipped log.

#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "xchat/error.hpp"
#include "xchat/text_pipeline.hpp"
#include "xchat/triple_extractor.hpp"
#include "xchat/util.hpp"

namespace xchat::graph {

using extract::Method;
using extract::Provenance;
using extract::Triple;

struct EntityNode {
  size_t node_id = 0;
  std::string canonical;
  std::set<std::string> surfaces;
  bool as_subject = false;
  bool as_object = false;
  std::optional<std::string> external_link;
  bool link_verified = false;

  bool operator==(const EntityNode&) const = default;
};

struct RelationEdge {
  size_t edge_id = 0;
  size_t from = 0;
  size_t to = 0;
  std::string predicate;
  Method method = Method::Auto;  // method of the first insertion
  std::string subject_surface;   // surfaces of the first insertion, for display
  std::string object_surface;
  std::vector<Provenance> provenance;

  bool operator==(const RelationEdge&) const = default;
};

/// Lowercase lemma of every word in the phrase, space-joined.
inline std::string canonical_label(std::string_view phrase, const text::Lexicon& lex) {
  std::vector<std::string> parts;
  for (auto& [lemma, _] : text::phrase_lemmas(phrase, text::Pos::NOUN, lex)) parts.push_back(lemma);
  if (parts.empty()) return util::to_lower(util::normalize_ws(phrase));
  return util::join(parts, " ");
}

class OntologyGraph {
 public:
  const std::vector<EntityNode>& nodes() const { return nodes_; }
  const std::vector<RelationEdge>& edges() const { return edges_; }
  const std::vector<Triple>& skipped() const { return skipped_; }
  size_t node_count() const { return nodes_.size(); }
  size_t edge_count() const { return edges_.size(); }

  std::optional<size_t> find_node(const std::string& canonical) const {
    auto it = by_canonical_.find(canonical);
    return it == by_canonical_.end() ? std::nullopt : std::optional<size_t>(it->second);
  }

  const EntityNode& node(size_t id) const { return nodes_.at(id); }
  EntityNode& node(size_t id) { return nodes_.at(id); }
  const RelationEdge& edge(size_t id) const { return edges_.at(id); }

  const std::vector<size_t>& out_edges(size_t node_id) const { return out_.at(node_id); }
  const std::vector<size_t>& in_edges(size_t node_id) const { return in_.at(node_id); }
  size_t out_degree(size_t node_id) const { return out_.at(node_id).size(); }

  std::set<std::string> predicate_types() const {
    std::set<std::string> out;
    for (const auto& e : edges_) out.insert(e.predicate);
    return out;
  }

  /// Edge id, or nullopt when the triple has no object (logged as skipped).
  std::optional<size_t> insert(const Triple& t, const text::Lexicon& lex) {
    auto s = resolve(t.subject, lex);
    nodes_[s].as_subject = true;
    if (t.object.empty()) {
      skipped_.push_back(t);
      return std::nullopt;
    }
    auto o = resolve(t.object, lex);
    nodes_[o].as_object = true;
    auto key = std::make_tuple(s, t.predicate, o);
    if (auto it = by_key_.find(key); it != by_key_.end()) {
      auto& e = edges_[it->second];
      e.provenance.push_back(t.provenance);
      return e.edge_id;
    }
    RelationEdge e;
    e.edge_id = edges_.size();
    e.from = s;
    e.to = o;
    e.predicate = t.predicate;
    e.method = t.method;
    e.subject_surface = t.subject;
    e.object_surface = t.object;
    e.provenance.push_back(t.provenance);
    by_key_.emplace(key, e.edge_id);
    out_[s].push_back(e.edge_id);
    in_[o].push_back(e.edge_id);
    edges_.push_back(std::move(e));
    return edges_.back().edge_id;
  }

  // Raw insertion used by import; ids must arrive densely in order.
  void restore_node(EntityNode n) {
    if (n.node_id != nodes_.size()) throw Error(ErrorCode::MalformedRecord, "node ids must be dense and ordered");
    by_canonical_.emplace(n.canonical, n.node_id);
    nodes_.push_back(std::move(n));
    out_.emplace_back();
    in_.emplace_back();
  }

  void restore_edge(RelationEdge e) {
    if (e.edge_id != edges_.size()) throw Error(ErrorCode::MalformedRecord, "edge ids must be dense and ordered");
    if (e.from >= nodes_.size() || e.to >= nodes_.size()) throw Error(ErrorCode::MalformedRecord, "dangling edge endpoint");
    if (!by_key_.emplace(std::make_tuple(e.from, e.predicate, e.to), e.edge_id).second) {
      throw Error(ErrorCode::MalformedRecord, "duplicate edge key");
    }
    out_[e.from].push_back(e.edge_id);
    in_[e.to].push_back(e.edge_id);
    edges_.push_back(std::move(e));
  }

  void restore_skipped(Triple t) { skipped_.push_back(std::move(t)); }

  bool operator==(const OntologyGraph& o) const {
    return nodes_ == o.nodes_ && edges_ == o.edges_ && skipped_ == o.skipped_ && corpus_hash == o.corpus_hash;
  }

  std::string corpus_hash;
  std::string graph_id() const { return corpus_hash.empty() ? std::string() : "graph-" + corpus_hash.substr(0, 16); }

 private:
  size_t resolve(const std::string& surface, const text::Lexicon& lex) {
    auto canonical = canonical_label(surface, lex);
    auto it = by_canonical_.find(canonical);
    size_t id;
    if (it == by_canonical_.end()) {
      id = nodes_.size();
      EntityNode n;
      n.node_id = id;
      n.canonical = canonical;
      nodes_.push_back(std::move(n));
      out_.emplace_back();
      in_.emplace_back();
      by_canonical_.emplace(canonical, id);
    } else {
      id = it->second;
    }
    nodes_[id].surfaces.insert(surface);
    return id;
  }

  std::vector<EntityNode> nodes_;
  std::vector<RelationEdge> edges_;
  std::vector<Triple> skipped_;
  std::map<std::string, size_t> by_canonical_;
  std::map<std::tuple<size_t, std::string, size_t>, size_t> by_key_;
  std::vector<std::vector<size_t>> out_;
  std::vector<std::vector<size_t>> in_;
};

/// Throws SkippedIntransitive (after recording the subject node and the
/// skipped-log entry) when the triple has no object.
inline size_t upsert_triple(OntologyGraph& g, const Triple& t, const text::Lexicon& lex) {
  auto id = g.insert(t, lex);
  if (!id) throw Error(ErrorCode::SkippedIntransitive, t.subject + " " + t.predicate);
  return *id;
}

inline OntologyGraph build_graph(const extract::TripleSet& automatic, const std::vector<Triple>& manual, const text::Lexicon& lex) {
  OntologyGraph g;
  for (const auto& t : automatic.triples()) g.insert(t, lex);
  for (const auto& t : manual) g.insert(t, lex);
  return g;
}

// ---------------------------------------------------------------------------
// Neighborhood

struct Subgraph {
  std::string center;
  int depth = 1;
  std::vector<EntityNode> nodes;    // ascending node_id
  std::vector<RelationEdge> edges;  // ascending edge_id, both ends inside
};

/// Nodes within `depth` hops of the entity (edges followed both ways) and
/// every edge between them.
inline Subgraph neighborhood(const OntologyGraph& g, const std::string& canonical, int depth) {
  if (depth < 1 || depth > 3) throw Error(ErrorCode::InvalidArgument, "depth must be 1..3");
  auto start = g.find_node(canonical);
  if (!start) throw Error(ErrorCode::UnknownEntity, canonical);
  std::map<size_t, int> dist{{*start, 0}};
  std::deque<size_t> queue{*start};
  while (!queue.empty()) {
    auto n = queue.front();
    queue.pop_front();
    if (dist[n] == depth) continue;
    auto visit = [&](size_t m) {
      if (dist.emplace(m, dist[n] + 1).second) queue.push_back(m);
    };
    for (auto e : g.out_edges(n)) visit(g.edge(e).to);
    for (auto e : g.in_edges(n)) visit(g.edge(e).from);
  }
  Subgraph sub;
  sub.center = canonical;
  sub.depth = depth;
  for (const auto& [id, _] : dist) sub.nodes.push_back(g.node(id));
  for (const auto& e : g.edges()) {
    if (dist.count(e.from) && dist.count(e.to)) sub.edges.push_back(e);
  }
  return sub;
}

// ---------------------------------------------------------------------------
// External links

/// Returns true/false for "resource exists", nullopt when the lookup failed.
using LinkProbe = std::function<std::optional<bool>(const std::string& url)>;

/// Entities made only of function words (pronouns, determiners, ...) are never linked.
inline bool link_blocked(const std::string& canonical, const text::Lexicon& lex) {
  for (const auto& word : util::split(canonical, ' ')) {
    auto pos = lex.closed_class(word);
    if (!pos || *pos == text::Pos::ADJ || *pos == text::Pos::ADV || *pos == text::Pos::NOUN || *pos == text::Pos::NUM) return false;
  }
  return true;
}

inline std::string dbpedia_url(const std::string& canonical) {
  std::string label = canonical;
  for (auto& c : label) {
    if (c == ' ') c = '_';
  }
  if (!label.empty() && label[0] >= 'a' && label[0] <= 'z') label[0] = static_cast<char>(label[0] - 'a' + 'A');
  return "http://dbpedia.org/resource/" + label;
}

/// Offline (no probe): stores the constructed link unverified. With a probe:
/// stores it only on confirmation; a failed lookup raises LookupUnavailable.
inline std::optional<std::string> link_external(OntologyGraph& g, const std::string& canonical, const text::Lexicon& lex,
                                                const LinkProbe& probe = nullptr) {
  auto id = g.find_node(canonical);
  if (!id) throw Error(ErrorCode::UnknownEntity, canonical);
  auto& n = g.node(*id);
  if (link_blocked(canonical, lex)) return std::nullopt;
  auto url = dbpedia_url(canonical);
  if (!probe) {
    n.external_link = url;
    n.link_verified = false;
    return url;
  }
  auto exists = probe(url);
  if (!exists) throw Error(ErrorCode::LookupUnavailable, url);
  if (!*exists) return std::nullopt;
  n.external_link = url;
  n.link_verified = true;
  return url;
}

inline size_t link_all(OntologyGraph& g, const text::Lexicon& lex, const LinkProbe& probe = nullptr) {
  size_t linked = 0;
  for (size_t i = 0; i < g.node_count(); ++i) {
    try {
      if (link_external(g, g.node(i).canonical, lex, probe)) ++linked;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::LookupUnavailable) throw;
    }
  }
  return linked;
}

// ---------------------------------------------------------------------------
// Export / import

inline constexpr const char* kGraphFormat = "xchat-graph-1";

inline nlohmann::json provenance_to_json(const Provenance& p) {
  if (p.is_manual()) return {{"manual", p.manual_tag}};
  return {{"doc_id", p.doc_id}, {"sent_id", p.sent_id}};
}

inline Provenance provenance_from_json(const nlohmann::json& j) {
  Provenance p;
  if (j.contains("manual")) {
    p.manual_tag = j.at("manual").get<std::string>();
  } else {
    p.doc_id = j.at("doc_id").get<std::string>();
    p.sent_id = j.at("sent_id").get<size_t>();
  }
  return p;
}

inline nlohmann::json node_to_json(const EntityNode& n) {
  nlohmann::json roles = nlohmann::json::array();
  if (n.as_subject) roles.push_back("subject");
  if (n.as_object) roles.push_back("object");
  nlohmann::json j = {{"node_id", n.node_id}, {"canonical", n.canonical}, {"surfaces", n.surfaces}, {"roles", roles}};
  j["external_link"] = n.external_link ? nlohmann::json(*n.external_link) : nlohmann::json(nullptr);
  j["link_verified"] = n.link_verified;
  return j;
}

inline nlohmann::json edge_to_json(const RelationEdge& e) {
  nlohmann::json prov = nlohmann::json::array();
  for (const auto& p : e.provenance) prov.push_back(provenance_to_json(p));
  return {{"edge_id", e.edge_id},
          {"from", e.from},
          {"to", e.to},
          {"predicate", e.predicate},
          {"method", std::string(extract::to_string(e.method))},
          {"subject_surface", e.subject_surface},
          {"object_surface", e.object_surface},
          {"provenance", prov}};
}

inline nlohmann::json triple_to_json(const Triple& t) {
  return {{"subject", t.subject},
          {"predicate", t.predicate},
          {"object", t.object},
          {"pattern", std::string(extract::to_string(t.pattern))},
          {"method", std::string(extract::to_string(t.method))},
          {"provenance", provenance_to_json(t.provenance)}};
}

inline Triple triple_from_json(const nlohmann::json& j) {
  Triple t;
  t.subject = j.at("subject").get<std::string>();
  t.predicate = j.at("predicate").get<std::string>();
  t.object = j.at("object").get<std::string>();
  auto pattern = extract::parse_pattern(j.at("pattern").get<std::string>());
  if (!pattern) throw Error(ErrorCode::MalformedRecord, "unknown pattern");
  t.pattern = *pattern;
  t.method = extract::parse_method(j.at("method").get<std::string>());
  t.provenance = provenance_from_json(j.at("provenance"));
  return t;
}

inline nlohmann::json subgraph_to_json(const Subgraph& s) {
  nlohmann::json nodes = nlohmann::json::array();
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& n : s.nodes) nodes.push_back(node_to_json(n));
  for (const auto& e : s.edges) edges.push_back(edge_to_json(e));
  return {{"center", s.center}, {"depth", s.depth}, {"nodes", nodes}, {"edges", edges}};
}

inline nlohmann::json export_structured(const OntologyGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  nlohmann::json edges = nlohmann::json::array();
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& n : g.nodes()) nodes.push_back(node_to_json(n));
  for (const auto& e : g.edges()) edges.push_back(edge_to_json(e));
  for (const auto& t : g.skipped()) skipped.push_back(triple_to_json(t));
  return {{"format", kGraphFormat}, {"graph_id", g.graph_id()}, {"corpus_hash", g.corpus_hash},
          {"nodes", nodes},         {"edges", edges},           {"skipped", skipped}};
}

inline OntologyGraph import_structured(const nlohmann::json& j) {
  if (j.value("format", "") != kGraphFormat) throw Error(ErrorCode::MalformedRecord, "not an xchat graph record");
  OntologyGraph g;
  g.corpus_hash = j.at("corpus_hash").get<std::string>();
  for (const auto& jn : j.at("nodes")) {
    EntityNode n;
    n.node_id = jn.at("node_id").get<size_t>();
    n.canonical = jn.at("canonical").get<std::string>();
    n.surfaces = jn.at("surfaces").get<std::set<std::string>>();
    for (const auto& r : jn.at("roles")) {
      if (r == "subject") n.as_subject = true;
      if (r == "object") n.as_object = true;
    }
    if (!jn.at("external_link").is_null()) n.external_link = jn.at("external_link").get<std::string>();
    n.link_verified = jn.at("link_verified").get<bool>();
    g.restore_node(std::move(n));
  }
  for (const auto& je : j.at("edges")) {
    RelationEdge e;
    e.edge_id = je.at("edge_id").get<size_t>();
    e.from = je.at("from").get<size_t>();
    e.to = je.at("to").get<size_t>();
    e.predicate = je.at("predicate").get<std::string>();
    e.method = extract::parse_method(je.at("method").get<std::string>());
    e.subject_surface = je.at("subject_surface").get<std::string>();
    e.object_surface = je.at("object_surface").get<std::string>();
    for (const auto& p : je.at("provenance")) e.provenance.push_back(provenance_from_json(p));
    g.restore_edge(std::move(e));
  }
  for (const auto& t : j.at("skipped")) g.restore_skipped(triple_from_json(t));
  return g;
}

namespace detail {

inline std::string cypher_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\\' || c == '\'') out += '\\';
    out += c;
  }
  return out + "'";
}

inline std::string cypher_list(const std::vector<std::string>& items) {
  std::string out = "[";
  for (size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + cypher_quote(items[i]);
  return out + "]";
}

}  // namespace detail

/// One statement per line: every node, then every edge.
inline std::string export_import_script(const OntologyGraph& g) {
  using detail::cypher_list;
  using detail::cypher_quote;
  std::ostringstream out;
  for (const auto& n : g.nodes()) {
    std::vector<std::string> roles;
    if (n.as_subject) roles.push_back("subject");
    if (n.as_object) roles.push_back("object");
    out << "MERGE (:Entity {node_id: " << n.node_id << ", canonical: " << cypher_quote(n.canonical)
        << ", surfaces: " << cypher_list({n.surfaces.begin(), n.surfaces.end()}) << ", roles: " << cypher_list(roles);
    if (n.external_link) out << ", external_link: " << cypher_quote(*n.external_link) << ", link_verified: " << (n.link_verified ? "true" : "false");
    out << "});\n";
  }
  for (const auto& e : g.edges()) {
    std::vector<std::string> prov;
    for (const auto& p : e.provenance) prov.push_back(p.str());
    out << "MATCH (a:Entity {node_id: " << e.from << "}), (b:Entity {node_id: " << e.to << "}) MERGE (a)-[:RELATION {edge_id: "
        << e.edge_id << ", predicate: " << cypher_quote(e.predicate) << ", method: " << cypher_quote(extract::to_string(e.method))
        << ", provenance: " << cypher_list(prov) << "}]->(b);\n";
  }
  return out.str();
}

inline void save_graph(const OntologyGraph& g, const std::filesystem::path& dir) {
  util::write_file(dir / "graph.json", export_structured(g).dump(1) + "\n");
}

inline bool graph_exists(const std::filesystem::path& dir) { return std::filesystem::exists(dir / "graph.json"); }

inline OntologyGraph load_graph(const std::filesystem::path& dir) {
  if (!graph_exists(dir)) throw Error(ErrorCode::SnapshotMissing, "no graph at " + dir.string() + " (run `graph build`)");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(util::read_file(dir / "graph.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("graph.json: ") + e.what());
  }
  return import_structured(j);
}

}  // namespace xchat::graph
