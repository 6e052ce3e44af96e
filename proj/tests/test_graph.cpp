#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hierprompt/graph.hpp"
#include "hierprompt/synth.hpp"
#include "support.hpp"

using namespace hierprompt;
using testing_support::dblp_schema;
using testing_support::scratch_dir;
using testing_support::tiny_dblp;

TEST(Graph, NeighborsAreSortedAndSymmetric) {
  const HtrnGraph g = tiny_dblp();
  const auto a0 = *g.find_node("a0");
  const auto nb = g.neighbors(a0, 1);
  ASSERT_EQ(nb.size(), 2u);
  EXPECT_EQ(g.external_id(nb[0]), "p0");
  EXPECT_EQ(g.external_id(nb[1]), "p1");
  for (const auto& e : g.edges()) {
    EXPECT_TRUE(g.has_edge(e.src, e.relation, e.dst));
    EXPECT_TRUE(g.has_edge(e.dst, e.relation, e.src));
  }
  std::size_t deg = 0;
  for (NodeId u = 0; u < g.num_nodes(); ++u) deg += g.degree(u);
  EXPECT_EQ(deg, 2 * g.num_edges());
}

TEST(Graph, TwoEdgesFromOneNode) {
  GraphBuilder b(dblp_schema());
  for (int i = 0; i < 4; ++i) b.add_node("p" + std::to_string(i), 0, "t");
  b.add_edge(1, 2, 0);
  b.add_edge(1, 3, 0);
  const HtrnGraph g = std::move(b).build();
  const auto nb = g.neighbors(1, 0);
  EXPECT_EQ(std::vector<NodeId>(nb.begin(), nb.end()), (std::vector<NodeId>{2, 3}));
  EXPECT_TRUE(g.neighbors(0, 0).empty());
}

TEST(Graph, NeighborsMatchEdgeScan) {
  const Dataset d = synth_graph(SynthConfig::dblp_like(60, 20, 4), 3);
  const HtrnGraph& g = d.graph;
  std::mt19937_64 rng(11);
  for (int q = 0; q < 1000; ++q) {
    const NodeId u = static_cast<NodeId>(rng() % g.num_nodes());
    const RelationId r = static_cast<RelationId>(rng() % g.schema().relations().size());
    std::vector<NodeId> scan;
    for (const auto& e : g.edges()) {
      if (e.relation != r) continue;
      if (e.src == u) scan.push_back(e.dst);
      if (e.dst == u) scan.push_back(e.src);
    }
    std::sort(scan.begin(), scan.end());
    const auto nb = g.neighbors(u, r);
    ASSERT_EQ(std::vector<NodeId>(nb.begin(), nb.end()), scan);
  }
}

TEST(Graph, BuilderRejectsBadEdges) {
  GraphBuilder b(dblp_schema());
  b.add_node("p0", 0, "x");
  b.add_node("a0", 1, "a0");
  EXPECT_THROW(b.add_edge(0, 0, 0), Error);     // self-loop
  EXPECT_THROW(b.add_edge(0, 1, 0), Error);     // cite needs two papers
  EXPECT_THROW(b.add_edge(0, 7, 1), Error);     // dangling
  EXPECT_THROW(b.add_node("p0", 0, "y"), Error);  // duplicate id
  EXPECT_THROW(b.add_node("p9", 0, ""), Error);   // empty text
}

TEST(Graph, SchemaNeedsHeterogeneity) {
  json j = {{"node_types", {{{"name", "paper"}, {"abbrev", "P"}}}},
            {"relations", {{{"name", "cite"}, {"src", "paper"}, {"dst", "paper"}}}}};
  EXPECT_THROW(Schema::from_json(j), Error);
}

namespace {

void write(const std::filesystem::path& p, const std::string& s) { write_text_file(p, s); }

std::string schema_json() { return dblp_schema().to_json().dump(); }

}  // namespace

TEST(Graph, LoadsDblpShapedFiles) {
  const auto dir = scratch_dir("load");
  write(dir / "schema.json", schema_json());
  write(dir / "nodes.jsonl",
        "{\"id\":\"p1\",\"type\":\"paper\",\"text\":\"a\",\"label\":\"0\"}\n"
        "{\"id\":\"a1\",\"type\":\"author\",\"text\":\"Ann\"}\n"
        "{\"id\":\"v1\",\"type\":\"venue\",\"text\":\"KDD\"}\n");
  write(dir / "edges.jsonl",
        "{\"src\":\"a1\",\"dst\":\"p1\",\"relation\":\"write\"}\n{\"src\":\"v1\",\"dst\":\"p1\",\"relation\":\"publish\"}\n");
  const Dataset d = load_dataset(dir / "nodes.jsonl", dir / "edges.jsonl", dir / "schema.json");
  EXPECT_EQ(d.graph.num_nodes(), 3u);
  EXPECT_EQ(d.graph.num_edges(), 2u);
  std::vector<std::string> abbrevs;
  for (const auto& t : d.graph.schema().node_types()) abbrevs.push_back(t.abbrev);
  EXPECT_EQ(abbrevs, (std::vector<std::string>{"P", "A", "V"}));
  EXPECT_EQ(d.labels.class_of[0], 0);
  EXPECT_EQ(d.labels.class_of[1], -1);
  std::filesystem::remove_all(dir);
}

TEST(Graph, EmptyEdgesFileIsValid) {
  const auto dir = scratch_dir("empty");
  write(dir / "schema.json", schema_json());
  write(dir / "nodes.jsonl", "{\"id\":\"p1\",\"type\":\"paper\",\"text\":\"a\"}\n");
  write(dir / "edges.jsonl", "");
  const HtrnGraph g = load_graph(dir / "nodes.jsonl", dir / "edges.jsonl", dir / "schema.json");
  EXPECT_EQ(g.num_edges(), 0u);
  std::filesystem::remove_all(dir);
}

TEST(Graph, DanglingEdgeNamesTheIdAndLine) {
  const auto dir = scratch_dir("dangling");
  write(dir / "schema.json", schema_json());
  write(dir / "nodes.jsonl", "{\"id\":\"p1\",\"type\":\"paper\",\"text\":\"a\"}\n");
  write(dir / "edges.jsonl", "\n{\"src\":\"p1\",\"dst\":\"p404\",\"relation\":\"cite\"}\n");
  try {
    load_graph(dir / "nodes.jsonl", dir / "edges.jsonl", dir / "schema.json");
    FAIL() << "expected a data error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
    EXPECT_NE(std::string(e.what()).find("p404"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST(Graph, UnknownTypeIsRejected) {
  const auto dir = scratch_dir("unknown");
  write(dir / "schema.json", schema_json());
  write(dir / "nodes.jsonl", "{\"id\":\"x\",\"type\":\"patent\",\"text\":\"a\"}\n");
  write(dir / "edges.jsonl", "");
  EXPECT_THROW(load_graph(dir / "nodes.jsonl", dir / "edges.jsonl", dir / "schema.json"), Error);
  std::filesystem::remove_all(dir);
}

TEST(Graph, SerializeLoadRoundTripIsByteIdentical) {
  const Dataset d = synth_graph(SynthConfig::dblp_like(40, 10, 3), 5);
  const auto dir = scratch_dir("roundtrip");
  save_dataset(d, dir);
  const Dataset back = load_dataset(dir / "nodes.jsonl", dir / "edges.jsonl", dir / "schema.json");
  EXPECT_EQ(serialize_nodes(back.graph, &back.labels), serialize_nodes(d.graph, &d.labels));
  EXPECT_EQ(serialize_edges(back.graph), serialize_edges(d.graph));
  EXPECT_EQ(graph_hash(back.graph), graph_hash(d.graph));
  std::filesystem::remove_all(dir);
}

TEST(Graph, SanitizeRemovesMarkerBrackets) {
  const std::string s = sanitize_text("x \xE2\x9F\xA8GT:PAP\xE2\x9F\xA9 y");
  EXPECT_EQ(s.find("\xE2\x9F\xA8"), std::string::npos);
  EXPECT_EQ(s.find("\xE2\x9F\xA9"), std::string::npos);
}

// Planted-community generator.

namespace {

double intra_fraction(const Dataset& d, const std::string& relation) {
  const auto comm = planted_communities(d.graph, 4);
  const auto r = *d.graph.schema().find_relation(relation);
  std::size_t intra = 0, total = 0;
  for (const auto& e : d.graph.edges()) {
    if (e.relation != r) continue;
    ++total;
    intra += comm[e.src] == comm[e.dst];
  }
  return static_cast<double>(intra) / static_cast<double>(total);
}

}  // namespace

TEST(Synth, BiasedGraphIsMostlyIntraCommunity) {
  const Dataset d = synth_graph(SynthConfig::dblp_like(300, 60, 8), 7);
  EXPECT_EQ(d.graph.type_counts(), (std::vector<std::size_t>{300, 60, 8}));
  EXPECT_GE(intra_fraction(d, "write"), 0.8);
}

TEST(Synth, ZeroBiasMatchesBinomialExpectation) {
  SynthConfig c = SynthConfig::dblp_like(300, 60, 8);
  c.bias = 0.0;
  const Dataset d = synth_graph(c, 7);
  const auto r = *d.graph.schema().find_relation("write");
  const double n = static_cast<double>(d.graph.relation_counts()[r]);
  const double sigma = std::sqrt(0.25 * 0.75 / n);
  EXPECT_NEAR(intra_fraction(d, "write"), 0.25, 3 * sigma);
}

TEST(Synth, SameSeedSameBytes) {
  const auto c = SynthConfig::dblp_like(50, 10, 3);
  const Dataset a = synth_graph(c, 9), b = synth_graph(c, 9), other = synth_graph(c, 10);
  EXPECT_EQ(serialize_nodes(a.graph, &a.labels), serialize_nodes(b.graph, &b.labels));
  EXPECT_EQ(serialize_edges(a.graph), serialize_edges(b.graph));
  EXPECT_NE(serialize_edges(a.graph), serialize_edges(other.graph));
}

TEST(Synth, LabelsMatchCommunitySizes) {
  const Dataset d = synth_graph(SynthConfig::dblp_like(300, 60, 8), 7);
  std::vector<int> counts(4, 0);
  for (int c : d.labels.class_of)
    if (c >= 0) ++counts[static_cast<std::size_t>(c)];
  EXPECT_EQ(counts, (std::vector<int>{75, 75, 75, 75}));
  for (auto a : d.graph.nodes_of_type(1)) EXPECT_EQ(d.graph.node(a).text, d.graph.external_id(a));
}

TEST(Synth, InfeasibleEdgeCountFails) {
  SynthConfig c = SynthConfig::dblp_like(10, 2, 1);
  c.relations[2].count = 11;  // 1 venue x 10 papers
  EXPECT_THROW(synth_graph(c, 1), Error);
}
