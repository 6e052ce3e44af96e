#include <gtest/gtest.h>

#include <algorithm>

#include "hierprompt/embed.hpp"
#include "support.hpp"

using namespace hierprompt;
using testing_support::TinyWorld;

TEST(Embed, NodeMatchesPooledForward) {
  TinyWorld w;
  const auto params = init_params(testing_support::tiny_encoder(w), 4);
  const auto enc = w.factory.node(2);
  const auto t = forward(params, enc.sequence, enc.soft);
  EXPECT_TRUE(embed_node(params, w.factory, 2) == t.hidden.row(0));
  EXPECT_TRUE(embed_node(params, w.factory, 2, Pooling::kMean) == pool(t, Pooling::kMean));
  EXPECT_TRUE(embed_node(params, w.factory, 2) == embed_node(params, w.factory, 2));
}

TEST(Embed, BatchesStackRows) {
  TinyWorld w;
  const auto params = init_params(testing_support::tiny_encoder(w), 4);
  const auto m = embed_nodes(params, w.factory, {3, 0});
  ASSERT_EQ(m.rows(), 2);
  EXPECT_TRUE(m.row(0) == embed_node(params, w.factory, 3));
  const std::vector<Edge> edges = {w.graph.edges()[0], w.graph.edges()[3]};
  const auto e = embed_edges(params, w.factory, edges);
  EXPECT_TRUE(e.row(1) == embed_edge(params, w.factory, edges[1].src, edges[1].relation, edges[1].dst));
  EXPECT_EQ(edge_subject(w.graph, edges[0]),
            w.graph.external_id(edges[0].src) + "|" + w.graph.schema().relation(edges[0].relation).name + "|" +
                w.graph.external_id(edges[0].dst));
}

TEST(Embed, RecordCountAndOrderIndependence) {
  TinyWorld w;
  const auto params = init_params(testing_support::tiny_encoder(w), 4);
  std::vector<NodeId> nodes(w.graph.num_nodes());
  for (NodeId u = 0; u < nodes.size(); ++u) nodes[u] = u;
  const auto forward_order = embed_all(params, w.factory, nodes);
  std::reverse(nodes.begin(), nodes.end());
  std::swap(nodes[1], nodes[4]);
  const auto shuffled = embed_all(params, w.factory, nodes);
  EXPECT_EQ(forward_order.size(), w.graph.num_nodes());
  EXPECT_EQ(forward_order, shuffled);
  EXPECT_EQ(forward_order[0].subject, "p0");
}

TEST(Embed, FileRoundTripIsBitExact) {
  TinyWorld w;
  const auto params = init_params(testing_support::tiny_encoder(w), 4);
  std::vector<NodeId> nodes(w.graph.num_nodes());
  for (NodeId u = 0; u < nodes.size(); ++u) nodes[u] = u;
  auto records = embed_all(params, w.factory, nodes, Pooling::kMean);
  records[0].vector[0] = 0.1 + 0.2;  // not representable in short decimal
  const auto path = testing_support::scratch_dir("embed") / "emb.jsonl";
  write_embeddings(path, records, "trained", Pooling::kMean);
  EXPECT_EQ(read_embeddings(path), records);
}
