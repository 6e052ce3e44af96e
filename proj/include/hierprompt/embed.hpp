#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hierprompt/prompting.hpp"

namespace hierprompt {

struct EmbeddingRecord {
  std::string subject;  // node external id, or "u|relation|v" for edges
  std::vector<double> vector;
  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

RowVector embed_node(const EncoderParams& params, const PromptFactory& factory, NodeId node,
                     Pooling pooling = Pooling::kCls);
// Uses the (u, r, v) orientation as given.
RowVector embed_edge(const EncoderParams& params, const PromptFactory& factory, NodeId u, RelationId relation,
                     NodeId v, Pooling pooling = Pooling::kCls);

Matrix embed_nodes(const EncoderParams& params, const PromptFactory& factory, const std::vector<NodeId>& nodes,
                   Pooling pooling = Pooling::kCls);
Matrix embed_edges(const EncoderParams& params, const PromptFactory& factory, const std::vector<Edge>& edges,
                   Pooling pooling = Pooling::kCls);

std::string edge_subject(const HtrnGraph& graph, const Edge& edge);

// Records for the given nodes in canonical (node id) order, whatever the input order.
std::vector<EmbeddingRecord> embed_all(const EncoderParams& params, const PromptFactory& factory,
                                       std::vector<NodeId> nodes, Pooling pooling = Pooling::kCls);

// Line-delimited {"subject", "vector", "mode", "pooling"}.
void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records,
                      std::string_view mode, Pooling pooling);
std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path);

}  // namespace hierprompt
