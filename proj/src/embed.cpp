#include "hierprompt/embed.hpp"

#include <algorithm>

namespace hierprompt {

namespace {

RowVector encode_and_pool(const EncoderParams& params, const EncodedPrompt& prompt, Pooling pooling) {
  return pool(forward(params, prompt.sequence, prompt.soft), pooling);
}

std::vector<double> to_vector(const RowVector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

RowVector embed_node(const EncoderParams& params, const PromptFactory& factory, NodeId node, Pooling pooling) {
  return encode_and_pool(params, factory.node(node), pooling);
}

RowVector embed_edge(const EncoderParams& params, const PromptFactory& factory, NodeId u, RelationId relation,
                     NodeId v, Pooling pooling) {
  return encode_and_pool(params, factory.edge(u, relation, v), pooling);
}

Matrix embed_nodes(const EncoderParams& params, const PromptFactory& factory, const std::vector<NodeId>& nodes,
                   Pooling pooling) {
  Matrix out(static_cast<Eigen::Index>(nodes.size()), params.config.hidden);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = embed_node(params, factory, nodes[i], pooling);
  return out;
}

Matrix embed_edges(const EncoderParams& params, const PromptFactory& factory, const std::vector<Edge>& edges,
                   Pooling pooling) {
  Matrix out(static_cast<Eigen::Index>(edges.size()), params.config.hidden);
  for (std::size_t i = 0; i < edges.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = embed_edge(params, factory, edges[i].src, edges[i].relation, edges[i].dst, pooling);
  return out;
}

std::string edge_subject(const HtrnGraph& graph, const Edge& edge) {
  return graph.external_id(edge.src) + "|" + graph.schema().relation(edge.relation).name + "|" +
         graph.external_id(edge.dst);
}

std::vector<EmbeddingRecord> embed_all(const EncoderParams& params, const PromptFactory& factory,
                                       std::vector<NodeId> nodes, Pooling pooling) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  std::vector<EmbeddingRecord> out;
  out.reserve(nodes.size());
  for (NodeId u : nodes)
    out.push_back({factory.graph().external_id(u), to_vector(embed_node(params, factory, u, pooling))});
  return out;
}

void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records,
                      std::string_view mode, Pooling pooling) {
  std::string out;
  for (const auto& r : records) {
    ordered_json j;
    j["subject"] = r.subject;
    j["vector"] = r.vector;
    j["mode"] = mode;
    j["pooling"] = pooling_name(pooling);
    out += j.dump() + "\n";
  }
  write_text_file(path, out);
}

std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path) {
  std::vector<EmbeddingRecord> out;
  read_jsonl(path, [&](const json& rec, std::size_t) {
    out.push_back({rec.at("subject").get<std::string>(), rec.at("vector").get<std::vector<double>>()});
  });
  return out;
}

}  // namespace hierprompt
