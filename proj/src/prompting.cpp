#include "hierprompt/prompting.hpp"

namespace hierprompt {

PromptFactory::PromptFactory(const HtrnGraph& graph, const std::vector<MetaPath>& metapaths,
                             const TemplateConfig& templates, const Vocab& vocab, const GraphTokenStore* store,
                             PromptOptions options)
    : graph_(graph), vocab_(vocab), store_(store), options_(options) {
  if (options_.graph_tokens && store_ == nullptr) throw_config("graph-aware prompts need a graph-token store");
  const TokenAvailability available = store_ ? store_->availability() : TokenAvailability();
  node_prompts_.reserve(graph.num_nodes());
  for (NodeId u = 0; u < graph.num_nodes(); ++u)
    node_prompts_.push_back(graph_aware_prompt(graph, u, metapaths, templates, options_.graph_tokens, available));
}

PromptText PromptFactory::edge_text(NodeId u, RelationId relation, NodeId v) const {
  return relation_aware_prompt(node_prompts_.at(u), relation, node_prompts_.at(v), graph_.schema(),
                               options_.relation_token);
}

EncodedPrompt PromptFactory::finish(const PromptText& text) const {
  EncodedPrompt out;
  out.sequence = encode_prompt(text, vocab_, {options_.max_len, options_.mask_graph_tokens});
  const auto positions = out.sequence.graph_positions();
  out.soft.resize(static_cast<Eigen::Index>(positions.size()), store_ ? store_->dim() : 0);
  for (std::size_t k = 0; k < positions.size(); ++k) {
    const auto& slot = out.sequence.slots.at(static_cast<std::size_t>(out.sequence.ids[positions[k]]));
    const auto& vec = store_->get(slot.node, slot.name).vector;
    for (std::size_t j = 0; j < vec.size(); ++j)
      out.soft(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = static_cast<double>(vec[j]);
  }
  return out;
}

EncodedPrompt PromptFactory::node(NodeId node) const { return finish(node_prompts_.at(node)); }

EncodedPrompt PromptFactory::edge(NodeId u, RelationId relation, NodeId v) const {
  return finish(edge_text(u, relation, v));
}

}  // namespace hierprompt
