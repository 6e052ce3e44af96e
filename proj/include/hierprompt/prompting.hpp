#pragma once

#include <vector>

#include "hierprompt/encoder.hpp"
#include "hierprompt/graphtoken.hpp"
#include "hierprompt/sequence.hpp"
#include "hierprompt/textualize.hpp"

namespace hierprompt {

struct PromptOptions {
  bool graph_tokens = true;
  bool relation_token = true;
  bool mask_graph_tokens = false;  // graph slots become maskable
  std::size_t max_len = kDefaultMaxLen;
};

struct EncodedPrompt {
  MixedSequence sequence;
  Matrix soft;  // one row per graph slot, in sequence order
};

// Builds encoder inputs for F(u) and H(u, r, v). Graph-aware prompts are
// rendered once per node; the referenced graph, vocab and store must outlive
// the factory.
class PromptFactory {
 public:
  PromptFactory(const HtrnGraph& graph, const std::vector<MetaPath>& metapaths, const TemplateConfig& templates,
                const Vocab& vocab, const GraphTokenStore* store, PromptOptions options = {});

  const PromptText& node_text(NodeId node) const { return node_prompts_.at(node); }
  PromptText edge_text(NodeId u, RelationId relation, NodeId v) const;
  EncodedPrompt node(NodeId node) const;
  EncodedPrompt edge(NodeId u, RelationId relation, NodeId v) const;

  const PromptOptions& options() const { return options_; }
  const HtrnGraph& graph() const { return graph_; }
  const Vocab& vocab() const { return vocab_; }
  int soft_dim() const { return store_ ? store_->dim() : 0; }

 private:
  EncodedPrompt finish(const PromptText& text) const;

  const HtrnGraph& graph_;
  const Vocab& vocab_;
  const GraphTokenStore* store_;
  PromptOptions options_;
  std::vector<PromptText> node_prompts_;
};

}  // namespace hierprompt
