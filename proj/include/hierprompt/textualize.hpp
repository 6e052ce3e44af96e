#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hierprompt/graph.hpp"
#include "hierprompt/metapath.hpp"

namespace hierprompt {

// Placeholders: {type} {naming} {text} {composite} {neighbors} {description}
// {field} {value}. Defaults reproduce the worked PA example wording.
struct TemplateConfig {
  std::string summary = "{type} {naming} {text} {composite} {neighbors}";
  std::string neighbor_item = "{type} {text}";
  std::string neighbor_separator = ", ";
  std::string empty_neighbors = "<no such connections>";
  std::string node_text = "{type} is named {text}.";
  std::string extra_field = "The {field} is: {value}.";
  std::string token_description = "The subgraph extracted via the meta-path '{description}' is summarized as:";
  std::map<std::string, std::string> naming;             // node type -> "titled" / "named"
  std::map<std::string, std::string> summary_overrides;  // meta-path name -> summary template
  std::size_t summary_char_budget = 400;

  static TemplateConfig from_json(const json& j);
  ordered_json to_json() const;
  // Literal words the templates can emit, for vocabulary building.
  std::vector<std::string> literals(const Schema& schema, const std::vector<MetaPath>& metapaths) const;
};

struct SubgraphSummary {
  NodeId node = 0;
  std::string metapath;
  std::string text;
};

enum class SlotKind : std::uint8_t { kGraph, kRelation };

struct PromptSlot {
  SlotKind kind = SlotKind::kGraph;
  NodeId node = 0;          // graph slots: owner of the graph token
  std::string name;         // meta-path name (graph) or relation name (relation)
  RelationId relation = 0;  // relation slots
  friend bool operator==(const PromptSlot&, const PromptSlot&) = default;
};

// Rendered prompt. Soft slots appear in `text` as reserved markers; the
// manifest lists them in textual order.
struct PromptText {
  std::string text;
  std::vector<PromptSlot> manifest;
  std::size_t split = std::string::npos;  // byte offset where the second segment starts
  std::vector<std::pair<std::size_t, std::size_t>> node_text_spans;  // [begin, end) byte ranges of node text
};

std::string graph_marker(std::string_view metapath);
std::string relation_marker(std::string_view relation);

SubgraphSummary summarize(const HtrnGraph& graph, const MetaPathSubgraph& subgraph, const MetaPath& metapath,
                          const TemplateConfig& templates);

// Every (node, applicable meta-path) summary, ordered by node then configured
// meta-path order.
std::vector<SubgraphSummary> summarize_all(const HtrnGraph& graph, const std::vector<MetaPath>& metapaths,
                                           const TemplateConfig& templates, std::size_t cap = kDefaultNeighborCap,
                                           std::uint64_t seed = 0);

// Reports whether a graph token exists for (node, meta-path).
using TokenAvailability = std::function<bool(NodeId, std::string_view)>;

// [node text] then, per applicable meta-path, [token description] [graph token].
// With with_graph_tokens=false the prompt is the node text alone.
PromptText graph_aware_prompt(const HtrnGraph& graph, NodeId node, const std::vector<MetaPath>& metapaths,
                              const TemplateConfig& templates, bool with_graph_tokens = true,
                              const TokenAvailability& available = nullptr);

// F(u) [relation token] F(v); the relation marker is omitted when
// with_relation_token is false.
PromptText relation_aware_prompt(const PromptText& u_prompt, RelationId relation, const PromptText& v_prompt,
                                 const Schema& schema, bool with_relation_token = true);

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

}  // namespace hierprompt
