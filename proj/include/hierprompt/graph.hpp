#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hierprompt/util.hpp"

namespace hierprompt {

using NodeId = std::uint32_t;
using TypeId = std::uint16_t;
using RelationId = std::uint16_t;

struct NodeType {
  std::string name;     // "paper"
  std::string abbrev;   // "P", used in meta-path strings
  std::string display;  // "Paper", used in prompt templates
  bool textless = false;
  std::vector<std::string> extra_fields;  // optional per-node fields rendered after the text
};

// Relations are undirected; src/dst record the declared endpoint types.
struct RelationType {
  std::string name;
  TypeId src_type = 0;
  TypeId dst_type = 0;
};

class Schema {
 public:
  TypeId add_node_type(NodeType type);
  RelationId add_relation(std::string name, TypeId src, TypeId dst);

  const std::vector<NodeType>& node_types() const { return node_types_; }
  const std::vector<RelationType>& relations() const { return relations_; }
  const NodeType& node_type(TypeId id) const { return node_types_.at(id); }
  const RelationType& relation(RelationId id) const { return relations_.at(id); }

  std::optional<TypeId> find_type(std::string_view name) const;
  std::optional<TypeId> find_abbrev(std::string_view abbrev) const;
  std::optional<RelationId> find_relation(std::string_view name) const;
  // Relations joining two types in either declared orientation.
  std::vector<RelationId> relations_between(TypeId a, TypeId b) const;

  std::string label_field;
  std::optional<TypeId> label_type;
  bool allow_self_loops = false;
  bool allow_empty_text = false;

  ordered_json to_json() const;
  static Schema from_json(const json& j);

 private:
  std::vector<NodeType> node_types_;
  std::vector<RelationType> relations_;
};

struct Node {
  TypeId type = 0;
  std::string text;
  std::vector<std::pair<std::string, std::string>> extras;
};

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  RelationId relation = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

// Node classes; -1 marks unlabeled nodes.
struct NodeLabels {
  std::vector<int> class_of;
  std::vector<std::string> class_names;
  int num_classes() const { return static_cast<int>(class_names.size()); }
};

// Immutable heterogeneous text-rich network. Edges are stored once and
// traversed in both directions; adjacency is a per-relation CSR with each
// neighbor list sorted ascending.
class HtrnGraph {
 public:
  const Schema& schema() const { return schema_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::string& external_id(NodeId id) const { return external_ids_.at(id); }
  std::optional<NodeId> find_node(std::string_view external_id) const;

  std::span<const NodeId> neighbors(NodeId node, RelationId relation) const;
  bool has_edge(NodeId u, RelationId relation, NodeId v) const;
  std::size_t degree(NodeId node) const;

  // Node ids of one type in ascending order.
  const std::vector<NodeId>& nodes_of_type(TypeId type) const { return by_type_.at(type); }
  std::vector<std::size_t> type_counts() const;
  std::vector<std::size_t> relation_counts() const;
  std::string describe() const;

  // Same nodes, subset of edges (used to hide held-out test edges).
  HtrnGraph with_edges(std::vector<Edge> edges) const;

 private:
  friend class GraphBuilder;
  void build_index();

  Schema schema_;
  std::vector<Node> nodes_;
  std::vector<std::string> external_ids_;
  std::unordered_map<std::string, NodeId> id_index_;
  std::vector<Edge> edges_;
  std::vector<std::vector<NodeId>> by_type_;
  // offsets_[r] has num_nodes + 1 entries into adj_[r]
  std::vector<std::vector<std::uint32_t>> offsets_;
  std::vector<std::vector<NodeId>> adj_;
};

class GraphBuilder {
 public:
  explicit GraphBuilder(Schema schema);

  // Node ids are assigned densely in insertion order.
  NodeId add_node(std::string external_id, TypeId type, std::string text,
                  std::vector<std::pair<std::string, std::string>> extras = {});
  void add_edge(NodeId src, NodeId dst, RelationId relation);
  const Schema& schema() const { return graph_.schema_; }
  std::optional<NodeId> find_node(std::string_view external_id) const { return graph_.find_node(external_id); }
  std::size_t num_nodes() const { return graph_.nodes_.size(); }

  HtrnGraph build() &&;

 private:
  HtrnGraph graph_;
};

// Replaces reserved prompt-marker brackets so node text can never be
// mistaken for a soft slot.
std::string sanitize_text(std::string_view text);

struct Dataset {
  HtrnGraph graph;
  NodeLabels labels;
};

Dataset load_dataset(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path,
                     const std::filesystem::path& schema_path);
HtrnGraph load_graph(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path,
                     const std::filesystem::path& schema_path);

// Canonical serialization: nodes in id order, edges in stored order.
std::string serialize_nodes(const HtrnGraph& graph, const NodeLabels* labels = nullptr);
std::string serialize_edges(const HtrnGraph& graph);
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
std::string graph_hash(const HtrnGraph& graph);

}  // namespace hierprompt
