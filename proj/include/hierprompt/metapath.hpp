#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hierprompt/graph.hpp"

namespace hierprompt {

// Configured form of a meta-path, before binding to a schema.
struct MetaPathSpec {
  std::string name;                    // "PAP"
  std::string types;                   // type abbreviations; defaults to name
  std::vector<std::string> relations;  // optional per-hop relation names
  std::vector<std::string> hops;       // optional per-hop phrases ("is authored by")
  std::string description;             // quoted in token descriptions
  std::string composite;               // used in subgraph summaries

  static MetaPathSpec from_json(const json& j);
  ordered_json to_json() const;
};

struct MetaPath {
  std::string name;
  std::vector<TypeId> types;          // c_1 .. c_{k+1}
  std::vector<RelationId> relations;  // r_1 .. r_k
  std::vector<std::string> hops;
  std::string description;
  std::string composite;

  std::size_t length() const { return relations.size(); }
  TypeId source_type() const { return types.front(); }
};

MetaPath parse_metapath(const MetaPathSpec& spec, const Schema& schema);
MetaPath parse_metapath(std::string_view types, const Schema& schema);
std::vector<MetaPath> parse_metapaths(const std::vector<MetaPathSpec>& specs, const Schema& schema);

struct MetaPathSubgraph {
  NodeId target = 0;
  std::vector<NodeId> neighbors;      // path endpoints, ascending
  std::vector<NodeId> intermediates;  // interior nodes of retained paths, ascending
  friend bool operator==(const MetaPathSubgraph&, const MetaPathSubgraph&) = default;
};

inline constexpr std::size_t kUnboundedCap = static_cast<std::size_t>(-1);
inline constexpr std::size_t kDefaultNeighborCap = 10;

// Simple-path instances only; the target never appears among its neighbors.
// When more than `cap` endpoints exist a uniform sample of `cap` is kept,
// seeded by (seed, target, meta-path name) so results do not depend on call order.
MetaPathSubgraph extract_subgraph(const HtrnGraph& graph, NodeId node, const MetaPath& metapath,
                                  std::size_t cap = kDefaultNeighborCap, std::uint64_t seed = 0);

// One entry per meta-path whose source type matches the node's type.
std::map<std::string, MetaPathSubgraph> extract_all(const HtrnGraph& graph, NodeId node,
                                                    const std::vector<MetaPath>& metapaths,
                                                    std::size_t cap = kDefaultNeighborCap, std::uint64_t seed = 0);

// Meta-paths applicable to nodes of `type`, in configured order.
std::vector<const MetaPath*> applicable_metapaths(const std::vector<MetaPath>& metapaths, TypeId type);

}  // namespace hierprompt
