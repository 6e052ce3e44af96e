#include "hierprompt/metapath.hpp"

#include <algorithm>
#include <cctype>

namespace hierprompt {

MetaPathSpec MetaPathSpec::from_json(const json& j) {
  if (j.is_string()) return MetaPathSpec{j.get<std::string>(), {}, {}, {}, {}, {}};
  reject_unknown_keys(j, {"name", "types", "relations", "hops", "description", "composite"}, "metapaths");
  MetaPathSpec s;
  s.name = require_key(j, "name", "metapaths").get<std::string>();
  s.types = j.value("types", std::string());
  s.relations = j.value("relations", std::vector<std::string>{});
  s.hops = j.value("hops", std::vector<std::string>{});
  s.description = j.value("description", std::string());
  s.composite = j.value("composite", std::string());
  return s;
}

ordered_json MetaPathSpec::to_json() const {
  ordered_json j;
  j["name"] = name;
  if (!types.empty()) j["types"] = types;
  if (!relations.empty()) j["relations"] = relations;
  if (!hops.empty()) j["hops"] = hops;
  if (!description.empty()) j["description"] = description;
  if (!composite.empty()) j["composite"] = composite;
  return j;
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<TypeId> split_types(std::string_view types, const Schema& schema, std::string_view name) {
  // greedy longest-abbreviation match
  std::vector<TypeId> out;
  std::size_t i = 0;
  while (i < types.size()) {
    std::optional<TypeId> best;
    std::size_t best_len = 0;
    for (std::size_t t = 0; t < schema.node_types().size(); ++t) {
      const auto& ab = schema.node_types()[t].abbrev;
      if (ab.size() > best_len && types.substr(i, ab.size()) == ab) {
        best = static_cast<TypeId>(t);
        best_len = ab.size();
      }
    }
    if (!best)
      throw_config("meta-path '" + std::string(name) + "': unknown node type '" + std::string(types.substr(i, 1)) + "'");
    out.push_back(*best);
    i += best_len;
  }
  return out;
}

}  // namespace

MetaPath parse_metapath(const MetaPathSpec& spec, const Schema& schema) {
  MetaPath m;
  m.name = spec.name;
  m.types = split_types(spec.types.empty() ? spec.name : spec.types, schema, spec.name);
  if (m.types.size() < 2) throw_config("meta-path '" + spec.name + "' needs at least one hop");
  const std::size_t k = m.types.size() - 1;
  if (!spec.relations.empty() && spec.relations.size() != k)
    throw_config("meta-path '" + spec.name + "': expected " + std::to_string(k) + " relation names");
  if (!spec.hops.empty() && spec.hops.size() != k)
    throw_config("meta-path '" + spec.name + "': expected " + std::to_string(k) + " hop phrases");

  for (std::size_t i = 0; i < k; ++i) {
    const TypeId a = m.types[i], b = m.types[i + 1];
    if (!spec.relations.empty()) {
      auto r = schema.find_relation(spec.relations[i]);
      if (!r) throw_config("meta-path '" + spec.name + "': unknown relation '" + spec.relations[i] + "'");
      const auto& rel = schema.relation(*r);
      if (!((rel.src_type == a && rel.dst_type == b) || (rel.src_type == b && rel.dst_type == a)))
        throw_config("meta-path '" + spec.name + "': relation '" + rel.name + "' does not join " +
                     schema.node_type(a).name + " and " + schema.node_type(b).name);
      m.relations.push_back(*r);
      continue;
    }
    auto candidates = schema.relations_between(a, b);
    if (candidates.empty())
      throw_config("meta-path '" + spec.name + "': no relation joins " + schema.node_type(a).name + " and " +
                   schema.node_type(b).name);
    if (candidates.size() > 1)
      throw_config("meta-path '" + spec.name + "': hop " + std::to_string(i + 1) +
                   " is ambiguous; name the relation explicitly");
    m.relations.push_back(candidates.front());
  }

  for (std::size_t i = 0; i < k; ++i)
    m.hops.push_back(spec.hops.empty() ? "is linked by " + schema.relation(m.relations[i]).name + " to" : spec.hops[i]);

  if (!spec.description.empty()) {
    m.description = spec.description;
  } else {
    m.description = lower(schema.node_type(m.types[0]).name);
    for (std::size_t i = 0; i < k; ++i) m.description += " " + m.hops[i] + " " + lower(schema.node_type(m.types[i + 1]).name);
  }
  if (!spec.composite.empty())
    m.composite = spec.composite;
  else if (k == 1)
    m.composite = m.hops[0];
  else
    m.composite = "is connected via " + m.name + " to";
  return m;
}

MetaPath parse_metapath(std::string_view types, const Schema& schema) {
  return parse_metapath(MetaPathSpec{std::string(types), {}, {}, {}, {}, {}}, schema);
}

std::vector<MetaPath> parse_metapaths(const std::vector<MetaPathSpec>& specs, const Schema& schema) {
  std::vector<MetaPath> out;
  for (const auto& s : specs) {
    for (const auto& m : out)
      if (m.name == s.name) throw_config("duplicate meta-path name '" + s.name + "'");
    out.push_back(parse_metapath(s, schema));
  }
  return out;
}

namespace {

struct PathWalker {
  const HtrnGraph& graph;
  const MetaPath& mp;
  std::vector<NodeId> path;
  // endpoint -> interior nodes over all simple paths reaching it
  std::vector<std::pair<NodeId, std::vector<NodeId>>> hits;

  void walk(std::size_t depth) {
    const NodeId cur = path.back();
    if (depth == mp.length()) {
      if (cur == path.front()) return;
      hits.emplace_back(cur, std::vector<NodeId>(path.begin() + 1, path.end() - 1));
      return;
    }
    for (NodeId next : graph.neighbors(cur, mp.relations[depth])) {
      if (graph.node(next).type != mp.types[depth + 1]) continue;
      if (std::find(path.begin(), path.end(), next) != path.end()) continue;
      path.push_back(next);
      walk(depth + 1);
      path.pop_back();
    }
  }
};

}  // namespace

MetaPathSubgraph extract_subgraph(const HtrnGraph& graph, NodeId node, const MetaPath& metapath, std::size_t cap,
                                  std::uint64_t seed) {
  if (node >= graph.num_nodes()) throw_data("unknown node id " + std::to_string(node));
  if (graph.node(node).type != metapath.source_type())
    throw_data("meta-path '" + metapath.name + "' starts at type '" +
               graph.schema().node_type(metapath.source_type()).name + "' but node '" + graph.external_id(node) +
               "' has type '" + graph.schema().node_type(graph.node(node).type).name + "'");
  if (cap == 0) throw_config("neighbor cap must be >= 1");

  PathWalker w{graph, metapath, {node}, {}};
  w.walk(0);

  MetaPathSubgraph sg;
  sg.target = node;
  for (const auto& [end, interior] : w.hits) sg.neighbors.push_back(end);
  std::sort(sg.neighbors.begin(), sg.neighbors.end());
  sg.neighbors.erase(std::unique(sg.neighbors.begin(), sg.neighbors.end()), sg.neighbors.end());

  if (sg.neighbors.size() > cap) {
    Rng rng(mix_seed(mix_seed(seed, metapath.name), {node}));
    for (std::size_t i = 0; i < cap; ++i)
      std::swap(sg.neighbors[i], sg.neighbors[i + uniform_index(rng, sg.neighbors.size() - i)]);
    sg.neighbors.resize(cap);
    std::sort(sg.neighbors.begin(), sg.neighbors.end());
  }

  for (const auto& [end, interior] : w.hits) {
    if (!std::binary_search(sg.neighbors.begin(), sg.neighbors.end(), end)) continue;
    sg.intermediates.insert(sg.intermediates.end(), interior.begin(), interior.end());
  }
  std::sort(sg.intermediates.begin(), sg.intermediates.end());
  sg.intermediates.erase(std::unique(sg.intermediates.begin(), sg.intermediates.end()), sg.intermediates.end());
  return sg;
}

std::map<std::string, MetaPathSubgraph> extract_all(const HtrnGraph& graph, NodeId node,
                                                    const std::vector<MetaPath>& metapaths, std::size_t cap,
                                                    std::uint64_t seed) {
  std::map<std::string, MetaPathSubgraph> out;
  for (const auto* mp : applicable_metapaths(metapaths, graph.node(node).type))
    out.emplace(mp->name, extract_subgraph(graph, node, *mp, cap, seed));
  return out;
}

std::vector<const MetaPath*> applicable_metapaths(const std::vector<MetaPath>& metapaths, TypeId type) {
  std::vector<const MetaPath*> out;
  for (const auto& m : metapaths)
    if (m.source_type() == type) out.push_back(&m);
  return out;
}

}  // namespace hierprompt
