#include "hierprompt/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

namespace hierprompt {

TypeId Schema::add_node_type(NodeType type) {
  if (find_type(type.name)) throw_config("duplicate node type '" + type.name + "'");
  if (type.abbrev.empty()) throw_config("node type '" + type.name + "' needs an abbreviation");
  if (find_abbrev(type.abbrev)) throw_config("duplicate node type abbreviation '" + type.abbrev + "'");
  if (type.display.empty()) {
    type.display = type.name;
    type.display[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(type.display[0])));
  }
  node_types_.push_back(std::move(type));
  return static_cast<TypeId>(node_types_.size() - 1);
}

RelationId Schema::add_relation(std::string name, TypeId src, TypeId dst) {
  if (find_relation(name)) throw_config("duplicate relation '" + name + "'");
  if (src >= node_types_.size() || dst >= node_types_.size())
    throw_config("relation '" + name + "' references an unknown node type");
  relations_.push_back({std::move(name), src, dst});
  return static_cast<RelationId>(relations_.size() - 1);
}

std::optional<TypeId> Schema::find_type(std::string_view name) const {
  for (std::size_t i = 0; i < node_types_.size(); ++i)
    if (node_types_[i].name == name) return static_cast<TypeId>(i);
  return std::nullopt;
}

std::optional<TypeId> Schema::find_abbrev(std::string_view abbrev) const {
  for (std::size_t i = 0; i < node_types_.size(); ++i)
    if (node_types_[i].abbrev == abbrev) return static_cast<TypeId>(i);
  return std::nullopt;
}

std::optional<RelationId> Schema::find_relation(std::string_view name) const {
  for (std::size_t i = 0; i < relations_.size(); ++i)
    if (relations_[i].name == name) return static_cast<RelationId>(i);
  return std::nullopt;
}

std::vector<RelationId> Schema::relations_between(TypeId a, TypeId b) const {
  std::vector<RelationId> out;
  for (std::size_t i = 0; i < relations_.size(); ++i) {
    const auto& r = relations_[i];
    if ((r.src_type == a && r.dst_type == b) || (r.src_type == b && r.dst_type == a))
      out.push_back(static_cast<RelationId>(i));
  }
  return out;
}

ordered_json Schema::to_json() const {
  ordered_json j;
  j["node_types"] = ordered_json::array();
  for (const auto& t : node_types_) {
    ordered_json tj;
    tj["name"] = t.name;
    tj["abbrev"] = t.abbrev;
    tj["display"] = t.display;
    tj["textless"] = t.textless;
    tj["extra_fields"] = t.extra_fields;
    j["node_types"].push_back(tj);
  }
  j["relations"] = ordered_json::array();
  for (const auto& r : relations_) {
    ordered_json rj;
    rj["name"] = r.name;
    rj["src"] = node_types_[r.src_type].name;
    rj["dst"] = node_types_[r.dst_type].name;
    j["relations"].push_back(rj);
  }
  j["label_field"] = label_field;
  j["label_type"] = label_type ? node_types_[*label_type].name : "";
  j["allow_self_loops"] = allow_self_loops;
  j["allow_empty_text"] = allow_empty_text;
  return j;
}

Schema Schema::from_json(const json& j) {
  reject_unknown_keys(j, {"node_types", "relations", "label_field", "label_type", "allow_self_loops", "allow_empty_text"},
                      "schema");
  Schema s;
  for (const auto& tj : require_key(j, "node_types", "schema")) {
    reject_unknown_keys(tj, {"name", "abbrev", "display", "textless", "extra_fields"}, "schema.node_types");
    NodeType t;
    t.name = require_key(tj, "name", "schema.node_types").get<std::string>();
    t.abbrev = require_key(tj, "abbrev", "schema.node_types").get<std::string>();
    t.display = tj.value("display", std::string());
    t.textless = tj.value("textless", false);
    t.extra_fields = tj.value("extra_fields", std::vector<std::string>{});
    s.add_node_type(std::move(t));
  }
  for (const auto& rj : require_key(j, "relations", "schema")) {
    reject_unknown_keys(rj, {"name", "src", "dst"}, "schema.relations");
    auto name = require_key(rj, "name", "schema.relations").get<std::string>();
    auto src_name = require_key(rj, "src", "schema.relations").get<std::string>();
    auto dst_name = require_key(rj, "dst", "schema.relations").get<std::string>();
    auto src = s.find_type(src_name);
    auto dst = s.find_type(dst_name);
    if (!src) throw_config("relation '" + name + "': unknown node type '" + src_name + "'");
    if (!dst) throw_config("relation '" + name + "': unknown node type '" + dst_name + "'");
    s.add_relation(std::move(name), *src, *dst);
  }
  s.label_field = j.value("label_field", std::string());
  auto label_type = j.value("label_type", std::string());
  if (!label_type.empty()) {
    s.label_type = s.find_type(label_type);
    if (!s.label_type) throw_config("schema.label_type: unknown node type '" + label_type + "'");
  }
  s.allow_self_loops = j.value("allow_self_loops", false);
  s.allow_empty_text = j.value("allow_empty_text", false);
  if (s.node_types_.size() + s.relations_.size() <= 2)
    throw_config("schema: a heterogeneous network needs |node types| + |relations| > 2");
  return s;
}

std::optional<NodeId> HtrnGraph::find_node(std::string_view external_id) const {
  auto it = id_index_.find(std::string(external_id));
  if (it == id_index_.end()) return std::nullopt;
  return it->second;
}

std::span<const NodeId> HtrnGraph::neighbors(NodeId node, RelationId relation) const {
  if (node >= nodes_.size()) throw_data("unknown node id " + std::to_string(node));
  if (relation >= adj_.size()) throw_data("unknown relation id " + std::to_string(relation));
  const auto& off = offsets_[relation];
  return {adj_[relation].data() + off[node], off[node + 1] - off[node]};
}

bool HtrnGraph::has_edge(NodeId u, RelationId relation, NodeId v) const {
  auto nb = neighbors(u, relation);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::size_t HtrnGraph::degree(NodeId node) const {
  std::size_t d = 0;
  for (std::size_t r = 0; r < adj_.size(); ++r) d += neighbors(node, static_cast<RelationId>(r)).size();
  return d;
}

std::vector<std::size_t> HtrnGraph::type_counts() const {
  std::vector<std::size_t> counts(schema_.node_types().size());
  for (std::size_t t = 0; t < counts.size(); ++t) counts[t] = by_type_[t].size();
  return counts;
}

std::vector<std::size_t> HtrnGraph::relation_counts() const {
  std::vector<std::size_t> counts(schema_.relations().size());
  for (const auto& e : edges_) ++counts[e.relation];
  return counts;
}

std::string HtrnGraph::describe() const {
  std::ostringstream ss;
  auto tc = type_counts();
  for (std::size_t t = 0; t < tc.size(); ++t)
    ss << (t ? ", " : "") << schema_.node_type(static_cast<TypeId>(t)).abbrev << "(" << tc[t] << ")";
  ss << "; ";
  auto rc = relation_counts();
  for (std::size_t r = 0; r < rc.size(); ++r)
    ss << (r ? ", " : "") << schema_.relation(static_cast<RelationId>(r)).name << "(" << rc[r] << ")";
  return ss.str();
}

void HtrnGraph::build_index() {
  const std::size_t n = nodes_.size();
  const std::size_t nr = schema_.relations().size();
  by_type_.assign(schema_.node_types().size(), {});
  for (NodeId i = 0; i < n; ++i) by_type_[nodes_[i].type].push_back(i);

  offsets_.assign(nr, std::vector<std::uint32_t>(n + 1, 0));
  adj_.assign(nr, {});
  for (const auto& e : edges_) {
    ++offsets_[e.relation][e.src + 1];
    if (e.src != e.dst) ++offsets_[e.relation][e.dst + 1];
  }
  for (std::size_t r = 0; r < nr; ++r) {
    auto& off = offsets_[r];
    std::partial_sum(off.begin(), off.end(), off.begin());
    adj_[r].resize(off[n]);
  }
  std::vector<std::vector<std::uint32_t>> fill(nr);
  for (std::size_t r = 0; r < nr; ++r) fill[r].assign(offsets_[r].begin(), offsets_[r].end() - 1);
  for (const auto& e : edges_) {
    adj_[e.relation][fill[e.relation][e.src]++] = e.dst;
    if (e.src != e.dst) adj_[e.relation][fill[e.relation][e.dst]++] = e.src;
  }
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t v = 0; v < n; ++v)
      std::sort(adj_[r].begin() + offsets_[r][v], adj_[r].begin() + offsets_[r][v + 1]);
  }
}

HtrnGraph HtrnGraph::with_edges(std::vector<Edge> edges) const {
  HtrnGraph g;
  g.schema_ = schema_;
  g.nodes_ = nodes_;
  g.external_ids_ = external_ids_;
  g.id_index_ = id_index_;
  g.edges_ = std::move(edges);
  g.build_index();
  return g;
}

GraphBuilder::GraphBuilder(Schema schema) { graph_.schema_ = std::move(schema); }

NodeId GraphBuilder::add_node(std::string external_id, TypeId type, std::string text,
                              std::vector<std::pair<std::string, std::string>> extras) {
  if (type >= graph_.schema_.node_types().size()) throw_data("unknown node type id " + std::to_string(type));
  if (text.empty() && !graph_.schema_.allow_empty_text)
    throw_data("node '" + external_id + "' has empty text");
  if (graph_.id_index_.count(external_id)) throw_data("duplicate node id '" + external_id + "'");
  const auto id = static_cast<NodeId>(graph_.nodes_.size());
  for (auto& [k, v] : extras) v = sanitize_text(v);
  graph_.nodes_.push_back({type, sanitize_text(text), std::move(extras)});
  graph_.id_index_.emplace(external_id, id);
  graph_.external_ids_.push_back(std::move(external_id));
  return id;
}

void GraphBuilder::add_edge(NodeId src, NodeId dst, RelationId relation) {
  const auto& schema = graph_.schema_;
  if (relation >= schema.relations().size()) throw_data("unknown relation id " + std::to_string(relation));
  if (src >= graph_.nodes_.size()) throw_data("dangling edge endpoint " + std::to_string(src));
  if (dst >= graph_.nodes_.size()) throw_data("dangling edge endpoint " + std::to_string(dst));
  const auto& rel = schema.relation(relation);
  if (graph_.nodes_[src].type != rel.src_type || graph_.nodes_[dst].type != rel.dst_type)
    throw_data("edge (" + graph_.external_ids_[src] + ", " + graph_.external_ids_[dst] + ") violates endpoint types of '" +
               rel.name + "'");
  if (src == dst && !schema.allow_self_loops)
    throw_data("self-loop on '" + graph_.external_ids_[src] + "' not allowed by schema");
  graph_.edges_.push_back({src, dst, relation});
}

HtrnGraph GraphBuilder::build() && {
  // duplicate detection on the undirected key
  std::set<std::tuple<RelationId, NodeId, NodeId>> seen;
  for (const auto& e : graph_.edges_) {
    auto key = std::make_tuple(e.relation, std::min(e.src, e.dst), std::max(e.src, e.dst));
    if (!seen.insert(key).second)
      throw_data("duplicate edge (" + graph_.external_ids_[e.src] + ", " + graph_.external_ids_[e.dst] + ", " +
                 graph_.schema_.relation(e.relation).name + ")");
  }
  graph_.build_index();
  return std::move(graph_);
}

std::string sanitize_text(std::string_view text) {
  // U+27E8 / U+27E9 are reserved for soft-slot markers.
  static constexpr std::string_view kOpen = "\xE2\x9F\xA8";
  static constexpr std::string_view kClose = "\xE2\x9F\xA9";
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (text.substr(i, 3) == kOpen) {
      out += '<';
      i += 3;
    } else if (text.substr(i, 3) == kClose) {
      out += '>';
      i += 3;
    } else {
      out += text[i++];
    }
  }
  return out;
}

namespace {

std::string label_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw_data("label must be a string or integer");
}

bool all_integers(const std::vector<std::string>& xs) {
  return std::all_of(xs.begin(), xs.end(), [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) || c == '-'; });
  });
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path,
                     const std::filesystem::path& schema_path) {
  json schema_json;
  try {
    schema_json = json::parse(read_text_file(schema_path));
  } catch (const json::parse_error& e) {
    throw_config(schema_path.string() + ": malformed schema: " + e.what());
  }
  Schema schema = Schema::from_json(schema_json);
  GraphBuilder builder(schema);
  std::vector<std::pair<NodeId, std::string>> raw_labels;

  read_jsonl(nodes_path, [&](const json& rec, std::size_t line) {
    auto where = nodes_path.string() + ":" + std::to_string(line);
    if (!rec.is_object()) throw_data(where + ": expected an object");
    for (const char* key : {"id", "type", "text"})
      if (!rec.contains(key) || !rec[key].is_string()) throw_data(where + ": missing string field '" + key + "'");
    auto type_name = rec["type"].get<std::string>();
    auto type = schema.find_type(type_name);
    if (!type) throw_data(where + ": unknown node type '" + type_name + "'");
    const auto& nt = schema.node_type(*type);
    std::vector<std::pair<std::string, std::string>> extras;
    for (const auto& [k, v] : rec.items()) {
      if (k == "id" || k == "type" || k == "text") continue;
      if (!schema.label_field.empty() && k == schema.label_field) continue;
      if (std::find(nt.extra_fields.begin(), nt.extra_fields.end(), k) == nt.extra_fields.end())
        throw_data(where + ": field '" + k + "' not declared for type '" + type_name + "'");
      if (!v.is_string()) throw_data(where + ": field '" + k + "' must be a string");
    }
    for (const auto& field : nt.extra_fields) {
      auto it = rec.find(field);
      if (it != rec.end()) extras.emplace_back(field, it->get<std::string>());
    }
    NodeId id;
    try {
      id = builder.add_node(rec["id"].get<std::string>(), *type, rec["text"].get<std::string>(), std::move(extras));
    } catch (const Error& e) {
      throw_data(where + ": " + e.what());
    }
    if (!schema.label_field.empty()) {
      auto it = rec.find(schema.label_field);
      if (it != rec.end() && !it->is_null()) {
        try {
          raw_labels.emplace_back(id, label_to_string(*it));
        } catch (const Error& e) {
          throw_data(where + ": " + e.what());
        }
      }
    }
  });

  read_jsonl(edges_path, [&](const json& rec, std::size_t line) {
    auto where = edges_path.string() + ":" + std::to_string(line);
    if (!rec.is_object()) throw_data(where + ": expected an object");
    for (const char* key : {"src", "dst", "relation"})
      if (!rec.contains(key) || !rec[key].is_string()) throw_data(where + ": missing string field '" + key + "'");
    if (rec.size() != 3) throw_data(where + ": unexpected extra fields in edge record");
    auto src_name = rec["src"].get<std::string>();
    auto dst_name = rec["dst"].get<std::string>();
    auto rel_name = rec["relation"].get<std::string>();
    auto src = builder.find_node(src_name);
    if (!src) throw_data(where + ": edge references missing node '" + src_name + "'");
    auto dst = builder.find_node(dst_name);
    if (!dst) throw_data(where + ": edge references missing node '" + dst_name + "'");
    auto rel = schema.find_relation(rel_name);
    if (!rel) throw_data(where + ": unknown relation '" + rel_name + "'");
    try {
      builder.add_edge(*src, *dst, *rel);
    } catch (const Error& e) {
      throw_data(where + ": " + e.what());
    }
  });

  Dataset data{std::move(builder).build(), {}};
  data.labels.class_of.assign(data.graph.num_nodes(), -1);
  std::vector<std::string> names;
  for (const auto& [id, name] : raw_labels) names.push_back(name);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  if (all_integers(names))
    std::sort(names.begin(), names.end(),
              [](const std::string& a, const std::string& b) { return std::stoll(a) < std::stoll(b); });
  for (const auto& [id, name] : raw_labels)
    data.labels.class_of[id] = static_cast<int>(std::find(names.begin(), names.end(), name) - names.begin());
  data.labels.class_names = std::move(names);
  log_info("loaded graph: " + data.graph.describe());
  return data;
}

HtrnGraph load_graph(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path,
                     const std::filesystem::path& schema_path) {
  return load_dataset(nodes_path, edges_path, schema_path).graph;
}

std::string serialize_nodes(const HtrnGraph& graph, const NodeLabels* labels) {
  std::string out;
  const auto& schema = graph.schema();
  for (NodeId i = 0; i < graph.num_nodes(); ++i) {
    const auto& n = graph.node(i);
    ordered_json j;
    j["id"] = graph.external_id(i);
    j["type"] = schema.node_type(n.type).name;
    j["text"] = n.text;
    for (const auto& [k, v] : n.extras) j[k] = v;
    if (labels && !schema.label_field.empty() && i < labels->class_of.size() && labels->class_of[i] >= 0)
      j[schema.label_field] = labels->class_names.at(static_cast<std::size_t>(labels->class_of[i]));
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string serialize_edges(const HtrnGraph& graph) {
  std::string out;
  for (const auto& e : graph.edges()) {
    ordered_json j;
    j["src"] = graph.external_id(e.src);
    j["dst"] = graph.external_id(e.dst);
    j["relation"] = graph.schema().relation(e.relation).name;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  write_text_file(dir / "nodes.jsonl", serialize_nodes(data.graph, &data.labels));
  write_text_file(dir / "edges.jsonl", serialize_edges(data.graph));
  write_text_file(dir / "schema.json", data.graph.schema().to_json().dump(2) + "\n");
}

std::string graph_hash(const HtrnGraph& graph) {
  return Fnv64().update(graph.schema().to_json().dump()).update(serialize_nodes(graph)).update(serialize_edges(graph)).hex();
}

}  // namespace hierprompt
