#include "hierprompt/textualize.hpp"

#include <algorithm>

namespace hierprompt {

TemplateConfig TemplateConfig::from_json(const json& j) {
  reject_unknown_keys(j,
                      {"summary", "neighbor_item", "neighbor_separator", "empty_neighbors", "node_text", "extra_field",
                       "token_description", "naming", "summary_overrides", "summary_char_budget"},
                      "templates");
  TemplateConfig t;
  t.summary = j.value("summary", t.summary);
  t.neighbor_item = j.value("neighbor_item", t.neighbor_item);
  t.neighbor_separator = j.value("neighbor_separator", t.neighbor_separator);
  t.empty_neighbors = j.value("empty_neighbors", t.empty_neighbors);
  t.node_text = j.value("node_text", t.node_text);
  t.extra_field = j.value("extra_field", t.extra_field);
  t.token_description = j.value("token_description", t.token_description);
  t.naming = j.value("naming", t.naming);
  t.summary_overrides = j.value("summary_overrides", t.summary_overrides);
  t.summary_char_budget = j.value("summary_char_budget", t.summary_char_budget);
  if (t.summary_char_budget == 0) throw_config("templates.summary_char_budget must be positive");
  return t;
}

ordered_json TemplateConfig::to_json() const {
  ordered_json j;
  j["summary"] = summary;
  j["neighbor_item"] = neighbor_item;
  j["neighbor_separator"] = neighbor_separator;
  j["empty_neighbors"] = empty_neighbors;
  j["node_text"] = node_text;
  j["extra_field"] = extra_field;
  j["token_description"] = token_description;
  j["naming"] = naming;
  j["summary_overrides"] = summary_overrides;
  j["summary_char_budget"] = summary_char_budget;
  return j;
}

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::vector<std::string> TemplateConfig::literals(const Schema& schema, const std::vector<MetaPath>& metapaths) const {
  std::vector<std::string> out = {summary, neighbor_item, empty_neighbors, node_text, extra_field, token_description};
  for (const auto& t : schema.node_types()) {
    out.push_back(t.display);
    out.push_back(t.textless ? "named" : "titled");
    for (const auto& f : t.extra_fields) out.push_back(f);
  }
  for (const auto& [k, v] : naming) out.push_back(v);
  for (const auto& [k, v] : summary_overrides) out.push_back(v);
  for (const auto& m : metapaths) {
    out.push_back(m.description);
    out.push_back(m.composite);
  }
  return out;
}

std::string graph_marker(std::string_view metapath) {
  return "\xE2\x9F\xA8GT:" + std::string(metapath) + "\xE2\x9F\xA9";
}

std::string relation_marker(std::string_view relation) {
  return "\xE2\x9F\xA8RT:" + std::string(relation) + "\xE2\x9F\xA9";
}

namespace {

std::string naming_word(const TemplateConfig& t, const NodeType& type) {
  auto it = t.naming.find(type.name);
  if (it != t.naming.end()) return it->second;
  return type.textless ? "named" : "titled";
}

// Cuts at a UTF-8 boundary no later than `budget` bytes.
void truncate_utf8(std::string& s, std::size_t budget) {
  if (s.size() <= budget) return;
  std::size_t cut = budget;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  s.resize(cut);
}

}  // namespace

SubgraphSummary summarize(const HtrnGraph& graph, const MetaPathSubgraph& subgraph, const MetaPath& metapath,
                          const TemplateConfig& templates) {
  const auto& schema = graph.schema();
  const auto& node = graph.node(subgraph.target);
  const auto& type = schema.node_type(node.type);

  std::vector<NodeId> neighbors = subgraph.neighbors;
  std::sort(neighbors.begin(), neighbors.end());
  std::string list;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    const auto& nb = graph.node(neighbors[i]);
    if (i) list += templates.neighbor_separator;
    list += fill_template(templates.neighbor_item, {{"type", schema.node_type(nb.type).display}, {"text", nb.text}});
  }
  if (neighbors.empty()) list = templates.empty_neighbors;

  auto ov = templates.summary_overrides.find(metapath.name);
  const std::string& tmpl = ov != templates.summary_overrides.end() ? ov->second : templates.summary;
  SubgraphSummary s{subgraph.target, metapath.name,
                    fill_template(tmpl, {{"type", type.display},
                                         {"naming", naming_word(templates, type)},
                                         {"text", node.text},
                                         {"composite", metapath.composite},
                                         {"description", metapath.description},
                                         {"neighbors", list}})};
  truncate_utf8(s.text, templates.summary_char_budget);
  return s;
}

std::vector<SubgraphSummary> summarize_all(const HtrnGraph& graph, const std::vector<MetaPath>& metapaths,
                                           const TemplateConfig& templates, std::size_t cap, std::uint64_t seed) {
  std::vector<SubgraphSummary> out;
  for (NodeId u = 0; u < graph.num_nodes(); ++u) {
    for (const auto* mp : applicable_metapaths(metapaths, graph.node(u).type))
      out.push_back(summarize(graph, extract_subgraph(graph, u, *mp, cap, seed), *mp, templates));
  }
  return out;
}

PromptText graph_aware_prompt(const HtrnGraph& graph, NodeId node, const std::vector<MetaPath>& metapaths,
                              const TemplateConfig& templates, bool with_graph_tokens,
                              const TokenAvailability& available) {
  const auto& n = graph.node(node);
  const auto& type = graph.schema().node_type(n.type);
  PromptText p;

  // Node-text spans are recorded so the encoder can truncate them first.
  auto append_with_text = [&](std::string_view tmpl, const std::map<std::string, std::string>& values,
                              std::string_view key) {
    auto pos = tmpl.find("{" + std::string(key) + "}");
    if (!p.text.empty()) p.text += ' ';
    if (pos == std::string_view::npos) {
      p.text += fill_template(tmpl, values);
      return;
    }
    p.text += fill_template(tmpl.substr(0, pos), values);
    const auto begin = p.text.size();
    p.text += values.at(std::string(key));
    p.node_text_spans.emplace_back(begin, p.text.size());
    p.text += fill_template(tmpl.substr(pos + key.size() + 2), values);
  };

  append_with_text(templates.node_text, {{"type", type.display}, {"text", n.text}}, "text");
  for (const auto& [field, value] : n.extras)
    append_with_text(templates.extra_field, {{"field", field}, {"value", value}}, "value");

  if (!with_graph_tokens) return p;
  for (const auto* mp : applicable_metapaths(metapaths, n.type)) {
    if (available && !available(node, mp->name))
      throw_data("no graph token for node '" + graph.external_id(node) + "' and meta-path '" + mp->name + "'");
    p.text += ' ';
    p.text += fill_template(templates.token_description, {{"description", mp->description}});
    p.text += ' ';
    p.text += graph_marker(mp->name);
    p.manifest.push_back({SlotKind::kGraph, node, mp->name, 0});
  }
  return p;
}

PromptText relation_aware_prompt(const PromptText& u_prompt, RelationId relation, const PromptText& v_prompt,
                                 const Schema& schema, bool with_relation_token) {
  if (relation >= schema.relations().size()) throw_data("unregistered relation id " + std::to_string(relation));
  PromptText p;
  p.text = u_prompt.text;
  p.manifest = u_prompt.manifest;
  p.node_text_spans = u_prompt.node_text_spans;
  if (with_relation_token) {
    p.text += ' ';
    p.text += relation_marker(schema.relation(relation).name);
    p.manifest.push_back({SlotKind::kRelation, 0, schema.relation(relation).name, relation});
  }
  p.text += ' ';
  p.split = p.text.size();
  p.text += v_prompt.text;
  p.manifest.insert(p.manifest.end(), v_prompt.manifest.begin(), v_prompt.manifest.end());
  for (auto [b, e] : v_prompt.node_text_spans) p.node_text_spans.emplace_back(b + p.split, e + p.split);
  return p;
}

}  // namespace hierprompt
