#include "hierprompt/synth.hpp"

#include <algorithm>
#include <set>

namespace hierprompt {

SynthConfig SynthConfig::dblp_like(std::size_t papers, std::size_t authors, std::size_t venues) {
  SynthConfig c;
  c.node_types = {
      {"paper", "P", "Paper", papers, false},
      {"author", "A", "Author", authors, true},
      {"venue", "V", "Venue", venues, true},
  };
  c.relations = {
      {"cite", "paper", "paper", papers * 3 / 2},
      {"write", "author", "paper", papers * 2},
      {"publish", "venue", "paper", papers},
  };
  return c;
}

ordered_json SynthConfig::to_json() const {
  ordered_json j;
  j["node_types"] = ordered_json::array();
  for (const auto& t : node_types)
    j["node_types"].push_back(
        {{"name", t.name}, {"abbrev", t.abbrev}, {"display", t.display}, {"count", t.count}, {"textless", t.textless}});
  j["relations"] = ordered_json::array();
  for (const auto& r : relations)
    j["relations"].push_back({{"name", r.name}, {"src", r.src}, {"dst", r.dst}, {"count", r.count}});
  j["communities"] = communities;
  j["bias"] = bias;
  j["text"] = {{"words_per_text", text.words_per_text},
               {"community_word_prob", text.community_word_prob},
               {"community_vocab", text.community_vocab},
               {"shared_vocab", text.shared_vocab}};
  j["label_type"] = label_type;
  return j;
}

SynthConfig SynthConfig::from_json(const json& j) {
  reject_unknown_keys(j, {"node_types", "relations", "communities", "bias", "text", "label_type", "preset"}, "synth");
  SynthConfig c;
  if (j.contains("preset")) {
    if (j["preset"] != "dblp") throw_config("synth.preset: only 'dblp' is built in");
    c = dblp_like();
  }
  if (j.contains("node_types")) {
    c.node_types.clear();
    for (const auto& tj : j["node_types"]) {
      reject_unknown_keys(tj, {"name", "abbrev", "display", "count", "textless"}, "synth.node_types");
      c.node_types.push_back({require_key(tj, "name", "synth.node_types").get<std::string>(),
                              require_key(tj, "abbrev", "synth.node_types").get<std::string>(),
                              tj.value("display", std::string()), require_key(tj, "count", "synth.node_types").get<std::size_t>(),
                              tj.value("textless", false)});
    }
  }
  if (j.contains("relations")) {
    c.relations.clear();
    for (const auto& rj : j["relations"]) {
      reject_unknown_keys(rj, {"name", "src", "dst", "count"}, "synth.relations");
      c.relations.push_back({require_key(rj, "name", "synth.relations").get<std::string>(),
                             require_key(rj, "src", "synth.relations").get<std::string>(),
                             require_key(rj, "dst", "synth.relations").get<std::string>(),
                             require_key(rj, "count", "synth.relations").get<std::size_t>()});
    }
  }
  c.communities = j.value("communities", c.communities);
  c.bias = j.value("bias", c.bias);
  if (j.contains("text")) {
    const auto& tj = j["text"];
    reject_unknown_keys(tj, {"words_per_text", "community_word_prob", "community_vocab", "shared_vocab"}, "synth.text");
    c.text.words_per_text = tj.value("words_per_text", c.text.words_per_text);
    c.text.community_word_prob = tj.value("community_word_prob", c.text.community_word_prob);
    c.text.community_vocab = tj.value("community_vocab", c.text.community_vocab);
    c.text.shared_vocab = tj.value("shared_vocab", c.text.shared_vocab);
  }
  c.label_type = j.value("label_type", c.label_type);
  return c;
}

std::string synth_word(std::size_t index) {
  static constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};
  constexpr std::size_t kSyll = std::size(kOnsets) * std::size(kVowels);
  std::string w;
  // three syllables give 70^3 distinct words
  for (int i = 0; i < 3; ++i) {
    auto s = index % kSyll;
    index /= kSyll;
    w += kOnsets[s % std::size(kOnsets)];
    w += kVowels[s / std::size(kOnsets)];
  }
  return w;
}

std::vector<int> planted_communities(const HtrnGraph& graph, int communities) {
  std::vector<int> out(graph.num_nodes(), 0);
  for (std::size_t t = 0; t < graph.schema().node_types().size(); ++t) {
    const auto& ids = graph.nodes_of_type(static_cast<TypeId>(t));
    for (std::size_t j = 0; j < ids.size(); ++j) out[ids[j]] = static_cast<int>(j % static_cast<std::size_t>(communities));
  }
  return out;
}

Dataset synth_graph(const SynthConfig& config, std::uint64_t seed) {
  if (config.communities < 1) throw_config("synth.communities must be >= 1");
  if (config.bias < 0.0 || config.bias > 1.0) throw_config("synth.bias must lie in [0, 1]");
  const auto k = static_cast<std::size_t>(config.communities);

  Schema schema;
  for (const auto& t : config.node_types) schema.add_node_type({t.name, t.abbrev, t.display, t.textless, {}});
  for (const auto& r : config.relations) {
    auto src = schema.find_type(r.src);
    auto dst = schema.find_type(r.dst);
    if (!src || !dst) throw_config("synth relation '" + r.name + "' references an unknown node type");
    schema.add_relation(r.name, *src, *dst);
  }
  schema.label_field = "label";
  schema.label_type = schema.find_type(config.label_type);
  if (!schema.label_type) throw_config("synth.label_type: unknown node type '" + config.label_type + "'");
  if (schema.node_types().size() + schema.relations().size() <= 2)
    throw_config("synth: a heterogeneous network needs |node types| + |relations| > 2");

  Rng rng(mix_seed(seed, "synth"));
  const auto& tx = config.text;
  const std::size_t shared_base = k * static_cast<std::size_t>(tx.community_vocab);

  GraphBuilder builder(schema);
  std::vector<std::vector<NodeId>> ids_by_type(config.node_types.size());
  std::vector<int> community;
  for (std::size_t t = 0; t < config.node_types.size(); ++t) {
    const auto& spec = config.node_types[t];
    std::string prefix = spec.abbrev;
    std::transform(prefix.begin(), prefix.end(), prefix.begin(), [](unsigned char c) { return std::tolower(c); });
    for (std::size_t j = 0; j < spec.count; ++j) {
      const std::size_t c = j % k;
      std::string name = prefix + std::to_string(j);
      std::string text;
      if (spec.textless) {
        text = name;
      } else {
        for (int w = 0; w < tx.words_per_text; ++w) {
          std::size_t word;
          if (uniform_real(rng) < tx.community_word_prob)
            word = c * static_cast<std::size_t>(tx.community_vocab) + uniform_index(rng, static_cast<std::size_t>(tx.community_vocab));
          else
            word = shared_base + uniform_index(rng, static_cast<std::size_t>(tx.shared_vocab));
          if (!text.empty()) text += ' ';
          text += synth_word(word);
        }
      }
      ids_by_type[t].push_back(builder.add_node(name, static_cast<TypeId>(t), text));
      community.push_back(static_cast<int>(c));
    }
  }

  for (std::size_t r = 0; r < config.relations.size(); ++r) {
    const auto& spec = config.relations[r];
    const auto& rel = schema.relation(static_cast<RelationId>(r));
    const auto& srcs = ids_by_type[rel.src_type];
    const auto& dsts = ids_by_type[rel.dst_type];
    const bool same_type = rel.src_type == rel.dst_type;
    const std::size_t max_pairs = same_type ? srcs.size() * (srcs.size() - (srcs.empty() ? 0 : 1)) / 2 : srcs.size() * dsts.size();
    if (spec.count > max_pairs)
      throw_config("synth relation '" + spec.name + "': " + std::to_string(spec.count) + " edges requested but only " +
                   std::to_string(max_pairs) + " pairs exist");
    if (spec.count == 0) continue;

    std::vector<std::vector<NodeId>> dst_by_comm(k);
    for (auto d : dsts) dst_by_comm[static_cast<std::size_t>(community[d])].push_back(d);
    std::set<std::pair<NodeId, NodeId>> used;
    auto key = [&](NodeId a, NodeId b) { return same_type ? std::make_pair(std::min(a, b), std::max(a, b)) : std::make_pair(a, b); };
    auto free_pair = [&](NodeId s, NodeId d) { return s != d && !used.count(key(s, d)); };

    std::vector<NodeId> order = srcs;
    shuffle(order, rng);
    std::size_t made = 0;
    for (std::size_t cursor = 0; made < spec.count; ++cursor) {
      if (cursor % order.size() == 0 && cursor > 0) shuffle(order, rng);
      const NodeId s = order[cursor % order.size()];
      NodeId d = 0;
      bool found = false;
      for (int attempt = 0; attempt < 64 && !found; ++attempt) {
        const auto& pool = uniform_real(rng) < config.bias ? dst_by_comm[static_cast<std::size_t>(community[s])] : dsts;
        if (pool.empty()) continue;
        d = pool[uniform_index(rng, pool.size())];
        found = free_pair(s, d);
      }
      if (!found) {
        std::vector<NodeId> open;
        for (auto c : dsts)
          if (free_pair(s, c)) open.push_back(c);
        if (open.empty()) continue;
        d = open[uniform_index(rng, open.size())];
      }
      used.insert(key(s, d));
      builder.add_edge(s, d, static_cast<RelationId>(r));
      ++made;
    }
  }

  Dataset data{std::move(builder).build(), {}};
  data.labels.class_of.assign(data.graph.num_nodes(), -1);
  for (std::size_t c = 0; c < k; ++c) data.labels.class_names.push_back(std::to_string(c));
  for (auto id : data.graph.nodes_of_type(*schema.label_type)) data.labels.class_of[id] = community[id];
  return data;
}

}  // namespace hierprompt
