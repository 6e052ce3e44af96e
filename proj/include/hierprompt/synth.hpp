#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hierprompt/graph.hpp"

namespace hierprompt {

struct SynthNodeSpec {
  std::string name;
  std::string abbrev;
  std::string display;
  std::size_t count = 0;
  bool textless = false;
};

struct SynthRelationSpec {
  std::string name;
  std::string src;
  std::string dst;
  std::size_t count = 0;
};

// Text-rich nodes get a bag of words; each word comes from the node's
// community vocabulary with probability community_word_prob, otherwise from a
// shared vocabulary. Textless nodes carry only a name.
struct SynthTextSpec {
  int words_per_text = 10;
  double community_word_prob = 0.1;
  int community_vocab = 15;
  int shared_vocab = 60;
};

struct SynthConfig {
  std::vector<SynthNodeSpec> node_types;
  std::vector<SynthRelationSpec> relations;
  int communities = 4;
  double bias = 0.9;  // probability an edge is forced intra-community
  SynthTextSpec text;
  std::string label_type = "paper";

  // Paper / author / venue network shaped like the DBLP benchmark.
  static SynthConfig dblp_like(std::size_t papers = 300, std::size_t authors = 60, std::size_t venues = 8);
  ordered_json to_json() const;
  static SynthConfig from_json(const json& j);
};

// Deterministic for a fixed seed. Label-type nodes are labeled with their
// planted community, assigned round-robin within each type.
Dataset synth_graph(const SynthConfig& config, std::uint64_t seed);

// Community of every node as planted by synth_graph (round-robin per type).
std::vector<int> planted_communities(const HtrnGraph& graph, int communities);

// Pronounceable pseudo-word for a vocabulary index.
std::string synth_word(std::size_t index);

}  // namespace hierprompt
