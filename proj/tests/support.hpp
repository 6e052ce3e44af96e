#pragma once

#include <filesystem>
#include <string>

#include "hierprompt/encoder.hpp"
#include "hierprompt/graph.hpp"
#include "hierprompt/prompting.hpp"

namespace testing_support {

// Paper / author / venue schema with cite, write and publish relations.
hierprompt::Schema dblp_schema();

// p0..p3, a0..a1, v0; writes a0-p0, a0-p1, a1-p1, a1-p2; publishes v0-p0, v0-p3;
// cites p0-p1, p2-p3.
hierprompt::HtrnGraph tiny_dblp();

// Fresh empty directory under the system temp dir, removed by the caller.
std::filesystem::path scratch_dir(const std::string& tag);

// Small encoder (2 layers, d=16, 2 heads) on a 12-element sequence with two
// graph slots (one masked), a relation slot and both segments, plus random
// output weights touching the NSP, MLM, graph-regression and hidden outputs.
struct GradcheckCase {
  hierprompt::EncoderParams params;
  hierprompt::MixedSequence sequence;
  hierprompt::Matrix soft;
  hierprompt::OutputGrads weights;
};
GradcheckCase gradcheck_case(std::uint64_t seed);

// tiny_dblp with PAP / PVP / AP paths, a vocabulary, builtin graph tokens
// from a small frozen encoder and a prompt factory over all of it. Not
// movable: the factory points into the other members.
struct TinyWorld {
  explicit TinyWorld(hierprompt::PromptOptions options = {}, int hidden = 16);
  TinyWorld(const TinyWorld&) = delete;
  TinyWorld& operator=(const TinyWorld&) = delete;

  hierprompt::HtrnGraph graph;
  std::vector<hierprompt::MetaPath> metapaths;
  hierprompt::TemplateConfig templates;
  std::vector<hierprompt::SubgraphSummary> summaries;
  hierprompt::Vocab vocab;
  hierprompt::EncoderParams frozen;
  hierprompt::GraphTokenStore store;
  hierprompt::PromptFactory factory;
};

// Encoder config matching a TinyWorld vocabulary and schema.
hierprompt::EncoderConfig tiny_encoder(const TinyWorld& world, int hidden = 16);

}  // namespace testing_support
