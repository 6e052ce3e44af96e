#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hierprompt/encoder.hpp"
#include "hierprompt/evaluate.hpp"
#include "hierprompt/metapath.hpp"
#include "hierprompt/pretrain.hpp"
#include "hierprompt/synth.hpp"
#include "hierprompt/textualize.hpp"

namespace hierprompt {

struct DataConfig {
  std::string nodes, edges, schema;  // ingest inputs
  std::optional<SynthConfig> synth;  // synth generator settings
};

struct TokenizerConfig {
  std::size_t min_freq = 1;
  std::size_t max_size = 30000;
};

struct DistillerConfig {
  std::string spec = "builtin";  // builtin | bridge:<command or tcp://host:port>
  Pooling pooling = Pooling::kMean;
  double timeout_s = 60.0;
};

struct EvalConfig {
  double link_train = 0.1;
  double link_test = 0.4;
  NodeClsOptions node_cls;
  Pooling node_pooling = Pooling::kCls;
  Pooling edge_pooling = Pooling::kCls;
  std::string scorer = "nsp";  // nsp | probe
  double probe_lambda = 1e-3;
  std::size_t min_relation_edges = 5;
  std::vector<std::uint64_t> ablation_seeds = {1, 2, 3, 4, 5};
};

// Encoder fields vocab_size, relations and graph_dim are filled in from the
// data when left at 0.
struct RunConfig {
  std::uint64_t seed = 7;
  DataConfig data;
  std::vector<MetaPathSpec> metapaths;
  TemplateConfig templates;
  std::size_t neighbor_cap = kDefaultNeighborCap;
  std::size_t max_len = kDefaultMaxLen;
  TokenizerConfig tokenizer;
  EncoderConfig encoder;
  TextMlmConfig snapshot;  // warm-up of the frozen snapshot
  TrainConfig train;
  DistillerConfig distiller;
  EvalConfig eval;

  static RunConfig from_json(const json& j);
  static RunConfig load(const std::filesystem::path& path);
  ordered_json to_json() const;
  // Sets a dotted key ("train.nsr") to a value and re-validates.
  RunConfig with_override(std::string_view key, const json& value) const;
};

// Parses "V1,V2,..." for --sweep; each value is read as JSON when possible,
// otherwise kept as a string. For key "metapaths" a value lists meta-path
// names joined by '+'.
std::vector<json> parse_sweep_values(std::string_view key, std::string_view values);

std::string hash_json(const ordered_json& j);

}  // namespace hierprompt
