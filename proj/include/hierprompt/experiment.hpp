#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hierprompt/config.hpp"
#include "hierprompt/embed.hpp"
#include "hierprompt/graphtoken.hpp"

namespace hierprompt {

// Everything derived from the data before any encoder exists: the held-out
// edge split, the observed graph, summaries over it and the vocabulary.
struct PreparedRun {
  LinkSplit split;
  HtrnGraph observed;
  std::vector<MetaPath> metapaths;
  std::vector<SubgraphSummary> summaries;
  Vocab vocab;
};

// Configured meta-paths, or every one-hop path of the schema when none are set.
std::vector<MetaPath> prepare_metapaths(const RunConfig& config, const Schema& schema);

PreparedRun prepare_run(const HtrnGraph& full, const RunConfig& config, std::uint64_t seed);

// Node texts, extra field values, template literals and summaries.
std::vector<std::string> vocab_corpus(const HtrnGraph& graph, const std::vector<MetaPath>& metapaths,
                                      const TemplateConfig& templates, const std::vector<SubgraphSummary>& summaries);

// Encoder config with data-dependent fields resolved.
EncoderConfig resolve_encoder(const RunConfig& config, const Vocab& vocab, const Schema& schema, int graph_dim = 0);

EncoderParams frozen_snapshot(const EncoderConfig& config, std::uint64_t seed);
// Texts of every text-rich node, in node order.
std::vector<std::string> snapshot_corpus(const HtrnGraph& graph);
// frozen_snapshot followed by the configured MLM warm-up on snapshot_corpus.
EncoderParams build_snapshot(const RunConfig& config, const Vocab& vocab, const HtrnGraph& graph, std::uint64_t seed,
                             std::vector<StepLog>* log = nullptr);
// Fresh parameters for `target`, with every tensor whose name and shape match
// copied from `base`.
EncoderParams derive_tunable(const EncoderParams& base, const EncoderConfig& target, std::uint64_t seed);

std::unique_ptr<Distiller> make_distiller(const DistillerConfig& config, const EncoderParams& frozen,
                                          const Vocab& vocab, std::size_t max_len);

EdgeScorer nsp_scorer(const EncoderParams& params, const PromptFactory& factory);
// Logistic probe on standardized edge embeddings, fitted on the split's
// training positives and negatives.
EdgeScorer probe_scorer(const EncoderParams& params, const PromptFactory& factory, const LinkSplit& split,
                        Pooling pooling, double lambda);

// Labeled nodes and their classes, in node order.
std::pair<std::vector<NodeId>, std::vector<int>> labeled_nodes(const NodeLabels& labels);

struct ExperimentResult {
  std::string variant;
  MetricRow node_cls;
  std::vector<MetricRow> link;
  std::string scorer;
  std::string split_hash;
  std::size_t train_steps = 0;
};

struct SharedTokens {
  std::unique_ptr<Distiller> distiller;
  EncoderParams frozen;
  GraphTokenStore store;
};

// Frozen snapshot + graph tokens for one prepared run.
SharedTokens distill_run(const PreparedRun& prep, const RunConfig& config, std::uint64_t seed,
                         const std::filesystem::path& cache_dir = {});

// Trains (unless training_free) and evaluates one variant.
ExperimentResult run_variant(const Dataset& data, const PreparedRun& prep, const SharedTokens& tokens,
                             const RunConfig& config, const AblationFlags& ablation, std::uint64_t seed,
                             bool training_free = false);

// Five variants x seeds with shared splits per seed. Metric columns:
// micro_f1, macro_f1, roc_auc, pr_auc, f1 (one value per seed).
ReportTable run_ablation_suite(const Dataset& data, const RunConfig& config, const std::vector<std::uint64_t>& seeds);

ReportTable run_sweep(const Dataset& data, const RunConfig& config, const std::string& key,
                      const std::vector<json>& values);

}  // namespace hierprompt
