#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hierprompt/encoder.hpp"
#include "hierprompt/prompting.hpp"

namespace hierprompt {

struct NspSample {
  NodeId head = 0;
  RelationId relation = 0;
  NodeId tail = 0;
  int label = 0;
  friend bool operator==(const NspSample&, const NspSample&) = default;
};

struct NspStats {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t shortfall = 0;  // negatives that could not be drawn
};

// Tail corruption: a node of `tail_type`, distinct from `head` and from
// `exclude`, with no `relation` edge to `head` in `reference`.
std::optional<NodeId> corrupt_tail(const HtrnGraph& reference, NodeId head, RelationId relation, Rng& rng,
                                   const std::vector<NodeId>& exclude = {});

// Each stored edge (src -> dst) yields a positive followed by up to nsr
// negatives sharing its head and relation.
std::vector<NspSample> sample_nsp(const HtrnGraph& graph, std::size_t nsr, std::uint64_t seed,
                                  NspStats* stats = nullptr);

enum class MaskAction : std::uint8_t { kMask, kRandom, kKeep };

struct MaskPlan {
  std::vector<std::size_t> positions;  // ascending
  std::vector<int> targets;            // original token ids; -1 for graph slots
  std::vector<MaskAction> actions;
  std::vector<int> replacements;  // id written at each position (-1 masks a graph slot)
};

// max(1, round(mr * maskable)) when mr > 0 and anything is maskable, else 0.
std::size_t mask_count(std::size_t maskable, double mr);
// Uniform sample without replacement over maskable positions; tokens get
// MASK 80% / random non-special id 10% / unchanged 10%. Masked graph slots
// always receive the mask vector.
MaskPlan plan_masks(const MixedSequence& sequence, double mr, std::uint64_t seed, int vocab_size);
MixedSequence apply_masks(const MixedSequence& sequence, const MaskPlan& plan);

// -(1/N) sum [y log p + (1-y) log(1-p)], p clamped to [1e-12, 1-1e-12].
double loss_nsp(const std::vector<double>& probabilities, const std::vector<int>& labels);
// Mean negative log-probability of the targets; 0 (and *empty = true) when M = 0.
double loss_mlm(const Matrix& distributions, const std::vector<int>& targets, bool* empty = nullptr);

struct AblationFlags {
  bool no_mlm = false;
  bool no_nsp = false;
  bool no_graph_token = false;
  bool no_relation_token = false;

  // full | no_mlm | no_nsp | no_graph_token | no_relation_token
  static AblationFlags named(std::string_view name);
  std::string name() const;
  static const std::vector<std::string>& suite();
};

struct TrainConfig {
  std::size_t nsr = 1;
  double mr = 0.15;
  std::size_t batch_size = 16;
  std::size_t epochs = 1;
  std::size_t max_steps = 0;  // 0: no cap
  double lr = 3e-4;
  std::string schedule = "constant";  // constant | linear
  std::size_t warmup_steps = 0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;  // global norm; 0 disables
  bool mask_graph_tokens = false;
  AblationFlags ablation;
  std::uint64_t seed = 0;

  void validate() const;
  ordered_json to_json() const;
  static TrainConfig from_json(const json& j);
  std::size_t effective_nsr() const { return ablation.no_nsp ? 0 : nsr; }
  double effective_mr() const { return ablation.no_mlm ? 0.0 : mr; }
};

PromptOptions prompt_options(const TrainConfig& config, std::size_t max_len = kDefaultMaxLen);

struct TrainingExample {
  EncodedPrompt input;  // masks applied
  int label = 0;
  MaskPlan plan;
  Matrix graph_targets;  // frozen tokens of masked graph slots, in plan order
};

TrainingExample make_example(const PromptFactory& factory, const NspSample& sample, const TrainConfig& config,
                             std::uint64_t mask_seed);

struct BatchLoss {
  double total = 0;
  double nsp = 0;
  double mlm = 0;
  double graph = 0;
  std::size_t nsp_count = 0;
  std::size_t mlm_count = 0;
  std::size_t graph_count = 0;
};

// Forward + backward over a batch; gradients of total are accumulated into grads.
BatchLoss batch_gradients(const EncoderParams& params, const std::vector<const TrainingExample*>& batch,
                          const TrainConfig& config, EncoderParams& grads, Rng* dropout_rng = nullptr);

// Decoupled weight decay; biases and LayerNorm parameters are not decayed.
class AdamW {
 public:
  AdamW(const EncoderParams& like, const TrainConfig& config);
  void step(EncoderParams& params, const EncoderParams& grads, double lr);
  std::size_t steps() const { return t_; }
  static bool decays(const std::string& name);
  // Optimizer steps taken by every AdamW instance in this process.
  static std::size_t process_steps();

 private:
  EncoderParams m_, v_;
  double beta1_, beta2_, eps_, weight_decay_;
  std::size_t t_ = 0;
};

double scheduled_lr(const TrainConfig& config, std::size_t step, std::size_t total_steps);
double clip_gradients(EncoderParams& grads, double max_norm);

struct StepLog {
  std::size_t step = 0;
  double loss_total = 0;
  double loss_nsp = 0;
  double loss_mlm = 0;
  double loss_graph = 0;
  double lr = 0;
  bool graph_term = false;
};
std::string metrics_line(const StepLog& log);

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::filesystem::path checkpoint_path;  // latest good params; also written on divergence
  std::size_t checkpoint_every = 0;
};

struct TrainResult {
  std::size_t steps = 0;
  std::vector<StepLog> log;
  NspStats sampling;
};

// Optimizes L_NSP + L_MLM (+ graph regression when enabled) over NSP
// samples of factory.graph(); negatives are redrawn every epoch. Throws
// Error(kNumeric) on a non-finite loss after saving the last good params.
TrainResult train(EncoderParams& params, const PromptFactory& factory, const TrainConfig& config,
                  const TrainHooks& hooks = {});

// Plain MLM over raw texts (no NSP term, no soft slots). Used to warm up the
// frozen snapshot before it distills graph tokens; steps = 0 disables it.
struct TextMlmConfig {
  std::size_t steps = 0;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double mr = 0.15;
  void validate() const;
  ordered_json to_json() const;
  static TextMlmConfig from_json(const json& j);
};

// Batches are drawn uniformly with replacement from `texts`.
std::vector<StepLog> pretrain_text_mlm(EncoderParams& params, const Vocab& vocab, const std::vector<std::string>& texts,
                                       const TextMlmConfig& config, std::uint64_t seed);

}  // namespace hierprompt
