#include "hierprompt/pretrain.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace hierprompt {

std::optional<NodeId> corrupt_tail(const HtrnGraph& reference, NodeId head, RelationId relation, Rng& rng,
                                   const std::vector<NodeId>& exclude) {
  const auto& candidates = reference.nodes_of_type(reference.schema().relation(relation).dst_type);
  if (candidates.empty()) return std::nullopt;
  auto valid = [&](NodeId v) {
    return v != head && std::find(exclude.begin(), exclude.end(), v) == exclude.end() &&
           !reference.has_edge(head, relation, v);
  };
  for (int attempt = 0; attempt < 64; ++attempt) {
    const NodeId v = candidates[uniform_index(rng, candidates.size())];
    if (valid(v)) return v;
  }
  // Dense neighborhoods: fall back to an exact draw over the valid set.
  std::vector<NodeId> pool;
  for (NodeId v : candidates)
    if (valid(v)) pool.push_back(v);
  if (pool.empty()) return std::nullopt;
  return pool[uniform_index(rng, pool.size())];
}

std::vector<NspSample> sample_nsp(const HtrnGraph& graph, std::size_t nsr, std::uint64_t seed, NspStats* stats) {
  Rng rng(mix_seed(seed, "nsp"));
  NspStats local;
  std::vector<NspSample> out;
  out.reserve(graph.num_edges() * (1 + nsr));
  std::vector<NodeId> drawn;
  for (const auto& e : graph.edges()) {
    out.push_back({e.src, e.relation, e.dst, 1});
    ++local.positives;
    drawn.clear();
    for (std::size_t k = 0; k < nsr; ++k) {
      const auto v = corrupt_tail(graph, e.src, e.relation, rng, drawn);
      if (!v) {
        local.shortfall += nsr - k;
        break;
      }
      drawn.push_back(*v);
      out.push_back({e.src, e.relation, *v, 0});
      ++local.negatives;
    }
  }
  if (local.shortfall > 0) log_warn("NSP sampler: " + std::to_string(local.shortfall) + " negatives unavailable");
  if (stats) *stats = local;
  return out;
}

std::size_t mask_count(std::size_t maskable, double mr) {
  if (maskable == 0 || mr <= 0.0) return 0;
  const auto n = static_cast<std::size_t>(std::llround(mr * static_cast<double>(maskable)));
  return std::clamp<std::size_t>(n, 1, maskable);
}

MaskPlan plan_masks(const MixedSequence& sequence, double mr, std::uint64_t seed, int vocab_size) {
  if (mr < 0.0 || mr >= 1.0) throw_config("mask ratio must lie in [0, 1)");
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < sequence.size(); ++i)
    if (sequence.maskable[i]) candidates.push_back(i);
  const std::size_t count = mask_count(candidates.size(), mr);
  Rng rng(mix_seed(seed, "mask"));
  for (std::size_t i = 0; i < count; ++i)
    std::swap(candidates[i], candidates[i + uniform_index(rng, candidates.size() - i)]);
  candidates.resize(count);
  std::sort(candidates.begin(), candidates.end());

  MaskPlan plan;
  plan.positions = candidates;
  for (std::size_t pos : candidates) {
    if (sequence.kinds[pos] == ElementKind::kGraphSlot) {
      plan.targets.push_back(-1);
      plan.actions.push_back(MaskAction::kMask);
      plan.replacements.push_back(-1);
      continue;
    }
    const int original = sequence.ids[pos];
    plan.targets.push_back(original);
    const double u = uniform_real(rng);
    if (u < 0.8 || vocab_size <= Vocab::kNumSpecial) {
      plan.actions.push_back(MaskAction::kMask);
      plan.replacements.push_back(Vocab::kMask);
    } else if (u < 0.9) {
      plan.actions.push_back(MaskAction::kRandom);
      plan.replacements.push_back(
          Vocab::kNumSpecial + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(vocab_size - Vocab::kNumSpecial))));
    } else {
      plan.actions.push_back(MaskAction::kKeep);
      plan.replacements.push_back(original);
    }
  }
  return plan;
}

MixedSequence apply_masks(const MixedSequence& sequence, const MaskPlan& plan) {
  MixedSequence out = sequence;
  for (std::size_t k = 0; k < plan.positions.size(); ++k) out.ids.at(plan.positions[k]) = plan.replacements[k];
  return out;
}

double loss_nsp(const std::vector<double>& probabilities, const std::vector<int>& labels) {
  if (probabilities.empty()) throw_data("NSP loss of an empty batch");
  if (probabilities.size() != labels.size()) throw_data("NSP loss: probabilities and labels differ in length");
  constexpr double kClamp = 1e-12;
  double sum = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(probabilities[i], kClamp, 1.0 - kClamp);
    sum += labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return -sum / static_cast<double>(probabilities.size());
}

double loss_mlm(const Matrix& distributions, const std::vector<int>& targets, bool* empty) {
  if (distributions.rows() != static_cast<Eigen::Index>(targets.size()))
    throw_data("MLM loss: one distribution per target required");
  if (empty) *empty = targets.empty();
  if (targets.empty()) return 0.0;
  double sum = 0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (targets[k] < 0 || targets[k] >= distributions.cols()) throw_data("MLM loss: target out of range");
    sum += std::log(distributions(static_cast<Eigen::Index>(k), targets[k]));
  }
  return -sum / static_cast<double>(targets.size());
}

AblationFlags AblationFlags::named(std::string_view name) {
  AblationFlags f;
  if (name == "full") return f;
  if (name == "no_mlm") f.no_mlm = true;
  else if (name == "no_nsp") f.no_nsp = true;
  else if (name == "no_graph_token") f.no_graph_token = true;
  else if (name == "no_relation_token") f.no_relation_token = true;
  else throw_config("unknown ablation '" + std::string(name) + "'");
  return f;
}

std::string AblationFlags::name() const {
  const int n = no_mlm + no_nsp + no_graph_token + no_relation_token;
  if (n == 0) return "full";
  if (n > 1) {
    std::string s;
    for (auto [flag, tag] : {std::pair{no_mlm, "no_mlm"}, {no_nsp, "no_nsp"}, {no_graph_token, "no_graph_token"},
                             {no_relation_token, "no_relation_token"}})
      if (flag) s += (s.empty() ? "" : "+") + std::string(tag);
    return s;
  }
  if (no_mlm) return "no_mlm";
  if (no_nsp) return "no_nsp";
  if (no_graph_token) return "no_graph_token";
  return "no_relation_token";
}

const std::vector<std::string>& AblationFlags::suite() {
  static const std::vector<std::string> names = {"full", "no_mlm", "no_nsp", "no_graph_token", "no_relation_token"};
  return names;
}

void TrainConfig::validate() const {
  if (mr < 0.0 || mr >= 1.0) throw_config("train.mr must lie in [0, 1)");
  if (batch_size == 0) throw_config("train.batch_size must be positive");
  if (!(lr > 0.0)) throw_config("train.lr must be positive");
  if (schedule != "constant" && schedule != "linear") throw_config("train.schedule must be constant or linear");
  if (weight_decay < 0.0) throw_config("train.weight_decay must be >= 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw_config("train.beta1/beta2 must lie in [0, 1)");
  if (grad_clip < 0.0) throw_config("train.grad_clip must be >= 0");
  if (ablation.no_mlm && ablation.no_nsp) throw_config("no_mlm and no_nsp cannot both be set");
}

ordered_json TrainConfig::to_json() const {
  ordered_json j;
  j["nsr"] = nsr;
  j["mr"] = mr;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["max_steps"] = max_steps;
  j["lr"] = lr;
  j["schedule"] = schedule;
  j["warmup_steps"] = warmup_steps;
  j["weight_decay"] = weight_decay;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["adam_eps"] = adam_eps;
  j["grad_clip"] = grad_clip;
  j["mask_graph_tokens"] = mask_graph_tokens;
  j["no_mlm"] = ablation.no_mlm;
  j["no_nsp"] = ablation.no_nsp;
  j["no_graph_token"] = ablation.no_graph_token;
  j["no_relation_token"] = ablation.no_relation_token;
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  reject_unknown_keys(j,
                      {"nsr", "mr", "batch_size", "epochs", "max_steps", "lr", "schedule", "warmup_steps",
                       "weight_decay", "beta1", "beta2", "adam_eps", "grad_clip", "mask_graph_tokens", "no_mlm",
                       "no_nsp", "no_graph_token", "no_relation_token"},
                      "train");
  TrainConfig c;
  if (j.contains("nsr") && (!j["nsr"].is_number_integer() || j["nsr"].get<long long>() < 0))
    throw_config("train.nsr must be a non-negative integer");
  c.nsr = j.value("nsr", c.nsr);
  c.mr = j.value("mr", c.mr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.lr = j.value("lr", c.lr);
  c.schedule = j.value("schedule", c.schedule);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.mask_graph_tokens = j.value("mask_graph_tokens", c.mask_graph_tokens);
  c.ablation.no_mlm = j.value("no_mlm", false);
  c.ablation.no_nsp = j.value("no_nsp", false);
  c.ablation.no_graph_token = j.value("no_graph_token", false);
  c.ablation.no_relation_token = j.value("no_relation_token", false);
  c.validate();
  return c;
}

PromptOptions prompt_options(const TrainConfig& config, std::size_t max_len) {
  PromptOptions o;
  o.graph_tokens = !config.ablation.no_graph_token;
  o.relation_token = !config.ablation.no_relation_token;
  o.mask_graph_tokens = config.mask_graph_tokens && o.graph_tokens && !config.ablation.no_mlm;
  o.max_len = max_len;
  return o;
}

TrainingExample make_example(const PromptFactory& factory, const NspSample& sample, const TrainConfig& config,
                             std::uint64_t mask_seed) {
  TrainingExample ex;
  EncodedPrompt enc = factory.edge(sample.head, sample.relation, sample.tail);
  ex.label = sample.label;
  ex.plan = plan_masks(enc.sequence, config.effective_mr(), mask_seed, static_cast<int>(factory.vocab().size()));
  const auto graph_pos = enc.sequence.graph_positions();
  std::vector<Eigen::Index> rows;
  for (std::size_t k = 0; k < ex.plan.positions.size(); ++k) {
    if (ex.plan.targets[k] >= 0) continue;
    const auto it = std::lower_bound(graph_pos.begin(), graph_pos.end(), ex.plan.positions[k]);
    rows.push_back(static_cast<Eigen::Index>(it - graph_pos.begin()));
  }
  ex.graph_targets.resize(static_cast<Eigen::Index>(rows.size()), enc.soft.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) ex.graph_targets.row(static_cast<Eigen::Index>(k)) = enc.soft.row(rows[k]);
  enc.sequence = apply_masks(enc.sequence, ex.plan);
  ex.input = std::move(enc);
  return ex;
}

BatchLoss batch_gradients(const EncoderParams& params, const std::vector<const TrainingExample*>& batch,
                          const TrainConfig& config, EncoderParams& grads, Rng* dropout_rng) {
  if (batch.empty()) throw_data("empty training batch");
  const bool use_nsp = !config.ablation.no_nsp;
  BatchLoss L;
  for (const auto* ex : batch) {
    for (int t : ex->plan.targets) (t >= 0 ? L.mlm_count : L.graph_count) += 1;
  }
  L.nsp_count = use_nsp ? batch.size() : 0;
  const double inv_n = use_nsp ? 1.0 / static_cast<double>(batch.size()) : 0.0;
  const double inv_m = L.mlm_count ? 1.0 / static_cast<double>(L.mlm_count) : 0.0;
  const int soft_dim = params.config.soft_dim();
  const double inv_g = L.graph_count ? 1.0 / (static_cast<double>(L.graph_count) * soft_dim) : 0.0;

  std::vector<double> probs;
  std::vector<int> labels;
  double mlm_sum = 0.0;
  double graph_sum = 0.0;
  for (const auto* ex : batch) {
    const ForwardTrace trace = forward(params, ex->input.sequence, ex->input.soft, dropout_rng);
    OutputGrads og;
    if (use_nsp) {
      const double p = sigmoid(nsp_logit(trace, params));
      probs.push_back(p);
      labels.push_back(ex->label);
      og.nsp_logit = (p - ex->label) * inv_n;
    }
    std::vector<int> targets;
    for (std::size_t k = 0; k < ex->plan.positions.size(); ++k) {
      if (ex->plan.targets[k] >= 0) {
        og.mlm_positions.push_back(ex->plan.positions[k]);
        targets.push_back(ex->plan.targets[k]);
      } else {
        og.graph_positions.push_back(ex->plan.positions[k]);
      }
    }
    if (!targets.empty()) {
      Matrix logits = mlm_logits(trace, og.mlm_positions, params);
      for (Eigen::Index k = 0; k < logits.rows(); ++k) {
        const double mx = logits.row(k).maxCoeff();
        const double lse = mx + std::log((logits.row(k).array() - mx).exp().sum());
        mlm_sum += lse - logits(k, targets[static_cast<std::size_t>(k)]);
        logits.row(k) = (logits.row(k).array() - lse).exp();
        logits(k, targets[static_cast<std::size_t>(k)]) -= 1.0;
      }
      og.mlm_logits = logits * inv_m;
    }
    if (!og.graph_positions.empty()) {
      const Matrix diff = graph_predictions(trace, og.graph_positions, params) - ex->graph_targets;
      graph_sum += diff.squaredNorm();
      og.graph_predictions = 2.0 * inv_g * diff;
    }
    backward(params, trace, og, grads);
  }
  L.nsp = use_nsp ? loss_nsp(probs, labels) : 0.0;
  L.mlm = mlm_sum * inv_m;
  L.graph = graph_sum * inv_g;
  L.total = L.nsp + L.mlm + L.graph;
  return L;
}

AdamW::AdamW(const EncoderParams& like, const TrainConfig& config)
    : m_(like.zeros_like()),
      v_(like.zeros_like()),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.adam_eps),
      weight_decay_(config.weight_decay) {}

bool AdamW::decays(const std::string& name) {
  const auto dot = name.rfind('.');
  const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
  if (leaf.size() >= 2 && (leaf.ends_with("_b") || leaf.ends_with("_g"))) return false;
  if (leaf == "bq" || leaf == "bk" || leaf == "bv" || leaf == "bo" || leaf == "b1" || leaf == "b2") return false;
  return true;
}

namespace {
std::atomic<std::size_t> g_process_steps{0};
}  // namespace

std::size_t AdamW::process_steps() { return g_process_steps.load(); }

void AdamW::step(EncoderParams& params, const EncoderParams& grads, double lr) {
  ++t_;
  ++g_process_steps;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::vector<const Matrix*> g;
  grads.for_each([&](const std::string&, const Matrix& m) { g.push_back(&m); });
  std::vector<Matrix*> m, v;
  m_.for_each([&](const std::string&, Matrix& x) { m.push_back(&x); });
  v_.for_each([&](const std::string&, Matrix& x) { v.push_back(&x); });
  std::size_t i = 0;
  params.for_each([&](const std::string& name, Matrix& p) {
    Matrix& mi = *m[i];
    Matrix& vi = *v[i];
    const Matrix& gi = *g[i];
    mi = beta1_ * mi + (1.0 - beta1_) * gi;
    vi = beta2_ * vi + (1.0 - beta2_) * gi.cwiseProduct(gi);
    if (weight_decay_ > 0.0 && decays(name)) p *= 1.0 - lr * weight_decay_;
    p.array() -= lr * (mi.array() / c1) / ((vi.array() / c2).sqrt() + eps_);
    ++i;
  });
}

double scheduled_lr(const TrainConfig& config, std::size_t step, std::size_t total_steps) {
  if (config.warmup_steps > 0 && step < config.warmup_steps)
    return config.lr * static_cast<double>(step + 1) / static_cast<double>(config.warmup_steps);
  if (config.schedule == "linear" && total_steps > config.warmup_steps) {
    const double frac = static_cast<double>(step - config.warmup_steps) /
                        static_cast<double>(total_steps - config.warmup_steps);
    return config.lr * std::max(0.0, 1.0 - frac);
  }
  return config.lr;
}

double clip_gradients(EncoderParams& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    grads.for_each([&](const std::string&, Matrix& m) { m *= s; });
  }
  return norm;
}

std::string metrics_line(const StepLog& log) {
  ordered_json j;
  j["step"] = log.step;
  j["loss_total"] = log.loss_total;
  j["loss_nsp"] = log.loss_nsp;
  j["loss_mlm"] = log.loss_mlm;
  if (log.graph_term) j["loss_graph"] = log.loss_graph;
  j["lr"] = log.lr;
  return j.dump();
}

TrainResult train(EncoderParams& params, const PromptFactory& factory, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate();
  const PromptOptions expected = prompt_options(config, factory.options().max_len);
  const auto& got = factory.options();
  if (got.graph_tokens != expected.graph_tokens || got.relation_token != expected.relation_token ||
      got.mask_graph_tokens != expected.mask_graph_tokens)
    throw_config("prompt options do not match the training ablation flags");
  if (expected.mask_graph_tokens && !params.config.graph_mask)
    throw_config("mask_graph_tokens requires encoder.graph_mask");
  if (expected.graph_tokens && factory.soft_dim() != params.config.soft_dim())
    throw_config("graph-token dimension " + std::to_string(factory.soft_dim()) + " does not match the encoder (" +
                 std::to_string(params.config.soft_dim()) + ")");

  const HtrnGraph& graph = factory.graph();
  const std::size_t nsr = config.effective_nsr();
  const std::size_t per_epoch = (graph.num_edges() * (1 + nsr) + config.batch_size - 1) / config.batch_size;
  std::size_t total = per_epoch * config.epochs;
  if (config.max_steps > 0) total = std::min(total, config.max_steps);

  AdamW opt(params, config);
  EncoderParams grads = params.zeros_like();
  Rng dropout_rng(mix_seed(config.seed, "dropout"));
  TrainResult result;
  auto save = [&] {
    if (!hooks.checkpoint_path.empty()) save_checkpoint(params, hooks.checkpoint_path);
  };

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs && step < total; ++epoch) {
    NspStats stats;
    auto samples = sample_nsp(graph, nsr, mix_seed(config.seed, {epoch, 0}), &stats);
    result.sampling.positives += stats.positives;
    result.sampling.negatives += stats.negatives;
    result.sampling.shortfall += stats.shortfall;
    Rng order(mix_seed(config.seed, {epoch, 1}));
    shuffle(samples, order);
    for (std::size_t start = 0; start < samples.size() && step < total; start += config.batch_size) {
      const std::size_t end = std::min(samples.size(), start + config.batch_size);
      std::vector<TrainingExample> examples;
      examples.reserve(end - start);
      for (std::size_t i = start; i < end; ++i)
        examples.push_back(make_example(factory, samples[i], config, mix_seed(config.seed, {epoch, i, 2})));
      std::vector<const TrainingExample*> batch;
      for (const auto& ex : examples) batch.push_back(&ex);

      grads.set_zero();
      const BatchLoss loss = batch_gradients(params, batch, config, grads, &dropout_rng);
      if (!std::isfinite(loss.total) || !grads.all_finite()) {
        save();
        throw Error(ErrorKind::kNumeric, "training diverged at step " + std::to_string(step) +
                                             (hooks.checkpoint_path.empty()
                                                  ? std::string()
                                                  : "; last good parameters saved to " + hooks.checkpoint_path.string()));
      }
      clip_gradients(grads, config.grad_clip);
      const double lr = scheduled_lr(config, step, total);
      opt.step(params, grads, lr);

      StepLog log{step, loss.total, loss.nsp, loss.mlm, loss.graph, lr, expected.mask_graph_tokens};
      result.log.push_back(log);
      if (hooks.on_step) hooks.on_step(log);
      ++step;
      if (hooks.checkpoint_every > 0 && step % hooks.checkpoint_every == 0) save();
    }
  }
  result.steps = step;
  save();
  return result;
}

void TextMlmConfig::validate() const {
  if (batch_size == 0) throw_config("snapshot.batch_size must be positive");
  if (!(lr > 0.0)) throw_config("snapshot.lr must be positive");
  if (!(mr > 0.0) || mr >= 1.0) throw_config("snapshot.mr must lie in (0, 1)");
}

ordered_json TextMlmConfig::to_json() const {
  ordered_json j;
  j["mlm_steps"] = steps;
  j["batch_size"] = batch_size;
  j["lr"] = lr;
  j["mr"] = mr;
  return j;
}

TextMlmConfig TextMlmConfig::from_json(const json& j) {
  reject_unknown_keys(j, {"mlm_steps", "batch_size", "lr", "mr"}, "snapshot");
  TextMlmConfig c;
  c.steps = j.value("mlm_steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.mr = j.value("mr", c.mr);
  c.validate();
  return c;
}

std::vector<StepLog> pretrain_text_mlm(EncoderParams& params, const Vocab& vocab, const std::vector<std::string>& texts,
                                       const TextMlmConfig& config, std::uint64_t seed) {
  config.validate();
  std::vector<StepLog> log;
  if (config.steps == 0) return log;
  if (texts.empty()) throw_data("no texts for snapshot MLM warm-up");

  TrainConfig tc;
  tc.ablation.no_nsp = true;
  tc.mr = config.mr;
  tc.lr = config.lr;
  tc.batch_size = config.batch_size;
  const auto max_len = static_cast<std::size_t>(params.config.max_positions);
  std::vector<MixedSequence> seqs;
  seqs.reserve(texts.size());
  for (const auto& t : texts) seqs.push_back(encode_plain(t, vocab, max_len, true));

  AdamW opt(params, tc);
  EncoderParams grads = params.zeros_like();
  Rng rng(mix_seed(seed, "text-mlm"));
  const int vocab_size = static_cast<int>(vocab.size());
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<TrainingExample> examples(config.batch_size);
    for (auto& ex : examples) {
      const auto& seq = seqs[uniform_index(rng, seqs.size())];
      ex.plan = plan_masks(seq, config.mr, rng(), vocab_size);
      ex.input.sequence = apply_masks(seq, ex.plan);
      ex.input.soft = Matrix(0, params.config.soft_dim());
    }
    std::vector<const TrainingExample*> batch;
    for (const auto& ex : examples) batch.push_back(&ex);
    grads.set_zero();
    const BatchLoss loss = batch_gradients(params, batch, tc, grads);
    if (!std::isfinite(loss.total) || !grads.all_finite())
      throw Error(ErrorKind::kNumeric, "snapshot MLM warm-up diverged at step " + std::to_string(step));
    clip_gradients(grads, tc.grad_clip);
    opt.step(params, grads, config.lr);
    log.push_back({step, loss.total, 0.0, loss.mlm, 0.0, config.lr, false});
  }
  return log;
}

}  // namespace hierprompt
