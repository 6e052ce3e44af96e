#include "hierprompt/experiment.hpp"

#include <map>

#include "hierprompt/metrics.hpp"

namespace hierprompt {

namespace {

std::vector<MetaPathSpec> default_metapaths(const Schema& schema) {
  std::vector<MetaPathSpec> out;
  for (const auto& r : schema.relations()) {
    const auto& a = schema.node_type(r.src_type).abbrev;
    const auto& b = schema.node_type(r.dst_type).abbrev;
    for (const auto& name : {a + b, b + a}) {
      bool seen = false;
      for (const auto& m : out) seen = seen || m.name == name;
      if (!seen) out.push_back(MetaPathSpec::from_json(name));
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> vocab_corpus(const HtrnGraph& graph, const std::vector<MetaPath>& metapaths,
                                      const TemplateConfig& templates, const std::vector<SubgraphSummary>& summaries) {
  std::vector<std::string> corpus = templates.literals(graph.schema(), metapaths);
  for (NodeId u = 0; u < graph.num_nodes(); ++u) {
    const auto& n = graph.node(u);
    corpus.push_back(n.text);
    for (const auto& [k, v] : n.extras) {
      corpus.push_back(k);
      corpus.push_back(v);
    }
  }
  for (const auto& s : summaries) corpus.push_back(s.text);
  return corpus;
}

std::vector<MetaPath> prepare_metapaths(const RunConfig& config, const Schema& schema) {
  return parse_metapaths(config.metapaths.empty() ? default_metapaths(schema) : config.metapaths, schema);
}

PreparedRun prepare_run(const HtrnGraph& full, const RunConfig& config, std::uint64_t seed) {
  PreparedRun p{split_links(full, config.eval.link_train, config.eval.link_test, seed), HtrnGraph(), {}, {}, Vocab()};
  p.observed = full.with_edges(p.split.observed);
  p.metapaths = prepare_metapaths(config, full.schema());
  p.summaries = summarize_all(p.observed, p.metapaths, config.templates, config.neighbor_cap, seed);
  p.vocab = build_vocab(vocab_corpus(p.observed, p.metapaths, config.templates, p.summaries),
                        config.tokenizer.min_freq, config.tokenizer.max_size);
  return p;
}

EncoderConfig resolve_encoder(const RunConfig& config, const Vocab& vocab, const Schema& schema, int graph_dim) {
  EncoderConfig e = config.encoder;
  if (e.vocab_size == 0) e.vocab_size = static_cast<int>(vocab.size());
  if (static_cast<std::size_t>(e.vocab_size) < vocab.size())
    throw_config("encoder.vocab_size " + std::to_string(e.vocab_size) + " is smaller than the vocabulary (" +
                 std::to_string(vocab.size()) + ")");
  if (e.relations == 0) e.relations = static_cast<int>(schema.relations().size());
  if (e.relations < static_cast<int>(schema.relations().size())) throw_config("encoder.relations is smaller than the schema");
  if (e.max_positions < static_cast<int>(config.max_len))
    throw_config("encoder.max_positions must be at least max_len");
  if (e.graph_dim == 0) e.graph_dim = graph_dim == e.hidden ? 0 : graph_dim;
  e.graph_mask = e.graph_mask || config.train.mask_graph_tokens;
  e.validate();
  return e;
}

EncoderParams frozen_snapshot(const EncoderConfig& config, std::uint64_t seed) {
  EncoderConfig c = config;
  c.graph_dim = 0;
  c.graph_mask = false;
  return init_params(c, mix_seed(seed, "snapshot"));
}

std::vector<std::string> snapshot_corpus(const HtrnGraph& graph) {
  std::vector<std::string> out;
  for (NodeId u = 0; u < graph.num_nodes(); ++u) {
    const auto& n = graph.node(u);
    if (!graph.schema().node_type(n.type).textless && !n.text.empty()) out.push_back(n.text);
  }
  return out;
}

EncoderParams build_snapshot(const RunConfig& config, const Vocab& vocab, const HtrnGraph& graph, std::uint64_t seed,
                             std::vector<StepLog>* log) {
  EncoderParams p = frozen_snapshot(resolve_encoder(config, vocab, graph.schema()), seed);
  auto steps = pretrain_text_mlm(p, vocab, snapshot_corpus(graph), config.snapshot, seed);
  if (log) *log = std::move(steps);
  return p;
}

EncoderParams derive_tunable(const EncoderParams& base, const EncoderConfig& target, std::uint64_t seed) {
  EncoderParams p = init_params(target, mix_seed(seed, "tunable"));
  std::map<std::string, const Matrix*> src;
  base.for_each([&](const std::string& name, const Matrix& m) { src[name] = &m; });
  p.for_each([&](const std::string& name, Matrix& m) {
    const auto it = src.find(name);
    if (it != src.end() && it->second->rows() == m.rows() && it->second->cols() == m.cols()) m = *it->second;
  });
  return p;
}

std::unique_ptr<Distiller> make_distiller(const DistillerConfig& config, const EncoderParams& frozen,
                                          const Vocab& vocab, std::size_t max_len) {
  if (config.spec == "builtin") return std::make_unique<BuiltinDistiller>(frozen, vocab, config.pooling, max_len);
  if (config.spec.rfind("bridge:", 0) == 0)
    return std::make_unique<BridgeDistiller>(config.spec.substr(7), config.timeout_s);
  throw_config("unknown distiller '" + config.spec + "'");
}

EdgeScorer nsp_scorer(const EncoderParams& params, const PromptFactory& factory) {
  return [&params, &factory](const std::vector<Edge>& edges) {
    std::vector<double> out;
    out.reserve(edges.size());
    for (const auto& e : edges) {
      const auto prompt = factory.edge(e.src, e.relation, e.dst);
      out.push_back(sigmoid(nsp_logit(forward(params, prompt.sequence, prompt.soft), params)));
    }
    return out;
  };
}

EdgeScorer probe_scorer(const EncoderParams& params, const PromptFactory& factory, const LinkSplit& split,
                        Pooling pooling, double lambda) {
  std::vector<Edge> train = split.train_pos;
  train.insert(train.end(), split.train_neg.begin(), split.train_neg.end());
  if (split.train_pos.empty() || split.train_neg.empty()) throw_data("probe scorer needs training edges");
  std::vector<int> y(train.size(), 0);
  std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(split.train_pos.size()), 1);
  auto z = std::make_shared<Standardizer>();
  const Matrix x = embed_edges(params, factory, train, pooling);
  z->fit(x);
  auto probe = std::make_shared<LogisticProbe>();
  probe->fit(z->apply(x), y, lambda);
  return [&params, &factory, pooling, z, probe](const std::vector<Edge>& edges) {
    return probe->predict_proba(z->apply(embed_edges(params, factory, edges, pooling)));
  };
}

std::pair<std::vector<NodeId>, std::vector<int>> labeled_nodes(const NodeLabels& labels) {
  std::pair<std::vector<NodeId>, std::vector<int>> out;
  for (NodeId u = 0; u < labels.class_of.size(); ++u) {
    if (labels.class_of[u] < 0) continue;
    out.first.push_back(u);
    out.second.push_back(labels.class_of[u]);
  }
  return out;
}

SharedTokens distill_run(const PreparedRun& prep, const RunConfig& config, std::uint64_t seed,
                         const std::filesystem::path& cache_dir) {
  SharedTokens t;
  t.frozen = build_snapshot(config, prep.vocab, prep.observed, seed);
  t.distiller = make_distiller(config.distiller, t.frozen, prep.vocab, config.max_len);
  t.store = distill_all(prep.summaries, *t.distiller, cache_dir);
  return t;
}

ExperimentResult run_variant(const Dataset& data, const PreparedRun& prep, const SharedTokens& tokens,
                             const RunConfig& config, const AblationFlags& ablation, std::uint64_t seed,
                             bool training_free) {
  TrainConfig tc = config.train;
  tc.ablation = ablation;
  tc.seed = seed;
  const GraphTokenStore* store = ablation.no_graph_token ? nullptr : &tokens.store;
  const EncoderConfig target = resolve_encoder(config, prep.vocab, prep.observed.schema(), tokens.store.dim());
  EncoderParams params = derive_tunable(tokens.frozen, target, seed);
  const PromptFactory factory(prep.observed, prep.metapaths, config.templates, prep.vocab, store,
                              prompt_options(tc, config.max_len));

  ExperimentResult r;
  r.variant = training_free ? "training_free" : ablation.name();
  r.split_hash = prep.split.hash();
  if (!training_free) r.train_steps = train(params, factory, tc).steps;

  const auto [nodes, labels] = labeled_nodes(data.labels);
  if (!nodes.empty()) {
    const Matrix x = embed_nodes(params, factory, nodes, config.eval.node_pooling);
    r.node_cls = node_classification(x, labels, data.labels.num_classes(), config.eval.node_cls,
                                     mix_seed(seed, "node-cls"), r.variant);
  }
  const bool use_probe = training_free || ablation.no_nsp || config.eval.scorer == "probe";
  r.scorer = use_probe ? "probe" : "nsp";
  const EdgeScorer scorer = use_probe ? probe_scorer(params, factory, prep.split, config.eval.edge_pooling,
                                                     config.eval.probe_lambda)
                                      : nsp_scorer(params, factory);
  r.link = link_prediction(prep.split, prep.observed.schema(), scorer, {0.5, config.eval.min_relation_edges});
  return r;
}

namespace {

void add_result(ReportTable& table, const std::string& label, const ExperimentResult& r) {
  if (!r.node_cls.metrics.empty()) {
    table.add(label, "micro_f1", mean(r.node_cls.metric("micro_f1").values));
    table.add(label, "macro_f1", mean(r.node_cls.metric("macro_f1").values));
  }
  const auto& all = r.link.front();
  table.add(label, "roc_auc", all.metric("roc_auc").values.front());
  table.add(label, "pr_auc", all.metric("pr_auc").values.front());
  table.add(label, "f1", all.metric("f1").values.front());
}

}  // namespace

ReportTable run_ablation_suite(const Dataset& data, const RunConfig& config, const std::vector<std::uint64_t>& seeds) {
  ReportTable table{"ablation", {"micro_f1", "macro_f1", "roc_auc", "pr_auc", "f1"}, {}};
  for (const auto& name : AblationFlags::suite()) table.row(name);
  for (std::uint64_t seed : seeds) {
    const PreparedRun prep = prepare_run(data.graph, config, seed);
    const SharedTokens tokens = distill_run(prep, config, seed);
    std::string split_hash;
    for (const auto& name : AblationFlags::suite()) {
      const auto r = run_variant(data, prep, tokens, config, AblationFlags::named(name), seed);
      if (split_hash.empty()) split_hash = r.split_hash;
      if (r.split_hash != split_hash) throw_data("ablation variants saw different splits");
      add_result(table, name, r);
      log_info("ablation seed " + std::to_string(seed) + " " + name + ": macro_f1 " +
               std::to_string(table.row(name).metric("macro_f1").values.back()) + " roc_auc " +
               std::to_string(table.row(name).metric("roc_auc").values.back()));
    }
  }
  return table;
}

ReportTable run_sweep(const Dataset& data, const RunConfig& config, const std::string& key,
                      const std::vector<json>& values) {
  ReportTable table{"sweep:" + key, {"micro_f1", "macro_f1", "roc_auc", "pr_auc", "f1"}, {}};
  for (const auto& v : values) {
    const RunConfig c = config.with_override(key, v);
    const PreparedRun prep = prepare_run(data.graph, c, c.seed);
    const SharedTokens tokens = distill_run(prep, c, c.seed);
    const std::string label = v.is_string() ? v.get<std::string>() : v.dump();
    add_result(table, label, run_variant(data, prep, tokens, c, c.train.ablation, c.seed));
  }
  return table;
}

}  // namespace hierprompt
