#include "hierprompt/pipeline.hpp"

#include <cctype>
#include <chrono>
#include <map>

#include "hierprompt/embed.hpp"
#include "hierprompt/experiment.hpp"
#include "hierprompt/metrics.hpp"

namespace hierprompt {

namespace fs = std::filesystem;

namespace {

const char* kNodes = "graph/nodes.jsonl";
const char* kEdges = "graph/edges.jsonl";
const char* kSchema = "graph/schema.json";
const char* kSplit = "split.jsonl";
const char* kSummaries = "summaries.jsonl";
const char* kVocab = "vocab.tsv";
const char* kFrozen = "frozen.ckpt";
const char* kCacheManifest = "cache/manifest.jsonl";
const char* kCacheVectors = "cache/vectors.bin";
const char* kCacheMeta = "cache/distiller.json";
const char* kCheckpoint = "checkpoint.ckpt";
const char* kMetrics = "metrics.jsonl";
const char* kNodeEmbeddings = "embeddings/nodes.jsonl";

const std::vector<std::string> kGraphFiles = {kNodes, kEdges, kSchema};
const std::vector<std::string> kPrepFiles = {kNodes, kEdges, kSchema, kSplit, kSummaries, kVocab};
const std::vector<std::string> kTokenFiles = {kFrozen, kCacheManifest, kCacheVectors, kCacheMeta};

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::string split_records(const HtrnGraph& g, const LinkSplit& s) {
  std::string out;
  auto emit = [&](const char* role, const std::vector<Edge>& edges) {
    for (const auto& e : edges) {
      ordered_json j;
      j["role"] = role;
      j["src"] = g.external_id(e.src);
      j["relation"] = g.schema().relation(e.relation).name;
      j["dst"] = g.external_id(e.dst);
      out += j.dump() + "\n";
    }
  };
  emit("observed", s.observed);
  emit("train_pos", s.train_pos);
  emit("train_neg", s.train_neg);
  emit("test_pos", s.test_pos);
  emit("test_neg", s.test_neg);
  return out;
}

LinkSplit read_split(const fs::path& path, const HtrnGraph& g) {
  LinkSplit s;
  read_jsonl(path, [&](const json& rec, std::size_t line) {
    const auto node = [&](const char* key) {
      const auto id = g.find_node(rec.at(key).get<std::string>());
      if (!id) throw_data(path.string() + ":" + std::to_string(line) + ": unknown node");
      return *id;
    };
    const auto rel = g.schema().find_relation(rec.at("relation").get<std::string>());
    if (!rel) throw_data(path.string() + ":" + std::to_string(line) + ": unknown relation");
    const Edge e{node("src"), node("dst"), *rel};
    const auto role = rec.at("role").get<std::string>();
    if (role == "observed") s.observed.push_back(e);
    else if (role == "train_pos") s.train_pos.push_back(e);
    else if (role == "train_neg") s.train_neg.push_back(e);
    else if (role == "test_pos") s.test_pos.push_back(e);
    else if (role == "test_neg") s.test_neg.push_back(e);
    else throw_data(path.string() + ":" + std::to_string(line) + ": unknown role " + role);
  });
  return s;
}

std::string summary_records(const HtrnGraph& g, const std::vector<SubgraphSummary>& summaries) {
  std::string out;
  for (const auto& s : summaries) {
    ordered_json j;
    j["node"] = g.external_id(s.node);
    j["metapath"] = s.metapath;
    j["hash"] = content_hash(s.text);
    j["text"] = s.text;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<SubgraphSummary> read_summaries(const fs::path& path, const HtrnGraph& g) {
  std::vector<SubgraphSummary> out;
  read_jsonl(path, [&](const json& rec, std::size_t line) {
    const auto id = g.find_node(rec.at("node").get<std::string>());
    if (!id) throw_data(path.string() + ":" + std::to_string(line) + ": unknown node");
    out.push_back({*id, rec.at("metapath").get<std::string>(), rec.at("text").get<std::string>()});
  });
  return out;
}

void write_table(const fs::path& dir, const std::string& stem, const ReportTable& t) {
  write_text_file(dir / (stem + ".tsv"), t.tsv());
  write_text_file(dir / (stem + ".jsonl"), t.jsonl());
}

ordered_json pick(const ordered_json& j, std::initializer_list<const char*> keys) {
  ordered_json out = ordered_json::object();
  for (const char* k : keys)
    if (j.contains(k)) out[k] = j[k];
  return out;
}

}  // namespace

Pipeline::Pipeline(RunConfig config, fs::path out_dir, bool force)
    : config_(std::move(config)), out_(std::move(out_dir)), force_(force) {}

const std::vector<std::string>& Pipeline::stages() {
  static const std::vector<std::string> names = {"ingest", "synth", "summarize", "distill", "pretrain",
                                                 "embed",  "eval",  "ablate",    "sweep",   "freerun"};
  return names;
}

ordered_json Pipeline::manifest() const {
  const auto path = out_ / "manifest.json";
  if (!fs::exists(path)) return ordered_json{{"stages", ordered_json::object()}};
  try {
    return ordered_json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw_data(path.string() + ": corrupt manifest: " + e.what());
  }
}

void Pipeline::require(const std::string& rel, const std::string& producer) const {
  if (!fs::exists(out_ / rel))
    throw_data("missing artifact " + (out_ / rel).string() + "; run `hierprompt " + producer + "` first");
}

template <class Body>
void Pipeline::stage(const std::string& name, const StageIo& io, Body&& body) {
  last_skipped_ = false;
  ordered_json m = manifest();
  const std::string config_hash = hash_json(io.config);
  ordered_json inputs = ordered_json::object();
  for (const auto& rel : io.inputs) inputs[rel] = file_hash(out_ / rel);

  if (!force_ && m["stages"].contains(name)) {
    const auto& prev = m["stages"][name];
    bool fresh = prev.value("config_hash", std::string()) == config_hash && prev.value("inputs", ordered_json()) == inputs;
    if (fresh) {
      for (const auto& [rel, h] : prev["outputs"].items())
        fresh = fresh && fs::exists(out_ / rel) && file_hash(out_ / rel) == h.template get<std::string>();
    }
    if (fresh) {
      log_info(name + ": up to date");
      last_skipped_ = true;
      return;
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  ordered_json extra = ordered_json::object();
  body(extra);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ordered_json outputs = ordered_json::object();
  for (const auto& rel : io.outputs) {
    if (!fs::exists(out_ / rel)) throw_data(name + ": expected output " + rel + " was not written");
    outputs[rel] = file_hash(out_ / rel);
  }
  ordered_json entry;
  entry["stage"] = name;
  entry["config_hash"] = config_hash;
  entry["inputs"] = inputs;
  entry["outputs"] = outputs;
  entry["wall_time"] = wall;
  for (const auto& [k, v] : extra.items()) entry[k] = v;
  m = manifest();
  m["stages"][name] = entry;
  write_text_file(out_ / "manifest.json", m.dump(2) + "\n");
  log_info(name + ": done in " + std::to_string(wall) + " s");
}

void Pipeline::run(const std::string& name) {
  if (name == "ingest") return ingest();
  if (name == "synth") return synth();
  if (name == "summarize") return summarize();
  if (name == "distill") return distill();
  if (name == "pretrain") return pretrain();
  if (name == "embed") return embed();
  if (name == "eval") return eval();
  if (name == "ablate") return ablate();
  if (name == "freerun") return freerun();
  throw_config("unknown stage '" + name + "'");
}

void Pipeline::synth() {
  if (!config_.data.synth) throw_config("synth needs a data.synth block in the config");
  const auto cj = config_.to_json();
  StageIo io{{}, kGraphFiles, {{"seed", config_.seed}, {"synth", cj["data"]["synth"]}}};
  stage("synth", io, [&](ordered_json& extra) {
    const Dataset d = synth_graph(*config_.data.synth, config_.seed);
    save_dataset(d, out_ / "graph");
    extra["graph"] = d.graph.describe();
  });
}

void Pipeline::ingest() {
  const auto& dc = config_.data;
  if (dc.nodes.empty() || dc.edges.empty() || dc.schema.empty())
    throw_config("ingest needs data.nodes, data.edges and data.schema");
  ordered_json cfg;
  cfg["nodes"] = file_hash(dc.nodes);
  cfg["edges"] = file_hash(dc.edges);
  cfg["schema"] = file_hash(dc.schema);
  StageIo io{{}, kGraphFiles, cfg};
  stage("ingest", io, [&](ordered_json& extra) {
    const Dataset d = load_dataset(dc.nodes, dc.edges, dc.schema);
    save_dataset(d, out_ / "graph");
    extra["graph"] = d.graph.describe();
  });
}

void Pipeline::summarize() {
  for (const auto& f : kGraphFiles) require(f, "synth` or `hierprompt ingest");
  const auto cj = config_.to_json();
  ordered_json cfg = pick(cj, {"seed", "metapaths", "templates", "neighbor_cap", "tokenizer"});
  cfg["link"] = pick(cj["eval"], {"link_train", "link_test"});
  StageIo io{kGraphFiles, {kSplit, kSummaries, kVocab}, cfg};
  stage("summarize", io, [&](ordered_json& extra) {
    const Dataset d = load_dataset(out_ / kNodes, out_ / kEdges, out_ / kSchema);
    const PreparedRun p = prepare_run(d.graph, config_, config_.seed);
    write_text_file(out_ / kSplit, split_records(d.graph, p.split));
    write_text_file(out_ / kSummaries, summary_records(d.graph, p.summaries));
    p.vocab.save(out_ / kVocab);
    extra["summaries"] = p.summaries.size();
    extra["vocab_size"] = p.vocab.size();
  });
}

namespace {

struct Loaded {
  Dataset data;
  PreparedRun prep;
};

Loaded load_prepared(const fs::path& out, const RunConfig& config) {
  Dataset d = load_dataset(out / kNodes, out / kEdges, out / kSchema);
  PreparedRun p;
  p.split = read_split(out / kSplit, d.graph);
  p.observed = d.graph.with_edges(p.split.observed);
  p.metapaths = prepare_metapaths(config, d.graph.schema());
  p.summaries = read_summaries(out / kSummaries, d.graph);
  p.vocab = Vocab::load(out / kVocab);
  return {std::move(d), std::move(p)};
}

}  // namespace

void Pipeline::distill() {
  for (const auto& f : {kSplit, kSummaries, kVocab}) require(f, "summarize");
  const auto cj = config_.to_json();
  StageIo io{kPrepFiles, kTokenFiles, pick(cj, {"seed", "encoder", "snapshot", "distiller", "max_len"})};
  stage("distill", io, [&](ordered_json& extra) {
    const Loaded l = load_prepared(out_, config_);
    std::vector<StepLog> warmup;
    const EncoderParams frozen = build_snapshot(config_, l.prep.vocab, l.data.graph, config_.seed, &warmup);
    if (!warmup.empty()) extra["snapshot_mlm_final"] = warmup.back().loss_mlm;
    save_checkpoint(frozen, out_ / kFrozen);
    auto distiller = make_distiller(config_.distiller, frozen, l.prep.vocab, config_.max_len);
    DistillStats stats;
    const auto store = distill_all(l.prep.summaries, *distiller, out_ / "cache", &stats);
    extra["distiller"] = distiller->tag();
    extra["distiller_hash"] = distiller->fingerprint();
    extra["tokens"] = stats.total;
    extra["encoder_calls"] = stats.encoded;
    extra["cache_hits"] = stats.cache_hits;
    extra["cache_rebuilt"] = stats.rebuilt;
  });
}

namespace {

struct Model {
  Loaded loaded;
  GraphTokenStore store;
  EncoderParams frozen;
  TrainConfig train;
};

Model load_model_inputs(const fs::path& out, const RunConfig& config) {
  Model m{load_prepared(out, config), {}, load_checkpoint(out / kFrozen), config.train};
  m.store = load_token_store(out / "cache", m.loaded.prep.summaries);
  m.train.seed = config.seed;
  return m;
}

}  // namespace

void Pipeline::pretrain() {
  for (const auto& f : kTokenFiles) require(f, "distill");
  const auto cj = config_.to_json();
  StageIo io{concat({kPrepFiles, kTokenFiles}), {kCheckpoint, kMetrics},
             pick(cj, {"seed", "encoder", "train", "max_len", "templates", "metapaths"})};
  stage("pretrain", io, [&](ordered_json& extra) {
    const Model m = load_model_inputs(out_, config_);
    const auto& prep = m.loaded.prep;
    const EncoderConfig target = resolve_encoder(config_, prep.vocab, prep.observed.schema(), m.store.dim());
    EncoderParams params = derive_tunable(m.frozen, target, config_.seed);
    const PromptFactory factory(prep.observed, prep.metapaths, config_.templates, prep.vocab,
                                m.train.ablation.no_graph_token ? nullptr : &m.store,
                                prompt_options(m.train, config_.max_len));
    std::string log;
    TrainHooks hooks;
    hooks.on_step = [&](const StepLog& s) { log += metrics_line(s) + "\n"; };
    hooks.checkpoint_path = out_ / kCheckpoint;
    TrainResult r;
    try {
      r = train(params, factory, m.train, hooks);
    } catch (...) {
      write_text_file(out_ / kMetrics, log);
      throw;
    }
    write_text_file(out_ / kMetrics, log);
    extra["steps"] = r.steps;
    extra["ablation"] = m.train.ablation.name();
    extra["nsp_positives"] = r.sampling.positives;
    extra["nsp_negatives"] = r.sampling.negatives;
    extra["checkpoint_hash"] = params.hash();
  });
}

void Pipeline::embed() {
  require(kCheckpoint, "pretrain");
  const auto cj = config_.to_json();
  ordered_json cfg = pick(cj, {"seed", "max_len", "templates", "metapaths", "train"});
  cfg["node_pooling"] = cj["eval"]["node_pooling"];
  StageIo io{concat({kPrepFiles, kTokenFiles, {kCheckpoint}}), {kNodeEmbeddings}, cfg};
  stage("embed", io, [&](ordered_json& extra) {
    const Model m = load_model_inputs(out_, config_);
    const auto& prep = m.loaded.prep;
    const EncoderParams params = load_checkpoint(out_ / kCheckpoint);
    const PromptFactory factory(prep.observed, prep.metapaths, config_.templates, prep.vocab,
                                m.train.ablation.no_graph_token ? nullptr : &m.store,
                                prompt_options(m.train, config_.max_len));
    std::vector<NodeId> nodes(prep.observed.num_nodes());
    for (NodeId u = 0; u < nodes.size(); ++u) nodes[u] = u;
    const auto records = embed_all(params, factory, nodes, config_.eval.node_pooling);
    write_embeddings(out_ / kNodeEmbeddings, records, "finetuned", config_.eval.node_pooling);
    extra["records"] = records.size();
  });
}

namespace {

Matrix labeled_matrix(const std::vector<EmbeddingRecord>& records, const HtrnGraph& g, const std::vector<NodeId>& nodes) {
  std::map<std::string, const EmbeddingRecord*> by_subject;
  for (const auto& r : records) by_subject[r.subject] = &r;
  Matrix x;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto it = by_subject.find(g.external_id(nodes[i]));
    if (it == by_subject.end()) throw_data("no embedding for node " + g.external_id(nodes[i]));
    const auto& v = it->second->vector;
    if (i == 0) x.resize(static_cast<Eigen::Index>(nodes.size()), static_cast<Eigen::Index>(v.size()));
    if (static_cast<Eigen::Index>(v.size()) != x.cols()) throw_data("embedding dimensions differ");
    for (std::size_t j = 0; j < v.size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
  }
  return x;
}

}  // namespace

void Pipeline::eval() {
  require(kNodeEmbeddings, "embed");
  const auto cj = config_.to_json();
  ordered_json cfg = pick(cj, {"seed", "max_len", "templates", "metapaths", "train", "eval"});
  StageIo io{concat({kPrepFiles, kTokenFiles, {kCheckpoint, kNodeEmbeddings}}),
             {"reports/node_classification.tsv", "reports/node_classification.jsonl", "reports/link_prediction.tsv",
              "reports/link_prediction.jsonl"},
             cfg};
  stage("eval", io, [&](ordered_json& extra) {
    const Model m = load_model_inputs(out_, config_);
    const auto& prep = m.loaded.prep;
    const EncoderParams params = load_checkpoint(out_ / kCheckpoint);
    const PromptFactory factory(prep.observed, prep.metapaths, config_.templates, prep.vocab,
                                m.train.ablation.no_graph_token ? nullptr : &m.store,
                                prompt_options(m.train, config_.max_len));
    const std::string variant = m.train.ablation.name();

    ReportTable nc{"node_classification", {"micro_f1", "macro_f1"}, {}};
    const auto [nodes, labels] = labeled_nodes(m.loaded.data.labels);
    if (!nodes.empty()) {
      const Matrix x = labeled_matrix(read_embeddings(out_ / kNodeEmbeddings), m.loaded.data.graph, nodes);
      nc.rows.push_back(node_classification(x, labels, m.loaded.data.labels.num_classes(), config_.eval.node_cls,
                                            mix_seed(config_.seed, "node-cls"), variant));
    }
    write_table(out_ / "reports", "node_classification", nc);

    const bool use_probe = m.train.ablation.no_nsp || config_.eval.scorer == "probe";
    const EdgeScorer scorer = use_probe ? probe_scorer(params, factory, prep.split, config_.eval.edge_pooling,
                                                       config_.eval.probe_lambda)
                                        : nsp_scorer(params, factory);
    ReportTable lp{"link_prediction", {"roc_auc", "pr_auc", "f1"},
                   link_prediction(prep.split, prep.observed.schema(), scorer, {0.5, config_.eval.min_relation_edges})};
    write_table(out_ / "reports", "link_prediction", lp);
    extra["scorer"] = use_probe ? "probe" : "nsp";
    extra["split_hash"] = prep.split.hash();
  });
}

void Pipeline::freerun() {
  for (const auto& f : kTokenFiles) require(f, "distill");
  const auto cj = config_.to_json();
  ordered_json cfg = pick(cj, {"seed", "max_len", "templates", "metapaths", "eval", "encoder"});
  const std::vector<std::string> outputs = {"embeddings/freerun_nodes.jsonl", "embeddings/freerun_edges.jsonl",
                                            "reports/freerun_node_classification.tsv",
                                            "reports/freerun_node_classification.jsonl",
                                            "reports/freerun_link_prediction.tsv",
                                            "reports/freerun_link_prediction.jsonl"};
  StageIo io{concat({kPrepFiles, kTokenFiles}), outputs, cfg};
  stage("freerun", io, [&](ordered_json& extra) {
    const std::size_t steps_before = AdamW::process_steps();
    const Model m = load_model_inputs(out_, config_);
    const auto& prep = m.loaded.prep;
    const EncoderConfig target = resolve_encoder(config_, prep.vocab, prep.observed.schema(), m.store.dim());
    const EncoderParams params = derive_tunable(m.frozen, target, config_.seed);
    TrainConfig full = config_.train;
    full.ablation = {};
    full.mask_graph_tokens = false;
    const PromptFactory factory(prep.observed, prep.metapaths, config_.templates, prep.vocab, &m.store,
                                prompt_options(full, config_.max_len));

    std::vector<NodeId> all(prep.observed.num_nodes());
    for (NodeId u = 0; u < all.size(); ++u) all[u] = u;
    const auto nodes = embed_all(params, factory, all, config_.eval.node_pooling);
    write_embeddings(out_ / "embeddings/freerun_nodes.jsonl", nodes, "training-free", config_.eval.node_pooling);

    std::vector<EmbeddingRecord> edges;
    for (const auto* list : {&prep.split.train_pos, &prep.split.train_neg, &prep.split.test_pos, &prep.split.test_neg})
      for (const auto& e : *list) {
        const RowVector v = embed_edge(params, factory, e.src, e.relation, e.dst, config_.eval.edge_pooling);
        edges.push_back({edge_subject(prep.observed, e), std::vector<double>(v.data(), v.data() + v.size())});
      }
    write_embeddings(out_ / "embeddings/freerun_edges.jsonl", edges, "training-free", config_.eval.edge_pooling);

    ReportTable nc{"node_classification", {"micro_f1", "macro_f1"}, {}};
    const auto [ids, labels] = labeled_nodes(m.loaded.data.labels);
    if (!ids.empty()) {
      nc.rows.push_back(node_classification(labeled_matrix(nodes, m.loaded.data.graph, ids), labels,
                                            m.loaded.data.labels.num_classes(), config_.eval.node_cls,
                                            mix_seed(config_.seed, "node-cls"), "training_free"));
    }
    write_table(out_ / "reports", "freerun_node_classification", nc);
    const EdgeScorer scorer =
        probe_scorer(params, factory, prep.split, config_.eval.edge_pooling, config_.eval.probe_lambda);
    ReportTable lp{"link_prediction", {"roc_auc", "pr_auc", "f1"},
                   link_prediction(prep.split, prep.observed.schema(), scorer, {0.5, config_.eval.min_relation_edges})};
    write_table(out_ / "reports", "freerun_link_prediction", lp);
    extra["optimizer_steps"] = AdamW::process_steps() - steps_before;
    extra["snapshot_hash"] = params.hash();
  });
}

void Pipeline::ablate() {
  for (const auto& f : kGraphFiles) require(f, "synth` or `hierprompt ingest");
  StageIo io{kGraphFiles, {"reports/ablation.tsv", "reports/ablation.jsonl"}, config_.to_json()};
  stage("ablate", io, [&](ordered_json& extra) {
    const Dataset d = load_dataset(out_ / kNodes, out_ / kEdges, out_ / kSchema);
    const auto table = run_ablation_suite(d, config_, config_.eval.ablation_seeds);
    write_table(out_ / "reports", "ablation", table);
    extra["seeds"] = config_.eval.ablation_seeds;
  });
}

void Pipeline::sweep(const std::string& key, const std::vector<json>& values) {
  for (const auto& f : kGraphFiles) require(f, "synth` or `hierprompt ingest");
  std::string stem = "sweep_";
  for (char c : key) stem += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  ordered_json cfg = config_.to_json();
  cfg["sweep"] = {{"key", key}, {"values", json(values).dump()}};
  StageIo io{kGraphFiles, {"reports/" + stem + ".tsv", "reports/" + stem + ".jsonl"}, cfg};
  stage("sweep:" + key, io, [&](ordered_json& extra) {
    const Dataset d = load_dataset(out_ / kNodes, out_ / kEdges, out_ / kSchema);
    write_table(out_ / "reports", stem, run_sweep(d, config_, key, values));
    extra["values"] = values.size();
  });
}

}  // namespace hierprompt
