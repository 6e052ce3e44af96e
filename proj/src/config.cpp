#include "hierprompt/config.hpp"

namespace hierprompt {

namespace {

ordered_json node_cls_json(const NodeClsOptions& o) {
  ordered_json j;
  j["train_frac"] = o.train_frac;
  j["val_frac"] = o.val_frac;
  j["repeats"] = o.repeats;
  j["lambdas"] = o.lambdas;
  j["max_iter"] = o.solver.max_iter;
  j["tol"] = o.solver.tol;
  return j;
}

NodeClsOptions node_cls_from(const json& j) {
  reject_unknown_keys(j, {"train_frac", "val_frac", "repeats", "lambdas", "max_iter", "tol"}, "eval.node_cls");
  NodeClsOptions o;
  o.train_frac = j.value("train_frac", o.train_frac);
  o.val_frac = j.value("val_frac", o.val_frac);
  o.repeats = j.value("repeats", o.repeats);
  o.lambdas = j.value("lambdas", o.lambdas);
  o.solver.max_iter = j.value("max_iter", o.solver.max_iter);
  o.solver.tol = j.value("tol", o.solver.tol);
  if (o.repeats == 0) throw_config("eval.node_cls.repeats must be positive");
  if (o.lambdas.empty()) throw_config("eval.node_cls.lambdas must not be empty");
  return o;
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw_config("config must be a JSON object");
  reject_unknown_keys(j,
                      {"seed", "data", "metapaths", "templates", "neighbor_cap", "max_len", "tokenizer", "encoder",
                       "snapshot", "train", "distiller", "eval"},
                      "config");
  RunConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("data")) {
      const auto& d = j["data"];
      reject_unknown_keys(d, {"nodes", "edges", "schema", "synth"}, "data");
      c.data.nodes = d.value("nodes", std::string());
      c.data.edges = d.value("edges", std::string());
      c.data.schema = d.value("schema", std::string());
      if (d.contains("synth")) c.data.synth = SynthConfig::from_json(d["synth"]);
    }
    if (j.contains("metapaths")) {
      if (!j["metapaths"].is_array()) throw_config("metapaths must be a list");
      for (const auto& m : j["metapaths"]) c.metapaths.push_back(MetaPathSpec::from_json(m));
    }
    if (j.contains("templates")) c.templates = TemplateConfig::from_json(j["templates"]);
    c.neighbor_cap = j.value("neighbor_cap", c.neighbor_cap);
    c.max_len = j.value("max_len", c.max_len);
    if (j.contains("tokenizer")) {
      const auto& t = j["tokenizer"];
      reject_unknown_keys(t, {"min_freq", "max_size"}, "tokenizer");
      c.tokenizer.min_freq = t.value("min_freq", c.tokenizer.min_freq);
      c.tokenizer.max_size = t.value("max_size", c.tokenizer.max_size);
    }
    if (j.contains("encoder")) c.encoder = EncoderConfig::from_json(j["encoder"]);
    if (j.contains("snapshot")) c.snapshot = TextMlmConfig::from_json(j["snapshot"]);
    if (j.contains("train")) c.train = TrainConfig::from_json(j["train"]);
    if (j.contains("distiller")) {
      const auto& d = j["distiller"];
      reject_unknown_keys(d, {"spec", "pooling", "timeout_s"}, "distiller");
      c.distiller.spec = d.value("spec", c.distiller.spec);
      if (d.contains("pooling")) c.distiller.pooling = parse_pooling(d["pooling"].get<std::string>());
      c.distiller.timeout_s = d.value("timeout_s", c.distiller.timeout_s);
    }
    if (j.contains("eval")) {
      const auto& e = j["eval"];
      reject_unknown_keys(e,
                          {"link_train", "link_test", "node_cls", "node_pooling", "edge_pooling", "scorer",
                           "probe_lambda", "min_relation_edges", "ablation_seeds"},
                          "eval");
      c.eval.link_train = e.value("link_train", c.eval.link_train);
      c.eval.link_test = e.value("link_test", c.eval.link_test);
      if (e.contains("node_cls")) c.eval.node_cls = node_cls_from(e["node_cls"]);
      if (e.contains("node_pooling")) c.eval.node_pooling = parse_pooling(e["node_pooling"].get<std::string>());
      if (e.contains("edge_pooling")) c.eval.edge_pooling = parse_pooling(e["edge_pooling"].get<std::string>());
      c.eval.scorer = e.value("scorer", c.eval.scorer);
      c.eval.probe_lambda = e.value("probe_lambda", c.eval.probe_lambda);
      c.eval.min_relation_edges = e.value("min_relation_edges", c.eval.min_relation_edges);
      c.eval.ablation_seeds = e.value("ablation_seeds", c.eval.ablation_seeds);
    }
  } catch (const json::exception& e) {
    throw_config(std::string("invalid config value: ") + e.what());
  }
  if (c.train.seed == 0) c.train.seed = c.seed;
  if (c.eval.scorer != "nsp" && c.eval.scorer != "probe") throw_config("eval.scorer must be nsp or probe");
  if (c.distiller.spec != "builtin" && c.distiller.spec.rfind("bridge:", 0) != 0)
    throw_config("distiller.spec must be builtin or bridge:<endpoint>");
  if (c.max_len < 8) throw_config("max_len must be >= 8");
  if (c.neighbor_cap == 0) throw_config("neighbor_cap must be positive");
  if (c.eval.ablation_seeds.empty()) throw_config("eval.ablation_seeds must not be empty");
  c.train.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw_config(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw_config(e.what());
  }
  return from_json(j);
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  ordered_json d = ordered_json::object();
  if (!data.nodes.empty()) d["nodes"] = data.nodes;
  if (!data.edges.empty()) d["edges"] = data.edges;
  if (!data.schema.empty()) d["schema"] = data.schema;
  if (data.synth) d["synth"] = data.synth->to_json();
  j["data"] = d;
  j["metapaths"] = ordered_json::array();
  for (const auto& m : metapaths) j["metapaths"].push_back(m.to_json());
  j["templates"] = templates.to_json();
  j["neighbor_cap"] = neighbor_cap;
  j["max_len"] = max_len;
  j["tokenizer"] = {{"min_freq", tokenizer.min_freq}, {"max_size", tokenizer.max_size}};
  j["encoder"] = encoder.to_json();
  j["snapshot"] = snapshot.to_json();
  auto t = train.to_json();
  j["train"] = t;
  ordered_json dj;
  dj["spec"] = distiller.spec;
  dj["pooling"] = pooling_name(distiller.pooling);
  dj["timeout_s"] = distiller.timeout_s;
  j["distiller"] = dj;
  ordered_json e;
  e["link_train"] = eval.link_train;
  e["link_test"] = eval.link_test;
  e["node_cls"] = node_cls_json(eval.node_cls);
  e["node_pooling"] = pooling_name(eval.node_pooling);
  e["edge_pooling"] = pooling_name(eval.edge_pooling);
  e["scorer"] = eval.scorer;
  e["probe_lambda"] = eval.probe_lambda;
  e["min_relation_edges"] = eval.min_relation_edges;
  e["ablation_seeds"] = eval.ablation_seeds;
  j["eval"] = e;
  return j;
}

RunConfig RunConfig::with_override(std::string_view key, const json& value) const {
  if (key.empty()) throw_config("empty override key");
  json j = json::parse(to_json().dump());
  std::string pointer = "/";
  for (char ch : key) pointer += ch == '.' ? '/' : ch;
  const json::json_pointer ptr(pointer);
  if (!j.contains(ptr.parent_pointer())) throw_config("unknown config key '" + std::string(key) + "'");
  j[ptr] = value;
  // Keep the train seed tied to the run seed unless it was overridden directly.
  if (key == "seed") j["train"].erase("seed");
  return from_json(j);
}

std::vector<json> parse_sweep_values(std::string_view key, std::string_view values) {
  std::vector<json> out;
  std::size_t start = 0;
  while (start <= values.size()) {
    const auto comma = values.find(',', start);
    const auto item = values.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (item.empty()) throw_config("empty value in sweep list");
    if (key == "metapaths") {
      json list = json::array();
      std::size_t s = 0;
      while (s <= item.size()) {
        const auto plus = item.find('+', s);
        list.push_back(std::string(item.substr(s, plus == std::string_view::npos ? std::string_view::npos : plus - s)));
        if (plus == std::string_view::npos) break;
        s = plus + 1;
      }
      out.push_back(list);
    } else {
      try {
        out.push_back(json::parse(item));
      } catch (const json::parse_error&) {
        out.push_back(std::string(item));
      }
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw_config("sweep needs at least one value");
  return out;
}

std::string hash_json(const ordered_json& j) { return content_hash(j.dump()); }

}  // namespace hierprompt
