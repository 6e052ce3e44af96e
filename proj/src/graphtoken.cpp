#include "hierprompt/graphtoken.hpp"

#include <cmath>
#include <cstring>
#include <unordered_map>

namespace hierprompt {

std::vector<std::vector<float>> Distiller::encode(const std::vector<std::string>& texts) {
  auto out = encode_impl(texts);
  calls_ += texts.size();
  if (out.size() != texts.size()) throw_data(tag() + ": distiller returned the wrong number of vectors");
  for (const auto& v : out) {
    if (static_cast<int>(v.size()) != dim()) throw_data(tag() + ": distiller returned a vector of the wrong size");
    for (float x : v)
      if (!std::isfinite(x)) throw Error(ErrorKind::kNumeric, tag() + ": distiller produced a non-finite vector");
  }
  return out;
}

BuiltinDistiller::BuiltinDistiller(EncoderParams frozen, Vocab vocab, Pooling pooling, std::size_t max_len)
    : params_(std::move(frozen)), vocab_(std::move(vocab)), pooling_(pooling), max_len_(max_len) {
  if (max_len_ < 3) throw_config("distiller max_len must be >= 3");
  if (static_cast<std::size_t>(params_.config.vocab_size) < vocab_.size())
    throw_config("distiller encoder vocabulary is smaller than the tokenizer vocabulary");
  Fnv64 h;
  h.update(params_.hash()).update(vocab_.hash()).update(pooling_name(pooling_));
  h.update_pod(static_cast<std::uint64_t>(max_len_));
  fingerprint_ = h.hex();
}

RowVector BuiltinDistiller::encode_one(const std::string& text) const {
  const std::size_t limit = std::min(max_len_, static_cast<std::size_t>(params_.config.max_positions));
  const MixedSequence seq = encode_plain(text, vocab_, limit, false);
  return pool(forward(params_, seq, Matrix(0, params_.config.soft_dim())), pooling_);
}

std::vector<std::vector<float>> BuiltinDistiller::encode_impl(const std::vector<std::string>& texts) {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    const RowVector v = encode_one(t);
    std::vector<float> f(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f[static_cast<std::size_t>(i)] = static_cast<float>(v(i));
    out.push_back(std::move(f));
  }
  return out;
}

BridgeDistiller::BridgeDistiller(const std::string& endpoint, double timeout_seconds)
    : client_(endpoint, timeout_seconds) {}

std::string BridgeDistiller::fingerprint() const {
  Fnv64 h;
  h.update(client_.endpoint()).update("\n").update(client_.handshake().model_tag);
  h.update_pod(static_cast<std::int64_t>(client_.handshake().dim));
  return h.hex();
}

std::vector<std::vector<float>> BridgeDistiller::encode_impl(const std::vector<std::string>& texts) {
  return client_.encode(texts);
}

GraphToken distill(const SubgraphSummary& summary, Distiller& distiller) {
  if (summary.text.empty()) throw_data("cannot distill an empty summary");
  GraphToken t;
  t.node = summary.node;
  t.metapath = summary.metapath;
  t.vector = distiller.encode({summary.text}).front();
  t.source = distiller.tag();
  t.hash = content_hash(summary.text);
  return t;
}

void GraphTokenStore::insert(GraphToken token) {
  if (dim_ == 0) dim_ = static_cast<int>(token.vector.size());
  if (static_cast<int>(token.vector.size()) != dim_) throw_data("graph token dimension mismatch");
  auto key = std::make_pair(token.node, token.metapath);
  tokens_.insert_or_assign(std::move(key), std::move(token));
}

bool GraphTokenStore::contains(NodeId node, std::string_view metapath) const {
  return tokens_.find(std::make_pair(node, std::string(metapath))) != tokens_.end();
}

const GraphToken& GraphTokenStore::get(NodeId node, std::string_view metapath) const {
  const auto it = tokens_.find(std::make_pair(node, std::string(metapath)));
  if (it == tokens_.end())
    throw_data("no graph token for node " + std::to_string(node) + " via " + std::string(metapath));
  return it->second;
}

std::vector<const GraphToken*> GraphTokenStore::tokens() const {
  std::vector<const GraphToken*> out;
  out.reserve(tokens_.size());
  for (const auto& [key, tok] : tokens_) out.push_back(&tok);
  return out;
}

TokenAvailability GraphTokenStore::availability() const {
  return [this](NodeId node, std::string_view metapath) { return contains(node, metapath); };
}

namespace {

struct CacheContents {
  std::unordered_map<std::string, std::vector<float>> by_hash;
};

bool load_cache(const std::filesystem::path& dir, const Distiller* distiller, CacheContents& cache,
                std::string& problem, int* dim_out = nullptr, std::string* tag_out = nullptr) {
  namespace fs = std::filesystem;
  const auto meta_path = dir / "distiller.json";
  const auto manifest_path = dir / "manifest.jsonl";
  const auto bin_path = dir / "vectors.bin";
  if (!fs::exists(meta_path) && !fs::exists(manifest_path) && !fs::exists(bin_path)) return true;
  try {
    const json meta = json::parse(read_text_file(meta_path));
    const int cache_dim = meta.value("dim", 0);
    if (distiller != nullptr &&
        (meta.value("fingerprint", std::string()) != distiller->fingerprint() || cache_dim != distiller->dim())) {
      problem = "distiller changed";
      return false;
    }
    if (cache_dim <= 0) {
      problem = "bad dimension in distiller.json";
      return false;
    }
    if (dim_out) *dim_out = cache_dim;
    if (tag_out) *tag_out = meta.value("tag", std::string());
    const std::string bin = read_text_file(bin_path);
    const std::size_t stride = static_cast<std::size_t>(cache_dim) * sizeof(float);
    if (bin.size() % stride != 0) {
      problem = "vector file size is not a multiple of the vector size";
      return false;
    }
    read_jsonl(manifest_path, [&](const json& rec, std::size_t line) {
      const auto hash = rec.at("hash").get<std::string>();
      const auto dim = rec.at("dim").get<int>();
      const auto offset = rec.at("offset").get<std::uint64_t>();
      if (dim != cache_dim || offset % stride != 0 || offset + stride > bin.size())
        throw_data("manifest line " + std::to_string(line) + " points outside the vector file");
      std::vector<float> v(static_cast<std::size_t>(dim));
      for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
          bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bin[offset + 4 * i + b])) << (8 * b);
        std::memcpy(&v[i], &bits, sizeof(bits));
        if (!std::isfinite(v[i])) throw_data("non-finite cached vector");
      }
      const auto [it, fresh] = cache.by_hash.emplace(hash, v);
      if (!fresh && it->second != v) throw_data("conflicting vectors for one hash");
    });
  } catch (const std::exception& e) {
    problem = e.what();
    cache.by_hash.clear();
    return false;
  }
  return true;
}

void write_cache(const std::filesystem::path& dir, const Distiller& distiller,
                 const std::vector<SubgraphSummary>& summaries, const std::vector<std::string>& hashes,
                 const std::unordered_map<std::string, std::vector<float>>& vectors) {
  std::string bin;
  ordered_json::string_t manifest;
  std::unordered_map<std::string, std::uint64_t> offsets;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    auto it = offsets.find(hashes[i]);
    if (it == offsets.end()) {
      it = offsets.emplace(hashes[i], bin.size()).first;
      for (float x : vectors.at(hashes[i])) {
        std::uint32_t bits;
        std::memcpy(&bits, &x, sizeof(bits));
        for (int b = 0; b < 4; ++b) bin.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
      }
    }
    ordered_json rec;
    rec["hash"] = hashes[i];
    rec["node"] = summaries[i].node;
    rec["metapath"] = summaries[i].metapath;
    rec["dim"] = distiller.dim();
    rec["offset"] = it->second;
    manifest += rec.dump() + "\n";
  }
  write_text_file(dir / "vectors.bin", bin);
  write_text_file(dir / "manifest.jsonl", manifest);
  ordered_json meta;
  meta["tag"] = distiller.tag();
  meta["fingerprint"] = distiller.fingerprint();
  meta["dim"] = distiller.dim();
  write_text_file(dir / "distiller.json", meta.dump(2) + "\n");
}

}  // namespace

GraphTokenStore distill_all(const std::vector<SubgraphSummary>& summaries, Distiller& distiller,
                            const std::filesystem::path& cache_dir, DistillStats* stats) {
  DistillStats local;
  CacheContents cache;
  if (!cache_dir.empty()) {
    std::string problem;
    if (!load_cache(cache_dir, &distiller, cache, problem)) {
      log_warn("graph-token cache at " + cache_dir.string() + " is unusable (" + problem + "); rebuilding");
      local.rebuilt = true;
    }
  }

  std::vector<std::string> hashes;
  hashes.reserve(summaries.size());
  std::vector<std::string> pending_text;
  std::vector<std::string> pending_hash;
  std::unordered_map<std::string, std::vector<float>> vectors;
  for (const auto& s : summaries) {
    if (s.text.empty()) throw_data("empty summary for node " + std::to_string(s.node) + " via " + s.metapath);
    hashes.push_back(content_hash(s.text));
    const auto& h = hashes.back();
    if (vectors.count(h) != 0) continue;
    if (const auto it = cache.by_hash.find(h); it != cache.by_hash.end()) {
      vectors.emplace(h, it->second);
      ++local.cache_hits;
    } else {
      vectors.emplace(h, std::vector<float>());
      pending_text.push_back(s.text);
      pending_hash.push_back(h);
    }
  }
  if (!pending_text.empty()) {
    auto encoded = distiller.encode(pending_text);
    for (std::size_t i = 0; i < encoded.size(); ++i) vectors[pending_hash[i]] = std::move(encoded[i]);
  }
  local.encoded = pending_text.size();

  GraphTokenStore store(distiller.dim());
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    GraphToken t;
    t.node = summaries[i].node;
    t.metapath = summaries[i].metapath;
    t.vector = vectors.at(hashes[i]);
    t.source = distiller.tag();
    t.hash = hashes[i];
    store.insert(std::move(t));
  }
  if (store.size() != summaries.size()) throw_data("duplicate (node, meta-path) summaries");
  if (!cache_dir.empty()) write_cache(cache_dir, distiller, summaries, hashes, vectors);
  local.total = store.size();
  if (stats) *stats = local;
  return store;
}

GraphTokenStore load_token_store(const std::filesystem::path& cache_dir,
                                 const std::vector<SubgraphSummary>& summaries) {
  if (!std::filesystem::exists(cache_dir / "distiller.json"))
    throw_data("missing graph-token cache " + cache_dir.string());
  CacheContents cache;
  std::string problem;
  int dim = 0;
  std::string tag;
  if (!load_cache(cache_dir, nullptr, cache, problem, &dim, &tag))
    throw_data("graph-token cache at " + cache_dir.string() + " is unusable: " + problem);
  GraphTokenStore store(dim);
  for (const auto& s : summaries) {
    GraphToken t;
    t.node = s.node;
    t.metapath = s.metapath;
    t.hash = content_hash(s.text);
    const auto it = cache.by_hash.find(t.hash);
    if (it == cache.by_hash.end())
      throw_data("graph-token cache has no entry for node " + std::to_string(s.node) + " via " + s.metapath);
    t.vector = it->second;
    t.source = tag;
    store.insert(std::move(t));
  }
  return store;
}

}  // namespace hierprompt
