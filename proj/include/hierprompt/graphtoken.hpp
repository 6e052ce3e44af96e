#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hierprompt/bridge.hpp"
#include "hierprompt/encoder.hpp"
#include "hierprompt/textualize.hpp"
#include "hierprompt/vocab.hpp"

namespace hierprompt {

struct GraphToken {
  NodeId node = 0;
  std::string metapath;
  std::vector<float> vector;
  std::string source;  // "builtin" or "bridge:<endpoint>"
  std::string hash;    // content hash of the summary text
};

// A frozen text encoder mapping summaries to fixed-size vectors. Outputs are
// rounded to float32 so cached and freshly computed vectors agree exactly.
class Distiller {
 public:
  virtual ~Distiller() = default;
  virtual std::string tag() const = 0;
  // Identifies the frozen weights; a change invalidates any cache.
  virtual std::string fingerprint() const = 0;
  virtual int dim() const = 0;
  std::vector<std::vector<float>> encode(const std::vector<std::string>& texts);
  // Number of texts sent to the underlying encoder so far.
  std::size_t calls() const { return calls_; }

 protected:
  virtual std::vector<std::vector<float>> encode_impl(const std::vector<std::string>& texts) = 0;

 private:
  std::size_t calls_ = 0;
};

class BuiltinDistiller : public Distiller {
 public:
  BuiltinDistiller(EncoderParams frozen, Vocab vocab, Pooling pooling = Pooling::kMean,
                   std::size_t max_len = kDefaultMaxLen);
  std::string tag() const override { return "builtin"; }
  std::string fingerprint() const override { return fingerprint_; }
  int dim() const override { return params_.config.hidden; }
  // Unrounded pooled hidden state for one summary.
  RowVector encode_one(const std::string& text) const;
  const EncoderParams& params() const { return params_; }

 protected:
  std::vector<std::vector<float>> encode_impl(const std::vector<std::string>& texts) override;

 private:
  EncoderParams params_;
  Vocab vocab_;
  Pooling pooling_;
  std::size_t max_len_;
  std::string fingerprint_;
};

class BridgeDistiller : public Distiller {
 public:
  explicit BridgeDistiller(const std::string& endpoint, double timeout_seconds = 60.0);
  std::string tag() const override { return "bridge:" + client_.endpoint(); }
  std::string fingerprint() const override;
  int dim() const override { return client_.handshake().dim; }

 protected:
  std::vector<std::vector<float>> encode_impl(const std::vector<std::string>& texts) override;

 private:
  BridgeClient client_;
};

GraphToken distill(const SubgraphSummary& summary, Distiller& distiller);

class GraphTokenStore {
 public:
  GraphTokenStore() = default;
  explicit GraphTokenStore(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  void insert(GraphToken token);
  bool contains(NodeId node, std::string_view metapath) const;
  const GraphToken& get(NodeId node, std::string_view metapath) const;
  // Tokens ordered by (node, meta-path name).
  std::vector<const GraphToken*> tokens() const;
  TokenAvailability availability() const;

 private:
  int dim_ = 0;
  std::map<std::pair<NodeId, std::string>, GraphToken, std::less<>> tokens_;
};

struct DistillStats {
  std::size_t total = 0;      // tokens in the store
  std::size_t encoded = 0;    // unique summaries sent to the distiller
  std::size_t cache_hits = 0;
  bool rebuilt = false;  // cache was unreadable or stale and has been rebuilt
};

// Distills every summary, consulting the cache directory (manifest.jsonl +
// vectors.bin + distiller.json) by content hash first. An empty cache_dir
// disables persistence.
GraphTokenStore distill_all(const std::vector<SubgraphSummary>& summaries, Distiller& distiller,
                            const std::filesystem::path& cache_dir, DistillStats* stats = nullptr);

// Rebuilds a store from a cache directory written by distill_all without
// touching any encoder. Throws Error(kData) if a summary is missing.
GraphTokenStore load_token_store(const std::filesystem::path& cache_dir,
                                 const std::vector<SubgraphSummary>& summaries);

}  // namespace hierprompt
