#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "hierprompt/graphtoken.hpp"
#include "support.hpp"

using namespace hierprompt;
using testing_support::TinyWorld;

namespace {

BuiltinDistiller world_distiller(const TinyWorld& w) { return BuiltinDistiller(w.frozen, w.vocab); }

std::size_t unique_texts(const std::vector<SubgraphSummary>& s) {
  std::set<std::string> u;
  for (const auto& x : s) u.insert(x.text);
  return u.size();
}

std::string bridge(const std::string& args = "") { return std::string(FAKE_BRIDGE_PATH) + " " + args; }

}  // namespace

TEST(Distiller, BuiltinIsDeterministicAndRounded) {
  TinyWorld w;
  auto d = world_distiller(w);
  const auto a = d.encode({"graph neural networks", "link prediction"});
  const auto b = d.encode({"link prediction"});
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[1], b[0]);
  EXPECT_EQ(static_cast<int>(a[0].size()), d.dim());
  const RowVector raw = d.encode_one("graph neural networks");
  for (Eigen::Index i = 0; i < raw.size(); ++i) EXPECT_EQ(a[0][static_cast<std::size_t>(i)], static_cast<float>(raw(i)));
  EXPECT_EQ(d.calls(), 3u);
}

TEST(Distiller, FingerprintTracksWeights) {
  TinyWorld w;
  BuiltinDistiller a(w.frozen, w.vocab);
  BuiltinDistiller b(init_params(w.frozen.config, 99), w.vocab);
  BuiltinDistiller c(w.frozen, w.vocab, Pooling::kCls);
  EXPECT_NE(a.fingerprint(), b.fingerprint());
  EXPECT_NE(a.fingerprint(), c.fingerprint());
  EXPECT_EQ(a.fingerprint(), BuiltinDistiller(w.frozen, w.vocab).fingerprint());
}

TEST(Store, LookupAndOrder) {
  TinyWorld w;
  EXPECT_EQ(w.store.size(), w.summaries.size());
  EXPECT_TRUE(w.store.contains(0, "PAP"));
  EXPECT_FALSE(w.store.contains(0, "AP"));
  EXPECT_THROW(w.store.get(0, "AP"), Error);
  const auto all = w.store.tokens();
  for (std::size_t i = 1; i < all.size(); ++i)
    EXPECT_LT(std::tie(all[i - 1]->node, all[i - 1]->metapath), std::tie(all[i]->node, all[i]->metapath));
  EXPECT_TRUE(w.store.availability()(4, "AP"));
  EXPECT_EQ(w.store.get(1, "PVP").source, "builtin");
}

TEST(Cache, WarmRunEncodesNothing) {
  TinyWorld w;
  const auto dir = testing_support::scratch_dir("cache");
  auto d = world_distiller(w);
  DistillStats cold, warm;
  const auto first = distill_all(w.summaries, d, dir, &cold);
  EXPECT_EQ(cold.encoded, unique_texts(w.summaries));
  EXPECT_EQ(cold.total, w.summaries.size());
  EXPECT_FALSE(cold.rebuilt);

  auto d2 = world_distiller(w);
  const auto second = distill_all(w.summaries, d2, dir, &warm);
  EXPECT_EQ(d2.calls(), 0u);
  EXPECT_EQ(warm.encoded, 0u);
  EXPECT_EQ(warm.cache_hits, unique_texts(w.summaries));
  for (const auto* t : first.tokens()) EXPECT_EQ(second.get(t->node, t->metapath).vector, t->vector);

  const auto loaded = load_token_store(dir, w.summaries);
  for (const auto* t : first.tokens()) EXPECT_EQ(loaded.get(t->node, t->metapath).vector, t->vector);
}

TEST(Cache, TextEditRecomputesOnlyAffectedSummaries) {
  TinyWorld w;
  const auto dir = testing_support::scratch_dir("cache");
  auto d = world_distiller(w);
  distill_all(w.summaries, d, dir);

  // rename p1; every summary that mentions it changes
  GraphBuilder b(w.graph.schema());
  for (NodeId u = 0; u < w.graph.num_nodes(); ++u)
    b.add_node(w.graph.external_id(u), w.graph.node(u).type, u == 1 ? "prompt tuning" : w.graph.node(u).text);
  for (const auto& e : w.graph.edges()) b.add_edge(e.src, e.dst, e.relation);
  const HtrnGraph edited = std::move(b).build();
  const auto summaries = summarize_all(edited, w.metapaths, w.templates);

  std::set<std::string> before, fresh;
  for (const auto& s : w.summaries) before.insert(s.text);
  for (const auto& s : summaries)
    if (!before.count(s.text)) fresh.insert(s.text);
  ASSERT_FALSE(fresh.empty());
  ASSERT_LT(fresh.size(), unique_texts(summaries));

  auto d2 = world_distiller(w);
  DistillStats stats;
  distill_all(summaries, d2, dir, &stats);
  EXPECT_EQ(stats.encoded, fresh.size());
  EXPECT_EQ(d2.calls(), fresh.size());
  EXPECT_EQ(stats.cache_hits, unique_texts(summaries) - fresh.size());
}

TEST(Cache, CorruptionTriggersRebuild) {
  TinyWorld w;
  const auto dir = testing_support::scratch_dir("cache");
  auto d = world_distiller(w);
  const auto first = distill_all(w.summaries, d, dir);
  std::filesystem::resize_file(dir / "vectors.bin", std::filesystem::file_size(dir / "vectors.bin") - 3);

  auto d2 = world_distiller(w);
  DistillStats stats;
  const auto again = distill_all(w.summaries, d2, dir, &stats);
  EXPECT_TRUE(stats.rebuilt);
  EXPECT_EQ(stats.encoded, unique_texts(w.summaries));
  for (const auto* t : first.tokens()) EXPECT_EQ(again.get(t->node, t->metapath).vector, t->vector);

  std::ofstream(dir / "manifest.jsonl") << "{not json\n";
  DistillStats s3;
  distill_all(w.summaries, d2, dir, &s3);
  EXPECT_TRUE(s3.rebuilt);
}

TEST(Cache, DistillerChangeTriggersRebuild) {
  TinyWorld w;
  const auto dir = testing_support::scratch_dir("cache");
  auto d = world_distiller(w);
  distill_all(w.summaries, d, dir);
  BuiltinDistiller other(init_params(w.frozen.config, 5), w.vocab);
  DistillStats stats;
  distill_all(w.summaries, other, dir, &stats);
  EXPECT_TRUE(stats.rebuilt);
  EXPECT_EQ(stats.cache_hits, 0u);
}

TEST(Cache, LoadWithoutEntryFails) {
  TinyWorld w;
  const auto dir = testing_support::scratch_dir("cache");
  EXPECT_THROW(load_token_store(dir, w.summaries), Error);
  auto d = world_distiller(w);
  distill_all(w.summaries, d, dir);
  auto extra = w.summaries;
  extra.push_back({0, "PP", "something never distilled"});
  EXPECT_THROW(load_token_store(dir, extra), Error);
}

TEST(Bridge, HandshakeAndOutOfOrderResponses) {
  BridgeClient client(bridge("--dim=6 --tag=mini"));
  EXPECT_EQ(client.handshake().dim, 6);
  EXPECT_EQ(client.handshake().model_tag, "mini");
  std::vector<std::string> texts;
  for (int i = 0; i < 50; ++i) texts.push_back("summary number " + std::to_string(i));
  const auto batch = client.encode(texts);
  ASSERT_EQ(batch.size(), texts.size());
  // answering one at a time cannot reorder anything
  for (std::size_t i = 0; i < texts.size(); i += 7) EXPECT_EQ(client.encode({texts[i]})[0], batch[i]);
  EXPECT_NE(batch[0], batch[1]);
}

TEST(Bridge, ErrorResponsesRaiseBridgeErrors) {
  auto kind_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return static_cast<int>(e.kind());
    }
    return 0;
  };
  const int bridge_kind = static_cast<int>(ErrorKind::kBridge);
  EXPECT_EQ(kind_of([] { BridgeClient(bridge("--error-on=bad")).encode({"fine", "bad text"}); }), bridge_kind);
  EXPECT_EQ(kind_of([] { BridgeClient(bridge("--bad-dim")).encode({"x"}); }), bridge_kind);
  EXPECT_EQ(kind_of([] { BridgeClient(bridge("--exit-after=1")).encode({"a", "b"}); }), bridge_kind);
  EXPECT_EQ(kind_of([] { BridgeClient("/nonexistent/encoder-binary"); }), bridge_kind);
  EXPECT_EQ(kind_of([] { BridgeClient("tcp://nohost"); }), bridge_kind);
  EXPECT_EQ(kind_of([] { BridgeClient("sleep 5", 0.2); }), bridge_kind);
}

TEST(Bridge, DistillerUsesCache) {
  TinyWorld w;
  const auto dir = testing_support::scratch_dir("bridge");
  const auto counts = dir / "count.txt";
  const std::string endpoint = bridge("--dim=16 --count-file=" + counts.string());
  {
    BridgeDistiller d(endpoint);
    EXPECT_EQ(d.tag(), "bridge:" + endpoint);
    const auto store = distill_all(w.summaries, d, dir / "tokens");
    EXPECT_EQ(store.dim(), 16);
  }
  auto lines = [&] {
    std::ifstream in(counts);
    std::size_t n = 0;
    for (std::string s; std::getline(in, s);) ++n;
    return n;
  };
  EXPECT_EQ(lines(), unique_texts(w.summaries));
  {
    BridgeDistiller d(endpoint);
    DistillStats stats;
    distill_all(w.summaries, d, dir / "tokens", &stats);
    EXPECT_EQ(stats.encoded, 0u);
  }
  EXPECT_EQ(lines(), unique_texts(w.summaries));
}
