#include "support.hpp"

#include <atomic>
#include <unistd.h>

namespace testing_support {

using namespace hierprompt;

Schema dblp_schema() {
  Schema s;
  const auto p = s.add_node_type({"paper", "P", "Paper", false, {}});
  const auto a = s.add_node_type({"author", "A", "Author", true, {}});
  const auto v = s.add_node_type({"venue", "V", "Venue", true, {}});
  s.add_relation("cite", p, p);
  s.add_relation("write", a, p);
  s.add_relation("publish", v, p);
  s.label_field = "label";
  s.label_type = p;
  return s;
}

HtrnGraph tiny_dblp() {
  GraphBuilder b(dblp_schema());
  const NodeId p0 = b.add_node("p0", 0, "graph neural networks");
  const NodeId p1 = b.add_node("p1", 0, "language model prompts");
  const NodeId p2 = b.add_node("p2", 0, "heterogeneous graphs");
  const NodeId p3 = b.add_node("p3", 0, "link prediction");
  const NodeId a0 = b.add_node("a0", 1, "a0");
  const NodeId a1 = b.add_node("a1", 1, "a1");
  const NodeId v0 = b.add_node("v0", 2, "v0");
  b.add_edge(a0, p0, 1);
  b.add_edge(a0, p1, 1);
  b.add_edge(a1, p1, 1);
  b.add_edge(a1, p2, 1);
  b.add_edge(v0, p0, 2);
  b.add_edge(v0, p3, 2);
  b.add_edge(p0, p1, 0);
  b.add_edge(p2, p3, 0);
  return std::move(b).build();
}

std::filesystem::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("hierprompt_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support

namespace testing_support {

GradcheckCase gradcheck_case(std::uint64_t seed) {
  EncoderConfig c;
  c.layers = 2;
  c.hidden = 16;
  c.heads = 2;
  c.ffn = 32;
  c.vocab_size = 20;
  c.max_positions = 16;
  c.relations = 2;
  c.graph_dim = 8;
  c.graph_mask = true;
  c.init_std = 0.3;  // large enough that every path carries gradient
  GradcheckCase g{init_params(c, seed), {}, {}, {}};

  auto& s = g.sequence;
  for (int i = 0; i < 12; ++i) {
    s.kinds.push_back(ElementKind::kToken);
    s.ids.push_back(Vocab::kNumSpecial + (i * 7 + static_cast<int>(seed)) % 15);
    s.segments.push_back(i > 6 ? 1 : 0);
    s.maskable.push_back(1);
  }
  s.ids[0] = Vocab::kCls;
  s.ids[11] = Vocab::kSep;
  s.slots = {{SlotKind::kGraph, 0, "PAP", 0}, {SlotKind::kGraph, 1, "PAP", 0}, {SlotKind::kRelation, 0, "cite", 1}};
  s.kinds[3] = ElementKind::kGraphSlot;
  s.ids[3] = 0;
  s.kinds[5] = ElementKind::kRelationSlot;
  s.ids[5] = 2;
  s.kinds[8] = ElementKind::kGraphSlot;
  s.ids[8] = -1;

  Rng rng(mix_seed(seed, "gradcheck"));
  std::normal_distribution<double> normal;
  auto random = [&](Eigen::Index r, Eigen::Index cols) {
    Matrix m(r, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
  };
  g.soft = random(2, c.soft_dim());
  g.weights.nsp_logit = 1.5;
  g.weights.hidden = random(12, c.hidden);
  g.weights.mlm_positions = {2, 9};
  g.weights.mlm_logits = random(2, c.vocab_size);
  g.weights.graph_positions = {8};
  g.weights.graph_predictions = random(1, c.soft_dim());
  return g;
}

}  // namespace testing_support

namespace testing_support {

namespace {

std::vector<std::string> world_corpus(const HtrnGraph& g, const std::vector<MetaPath>& mps, const TemplateConfig& t,
                                      const std::vector<SubgraphSummary>& summaries) {
  std::vector<std::string> corpus = t.literals(g.schema(), mps);
  for (NodeId u = 0; u < g.num_nodes(); ++u) corpus.push_back(g.node(u).text);
  for (const auto& s : summaries) corpus.push_back(s.text);
  return corpus;
}

}  // namespace

EncoderConfig tiny_encoder(const TinyWorld& world, int hidden) {
  EncoderConfig c;
  c.layers = 1;
  c.hidden = hidden;
  c.heads = 2;
  c.ffn = 2 * hidden;
  c.vocab_size = static_cast<int>(world.vocab.size());
  c.max_positions = 128;
  c.relations = static_cast<int>(world.graph.schema().relations().size());
  return c;
}

TinyWorld::TinyWorld(PromptOptions options, int hidden)
    : graph(tiny_dblp()),
      metapaths{parse_metapath("PAP", graph.schema()), parse_metapath("PVP", graph.schema()),
                parse_metapath("AP", graph.schema())},
      summaries(summarize_all(graph, metapaths, templates)),
      vocab(build_vocab(world_corpus(graph, metapaths, templates, summaries))),
      frozen(init_params(tiny_encoder(*this, hidden), 11)),
      store([&] {
        BuiltinDistiller d(frozen, vocab);
        return distill_all(summaries, d, {});
      }()),
      factory(graph, metapaths, templates, vocab, &store, options) {}

}  // namespace testing_support
