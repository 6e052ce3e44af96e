#include <gtest/gtest.h>

#include <set>

#include "hierprompt/classifier.hpp"
#include "hierprompt/evaluate.hpp"
#include "hierprompt/metrics.hpp"
#include "hierprompt/synth.hpp"
#include "oracles.hpp"

using namespace hierprompt;

TEST(Metrics, RocExamples) {
  EXPECT_DOUBLE_EQ(roc_auc({0.9, 0.8}, {0.7, 0.1}), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc({0.9, 0.4}, {0.6, 0.1}), 0.75);
  EXPECT_DOUBLE_EQ(roc_auc({0.3, 0.3, 0.3}, {0.3, 0.3}), 0.5);
  EXPECT_THROW(roc_auc({}, {0.1}), Error);
  EXPECT_THROW(pr_auc({0.1}, {}), Error);
}

TEST(Metrics, SinglePair) {
  EXPECT_DOUBLE_EQ(roc_auc({1.0}, {0.0}), 1.0);
  EXPECT_DOUBLE_EQ(pr_auc({1.0}, {0.0}), 1.0);
  EXPECT_DOUBLE_EQ(f1_at_threshold({1.0}, {0.0}), 1.0);
}

TEST(Metrics, FourClassAllOnePrediction) {
  const std::vector<int> truth = {0, 0, 1, 1, 2, 2, 3, 3};
  const std::vector<int> pred(8, 2);
  EXPECT_DOUBLE_EQ(micro_f1(pred, truth), 0.25);
  EXPECT_NEAR(macro_f1(pred, truth), 0.1, 1e-15);
}

TEST(Metrics, F1Edges) {
  EXPECT_EQ(f1_score({0, 0}, {1, 0}), 0.0);
  EXPECT_DOUBLE_EQ(f1_score({1, 1, 0}, {1, 0, 1}), 0.5);
  EXPECT_DOUBLE_EQ(f1_at_threshold({0.5}, {0.49}, 0.5), 1.0);
}

TEST(Metrics, MatchOraclesOnRandomSets) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t np = 1 + uniform_index(rng, 60), nn = 1 + uniform_index(rng, 60);
    // coarse grid so ties are common
    auto draw = [&] { return static_cast<double>(uniform_index(rng, 11)) / 10.0; };
    std::vector<double> pos(np), neg(nn);
    for (auto& x : pos) x = draw();
    for (auto& x : neg) x = draw();
    EXPECT_NEAR(roc_auc(pos, neg), oracle::pairwise_roc(pos, neg), 1e-9);
    EXPECT_NEAR(pr_auc(pos, neg), oracle::sweep_average_precision(pos, neg), 1e-9);

    std::vector<int> pred(np + nn), truth(np + nn);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = static_cast<int>(uniform_index(rng, 2));
      truth[i] = static_cast<int>(uniform_index(rng, 2));
    }
    EXPECT_NEAR(f1_score(pred, truth), oracle::confusion_f1(pred, truth), 1e-12);
  }
}

TEST(Metrics, MeanAndStd) {
  EXPECT_DOUBLE_EQ(mean({1, 2, 3}), 2.0);
  EXPECT_DOUBLE_EQ(stddev({1, 2, 3}), 1.0);
  EXPECT_EQ(stddev({4}), 0.0);
}

TEST(Classifier, SeparableTwoClass) {
  Matrix x(40, 2);
  std::vector<int> y(40);
  Rng rng(3);
  for (int i = 0; i < 40; ++i) {
    y[static_cast<std::size_t>(i)] = i % 2;
    x(i, 0) = (i % 2 ? 2.0 : -2.0) + 0.3 * (uniform_real(rng) - 0.5);
    x(i, 1) = uniform_real(rng);
  }
  LinearOvR clf;
  clf.fit(x, y, 2, 1e-3);
  const auto pred = clf.predict(x);
  EXPECT_DOUBLE_EQ(micro_f1(pred, y), 1.0);
  EXPECT_DOUBLE_EQ(macro_f1(pred, y), 1.0);

  LogisticProbe probe;
  probe.fit(x, y, 1e-3);
  const auto p = probe.predict_proba(x);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(p[i] > 0.5, y[i] == 1);
}

TEST(Classifier, StandardizerHandlesConstantColumns) {
  Matrix x(3, 2);
  x << 1, 5, 2, 5, 3, 5;
  Standardizer s;
  s.fit(x);
  const Matrix z = s.apply(x);
  EXPECT_NEAR(z.col(0).mean(), 0.0, 1e-12);
  EXPECT_EQ(z.col(1).norm(), 0.0);
}

TEST(NodeCls, SeparableEmbeddingsScorePerfectly) {
  Matrix x(80, 3);
  std::vector<int> y(80);
  for (int i = 0; i < 80; ++i) {
    y[static_cast<std::size_t>(i)] = i % 4;
    x.row(i) << (i % 4 == 1), (i % 4 == 2), (i % 4 == 3) + 0.01 * i;
  }
  NodeClsOptions opt;
  opt.repeats = 3;
  const auto row = node_classification(x, y, 4, opt, 1);
  ASSERT_EQ(row.metric("micro_f1").values.size(), 3u);
  for (double v : row.metric("macro_f1").values) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Splits, NodeSplitIsAPartition) {
  std::vector<int> y(100);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 5);
  const auto s = split_nodes(y, 5, 0.7, 0.1, 4);
  EXPECT_EQ(s.train.size(), 70u);
  EXPECT_EQ(s.val.size(), 10u);
  EXPECT_EQ(s.test.size(), 20u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 100u);
  std::set<int> classes;
  for (auto i : s.train) classes.insert(y[i]);
  EXPECT_EQ(classes.size(), 5u);
  const auto again = split_nodes(y, 5, 0.7, 0.1, 4);
  EXPECT_EQ(again.test, s.test);
}

TEST(Splits, LinkSplitContract) {
  const auto data = synth_graph(SynthConfig::dblp_like(120, 30, 4), 8);
  const auto& g = data.graph;
  const auto s = split_links(g, 0.1, 0.4, 3);
  EXPECT_EQ(s.observed.size() + s.train_pos.size() + s.test_pos.size(), g.num_edges());
  EXPECT_EQ(s.train_pos.size(), s.train_neg.size());
  EXPECT_EQ(s.test_pos.size(), s.test_neg.size());
  std::set<std::tuple<NodeId, RelationId, NodeId>> seen;
  for (const auto* part : {&s.observed, &s.train_pos, &s.test_pos})
    for (const auto& e : *part) EXPECT_TRUE(seen.insert({e.src, e.relation, e.dst}).second);
  for (const auto* part : {&s.train_neg, &s.test_neg}) {
    for (const auto& e : *part) {
      EXPECT_FALSE(g.has_edge(e.src, e.relation, e.dst));
      EXPECT_EQ(g.node(e.dst).type, g.schema().relation(e.relation).dst_type);
    }
  }
  EXPECT_EQ(split_links(g, 0.1, 0.4, 3).hash(), s.hash());
  EXPECT_NE(split_links(g, 0.1, 0.4, 4).hash(), s.hash());
}

TEST(LinkPred, PerRelationRowsAndPerfectScorer) {
  const auto data = synth_graph(SynthConfig::dblp_like(120, 30, 4), 8);
  const auto s = split_links(data.graph, 0.1, 0.4, 3);
  std::set<std::tuple<NodeId, RelationId, NodeId>> positives;
  for (const auto& e : s.test_pos) positives.insert({e.src, e.relation, e.dst});
  EdgeScorer oracle_scorer = [&](const std::vector<Edge>& edges) {
    std::vector<double> out;
    for (const auto& e : edges) out.push_back(positives.count({e.src, e.relation, e.dst}) ? 0.9 : 0.1);
    return out;
  };
  const auto rows = link_prediction(s, data.graph.schema(), oracle_scorer);
  ASSERT_EQ(rows.front().label, "all");
  EXPECT_EQ(rows.size(), 1 + data.graph.schema().relations().size());
  for (const auto& r : rows) {
    EXPECT_DOUBLE_EQ(r.metric("roc_auc").values.at(0), 1.0);
    EXPECT_DOUBLE_EQ(r.metric("pr_auc").values.at(0), 1.0);
    EXPECT_DOUBLE_EQ(r.metric("f1").values.at(0), 1.0);
  }
  LinkPredOptions strict;
  strict.min_relation_edges = 100000;
  EXPECT_EQ(link_prediction(s, data.graph.schema(), oracle_scorer, strict).size(), 1u);
}

TEST(Report, TsvAndJsonl) {
  ReportTable t;
  t.task = "demo";
  t.metric_names = {"roc_auc"};
  t.add("full", "roc_auc", 0.5);
  t.add("full", "roc_auc", 0.7);
  t.add("no_mlm", "roc_auc", 0.4);
  EXPECT_EQ(t.rows.size(), 2u);
  EXPECT_NE(t.tsv().find("full"), std::string::npos);
  EXPECT_NE(t.tsv().find("0.6"), std::string::npos);
  std::size_t lines = 0;
  for (char c : t.jsonl()) lines += c == '\n';
  EXPECT_EQ(lines, 2u);
  EXPECT_EQ(t.find("none"), nullptr);
}
