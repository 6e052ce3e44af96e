#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hierprompt/classifier.hpp"
#include "hierprompt/graph.hpp"

namespace hierprompt {

// Held-out edges for link prediction. Train and test positives are both
// hidden from the observed graph; every negative is a tail corruption that
// is a non-edge of the full graph.
struct LinkSplit {
  std::vector<Edge> observed;
  std::vector<Edge> train_pos, train_neg;
  std::vector<Edge> test_pos, test_neg;
  std::string hash() const;
};

LinkSplit split_links(const HtrnGraph& full, double train_frac, double test_frac, std::uint64_t seed);

struct NodeSplit {
  std::vector<std::size_t> train, val, test;  // indices into the labeled rows
};

// Shuffled split by ratio; resampled until every class occurs in train.
NodeSplit split_nodes(const std::vector<int>& labels, int num_classes, double train_frac, double val_frac,
                      std::uint64_t seed);

struct MetricValues {
  std::string name;
  std::vector<double> values;  // one per repeat / seed
};

struct MetricRow {
  std::string label;
  std::vector<MetricValues> metrics;
  const MetricValues& metric(std::string_view name) const;
  MetricValues& metric(std::string_view name);
};

// Tabular report; tsv() prints mean and std columns per metric, jsonl() one
// record per row with per-run values.
struct ReportTable {
  std::string task;
  std::vector<std::string> metric_names;
  std::vector<MetricRow> rows;

  MetricRow& row(std::string_view label);  // created on first use
  const MetricRow* find(std::string_view label) const;
  void add(std::string_view label, std::string_view metric, double value);
  std::string tsv() const;
  std::string jsonl() const;
};

struct NodeClsOptions {
  double train_frac = 0.7;
  double val_frac = 0.1;
  std::size_t repeats = 10;
  std::vector<double> lambdas = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  SolverOptions solver;
};

// Micro-F1 / Macro-F1 on the test split per repeat; lambda picked by
// validation Macro-F1. Features are standardized on the train split.
MetricRow node_classification(const Matrix& embeddings, const std::vector<int>& labels, int num_classes,
                              const NodeClsOptions& options, std::uint64_t seed, std::string label = "node_cls");

using EdgeScorer = std::function<std::vector<double>(const std::vector<Edge>&)>;

struct LinkPredOptions {
  double threshold = 0.5;
  std::size_t min_relation_edges = 5;
};

// Rows "all" plus one per relation with enough test edges; metrics roc_auc,
// pr_auc, f1.
std::vector<MetricRow> link_prediction(const LinkSplit& split, const Schema& schema, const EdgeScorer& scorer,
                                       const LinkPredOptions& options = {});

}  // namespace hierprompt
