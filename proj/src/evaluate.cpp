#include "hierprompt/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "hierprompt/metrics.hpp"
#include "hierprompt/pretrain.hpp"

namespace hierprompt {

std::string LinkSplit::hash() const {
  Fnv64 h;
  for (const auto* list : {&observed, &train_pos, &train_neg, &test_pos, &test_neg}) {
    h.update_pod(static_cast<std::uint64_t>(list->size()));
    for (const auto& e : *list) h.update_pod(e.src).update_pod(e.dst).update_pod(e.relation);
  }
  return h.hex();
}

LinkSplit split_links(const HtrnGraph& full, double train_frac, double test_frac, std::uint64_t seed) {
  if (train_frac < 0 || test_frac <= 0 || train_frac + test_frac >= 1.0)
    throw_config("link split fractions must be positive and sum below 1");
  std::vector<std::size_t> order(full.num_edges());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(mix_seed(seed, "link-split"));
  shuffle(order, rng);
  const auto n = order.size();
  const auto n_test = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(n)));
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  if (n_test == 0) throw_data("graph too small for a link-prediction split");
  std::vector<char> role(n, 0);  // 0 observed, 1 train, 2 test
  for (std::size_t i = 0; i < n_test; ++i) role[order[i]] = 2;
  for (std::size_t i = n_test; i < n_test + n_train; ++i) role[order[i]] = 1;

  LinkSplit s;
  const auto& edges = full.edges();
  for (std::size_t i = 0; i < n; ++i) {
    if (role[i] == 0) s.observed.push_back(edges[i]);
    else if (role[i] == 1) s.train_pos.push_back(edges[i]);
    else s.test_pos.push_back(edges[i]);
  }
  Rng neg_rng(mix_seed(seed, "link-negatives"));
  auto negatives = [&](const std::vector<Edge>& pos, std::vector<Edge>& out) {
    for (const auto& e : pos) {
      const auto v = corrupt_tail(full, e.src, e.relation, neg_rng);
      if (!v) throw_data("no valid negative tail for a held-out edge");
      out.push_back({e.src, *v, e.relation});
    }
  };
  negatives(s.train_pos, s.train_neg);
  negatives(s.test_pos, s.test_neg);
  return s;
}

NodeSplit split_nodes(const std::vector<int>& labels, int num_classes, double train_frac, double val_frac,
                      std::uint64_t seed) {
  if (train_frac <= 0 || val_frac < 0 || train_frac + val_frac >= 1.0)
    throw_config("node split fractions must be positive and sum below 1");
  const std::size_t n = labels.size();
  std::set<int> present(labels.begin(), labels.end());
  Rng rng(mix_seed(seed, "node-split"));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle(order, rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n)));
    NodeSplit s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    std::set<int> seen;
    for (auto i : s.train) seen.insert(labels[i]);
    if (seen == present && !s.test.empty()) return s;
  }
  (void)num_classes;
  throw_data("could not draw a node split with every class in train");
}

const MetricValues& MetricRow::metric(std::string_view name) const {
  for (const auto& m : metrics)
    if (m.name == name) return m;
  throw_data("row " + label + " has no metric " + std::string(name));
}

MetricValues& MetricRow::metric(std::string_view name) {
  for (auto& m : metrics)
    if (m.name == name) return m;
  metrics.push_back({std::string(name), {}});
  return metrics.back();
}

MetricRow& ReportTable::row(std::string_view label) {
  for (auto& r : rows)
    if (r.label == label) return r;
  rows.push_back({std::string(label), {}});
  return rows.back();
}

const MetricRow* ReportTable::find(std::string_view label) const {
  for (const auto& r : rows)
    if (r.label == label) return &r;
  return nullptr;
}

void ReportTable::add(std::string_view label, std::string_view metric, double value) {
  row(label).metric(metric).values.push_back(value);
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string ReportTable::tsv() const {
  std::string out = "row";
  for (const auto& m : metric_names) out += "\t" + m + "\t" + m + "_std";
  out += "\n";
  for (const auto& r : rows) {
    out += r.label;
    for (const auto& m : metric_names) {
      const MetricValues* mv = nullptr;
      for (const auto& x : r.metrics)
        if (x.name == m) mv = &x;
      if (mv == nullptr || mv->values.empty()) {
        out += "\t-\t-";
      } else {
        out += "\t" + fmt(mean(mv->values)) + "\t" + fmt(stddev(mv->values));
      }
    }
    out += "\n";
  }
  return out;
}

std::string ReportTable::jsonl() const {
  std::string out;
  for (const auto& r : rows) {
    ordered_json j;
    j["task"] = task;
    j["row"] = r.label;
    ordered_json metrics = ordered_json::object();
    for (const auto& m : r.metrics) {
      ordered_json mj;
      mj["mean"] = mean(m.values);
      mj["std"] = stddev(m.values);
      mj["values"] = m.values;
      metrics[m.name] = mj;
    }
    j["metrics"] = metrics;
    out += j.dump() + "\n";
  }
  return out;
}

namespace {

Matrix take_rows(const Matrix& x, const std::vector<std::size_t>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

std::vector<int> take(const std::vector<int>& y, const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  for (auto i : idx) out.push_back(y[i]);
  return out;
}

}  // namespace

MetricRow node_classification(const Matrix& embeddings, const std::vector<int>& labels, int num_classes,
                              const NodeClsOptions& options, std::uint64_t seed, std::string label) {
  if (static_cast<std::size_t>(embeddings.rows()) != labels.size()) throw_data("one embedding per labeled node required");
  if (options.lambdas.empty()) throw_config("node classification needs at least one lambda");
  std::vector<double> micro, macro;
  for (std::size_t rep = 0; rep < options.repeats; ++rep) {
    const auto split = split_nodes(labels, num_classes, options.train_frac, options.val_frac, mix_seed(seed, {rep}));
    Standardizer z;
    z.fit(take_rows(embeddings, split.train));
    const Matrix xtr = z.apply(take_rows(embeddings, split.train));
    const Matrix xte = z.apply(take_rows(embeddings, split.test));
    const auto ytr = take(labels, split.train);
    const auto yte = take(labels, split.test);
    double best_lambda = options.lambdas.front();
    if (options.lambdas.size() > 1 && !split.val.empty()) {
      const Matrix xva = z.apply(take_rows(embeddings, split.val));
      const auto yva = take(labels, split.val);
      double best = -1;
      for (double lambda : options.lambdas) {
        LinearOvR clf;
        clf.fit(xtr, ytr, num_classes, lambda, options.solver);
        const double score = macro_f1(clf.predict(xva), yva);
        if (score > best) {
          best = score;
          best_lambda = lambda;
        }
      }
    }
    LinearOvR clf;
    clf.fit(xtr, ytr, num_classes, best_lambda, options.solver);
    const auto pred = clf.predict(xte);
    micro.push_back(micro_f1(pred, yte));
    macro.push_back(macro_f1(pred, yte));
  }
  return MetricRow{std::move(label), {{"micro_f1", micro}, {"macro_f1", macro}}};
}

std::vector<MetricRow> link_prediction(const LinkSplit& split, const Schema& schema, const EdgeScorer& scorer,
                                       const LinkPredOptions& options) {
  const auto pos = scorer(split.test_pos);
  const auto neg = scorer(split.test_neg);
  if (pos.size() != split.test_pos.size() || neg.size() != split.test_neg.size())
    throw_data("edge scorer returned the wrong number of scores");
  auto make_row = [&](std::string label, const std::vector<double>& p, const std::vector<double>& n) {
    MetricRow row{std::move(label), {}};
    row.metric("roc_auc").values.push_back(roc_auc(p, n));
    row.metric("pr_auc").values.push_back(pr_auc(p, n));
    row.metric("f1").values.push_back(f1_at_threshold(p, n, options.threshold));
    return row;
  };
  std::vector<MetricRow> rows;
  rows.push_back(make_row("all", pos, neg));
  for (RelationId r = 0; r < schema.relations().size(); ++r) {
    std::vector<double> p, n;
    for (std::size_t i = 0; i < pos.size(); ++i)
      if (split.test_pos[i].relation == r) p.push_back(pos[i]);
    for (std::size_t i = 0; i < neg.size(); ++i)
      if (split.test_neg[i].relation == r) n.push_back(neg[i]);
    const auto& name = schema.relation(r).name;
    if (p.size() < options.min_relation_edges || n.empty()) {
      log_warn("link prediction: relation " + name + " has " + std::to_string(p.size()) + " test edges; skipped");
      continue;
    }
    rows.push_back(make_row(name, p, n));
  }
  return rows;
}

}  // namespace hierprompt
