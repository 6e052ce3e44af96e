#include "hierprompt/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

#include "hierprompt/util.hpp"

namespace hierprompt {

namespace {

void require_scores(const std::vector<double>& pos, const std::vector<double>& neg) {
  if (pos.empty() || neg.empty()) throw_data("AUC is undefined without both positive and negative scores");
  for (const auto* v : {&pos, &neg})
    for (double s : *v)
      if (std::isnan(s)) throw_data("AUC input contains NaN");
}

}  // namespace

double roc_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  require_scores(pos, neg);
  std::vector<std::pair<double, int>> all;
  all.reserve(pos.size() + neg.size());
  for (double s : pos) all.emplace_back(s, 1);
  for (double s : neg) all.emplace_back(s, 0);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second) rank_sum += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(pos.size());
  const double nn = static_cast<double>(neg.size());
  return (rank_sum - np * (np + 1) / 2.0) / (np * nn);
}

double pr_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  require_scores(pos, neg);
  std::vector<std::pair<double, int>> all;
  for (double s : pos) all.emplace_back(s, 1);
  for (double s : neg) all.emplace_back(s, 0);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  const double total_pos = static_cast<double>(pos.size());
  double tp = 0, fp = 0, prev_recall = 0, ap = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? tp : fp) += 1;
      ++j;
    }
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double f1_score(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) throw_data("F1: predictions and labels differ in length");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == 1 && labels[i] == 1) ++tp;
    else if (predictions[i] == 1) ++fp;
    else if (labels[i] == 1) ++fn;
  }
  const double denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2 * tp / denom;
}

double f1_at_threshold(const std::vector<double>& pos, const std::vector<double>& neg, double threshold) {
  std::vector<int> pred, truth;
  for (double s : pos) {
    pred.push_back(s >= threshold);
    truth.push_back(1);
  }
  for (double s : neg) {
    pred.push_back(s >= threshold);
    truth.push_back(0);
  }
  return f1_score(pred, truth);
}

double micro_f1(const std::vector<int>& predictions, const std::vector<int>& truth) {
  if (predictions.size() != truth.size() || truth.empty()) throw_data("micro-F1 needs equal-length nonempty inputs");
  // Single-label: every error is one false positive and one false negative.
  double tp = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) tp += predictions[i] == truth[i];
  const double errors = static_cast<double>(truth.size()) - tp;
  return 2 * tp / (2 * tp + 2 * errors);
}

double macro_f1(const std::vector<int>& predictions, const std::vector<int>& truth) {
  if (predictions.size() != truth.size() || truth.empty()) throw_data("macro-F1 needs equal-length nonempty inputs");
  std::map<int, std::array<double, 3>> counts;  // tp, fp, fn
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predictions[i] == truth[i]) {
      counts[truth[i]][0] += 1;
    } else {
      counts[predictions[i]][1] += 1;
      counts[truth[i]][2] += 1;
    }
  }
  double sum = 0;
  for (const auto& [cls, c] : counts) {
    const double denom = 2 * c[0] + c[1] + c[2];
    sum += denom == 0 ? 0.0 : 2 * c[0] / denom;
  }
  return sum / static_cast<double>(counts.size());
}

double mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double stddev(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace hierprompt
