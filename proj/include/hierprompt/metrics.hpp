#pragma once

#include <vector>

namespace hierprompt {

// Rank statistic; tied scores contribute one half. Throws if either set is empty.
double roc_auc(const std::vector<double>& pos, const std::vector<double>& neg);
// Average precision: sum over distinct thresholds (descending) of
// (recall_k - recall_{k-1}) * precision_k. Tied scores form one threshold.
double pr_auc(const std::vector<double>& pos, const std::vector<double>& neg);

// Binary F1 for the positive class 1; 0 when there are no true positives.
double f1_score(const std::vector<int>& predictions, const std::vector<int>& labels);
// Scores >= threshold are predicted positive.
double f1_at_threshold(const std::vector<double>& pos, const std::vector<double>& neg, double threshold = 0.5);

double micro_f1(const std::vector<int>& predictions, const std::vector<int>& truth);
// Unweighted mean of per-class F1 over every class seen in truth or predictions.
double macro_f1(const std::vector<int>& predictions, const std::vector<int>& truth);

double mean(const std::vector<double>& values);
// Sample standard deviation; 0 for fewer than two values.
double stddev(const std::vector<double>& values);

}  // namespace hierprompt
