#pragma once

#include <vector>

#include "hierprompt/encoder.hpp"

namespace hierprompt {

// Per-feature z-scoring fitted on training rows; constant features map to 0.
struct Standardizer {
  RowVector mean;
  RowVector scale;
  void fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
};

struct SolverOptions {
  int max_iter = 200;
  double tol = 1e-6;  // stop once the gradient norm falls below this
};

// One-vs-rest linear classifier with L2-regularized squared hinge loss,
// trained by Nesterov-accelerated gradient descent:
//   (1/n) sum_i sum_c max(0, 1 - y_ic (x_i w_c + b_c))^2 + lambda ||W||^2
class LinearOvR {
 public:
  void fit(const Matrix& x, const std::vector<int>& y, int num_classes, double lambda, const SolverOptions& opts = {});
  Matrix decision(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x) const;
  int iterations() const { return iterations_; }

 private:
  Matrix w_;  // d x C
  RowVector b_;
  int iterations_ = 0;
};

// L2-regularized logistic regression (labels 0/1), same solver.
class LogisticProbe {
 public:
  void fit(const Matrix& x, const std::vector<int>& y, double lambda, const SolverOptions& opts = {500, 1e-6});
  std::vector<double> predict_proba(const Matrix& x) const;

 private:
  RowVector w_;
  double b_ = 0;
};

}  // namespace hierprompt
