#include "hierprompt/classifier.hpp"

#include <cmath>

namespace hierprompt {

void Standardizer::fit(const Matrix& x) {
  if (x.rows() == 0) throw_data("cannot standardize an empty matrix");
  mean = x.colwise().mean();
  scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - mean(j)).square().mean();
    scale(j) = var > 1e-24 ? 1.0 / std::sqrt(var) : 0.0;
  }
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) throw_data("standardizer dimension mismatch");
  return (x.rowwise() - mean).array().rowwise() * scale.array();
}

namespace {

// Largest squared singular value of [x 1] by power iteration.
double lipschitz_sq(const Matrix& x) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(x.cols() + 1) / std::sqrt(static_cast<double>(x.cols() + 1));
  double lambda = 0;
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd xv = x * v.head(x.cols()) + Eigen::VectorXd::Constant(x.rows(), v(x.cols()));
    Eigen::VectorXd w(x.cols() + 1);
    w.head(x.cols()) = x.transpose() * xv;
    w(x.cols()) = xv.sum();
    const double norm = w.norm();
    if (norm == 0) return 0;
    const double next = v.dot(w);
    v = w / norm;
    if (std::abs(next - lambda) <= 1e-10 * std::abs(next)) return next;
    lambda = next;
  }
  return lambda * 1.01;
}

// Nesterov accelerated gradient descent on a smooth convex objective over
// (W, b). grad(W, b, gW, gb) fills the gradient.
template <class Grad>
int nesterov(Matrix& w, RowVector& b, double step, const SolverOptions& opts, Grad&& grad) {
  Matrix w_prev = w, yw = w, gw(w.rows(), w.cols());
  RowVector b_prev = b, yb = b, gb(b.size());
  double t = 1.0;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    grad(yw, yb, gw, gb);
    if (std::sqrt(gw.squaredNorm() + gb.squaredNorm()) < opts.tol) break;
    w_prev = w;
    b_prev = b;
    w = yw - step * gw;
    b = yb - step * gb;
    const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
    const double mom = (t - 1.0) / t_next;
    yw = w + mom * (w - w_prev);
    yb = b + mom * (b - b_prev);
    t = t_next;
  }
  return it;
}

}  // namespace

void LinearOvR::fit(const Matrix& x, const std::vector<int>& y, int num_classes, double lambda,
                    const SolverOptions& opts) {
  const auto n = x.rows();
  if (n == 0 || static_cast<std::size_t>(n) != y.size()) throw_data("classifier: one label per row required");
  if (num_classes < 2) throw_data("classifier needs at least two classes");
  Matrix Y = Matrix::Constant(n, num_classes, -1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = y[static_cast<std::size_t>(i)];
    if (c < 0 || c >= num_classes) throw_data("classifier: label out of range");
    Y(i, c) = 1.0;
  }
  w_ = Matrix::Zero(x.cols(), num_classes);
  b_ = RowVector::Zero(num_classes);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double L = 2.0 * inv_n * lipschitz_sq(x) + 2.0 * lambda;
  iterations_ = nesterov(w_, b_, 1.0 / L, opts, [&](const Matrix& w, const RowVector& b, Matrix& gw, RowVector& gb) {
    Matrix scores = x * w;
    scores.rowwise() += b;
    // d/ds of max(0, 1 - y s)^2 = -2 y max(0, 1 - y s)
    const Matrix slack = (1.0 - (Y.array() * scores.array())).max(0.0).matrix();
    const Matrix ds = (-2.0 * inv_n) * (Y.array() * slack.array()).matrix();
    gw.noalias() = x.transpose() * ds;
    gw += 2.0 * lambda * w;
    gb = ds.colwise().sum();
  });
}

Matrix LinearOvR::decision(const Matrix& x) const {
  Matrix s = x * w_;
  s.rowwise() += b_;
  return s;
}

std::vector<int> LinearOvR::predict(const Matrix& x) const {
  const Matrix s = decision(x);
  std::vector<int> out(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index best;
    s.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

void LogisticProbe::fit(const Matrix& x, const std::vector<int>& y, double lambda, const SolverOptions& opts) {
  const auto n = x.rows();
  if (n == 0 || static_cast<std::size_t>(n) != y.size()) throw_data("probe: one label per row required");
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t(i) = y[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  Matrix w = Matrix::Zero(x.cols(), 1);
  RowVector b = RowVector::Zero(1);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double L = 0.25 * inv_n * lipschitz_sq(x) + 2.0 * lambda;
  nesterov(w, b, 1.0 / L, opts, [&](const Matrix& cw, const RowVector& cb, Matrix& gw, RowVector& gb) {
    Eigen::VectorXd z = x * cw.col(0);
    z.array() += cb(0);
    const Eigen::VectorXd r = (z.unaryExpr([](double v) { return sigmoid(v); }) - t) * inv_n;
    gw.col(0) = x.transpose() * r + 2.0 * lambda * cw.col(0);
    gb(0) = r.sum();
  });
  w_ = w.col(0).transpose();
  b_ = b(0);
}

std::vector<double> LogisticProbe::predict_proba(const Matrix& x) const {
  if (x.cols() != w_.size()) throw_data("probe dimension mismatch");
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = sigmoid(x.row(i).dot(w_) + b_);
  return out;
}

}  // namespace hierprompt
