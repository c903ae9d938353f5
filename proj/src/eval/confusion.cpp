#include "vepm/eval/confusion.hpp"

#include <algorithm>
#include <stdexcept>

#include <Eigen/Dense>

#include "vepm/graph/kfold.hpp"

namespace vepm::eval {

namespace {

Eigen::MatrixXd with_intercept(const Matrix& x) {
  Eigen::MatrixXd out(x.rows(), x.cols() + 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j);
    out(i, x.cols()) = 1.0;
  }
  return out;
}

Matrix take_rows(const Matrix& x, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < x.cols(); ++j) out(r, j) = x(rows[r], j);
  return out;
}

}  // namespace

std::vector<int> ridge_predict(const Matrix& train_x, const std::vector<int>& train_y, const Matrix& test_x,
                               std::size_t classes, double ridge) {
  const Eigen::MatrixXd x = with_intercept(train_x);
  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(x.rows(), static_cast<Eigen::Index>(classes), -1.0);
  for (std::size_t i = 0; i < train_y.size(); ++i) y(static_cast<Eigen::Index>(i), train_y[i]) = 1.0;
  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += ridge;
  const Eigen::MatrixXd w = gram.ldlt().solve(x.transpose() * y);
  const Eigen::MatrixXd scores = with_intercept(test_x) * w;
  std::vector<int> pred(test_x.rows());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(i, c) > scores(i, best)) best = c;
    pred[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return pred;
}

ConfusionResult community_confusion_matrices(const std::vector<Matrix>& embeddings, const std::vector<int>& labels,
                                             std::size_t folds, std::uint64_t seed, double ridge) {
  if (labels.empty()) throw std::invalid_argument("community_confusion_matrices: no labels");
  const std::size_t classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  ConfusionResult result;
  std::vector<std::size_t> counts(classes, 0);
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  for (std::size_t c = 0; c < classes; ++c)
    if (counts[c] < folds)
      result.warnings.push_back("class " + std::to_string(c) + " has " + std::to_string(counts[c]) +
                                " instances, fewer than the fold count");
  const auto split = stratified_kfold_split(labels, folds, seed);
  for (const Matrix& h : embeddings) {
    if (h.rows() != labels.size()) throw std::invalid_argument("embedding row count differs from labels");
    Matrix cm(classes, classes);
    for (const auto& f : split) {
      std::vector<int> ytr;
      for (std::size_t i : f.train) ytr.push_back(labels[i]);
      const auto pred = ridge_predict(take_rows(h, f.train), ytr, take_rows(h, f.test), classes, ridge);
      for (std::size_t t = 0; t < f.test.size(); ++t)
        cm(static_cast<std::size_t>(labels[f.test[t]]), static_cast<std::size_t>(pred[t])) += 1.0;
    }
    for (std::size_t r = 0; r < classes; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < classes; ++c) s += cm(r, c);
      if (s > 0.0)
        for (std::size_t c = 0; c < classes; ++c) cm(r, c) /= s;
    }
    result.matrices.push_back(std::move(cm));
  }
  return result;
}

}  // namespace vepm::eval
