#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vepm/core/matrix.hpp"

namespace vepm::eval {

struct ConfusionResult {
  /// One row-normalized (classes x classes) matrix per embedding: row = true
  /// class, column = predicted class.
  std::vector<Matrix> matrices;
  std::vector<std::string> warnings;
};

/// Cross-validated one-vs-rest ridge regression (with intercept) on each
/// embedding, pooled over stratified folds into a normalized confusion matrix.
ConfusionResult community_confusion_matrices(const std::vector<Matrix>& embeddings, const std::vector<int>& labels,
                                             std::size_t folds, std::uint64_t seed, double ridge = 1e-2);

/// One-vs-rest ridge fit on (x, labels) evaluated on `test`; returns predicted classes.
std::vector<int> ridge_predict(const Matrix& train_x, const std::vector<int>& train_y, const Matrix& test_x,
                               std::size_t classes, double ridge);

}  // namespace vepm::eval
