#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vepm/core/matrix.hpp"

namespace vepm {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix. Column indices within a row are sorted and
/// unique; construction rejects duplicate coordinates.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t n_rows, std::size_t n_cols) : n_rows_(n_rows), n_cols_(n_cols), row_ptr_(n_rows + 1, 0) {}

  /// Throws std::invalid_argument on out-of-range or duplicate coordinates.
  static SparseMatrix from_triplets(std::size_t n_rows, std::size_t n_cols, std::vector<Triplet> entries);

  static SparseMatrix identity(std::size_t n);

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return n_cols_; }
  std::size_t nnz() const noexcept { return col_idx_.size(); }

  std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::size_t> col_idx() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<const std::size_t> row_cols(std::size_t r) const {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  /// Value at (r, c), zero when absent.
  double at(std::size_t r, std::size_t c) const;
  bool contains(std::size_t r, std::size_t c) const;

  std::vector<Triplet> triplets() const;
  SparseMatrix transpose() const;
  /// Same sparsity pattern, new values (in CSR order).
  SparseMatrix with_values(std::vector<double> values) const;

  bool is_symmetric(double tol = 0.0) const;
  bool has_zero_diagonal() const;

  /// out = this * dense; out is resized.
  void multiply(const Matrix& dense, Matrix& out) const;
  Matrix multiply(const Matrix& dense) const;
  Matrix to_dense() const;

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

}  // namespace vepm
