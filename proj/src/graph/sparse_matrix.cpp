#include "vepm/graph/sparse_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vepm {

SparseMatrix SparseMatrix::from_triplets(std::size_t n_rows, std::size_t n_cols, std::vector<Triplet> entries) {
  for (const auto& t : entries) {
    if (t.row >= n_rows || t.col >= n_cols)
      throw std::invalid_argument("SparseMatrix: entry (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                                  ") out of range for " + std::to_string(n_rows) + "x" + std::to_string(n_cols));
  }
  std::sort(entries.begin(), entries.end(),
            [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  SparseMatrix m(n_rows, n_cols);
  m.col_idx_.reserve(entries.size());
  m.values_.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (k > 0 && entries[k].row == entries[k - 1].row && entries[k].col == entries[k - 1].col)
      throw std::invalid_argument("SparseMatrix: duplicate entry (" + std::to_string(entries[k].row) + "," +
                                  std::to_string(entries[k].col) + ")");
    m.col_idx_.push_back(entries[k].col);
    m.values_.push_back(entries[k].value);
    ++m.row_ptr_[entries[k].row + 1];
  }
  for (std::size_t r = 0; r < n_rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<Triplet> t;
  t.reserve(n);
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(t));
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto cols = row_cols(r);
  auto it = std::lower_bound(cols.begin(), cols.end(), c);
  if (it == cols.end() || *it != c) return 0.0;
  return values_[row_ptr_[r] + static_cast<std::size_t>(it - cols.begin())];
}

bool SparseMatrix::contains(std::size_t r, std::size_t c) const {
  auto cols = row_cols(r);
  return std::binary_search(cols.begin(), cols.end(), c);
}

std::vector<Triplet> SparseMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (std::size_t r = 0; r < n_rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out.push_back({r, col_idx_[k], values_[k]});
  return out;
}

SparseMatrix SparseMatrix::transpose() const {
  auto t = triplets();
  for (auto& e : t) std::swap(e.row, e.col);
  return from_triplets(n_cols_, n_rows_, std::move(t));
}

SparseMatrix SparseMatrix::with_values(std::vector<double> values) const {
  if (values.size() != nnz()) throw std::invalid_argument("SparseMatrix::with_values: size mismatch");
  SparseMatrix m = *this;
  m.values_ = std::move(values);
  return m;
}

bool SparseMatrix::is_symmetric(double tol) const {
  if (n_rows_ != n_cols_) return false;
  for (std::size_t r = 0; r < n_rows_; ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const std::size_t c = col_idx_[k];
      if (!contains(c, r)) return false;
      if (std::abs(at(c, r) - values_[k]) > tol) return false;
    }
  }
  return true;
}

bool SparseMatrix::has_zero_diagonal() const {
  for (std::size_t r = 0; r < std::min(n_rows_, n_cols_); ++r)
    if (at(r, r) != 0.0) return false;
  return true;
}

void SparseMatrix::multiply(const Matrix& dense, Matrix& out) const {
  if (dense.rows() != n_cols_)
    throw ShapeError("SparseMatrix::multiply: " + std::to_string(n_rows_) + "x" + std::to_string(n_cols_) + " * " +
                     dense.shape_string());
  const std::size_t w = dense.cols();
  if (out.rows() != n_rows_ || out.cols() != w) out = Matrix(n_rows_, w);
  else out.fill(0.0);
  for (std::size_t r = 0; r < n_rows_; ++r) {
    double* o = out.data().data() + r * w;
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const double v = values_[k];
      const double* b = dense.data().data() + col_idx_[k] * w;
      for (std::size_t j = 0; j < w; ++j) o[j] += v * b[j];
    }
  }
}

Matrix SparseMatrix::multiply(const Matrix& dense) const {
  Matrix out;
  multiply(dense, out);
  return out;
}

Matrix SparseMatrix::to_dense() const {
  Matrix d(n_rows_, n_cols_);
  for (std::size_t r = 0; r < n_rows_; ++r)
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) d(r, col_idx_[k]) = values_[k];
  return d;
}

}  // namespace vepm
