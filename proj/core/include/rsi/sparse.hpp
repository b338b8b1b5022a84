#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rsi {

/// Row-major dense storage for trial bases and the small k x k products.
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/**
 * @brief Sparse vector stored as strictly increasing (index, value) pairs.
 *
 * Construction validates the layout, drops explicit zeros and rejects
 * non-finite values, so every instance satisfies the invariants and the
 * nonzero count is unambiguous.
 */
class SparseVector {
public:
  using index_type = std::size_t;

  SparseVector() = default;
  explicit SparseVector(std::size_t dim);
  SparseVector(std::size_t dim, std::vector<index_type> indices, std::vector<double> values);

  /// Builds from unordered pairs; duplicate indices are an error.
  static SparseVector from_entries(std::size_t dim,
                                   std::vector<std::pair<index_type, double>> entries);
  static SparseVector from_dense(std::span<const double> dense);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t nnz() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }

  std::span<const index_type> indices() const noexcept { return indices_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Value at a global index (zero when absent).
  double at(index_type index) const;

  std::vector<double> to_dense() const;
  SparseVector scaled(double factor) const;

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

private:
  std::size_t dim_ = 0;
  std::vector<index_type> indices_;
  std::vector<double> values_;
};

double col_norm1(const SparseVector& x);
double norm2(const SparseVector& x);
double dot(const SparseVector& x, const SparseVector& y);

/**
 * @brief Scatter/gather workspace for building sparse results.
 *
 * Holds a dense buffer of length dim plus the list of touched slots, so a
 * product costs time proportional to the number of contributions rather
 * than to dim. Not thread-safe; use one per thread.
 */
class SparseAccumulator {
public:
  SparseAccumulator() = default;  // placeholder; assign a sized one before use
  explicit SparseAccumulator(std::size_t dim);

  std::size_t dim() const noexcept { return dense_.size(); }
  void add(SparseVector::index_type index, double value);
  void add_scaled(const SparseVector& x, double factor);

  /// Emits the accumulated vector (sorted, zeros dropped) and resets.
  SparseVector take();

private:
  std::vector<double> dense_;
  std::vector<char> touched_;
  std::vector<SparseVector::index_type> slots_;
};

/// sum_j coefficients[j] * columns[j]; all columns must share a dimension.
SparseVector linear_combination(std::span<const SparseVector> columns,
                                std::span<const double> coefficients);

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/**
 * @brief Column-compressed sparse matrix, one SparseVector per column.
 *
 * The symmetric flag is a promise checked at construction: when set the
 * stored entries must be exactly symmetric.
 */
class SparseColumnMatrix {
public:
  SparseColumnMatrix() = default;
  SparseColumnMatrix(std::size_t rows, std::size_t cols, std::vector<SparseVector> columns,
                     bool symmetric = false);

  /// Duplicate (row, col) pairs are rejected; zeros are dropped.
  static SparseColumnMatrix from_triplets(std::size_t rows, std::size_t cols,
                                          std::vector<Triplet> triplets, bool symmetric = false);
  static SparseColumnMatrix identity(std::size_t n);
  static SparseColumnMatrix from_dense(const DenseMatrix& dense, bool symmetric = false);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return columns_.size(); }
  bool symmetric() const noexcept { return symmetric_; }
  bool square() const noexcept { return rows_ == columns_.size(); }
  std::size_t nnz() const noexcept;
  std::size_t max_column_nnz() const noexcept;

  const SparseVector& column(std::size_t j) const { return columns_.at(j); }
  std::span<const SparseVector> columns() const noexcept { return columns_; }

  double at(std::size_t row, std::size_t col) const;
  std::vector<double> diagonal() const;
  std::vector<Triplet> triplets() const;
  DenseMatrix to_dense() const;

  /// Exact entrywise symmetry test.
  bool is_symmetric() const;

private:
  std::size_t rows_ = 0;
  std::vector<SparseVector> columns_;
  bool symmetric_ = false;
};

SparseVector spmv(const SparseColumnMatrix& a, const SparseVector& x);
SparseVector spmv(const SparseColumnMatrix& a, const SparseVector& x, SparseAccumulator& workspace);

/// adjoint * x for a k x n dense adjoint (rows are the conjugated basis vectors).
Eigen::VectorXd project(const DenseMatrix& adjoint, const SparseVector& x);

/// A = I - eps * H with every diagonal slot materialized.
SparseColumnMatrix shift_scale(const SparseColumnMatrix& h, double eps);

}  // namespace rsi
