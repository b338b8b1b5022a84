#include "rsi/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rsi {

namespace {

void require_dim(std::size_t dim) {
  if (dim == 0) {
    throw std::invalid_argument("sparse vector dimension must be positive");
  }
}

}  // namespace

SparseVector::SparseVector(std::size_t dim) : dim_(dim) { require_dim(dim); }

SparseVector::SparseVector(std::size_t dim, std::vector<index_type> indices,
                           std::vector<double> values)
    : dim_(dim) {
  require_dim(dim);
  if (indices.size() != values.size()) {
    throw std::invalid_argument("sparse vector index/value length mismatch");
  }
  indices_.reserve(indices.size());
  values_.reserve(values.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= dim) {
      std::ostringstream msg;
      msg << "sparse vector index " << indices[i] << " out of range for dimension " << dim;
      throw std::invalid_argument(msg.str());
    }
    if (i > 0 && indices[i] <= indices[i - 1]) {
      throw std::invalid_argument("sparse vector indices must be strictly increasing");
    }
    if (!std::isfinite(values[i])) {
      throw std::invalid_argument("sparse vector values must be finite");
    }
    if (values[i] != 0.0) {
      indices_.push_back(indices[i]);
      values_.push_back(values[i]);
    }
  }
}

SparseVector SparseVector::from_entries(std::size_t dim,
                                        std::vector<std::pair<index_type, double>> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<index_type> idx;
  std::vector<double> val;
  idx.reserve(entries.size());
  val.reserve(entries.size());
  for (const auto& [i, v] : entries) {
    if (!idx.empty() && idx.back() == i) {
      throw std::invalid_argument("duplicate index in sparse vector entries");
    }
    idx.push_back(i);
    val.push_back(v);
  }
  return SparseVector(dim, std::move(idx), std::move(val));
}

SparseVector SparseVector::from_dense(std::span<const double> dense) {
  std::vector<index_type> idx;
  std::vector<double> val;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) {
      idx.push_back(i);
      val.push_back(dense[i]);
    }
  }
  return SparseVector(dense.size(), std::move(idx), std::move(val));
}

double SparseVector::at(index_type index) const {
  auto it = std::lower_bound(indices_.begin(), indices_.end(), index);
  if (it == indices_.end() || *it != index) {
    return 0.0;
  }
  return values_[static_cast<std::size_t>(it - indices_.begin())];
}

std::vector<double> SparseVector::to_dense() const {
  std::vector<double> out(dim_, 0.0);
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    out[indices_[i]] = values_[i];
  }
  return out;
}

SparseVector SparseVector::scaled(double factor) const {
  std::vector<double> val(values_);
  for (double& v : val) {
    v *= factor;
  }
  return SparseVector(dim_, indices_, std::move(val));
}

double col_norm1(const SparseVector& x) {
  double sum = 0.0;
  for (double v : x.values()) {
    sum += std::abs(v);
  }
  return sum;
}

double norm2(const SparseVector& x) {
  double sum = 0.0;
  for (double v : x.values()) {
    sum += v * v;
  }
  return std::sqrt(sum);
}

double dot(const SparseVector& x, const SparseVector& y) {
  if (x.dim() != y.dim()) {
    throw std::invalid_argument("dot: dimension mismatch");
  }
  auto xi = x.indices();
  auto yi = y.indices();
  auto xv = x.values();
  auto yv = y.values();
  double sum = 0.0;
  std::size_t a = 0;
  std::size_t b = 0;
  while (a < xi.size() && b < yi.size()) {
    if (xi[a] < yi[b]) {
      ++a;
    } else if (yi[b] < xi[a]) {
      ++b;
    } else {
      sum += xv[a] * yv[b];
      ++a;
      ++b;
    }
  }
  return sum;
}

SparseAccumulator::SparseAccumulator(std::size_t dim) : dense_(dim, 0.0), touched_(dim, 0) {
  require_dim(dim);
}

void SparseAccumulator::add(SparseVector::index_type index, double value) {
  if (!touched_[index]) {
    touched_[index] = 1;
    slots_.push_back(index);
  }
  dense_[index] += value;
}

void SparseAccumulator::add_scaled(const SparseVector& x, double factor) {
  if (x.dim() != dim()) {
    throw std::invalid_argument("accumulator: dimension mismatch");
  }
  auto idx = x.indices();
  auto val = x.values();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    add(idx[i], factor * val[i]);
  }
}

SparseVector SparseAccumulator::take() {
  std::sort(slots_.begin(), slots_.end());
  std::vector<SparseVector::index_type> idx;
  std::vector<double> val;
  idx.reserve(slots_.size());
  val.reserve(slots_.size());
  for (auto slot : slots_) {
    if (dense_[slot] != 0.0) {
      idx.push_back(slot);
      val.push_back(dense_[slot]);
    }
    dense_[slot] = 0.0;
    touched_[slot] = 0;
  }
  slots_.clear();
  return SparseVector(dim(), std::move(idx), std::move(val));
}

SparseVector linear_combination(std::span<const SparseVector> columns,
                                std::span<const double> coefficients) {
  if (columns.empty() || columns.size() != coefficients.size()) {
    throw std::invalid_argument("linear_combination: need one coefficient per column");
  }
  SparseAccumulator acc(columns.front().dim());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (coefficients[j] != 0.0) {
      acc.add_scaled(columns[j], coefficients[j]);
    }
  }
  return acc.take();
}

SparseColumnMatrix::SparseColumnMatrix(std::size_t rows, std::size_t cols,
                                       std::vector<SparseVector> columns, bool symmetric)
    : rows_(rows), columns_(std::move(columns)), symmetric_(symmetric) {
  if (rows == 0 || cols == 0) {
    throw std::invalid_argument("sparse matrix dimensions must be positive");
  }
  if (columns_.size() != cols) {
    throw std::invalid_argument("sparse matrix column count mismatch");
  }
  for (const auto& c : columns_) {
    if (c.dim() != rows) {
      throw std::invalid_argument("sparse matrix column dimension mismatch");
    }
  }
  if (symmetric_ && !is_symmetric()) {
    throw std::invalid_argument("sparse matrix flagged symmetric but entries are not");
  }
}

SparseColumnMatrix SparseColumnMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                                     std::vector<Triplet> triplets,
                                                     bool symmetric) {
  if (rows == 0 || cols == 0) {
    throw std::invalid_argument("sparse matrix dimensions must be positive");
  }
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.col != b.col ? a.col < b.col : a.row < b.row;
  });
  std::vector<std::vector<SparseVector::index_type>> idx(cols);
  std::vector<std::vector<double>> val(cols);
  for (std::size_t t = 0; t < triplets.size(); ++t) {
    const auto& e = triplets[t];
    if (e.row >= rows || e.col >= cols) {
      throw std::invalid_argument("triplet out of range");
    }
    if (t > 0 && triplets[t - 1].row == e.row && triplets[t - 1].col == e.col) {
      std::ostringstream msg;
      msg << "duplicate matrix entry (" << e.row << ", " << e.col << ")";
      throw std::invalid_argument(msg.str());
    }
    idx[e.col].push_back(e.row);
    val[e.col].push_back(e.value);
  }
  std::vector<SparseVector> columns;
  columns.reserve(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    columns.emplace_back(rows, std::move(idx[j]), std::move(val[j]));
  }
  return SparseColumnMatrix(rows, cols, std::move(columns), symmetric);
}

SparseColumnMatrix SparseColumnMatrix::identity(std::size_t n) {
  std::vector<SparseVector> columns;
  columns.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    columns.emplace_back(n, std::vector<SparseVector::index_type>{j}, std::vector<double>{1.0});
  }
  return SparseColumnMatrix(n, n, std::move(columns), true);
}

SparseColumnMatrix SparseColumnMatrix::from_dense(const DenseMatrix& dense, bool symmetric) {
  std::vector<SparseVector> columns;
  columns.reserve(static_cast<std::size_t>(dense.cols()));
  std::vector<double> col(static_cast<std::size_t>(dense.rows()));
  for (Eigen::Index j = 0; j < dense.cols(); ++j) {
    for (Eigen::Index i = 0; i < dense.rows(); ++i) {
      col[static_cast<std::size_t>(i)] = dense(i, j);
    }
    columns.push_back(SparseVector::from_dense(col));
  }
  return SparseColumnMatrix(static_cast<std::size_t>(dense.rows()),
                            static_cast<std::size_t>(dense.cols()), std::move(columns), symmetric);
}

std::size_t SparseColumnMatrix::nnz() const noexcept {
  std::size_t total = 0;
  for (const auto& c : columns_) {
    total += c.nnz();
  }
  return total;
}

std::size_t SparseColumnMatrix::max_column_nnz() const noexcept {
  std::size_t best = 0;
  for (const auto& c : columns_) {
    best = std::max(best, c.nnz());
  }
  return best;
}

double SparseColumnMatrix::at(std::size_t row, std::size_t col) const {
  return columns_.at(col).at(row);
}

std::vector<double> SparseColumnMatrix::diagonal() const {
  std::size_t n = std::min(rows_, columns_.size());
  std::vector<double> diag(n);
  for (std::size_t j = 0; j < n; ++j) {
    diag[j] = columns_[j].at(j);
  }
  return diag;
}

std::vector<Triplet> SparseColumnMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    auto idx = columns_[j].indices();
    auto val = columns_[j].values();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.push_back({idx[i], j, val[i]});
    }
  }
  return out;
}

DenseMatrix SparseColumnMatrix::to_dense() const {
  DenseMatrix out = DenseMatrix::Zero(static_cast<Eigen::Index>(rows_),
                                      static_cast<Eigen::Index>(columns_.size()));
  for (const auto& t : triplets()) {
    out(static_cast<Eigen::Index>(t.row), static_cast<Eigen::Index>(t.col)) = t.value;
  }
  return out;
}

bool SparseColumnMatrix::is_symmetric() const {
  if (!square()) {
    return false;
  }
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    auto idx = columns_[j].indices();
    auto val = columns_[j].values();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (columns_[idx[i]].at(j) != val[i]) {
        return false;
      }
    }
  }
  return true;
}

SparseVector spmv(const SparseColumnMatrix& a, const SparseVector& x) {
  SparseAccumulator workspace(a.rows());
  return spmv(a, x, workspace);
}

SparseVector spmv(const SparseColumnMatrix& a, const SparseVector& x,
                  SparseAccumulator& workspace) {
  if (a.cols() != x.dim()) {
    std::ostringstream msg;
    msg << "spmv: matrix has " << a.cols() << " columns but vector has dimension " << x.dim();
    throw std::invalid_argument(msg.str());
  }
  if (workspace.dim() != a.rows()) {
    throw std::invalid_argument("spmv: workspace dimension mismatch");
  }
  auto idx = x.indices();
  auto val = x.values();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    workspace.add_scaled(a.column(idx[i]), val[i]);
  }
  return workspace.take();
}

Eigen::VectorXd project(const DenseMatrix& adjoint, const SparseVector& x) {
  if (static_cast<std::size_t>(adjoint.cols()) != x.dim()) {
    std::ostringstream msg;
    msg << "project: adjoint has " << adjoint.cols() << " columns but vector has dimension "
        << x.dim();
    throw std::invalid_argument(msg.str());
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(adjoint.rows());
  auto idx = x.indices();
  auto val = x.values();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out += val[i] * adjoint.col(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

SparseColumnMatrix shift_scale(const SparseColumnMatrix& h, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw std::invalid_argument("shift_scale: eps must be positive and finite");
  }
  if (!h.square()) {
    throw std::invalid_argument("shift_scale: matrix must be square");
  }
  const std::size_t n = h.rows();
  std::vector<SparseVector> columns;
  columns.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& col = h.column(j);
    auto idx = col.indices();
    auto val = col.values();
    std::vector<SparseVector::index_type> out_idx;
    std::vector<double> out_val;
    out_idx.reserve(idx.size() + 1);
    out_val.reserve(idx.size() + 1);
    bool diagonal_done = false;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (!diagonal_done && idx[i] >= j) {
        if (idx[i] == j) {
          out_idx.push_back(j);
          out_val.push_back(1.0 - eps * val[i]);
          diagonal_done = true;
          continue;
        }
        out_idx.push_back(j);
        out_val.push_back(1.0);
        diagonal_done = true;
      }
      out_idx.push_back(idx[i]);
      out_val.push_back(-eps * val[i]);
    }
    if (!diagonal_done) {
      out_idx.push_back(j);
      out_val.push_back(1.0);
    }
    columns.emplace_back(n, std::move(out_idx), std::move(out_val));
  }
  return SparseColumnMatrix(n, n, std::move(columns), h.symmetric());
}

}  // namespace rsi
