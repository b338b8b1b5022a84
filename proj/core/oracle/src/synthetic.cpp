#include "rsi/oracle/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/QR>

#include "rsi/random.hpp"

namespace rsi::oracle {

namespace {

Eigen::MatrixXd near_identity_rotation(std::size_t dim, double mixing, RandomStream& rng) {
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      m(i, j) += mixing * rng.normal();
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (qr.matrixQR()(j, j) < 0.0) {
      q.col(j) *= -1.0;
    }
  }
  return q;
}

SyntheticMatrix diagonal_matrix(const SyntheticSpec& spec) {
  if (spec.diagonal.empty()) {
    throw std::invalid_argument("synthetic: diagonal spec needs at least one entry");
  }
  const std::size_t n = spec.diagonal.size();
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(spec.diagonal[i])) {
      throw std::invalid_argument("synthetic: non-finite diagonal entry");
    }
    t.push_back({i, i, spec.diagonal[i]});
  }
  SyntheticMatrix out;
  out.h = SparseColumnMatrix::from_triplets(n, n, std::move(t), true);
  out.diagonal_order.resize(n);
  std::iota(out.diagonal_order.begin(), out.diagonal_order.end(), std::size_t{0});
  std::stable_sort(out.diagonal_order.begin(), out.diagonal_order.end(),
                   [&](std::size_t a, std::size_t b) { return spec.diagonal[a] < spec.diagonal[b]; });
  for (auto i : out.diagonal_order) {
    out.energies.push_back(spec.diagonal[i]);
  }
  out.nnz_per_column = 1;
  return out;
}

}  // namespace

SyntheticMatrix synthesize_test_matrix(const SyntheticSpec& spec) {
  if (spec.kind == SyntheticSpec::Kind::diagonal) {
    return diagonal_matrix(spec);
  }
  const std::size_t factors = spec.dims.size();
  const std::size_t k = spec.k;
  if (factors == 0 || k < 1) {
    throw std::invalid_argument("synthetic: need at least one factor and k >= 1");
  }
  if (!(spec.gap_ratio > 0.0 && spec.gap_ratio < 1.0)) {
    throw std::invalid_argument("synthetic: gap_ratio must lie in (0, 1)");
  }
  if (!(spec.eps > 0.0) || !(spec.lowest_ratio >= 0.0 && spec.lowest_ratio < 1.0) ||
      !(spec.mixing >= 0.0)) {
    throw std::invalid_argument("synthetic: eps, lowest_ratio or mixing out of range");
  }
  if (spec.dims[0] < k) {
    throw std::invalid_argument("synthetic: first factor must have at least k levels");
  }
  for (std::size_t f = 1; f < factors; ++f) {
    if (spec.dims[f] < 2) {
      throw std::invalid_argument("synthetic: every factor needs at least two levels");
    }
  }

  // Levels: factor 0 holds 0, cluster, .., (k-1) cluster; every other level
  // sits in the bulk [base, base + width] with base one unit above the k-th
  // level. The lowest bulk level is exactly base and each factor's top bulk
  // level exactly base + width.
  if (!(spec.cluster > 0.0)) {
    throw std::invalid_argument("synthetic: cluster spacing must be positive");
  }
  const double kd = static_cast<double>(k);
  const double kth = (kd - 1.0) * spec.cluster;
  const double base = kth + 1.0;
  const double unit_slope = (1.0 - spec.gap_ratio) / (base - spec.gap_ratio * kth);
  if (!(1.0 - unit_slope * base > 0.0)) {
    throw std::invalid_argument("synthetic: lambda_{k+1} of A would not be positive");
  }
  const double top = (1.0 + spec.lowest_ratio * (1.0 - unit_slope * base)) / unit_slope;

  std::vector<std::size_t> bulk(factors);
  std::size_t with_bulk = 0;
  double fixed_top = 0.0;
  for (std::size_t f = 0; f < factors; ++f) {
    bulk[f] = f == 0 ? spec.dims[0] - k : spec.dims[f] - 1;
    if (bulk[f] > 0) {
      ++with_bulk;
    } else {
      fixed_top += kth;
    }
  }
  std::size_t min_owner = factors;
  for (std::size_t f = 0; f < factors; ++f) {
    if (bulk[f] >= 2) {
      min_owner = f;
      break;
    }
  }
  if (with_bulk == 0 || min_owner == factors) {
    throw std::invalid_argument("synthetic: dims leave no room for a spectral bulk");
  }
  const double width = (top - fixed_top) / static_cast<double>(with_bulk) - base;
  if (!(width > 0.0)) {
    throw std::invalid_argument(
        "synthetic: infeasible recipe (too many factors for the requested gap and range)");
  }

  const RandomStream root(spec.seed);
  SyntheticMatrix out;
  out.factor_levels.resize(factors);
  out.factor_vectors.resize(factors);
  std::vector<Eigen::MatrixXd> hf(factors);
  for (std::size_t f = 0; f < factors; ++f) {
    RandomStream rng = root.split(f);
    auto& levels = out.factor_levels[f];
    if (f == 0) {
      for (std::size_t j = 0; j < k; ++j) {
        levels.push_back(static_cast<double>(j) * spec.cluster);
      }
    } else {
      levels.push_back(0.0);
    }
    std::vector<double> r(bulk[f]);
    for (auto& v : r) {
      v = rng.uniform();
    }
    std::sort(r.begin(), r.end());
    if (!r.empty()) {
      r.back() = 1.0;
      if (f == min_owner) {
        r.front() = 0.0;
      }
    }
    for (double v : r) {
      levels.push_back(base + width * v);
    }
    RandomStream rot = root.split(1000 + f);
    out.factor_vectors[f] = near_identity_rotation(spec.dims[f], spec.mixing, rot);
    const auto& q = out.factor_vectors[f];
    Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(levels.data(),
                                                          static_cast<Eigen::Index>(levels.size()));
    Eigen::MatrixXd h = q * d.asDiagonal() * q.transpose();
    hf[f] = 0.5 * (h + h.transpose());
  }

  const double shift = spec.ground_energy;
  const double u = 1.0 - spec.eps * shift;
  if (!(u > 0.0)) {
    throw std::invalid_argument("synthetic: ground_energy makes lambda_1(A) non-positive");
  }
  const double scale = unit_slope * u / spec.eps;

  // Mixed-radix indexing with factor 0 most significant.
  std::size_t n = 1;
  for (auto d : spec.dims) {
    n *= d;
  }
  std::vector<std::size_t> stride(factors);
  {
    std::size_t s = 1;
    for (std::size_t f = factors; f-- > 0;) {
      stride[f] = s;
      s *= spec.dims[f];
    }
  }

  std::vector<SparseVector> columns;
  columns.reserve(n);
  std::vector<std::pair<SparseVector::index_type, double>> entries;
  std::vector<std::size_t> digit(factors);
  for (std::size_t col = 0; col < n; ++col) {
    entries.clear();
    double diag = 0.0;
    for (std::size_t f = 0; f < factors; ++f) {
      digit[f] = (col / stride[f]) % spec.dims[f];
    }
    for (std::size_t f = 0; f < factors; ++f) {
      const auto jf = static_cast<Eigen::Index>(digit[f]);
      diag += hf[f](jf, jf);
      for (std::size_t i = 0; i < spec.dims[f]; ++i) {
        if (i == digit[f]) {
          continue;
        }
        const std::size_t row = col - digit[f] * stride[f] + i * stride[f];
        entries.emplace_back(row, scale * hf[f](static_cast<Eigen::Index>(i), jf));
      }
    }
    entries.emplace_back(col, scale * diag + shift);
    columns.push_back(SparseVector::from_entries(n, entries));
  }
  out.h = SparseColumnMatrix(n, n, std::move(columns), true);
  out.nnz_per_column = out.h.max_column_nnz();

  // Spectrum: every tuple of levels, sorted by raw sum then by index.
  std::vector<double> raw(n);
  for (std::size_t col = 0; col < n; ++col) {
    double e = 0.0;
    for (std::size_t f = 0; f < factors; ++f) {
      e += out.factor_levels[f][(col / stride[f]) % spec.dims[f]];
    }
    raw[col] = e;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
  out.energies.reserve(n);
  out.level_tuples.reserve(n);
  for (auto col : order) {
    out.energies.push_back(scale * raw[col] + shift);
    std::vector<std::size_t> tuple(factors);
    for (std::size_t f = 0; f < factors; ++f) {
      tuple[f] = (col / stride[f]) % spec.dims[f];
    }
    out.level_tuples.push_back(std::move(tuple));
  }
  return out;
}

Eigen::MatrixXd SyntheticMatrix::lowest_eigenvectors(std::size_t count) const {
  const std::size_t n = h.rows();
  if (count > n) {
    throw std::invalid_argument("lowest_eigenvectors: count exceeds n");
  }
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(count));
  if (!diagonal_order.empty()) {
    for (std::size_t c = 0; c < count; ++c) {
      v(static_cast<Eigen::Index>(diagonal_order[c]), static_cast<Eigen::Index>(c)) = 1.0;
    }
    return v;
  }
  const std::size_t factors = factor_vectors.size();
  std::vector<std::size_t> dims(factors);
  for (std::size_t f = 0; f < factors; ++f) {
    dims[f] = static_cast<std::size_t>(factor_vectors[f].rows());
  }
  for (std::size_t c = 0; c < count; ++c) {
    const auto& tuple = level_tuples[c];
    for (std::size_t row = 0; row < n; ++row) {
      double prod = 1.0;
      std::size_t rem = row;
      for (std::size_t f = factors; f-- > 0;) {
        const std::size_t i = rem % dims[f];
        rem /= dims[f];
        prod *= factor_vectors[f](static_cast<Eigen::Index>(i),
                                  static_cast<Eigen::Index>(tuple[f]));
      }
      v(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c)) = prod;
    }
  }
  return v;
}

}  // namespace rsi::oracle
