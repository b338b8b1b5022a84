#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rsi/sparse.hpp"

namespace rsi::oracle {

/**
 * @brief Recipe for a sparse symmetric H with a known spectrum.
 *
 * kronecker: H = c * sum_f (I x .. x H_f x .. x I) + s I, where each small
 * factor H_f = Q_f diag(d_f) Q_f^T has a near-identity random orthogonal
 * Q_f (QR of I + mixing * G). The spectrum of the sum is every sum of one
 * factor eigenvalue per factor, so it is known exactly. The factor levels,
 * c and s are chosen so that for A = I - eps H:
 *   lambda_1(A) = 1 - eps * ground_energy,
 *   lambda_{k+1}(A) = gap_ratio * lambda_k(A),
 *   lambda_min(A) = -lowest_ratio * lambda_{k+1}(A).
 * The k lowest levels are spaced `cluster` apart and the first bulk level
 * sits one unit above the k-th, so `cluster` sets how tightly the target
 * eigenvalues bunch relative to the gap.
 *
 * diagonal: H = diag(diagonal) exactly.
 */
struct SyntheticSpec {
  enum class Kind { kronecker, diagonal };

  Kind kind = Kind::kronecker;
  std::vector<std::size_t> dims{10, 10, 10};
  std::size_t k = 5;
  double gap_ratio = 0.9;
  double eps = 1e-3;
  double mixing = 0.07;
  double cluster = 0.1;
  double lowest_ratio = 0.5;
  double ground_energy = -100.0;
  std::uint64_t seed = 1;
  std::vector<double> diagonal;
};

struct SyntheticMatrix {
  SparseColumnMatrix h;
  std::vector<double> energies;  // all eigenvalues of H, ascending
  std::size_t nnz_per_column = 0;

  /// The `count` lowest eigenvectors of H as dense n x count columns.
  Eigen::MatrixXd lowest_eigenvectors(std::size_t count) const;

  // Factor data for eigenvector reconstruction.
  std::vector<Eigen::MatrixXd> factor_vectors;
  std::vector<std::vector<double>> factor_levels;
  std::vector<std::vector<std::size_t>> level_tuples;  // ascending energy
  std::vector<std::size_t> diagonal_order;             // diagonal kind only
};

/// @throws std::invalid_argument when the recipe cannot meet its targets.
SyntheticMatrix synthesize_test_matrix(const SyntheticSpec& spec);

}  // namespace rsi::oracle
