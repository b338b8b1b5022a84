#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rsi/estimation.hpp"
#include "rsi/random.hpp"
#include "rsi/sharded.hpp"
#include "rsi/sparse.hpp"
#include "rsi/trajectory_log.hpp"

namespace rsi {

/**
 * @brief Fixed trial basis U and the precomputed A*U.
 *
 * Both are stored as k x n adjoints so that U* x and (A*U)* x are row dot
 * products against a sparse x.
 */
class TrialSubspace {
public:
  /// @throws std::invalid_argument on a dimension mismatch or a
  ///         numerically rank-deficient basis.
  TrialSubspace(const SparseColumnMatrix& a, DenseMatrix basis);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(basis_.rows()); }
  std::size_t k() const noexcept { return static_cast<std::size_t>(basis_.cols()); }

  const DenseMatrix& basis() const noexcept { return basis_; }    // n x k
  const DenseMatrix& adjoint() const noexcept { return adjoint_; }  // U*, k x n
  const DenseMatrix& image_adjoint() const noexcept { return image_adjoint_; }  // (A*U)*, k x n

private:
  DenseMatrix basis_;
  DenseMatrix adjoint_;
  DenseMatrix image_adjoint_;
};

/// Unit vectors at the k largest diagonal entries of A (ties by ascending
/// index). For A = I - eps H these are the k smallest diagonal entries of H.
DenseMatrix diagonal_trial_basis(const SparseColumnMatrix& a, std::size_t k);

struct IterateBlock {
  std::vector<SparseVector> columns;
  std::vector<double> norm_state;  // diagonal of N
  std::size_t iteration = 0;
};

struct GMatrix {
  enum class Kind { plain, orthogonalizing };

  Kind kind = Kind::plain;
  std::vector<double> n;
  std::vector<double> d;  // empty for plain
  DenseMatrix r;          // empty for plain

  /// Y G^{-1}, column by column.
  std::vector<SparseVector> apply_inverse(std::span<const SparseVector> y) const;

  /// G^{-1} as a dense k x k matrix.
  DenseMatrix inverse() const;
};

struct EngineConfig {
  std::size_t m = 1;
  double alpha = 0.5;
  std::size_t ortho_period = 1000;  // 0 disables orthogonalization
  std::size_t burn_in = 0;
  std::size_t total_iters = 0;
  std::uint64_t seed = 0;
  ShardLayout shards{};
  double singular_tol = 1e-12;  // relative, on singular values of S
};

/**
 * @brief Running sums of S and T after burn-in, plus the full in-memory log.
 *
 * Sums are accumulated in iteration order so that two runs with the same
 * log produce bit-identical averages.
 */
class TrajectoryAccumulator {
public:
  TrajectoryAccumulator(std::size_t k, std::size_t burn_in, bool keep_log = true);

  void record(std::size_t iteration, StepRecord record);

  std::size_t k() const noexcept { return k_; }
  std::size_t burn_in() const noexcept { return burn_in_; }
  std::size_t count() const noexcept { return count_; }
  std::size_t iterations() const noexcept { return iterations_; }

  const DenseMatrix& sum_s() const noexcept { return sum_s_; }
  const DenseMatrix& sum_t() const noexcept { return sum_t_; }
  DenseMatrix mean_s() const;
  DenseMatrix mean_t() const;

  const std::vector<StepRecord>& log() const noexcept { return log_; }

private:
  std::size_t k_;
  std::size_t burn_in_;
  bool keep_log_;
  std::size_t count_ = 0;
  std::size_t iterations_ = 0;
  DenseMatrix sum_s_;
  DenseMatrix sum_t_;
  std::vector<StepRecord> log_;
};

struct Trajectory {
  std::shared_ptr<const SparseColumnMatrix> matrix;
  std::shared_ptr<const TrialSubspace> trial;
  IterateBlock iterate;
  EngineConfig config;
  SparseAccumulator workspace;
};

/// N starts at the identity. X0 defaults to the columns of U.
/// @throws std::invalid_argument on inconsistent dimensions, a rank-deficient
///         U, a zero column in X0, or an invalid config.
Trajectory init_trajectory(std::shared_ptr<const SparseColumnMatrix> a, DenseMatrix basis,
                           std::optional<std::vector<SparseVector>> x0, EngineConfig config);

/// N_j = (curr_j / prev_j)^alpha * N_prev_j^(1 - alpha).
/// @throws DeadColumn on a zero current norm, std::invalid_argument otherwise.
std::vector<double> update_norm_state(std::span<const double> n_prev,
                                      std::span<const double> norms_curr,
                                      std::span<const double> norms_prev, double alpha);

GMatrix build_g_plain(std::span<const double> n);

/**
 * @brief G = N D R from a QR factorization of S.
 *
 * R has a positive diagonal; D_jj = |(Phi R^{-1})_j|_1 / |Phi_j|_1 so that
 * Phi (D R)^{-1} keeps the column l1 norms of Phi.
 *
 * @throws InsufficientSampling when S, with columns scaled to unit length,
 *         has a singular value ratio at or below singular_tol.
 */
GMatrix build_g_orthogonalizing(const DenseMatrix& s, std::span<const SparseVector> phi,
                                std::span<const double> n, double singular_tol = 1e-12);

/// Advances the trajectory by one iteration. Column j at iteration i draws
/// from root.split(i).split(j).
StepRecord step(Trajectory& state, const RandomStream& root);

struct RunResult {
  TrajectoryAccumulator accumulator;
  IterateBlock final_state;
  std::vector<double> min_singular_t;  // per iteration, T with unit columns
};

using StepObserver = std::function<void(std::size_t iteration, const StepRecord&)>;

/// Runs config.total_iters steps from the current state.
RunResult run(Trajectory& state, const StepObserver& observer = {}, bool keep_log = true);

}  // namespace rsi
