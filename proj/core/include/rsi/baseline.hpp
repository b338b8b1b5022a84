#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "rsi/engine.hpp"
#include "rsi/random.hpp"
#include "rsi/sparse.hpp"
#include "rsi/trajectory_log.hpp"

namespace rsi {

/// Rayleigh-Ritz on a compressed block: P W = Q W Lambda with
/// P = Xc* A Xc and Q = Xc* Xc. Values are sorted descending.
struct QuadraticRitz {
  std::vector<double> values;
  DenseMatrix p;
  DenseMatrix q;
};

/// Eigenvalues of the pencil (P, Q), descending. The symmetric path reads
/// only the lower triangle of P.
/// @throws InsufficientSampling when Q is numerically rank deficient.
std::vector<double> solve_quadratic(const DenseMatrix& p, const DenseMatrix& q, bool symmetric);

/// @throws InsufficientSampling when Q is numerically rank deficient.
QuadraticRitz quadratic_ritz(std::span<const SparseVector> xc, const SparseColumnMatrix& a);

/// Same, with A Xc already available.
QuadraticRitz quadratic_ritz(std::span<const SparseVector> xc, std::span<const SparseVector> axc,
                             bool symmetric);

struct NonlinearState {
  std::shared_ptr<const SparseColumnMatrix> matrix;
  IterateBlock iterate;
  EngineConfig config;
  SparseAccumulator workspace;
};

/// @throws std::invalid_argument on inconsistent dimensions or a zero column.
NonlinearState init_nonlinear(std::shared_ptr<const SparseColumnMatrix> a,
                              std::vector<SparseVector> x0, EngineConfig config);

/// Classical Gram-Schmidt with l2 inner products, repeated once for a column
/// whose residual overlap with earlier columns exceeds 1e-8.
/// @throws InsufficientSampling when a column is linearly dependent.
std::vector<SparseVector> gram_schmidt(std::span<const SparseVector> columns);

struct NonlinearRecord {
  StepRecord products;  // s = P, t = Q
  std::vector<double> ritz;
};

/**
 * @brief One iteration of the quadratic baseline.
 *
 * Compress X (same substreams as the linear engine), estimate from the
 * compressed block, then orthonormalize (every ortho_period iterations) or
 * l1-normalize its columns and multiply by A.
 */
NonlinearRecord nonlinear_step(NonlinearState& state, const RandomStream& root);

struct AveragedVariants {
  std::vector<double> mean_of_ritz;       // average of per-iteration Ritz values
  std::vector<double> ritz_of_means;      // Ritz values of the averaged P, Q
  std::vector<double> best;               // largest per-iteration value (lowest energy)
};

/// Statistics over iterations burn_in.. of the log.
/// @throws std::invalid_argument when nothing remains after burn_in.
AveragedVariants averaged_variants(std::span<const NonlinearRecord> log, std::size_t burn_in,
                                   bool symmetric = true);

struct NonlinearRunResult {
  std::vector<NonlinearRecord> log;
  IterateBlock final_state;
};

using NonlinearObserver = std::function<void(std::size_t iteration, const NonlinearRecord&)>;

NonlinearRunResult run_nonlinear(NonlinearState& state, const NonlinearObserver& observer = {});

}  // namespace rsi
