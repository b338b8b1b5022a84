#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rsi/sparse.hpp"
#include "rsi/trajectory_log.hpp"

namespace rsi {

/**
 * @brief Eigen-decomposition of the pencil (S, T) through T^{-1} S.
 *
 * Columns of `right` are w_k (unit 2-norm, largest-magnitude component real
 * and positive). Columns of `left` are z_k with Z* = W^{-1} T^{-1}, so that
 * z_k* T w_k = 1 and z_k* S = lambda_k z_k* T. Values are sorted by
 * descending real part.
 */
struct RitzSolution {
  std::vector<std::complex<double>> values;
  Eigen::MatrixXcd right;
  Eigen::MatrixXcd left;
  double min_singular_t = 0.0;
  double max_singular_t = 0.0;
  bool has_complex = false;

  std::size_t k() const noexcept { return values.size(); }
  std::vector<double> real_values() const;
};

/// Smallest and largest singular values of a small dense matrix.
std::pair<double, double> singular_range(const DenseMatrix& m);

/// Singular range after scaling each column to unit 2-norm. The estimators
/// are invariant to column scaling, so this is the conditioning that matters.
/// A zero column gives (0, max).
std::pair<double, double> equilibrated_singular_range(const DenseMatrix& m);

/// Relative singular-value threshold on T below which the solve is refused.
inline constexpr double kDefaultSingularTol = 1e-12;

/// @throws InsufficientSampling when T is numerically singular (judged on
///         the column-equilibrated matrix).
RitzSolution solve_ritz(const DenseMatrix& s, const DenseMatrix& t,
                        double singular_tol = kDefaultSingularTol);

/// Same as solve_ritz on one iteration's matrices.
RitzSolution instantaneous_ritz(const DenseMatrix& s, const DenseMatrix& t,
                                double singular_tol = kDefaultSingularTol);

/// Re z_k*(S_i - lambda_k T_i) w_k for every logged i >= burn_in.
/// @throws std::invalid_argument when the log is not longer than burn_in.
std::vector<double> f_statistic(std::span<const StepRecord> log, std::size_t burn_in,
                                const RitzSolution& solution, std::size_t index);

struct Autocorrelation {
  double tau = 1.0;
  std::size_t window = 0;
  double variance = 0.0;  // population variance of the series
  bool zero_variance = false;
};

inline constexpr std::size_t kMinSeriesLength = 100;

/**
 * @brief Integrated autocorrelation time with a self-consistent window.
 *
 * tau(W) = 1 + 2 sum_{t=1}^{W} rho(t); W is the smallest lag with
 * W >= c tau(W). A constant series gives tau = 1 and sets zero_variance.
 *
 * @throws std::invalid_argument for fewer than 100 samples or non-finite
 *         values.
 */
Autocorrelation integrated_autocorrelation(std::span<const double> series,
                                           double window_constant = 5.0);

struct EigenEstimate {
  double lambda = 0.0;
  double lambda_imag = 0.0;
  double energy = 0.0;
  double stderr_lambda = 0.0;
  double stderr_energy = 0.0;
  double tau = 1.0;
  double n_eff = 0.0;
  std::size_t window = 0;
  bool zero_variance = false;
};

struct ErrorReport {
  std::vector<EigenEstimate> estimates;
  std::size_t samples = 0;
  std::size_t burn_in = 0;
  double eps = 0.0;
  double window_constant = 5.0;
  double min_singular_t = 0.0;
  double max_singular_t = 0.0;
  bool has_complex = false;
};

/// stderr_k = sd(f_k) sqrt(tau_k / N) / |mean_i z_k* T_i w_k|. Energies use
/// E = (1 - lambda) / eps.
ErrorReport standard_errors(std::span<const StepRecord> log, std::size_t burn_in,
                            const RitzSolution& solution, double eps,
                            double window_constant = 5.0);

/// Plain averages of S and T over log[burn_in..], summed in log order.
std::pair<DenseMatrix, DenseMatrix> average_products(std::span<const StepRecord> log,
                                                     std::size_t burn_in);

/// E_i = (1 - lambda_i) / eps.
std::vector<double> energies_from_ritz(std::span<const double> lambda, double eps);

/**
 * @brief Maps each reference eigenpair to an instantaneous one.
 *
 * Pairs are compared through their images in trial-basis coordinates:
 * v_r = T_ref w_r for the reference and T_inst w_c for the instantaneous
 * solution. Since z_r* v_s = delta_rs, z_r* T_inst w_c is the coefficient of
 * the instantaneous image along v_r; the weight is that coefficient times
 * |v_r| over |T_inst w_c|, so neither iterate nor vector scaling enters.
 * Pairs are assigned by largest weight first, without reuse. result[r] is
 * the instantaneous index matched to reference r.
 */
std::vector<std::size_t> match_eigenpairs(const RitzSolution& instantaneous,
                                          const RitzSolution& reference,
                                          const DenseMatrix& t_instantaneous,
                                          const DenseMatrix& t_reference);

}  // namespace rsi
