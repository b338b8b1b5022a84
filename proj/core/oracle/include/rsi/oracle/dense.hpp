#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

// Brute-force references. These trade speed for transparency and are meant
// for desk-scale problems (n up to a few thousand).

namespace rsi::oracle {

inline constexpr std::size_t kDenseLimit = 5000;

struct Spectrum {
  std::vector<double> eigenvalues;  // ascending
  Eigen::MatrixXd eigenvectors;     // column j pairs with eigenvalues[j]
};

/// @throws std::invalid_argument for non-symmetric input or n > kDenseLimit.
Spectrum dense_eigh(const Eigen::MatrixXd& a);

/// max_j |A v_j - lambda_j v_j|_2.
double max_residual(const Eigen::MatrixXd& a, const Spectrum& spectrum);

struct DeterministicTrace {
  std::vector<std::vector<double>> ritz;  // per iteration, descending
  std::vector<Eigen::MatrixXd> s;         // U* A X per iteration
  std::vector<Eigen::MatrixXd> t;         // U* X per iteration
  Eigen::MatrixXd final_iterate;
};

/**
 * @brief Non-standard subspace iteration without compression.
 *
 * X <- A X G^{-1} with the same norm control and periodic orthogonalization
 * as the randomized engine, written with dense linear algebra only. R is
 * obtained from a Cholesky factor of S^T S rather than a QR routine.
 */
DeterministicTrace deterministic_subspace_iteration(const Eigen::MatrixXd& a,
                                                    const Eigen::MatrixXd& u,
                                                    const Eigen::MatrixXd& x0, std::size_t iters,
                                                    double alpha, std::size_t ortho_period);

/// Classical subspace iteration with Rayleigh-Ritz on every iterate:
/// Gram-Schmidt every ortho_period steps, l1 column scaling otherwise.
std::vector<std::vector<double>> classical_subspace_iteration(const Eigen::MatrixXd& a,
                                                              const Eigen::MatrixXd& x0,
                                                              std::size_t iters,
                                                              std::size_t ortho_period);

inline constexpr std::size_t kEnumerationLimit = 12;

struct PivotalEnumeration {
  std::vector<double> marginals;
  double total_weight = 0.0;
  std::size_t min_size = 0;
  std::size_t max_size = 0;
  std::size_t branches = 0;
};

/**
 * @brief Exact inclusion probabilities of the pivotal sampler.
 *
 * Walks every branch of the recursion (choice of h, then keep h or take the
 * next index) carrying the product of branch probabilities. Entries with
 * p >= 1 - 1e-12 are included outright; zero entries never enter.
 *
 * @throws std::invalid_argument for more than kEnumerationLimit entries.
 */
PivotalEnumeration enumerate_pivotal(const std::vector<double>& p, std::size_t g);

}  // namespace rsi::oracle
