#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rsi/random.hpp"
#include "rsi/sparse.hpp"

namespace rsi {

/// Maximum number of nonzeros kept by a compression.
class CompressionBudget {
public:
  explicit CompressionBudget(std::size_t m);
  std::size_t value() const noexcept { return m_; }

private:
  std::size_t m_;
};

/**
 * @brief Split of a vector into exactly-preserved and sampled entries.
 *
 * `preserved` are the d largest-magnitude indices kept exactly. Every other
 * nonzero index is a candidate with inclusion probability
 * p_i = g |x_i| / sum_{k not preserved} |x_k|, where g = m - d.
 */
struct CompressionPlan {
  std::vector<SparseVector::index_type> preserved;
  std::size_t sample_count = 0;
  std::vector<SparseVector::index_type> candidates;
  std::vector<double> probabilities;
  double tail_norm = 0.0;

  /// p_i for any global index (0 for preserved or zero entries).
  double probability(SparseVector::index_type index) const;
};

/// Probabilities at or above this are treated as certain inclusions.
inline constexpr double kCertainInclusion = 1.0 - 1e-12;

/// Builds the preserved set by the sequential magnitude rule; ties are
/// broken by ascending index.
CompressionPlan select_preserved(const SparseVector& x, CompressionBudget m);

/**
 * @brief Pivotal sampling of exactly g positions with marginals p.
 *
 * Entries at or above kCertainInclusion are taken deterministically; the
 * rest are processed in the given order by the pivotal recursion. Returns
 * ascending positions into `p`.
 *
 * @throws std::invalid_argument if sum(p) differs from g by more than 1e-9
 *         or an entry lies outside [0, 1].
 */
std::vector<std::size_t> pivotal_sample(std::span<const double> p, std::size_t g,
                                        RandomStream& rng);

/// Unbiased sparsification to at most m nonzeros. Returns x unchanged when
/// nnz(x) <= m.
SparseVector compress(const SparseVector& x, CompressionBudget m, RandomStream& rng);

/// Materializes a plan plus a sampled candidate set into the compressed vector.
SparseVector apply_plan(const SparseVector& x, const CompressionPlan& plan,
                        std::span<const std::size_t> sampled_positions);

/// Column-wise compression; column j draws from parent.split(j).
std::vector<SparseVector> compress_block(std::span<const SparseVector> columns,
                                         CompressionBudget m, const RandomStream& parent);

}  // namespace rsi
