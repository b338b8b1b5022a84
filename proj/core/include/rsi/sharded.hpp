#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rsi/compression.hpp"
#include "rsi/random.hpp"
#include "rsi/sparse.hpp"

namespace rsi {

enum class PartitionStrategy { contiguous, strided };

struct ShardLayout {
  std::size_t count = 1;
  PartitionStrategy strategy = PartitionStrategy::contiguous;
};

/// The segment of a vector owned by one process. `entries` keeps the global
/// dimension and holds only owned indices.
struct Shard {
  std::size_t shard_id = 0;
  SparseVector entries;
};

std::vector<Shard> partition(const SparseVector& x, const ShardLayout& layout);

/// Arbitrary ownership: owner[i] is the shard of global index i.
std::vector<Shard> partition_by_owner(const SparseVector& x, std::span<const std::size_t> owner,
                                      std::size_t shard_count);

struct PreservedSelection {
  std::vector<SparseVector::index_type> preserved;  // ascending
  std::size_t rounds = 0;
};

/**
 * @brief Preserved-set construction without a global sort.
 *
 * Each shard heaps its entries by magnitude and, per round, admits every
 * heap top that passes the magnitude test against the round's snapshot of
 * (d, tail sum). The snapshot is refreshed once all shards finish their
 * round. Terminates when no shard's largest remaining entry passes.
 */
PreservedSelection distributed_select_preserved(std::span<const Shard> shards,
                                                CompressionBudget m);

struct BudgetAssignment {
  std::vector<double> expected;     // E[g_k]
  std::vector<std::size_t> floors;  // floor(E[g_k])
  std::vector<double> residuals;    // E[g_k] - floor(E[g_k])
  std::size_t extra = 0;            // c = g - sum(floors)
  std::vector<std::size_t> realized;
};

/// Splits g across shards in proportion to their probability mass; the c
/// leftover units go to shards chosen by pivotal sampling on the residuals.
BudgetAssignment apportion_budget(std::span<const double> shard_mass, std::size_t g,
                                  std::span<const std::size_t> candidate_counts,
                                  RandomStream& rng);

/**
 * @brief Rescales one shard's probabilities so they sum to its realized budget.
 *
 * Only a prefix is modified; entries after the pivot index are returned
 * bit-identical. The pivot entry absorbs the remaining difference so the
 * sum is exactly `budget`.
 *
 * @throws std::invalid_argument when budget is not floor/ceil of expected, or
 *         the pivot entry would leave [0, 1].
 */
std::vector<double> adjust_probabilities(std::span<const double> q, double residual,
                                         std::size_t budget, double expected);

struct ShardedCompression {
  SparseVector result;
  PreservedSelection selection;
  BudgetAssignment budget;
};

/**
 * @brief Compression of a vector held across shards.
 *
 * A single shard samples from `rng` itself, so it reproduces compress()
 * exactly. With several shards one value is drawn from `rng` to key a
 * per-call base stream; shard k samples from base.split(k) and the budget
 * draw uses a dedicated coordinator substream of the base.
 */
ShardedCompression sharded_compress(std::span<const Shard> shards, CompressionBudget m,
                                    RandomStream& rng);

}  // namespace rsi
