#include "rsi/sharded.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rsi {

namespace {

constexpr std::uint64_t kCoordinatorStream = 0xC0041D1A7E5ULL;

double sum_ascending(std::vector<double> magnitudes) {
  std::sort(magnitudes.begin(), magnitudes.end());
  return std::accumulate(magnitudes.begin(), magnitudes.end(), 0.0);
}

std::size_t total_nnz(std::span<const Shard> shards) {
  std::size_t total = 0;
  for (const auto& s : shards) {
    total += s.entries.nnz();
  }
  return total;
}

void check_shards(std::span<const Shard> shards) {
  if (shards.empty()) {
    throw std::invalid_argument("sharded compression needs at least one shard");
  }
  const std::size_t dim = shards.front().entries.dim();
  for (const auto& s : shards) {
    if (s.entries.dim() != dim) {
      throw std::invalid_argument("shards disagree on vector dimension");
    }
  }
}

// Per-shard view of the plan: candidate positions (into shard entries) and
// their global probabilities.
struct ShardPlan {
  std::vector<std::size_t> candidate_pos;
  std::vector<double> probabilities;
};

}  // namespace

std::vector<Shard> partition_by_owner(const SparseVector& x, std::span<const std::size_t> owner,
                                      std::size_t shard_count) {
  if (shard_count == 0) {
    throw std::invalid_argument("shard count must be positive");
  }
  if (owner.size() != x.dim()) {
    throw std::invalid_argument("ownership map must cover every index");
  }
  std::vector<std::vector<SparseVector::index_type>> idx(shard_count);
  std::vector<std::vector<double>> val(shard_count);
  auto xi = x.indices();
  auto xv = x.values();
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const std::size_t k = owner[xi[i]];
    if (k >= shard_count) {
      throw std::invalid_argument("ownership map names a shard out of range");
    }
    idx[k].push_back(xi[i]);
    val[k].push_back(xv[i]);
  }
  std::vector<Shard> shards;
  shards.reserve(shard_count);
  for (std::size_t k = 0; k < shard_count; ++k) {
    shards.push_back({k, SparseVector(x.dim(), std::move(idx[k]), std::move(val[k]))});
  }
  return shards;
}

std::vector<Shard> partition(const SparseVector& x, const ShardLayout& layout) {
  if (layout.count == 0) {
    throw std::invalid_argument("shard count must be positive");
  }
  std::vector<std::size_t> owner(x.dim());
  for (std::size_t i = 0; i < owner.size(); ++i) {
    owner[i] = layout.strategy == PartitionStrategy::contiguous ? i * layout.count / x.dim()
                                                                 : i % layout.count;
  }
  return partition_by_owner(x, owner, layout.count);
}

PreservedSelection distributed_select_preserved(std::span<const Shard> shards,
                                                CompressionBudget budget) {
  check_shards(shards);
  const std::size_t m = budget.value();
  PreservedSelection out;
  if (total_nnz(shards) <= m) {
    for (const auto& s : shards) {
      auto idx = s.entries.indices();
      out.preserved.insert(out.preserved.end(), idx.begin(), idx.end());
    }
    std::sort(out.preserved.begin(), out.preserved.end());
    return out;
  }

  struct LocalState {
    std::vector<std::size_t> heap;  // positions into entries
    std::vector<char> taken;
  };
  std::vector<LocalState> local(shards.size());
  for (std::size_t k = 0; k < shards.size(); ++k) {
    const auto& e = shards[k].entries;
    auto idx = e.indices();
    auto val = e.values();
    auto& st = local[k];
    st.heap.resize(e.nnz());
    std::iota(st.heap.begin(), st.heap.end(), std::size_t{0});
    st.taken.assign(e.nnz(), 0);
    auto less = [idx, val](std::size_t a, std::size_t b) {
      const double ma = std::abs(val[a]);
      const double mb = std::abs(val[b]);
      return ma != mb ? ma < mb : idx[a] > idx[b];
    };
    std::make_heap(st.heap.begin(), st.heap.end(), less);
  }

  auto tail_sum = [&]() {
    double total = 0.0;
    for (std::size_t k = 0; k < shards.size(); ++k) {
      auto val = shards[k].entries.values();
      std::vector<double> mags;
      mags.reserve(val.size());
      for (std::size_t i = 0; i < val.size(); ++i) {
        if (!local[k].taken[i]) {
          mags.push_back(std::abs(val[i]));
        }
      }
      total += sum_ascending(std::move(mags));
    }
    return total;
  };

  std::size_t d = 0;
  double tail = tail_sum();
  for (;;) {
    ++out.rounds;
    std::size_t added = 0;
    for (std::size_t k = 0; k < shards.size(); ++k) {
      auto idx = shards[k].entries.indices();
      auto val = shards[k].entries.values();
      auto& st = local[k];
      auto less = [idx, val](std::size_t a, std::size_t b) {
        const double ma = std::abs(val[a]);
        const double mb = std::abs(val[b]);
        return ma != mb ? ma < mb : idx[a] > idx[b];
      };
      while (!st.heap.empty() && d < m &&
             std::abs(val[st.heap.front()]) * static_cast<double>(m - d) >= tail) {
        std::pop_heap(st.heap.begin(), st.heap.end(), less);
        const std::size_t pos = st.heap.back();
        st.heap.pop_back();
        st.taken[pos] = 1;
        out.preserved.push_back(idx[pos]);
        ++added;
      }
    }
    if (added == 0) {
      break;
    }
    d += added;
    tail = tail_sum();
  }
  std::sort(out.preserved.begin(), out.preserved.end());
  return out;
}

BudgetAssignment apportion_budget(std::span<const double> shard_mass, std::size_t g,
                                  std::span<const std::size_t> candidate_counts,
                                  RandomStream& rng) {
  if (shard_mass.size() != candidate_counts.size() || shard_mass.empty()) {
    throw std::invalid_argument("apportion_budget: one mass and count per shard required");
  }
  const std::size_t candidates =
      std::accumulate(candidate_counts.begin(), candidate_counts.end(), std::size_t{0});
  if (g > candidates) {
    std::ostringstream msg;
    msg << "apportion_budget: budget " << g << " exceeds " << candidates << " candidates";
    throw std::invalid_argument(msg.str());
  }
  double total = 0.0;
  for (double q : shard_mass) {
    if (!(q >= 0.0) || !std::isfinite(q)) {
      throw std::invalid_argument("apportion_budget: shard mass must be finite and nonnegative");
    }
    total += q;
  }

  BudgetAssignment out;
  const std::size_t n = shard_mass.size();
  out.expected.assign(n, 0.0);
  out.floors.assign(n, 0);
  out.residuals.assign(n, 0.0);
  std::size_t floor_sum = 0;
  for (std::size_t k = 0; k < n; ++k) {
    double e = total > 0.0 ? static_cast<double>(g) * shard_mass[k] / total : 0.0;
    const double nearest = std::round(e);
    if (std::abs(e - nearest) < 1e-9) {
      e = nearest;
    }
    out.expected[k] = e;
    out.floors[k] = static_cast<std::size_t>(std::floor(e));
    out.residuals[k] = e - std::floor(e);
    floor_sum += out.floors[k];
  }
  if (floor_sum > g) {
    throw std::logic_error("apportion_budget: floors exceed budget");
  }
  out.extra = g - floor_sum;
  out.realized = out.floors;
  if (out.extra > 0) {
    for (auto k : pivotal_sample(out.residuals, out.extra, rng)) {
      ++out.realized[k];
    }
  }
  return out;
}

std::vector<double> adjust_probabilities(std::span<const double> q, double residual,
                                         std::size_t budget, double expected) {
  std::vector<double> out(q.begin(), q.end());
  const double lower = std::floor(expected);
  const auto gk = static_cast<double>(budget);
  if (residual == 0.0 || gk == expected) {
    if (gk != expected) {
      throw std::invalid_argument("adjust_probabilities: integer expectation but budget differs");
    }
    return out;
  }
  const bool up = gk > expected;
  if ((up && gk != lower + 1.0) || (!up && gk != lower)) {
    throw std::invalid_argument("adjust_probabilities: budget must be floor or ceil of expected");
  }

  const std::size_t n = q.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = up ? std::min(1.0, q[i] / residual)
              : std::max(0.0, (q[i] - residual) / (1.0 - residual));
  }
  // suffix[j] = sum_{i >= j} q_i
  std::vector<double> suffix(n + 1, 0.0);
  for (std::size_t j = n; j-- > 0;) {
    suffix[j] = suffix[j + 1] + q[j];
  }
  const double tol = 1e-12 * std::max(1.0, gk);
  double prefix_y = 0.0;
  for (std::size_t h = 0; h < n; ++h) {
    const double z = prefix_y + y[h] + suffix[h + 1];
    const bool hit = up ? z >= gk - tol : z <= gk + tol;
    if (hit) {
      double pivot = gk - prefix_y - suffix[h + 1];
      if (pivot < -tol || pivot > 1.0 + tol) {
        std::ostringstream msg;
        msg << "adjust_probabilities: infeasible pivot value " << pivot;
        throw std::invalid_argument(msg.str());
      }
      pivot = std::clamp(pivot, 0.0, 1.0);
      for (std::size_t i = 0; i < h; ++i) {
        out[i] = y[i];
      }
      out[h] = pivot;
      return out;
    }
    prefix_y += y[h];
  }
  throw std::invalid_argument("adjust_probabilities: no pivot reaches the budget");
}

ShardedCompression sharded_compress(std::span<const Shard> shards, CompressionBudget budget,
                                    RandomStream& rng) {
  check_shards(shards);
  const std::size_t m = budget.value();
  const std::size_t dim = shards.front().entries.dim();
  ShardedCompression out;
  out.selection = distributed_select_preserved(shards, budget);

  std::vector<std::vector<char>> taken(shards.size());
  auto mark_preserved = [&]() {
    for (std::size_t k = 0; k < shards.size(); ++k) {
      auto idx = shards[k].entries.indices();
      taken[k].assign(idx.size(), 0);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        taken[k][i] = std::binary_search(out.selection.preserved.begin(),
                                         out.selection.preserved.end(), idx[i]);
      }
    }
  };
  mark_preserved();

  std::vector<ShardPlan> plans(shards.size());
  std::size_t g = 0;
  for (;;) {
    std::size_t candidates = 0;
    double tail = 0.0;
    for (std::size_t k = 0; k < shards.size(); ++k) {
      auto val = shards[k].entries.values();
      std::vector<double> mags;
      plans[k] = ShardPlan{};
      for (std::size_t i = 0; i < val.size(); ++i) {
        if (!taken[k][i]) {
          plans[k].candidate_pos.push_back(i);
          mags.push_back(std::abs(val[i]));
        }
      }
      candidates += mags.size();
      tail += sum_ascending(std::move(mags));
    }
    g = m - out.selection.preserved.size();
    if (candidates <= g) {
      g = 0;
      for (auto& p : plans) {
        p.candidate_pos.clear();
      }
      for (std::size_t k = 0; k < shards.size(); ++k) {
        auto idx = shards[k].entries.indices();
        out.selection.preserved.insert(out.selection.preserved.end(), idx.begin(), idx.end());
      }
      std::sort(out.selection.preserved.begin(), out.selection.preserved.end());
      out.selection.preserved.erase(
          std::unique(out.selection.preserved.begin(), out.selection.preserved.end()),
          out.selection.preserved.end());
      mark_preserved();
      break;
    }
    const double scale = static_cast<double>(g) / tail;
    std::vector<SparseVector::index_type> certain;
    for (std::size_t k = 0; k < shards.size(); ++k) {
      auto idx = shards[k].entries.indices();
      auto val = shards[k].entries.values();
      for (auto pos : plans[k].candidate_pos) {
        const double p = scale * std::abs(val[pos]);
        plans[k].probabilities.push_back(p);
        if (p >= kCertainInclusion) {
          certain.push_back(idx[pos]);
        }
      }
    }
    if (certain.empty()) {
      break;
    }
    out.selection.preserved.insert(out.selection.preserved.end(), certain.begin(), certain.end());
    std::sort(out.selection.preserved.begin(), out.selection.preserved.end());
    mark_preserved();
  }

  std::vector<std::pair<SparseVector::index_type, double>> entries;
  entries.reserve(m);
  for (std::size_t k = 0; k < shards.size(); ++k) {
    auto idx = shards[k].entries.indices();
    auto val = shards[k].entries.values();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (taken[k][i]) {
        entries.emplace_back(idx[i], val[i]);
      }
    }
  }
  if (g == 0) {
    out.result = SparseVector::from_entries(dim, std::move(entries));
    return out;
  }

  std::vector<double> mass(shards.size());
  std::vector<std::size_t> counts(shards.size());
  for (std::size_t k = 0; k < shards.size(); ++k) {
    mass[k] = std::accumulate(plans[k].probabilities.begin(), plans[k].probabilities.end(), 0.0);
    counts[k] = plans[k].probabilities.size();
  }
  const bool single = shards.size() == 1;
  const RandomStream base = single ? rng : rng.split(rng.next_u64());
  RandomStream coordinator = base.split(kCoordinatorStream);
  out.budget = apportion_budget(mass, g, counts, coordinator);

  for (std::size_t k = 0; k < shards.size(); ++k) {
    const std::size_t gk = out.budget.realized[k];
    if (gk == 0) {
      continue;
    }
    const auto adjusted = adjust_probabilities(plans[k].probabilities, out.budget.residuals[k], gk,
                                               out.budget.expected[k]);
    RandomStream local = single ? rng : base.split(k);
    const auto picked = pivotal_sample(adjusted, gk, local);
    if (single) {
      rng = local;
    }
    auto idx = shards[k].entries.indices();
    auto val = shards[k].entries.values();
    for (auto j : picked) {
      const std::size_t pos = plans[k].candidate_pos[j];
      entries.emplace_back(idx[pos], val[pos] / plans[k].probabilities[j]);
    }
  }
  out.result = SparseVector::from_entries(dim, std::move(entries));
  return out;
}

}  // namespace rsi
