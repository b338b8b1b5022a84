#include "rsi/compression.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace rsi {

CompressionBudget::CompressionBudget(std::size_t m) : m_(m) {
  if (m < 1) {
    throw std::invalid_argument("compression budget m must be at least 1");
  }
}

double CompressionPlan::probability(SparseVector::index_type index) const {
  auto it = std::lower_bound(candidates.begin(), candidates.end(), index);
  if (it == candidates.end() || *it != index) {
    return 0.0;
  }
  return probabilities[static_cast<std::size_t>(it - candidates.begin())];
}

namespace {

// Fills candidates/probabilities from the complement of `preserved`.
void fill_candidates(const SparseVector& x, std::size_t m, CompressionPlan& plan) {
  std::sort(plan.preserved.begin(), plan.preserved.end());
  plan.candidates.clear();
  plan.probabilities.clear();
  auto idx = x.indices();
  auto val = x.values();
  std::size_t cursor = 0;
  std::vector<double> magnitudes;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (cursor < plan.preserved.size() && plan.preserved[cursor] == idx[i]) {
      ++cursor;
      continue;
    }
    plan.candidates.push_back(idx[i]);
    magnitudes.push_back(std::abs(val[i]));
  }
  plan.sample_count = m - plan.preserved.size();
  if (plan.candidates.size() <= plan.sample_count) {
    // Nothing left to sample from; every remaining entry is kept.
    plan.preserved.insert(plan.preserved.end(), plan.candidates.begin(), plan.candidates.end());
    std::sort(plan.preserved.begin(), plan.preserved.end());
    plan.candidates.clear();
    plan.sample_count = 0;
    plan.tail_norm = 0.0;
    return;
  }
  // Sum from the smallest magnitudes up.
  std::vector<double> sorted(magnitudes);
  std::sort(sorted.begin(), sorted.end());
  plan.tail_norm = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  const double scale = static_cast<double>(plan.sample_count) / plan.tail_norm;
  plan.probabilities.resize(magnitudes.size());
  for (std::size_t i = 0; i < magnitudes.size(); ++i) {
    plan.probabilities[i] = scale * magnitudes[i];
  }
}

}  // namespace

CompressionPlan select_preserved(const SparseVector& x, CompressionBudget budget) {
  const std::size_t m = budget.value();
  CompressionPlan plan;
  auto idx = x.indices();
  auto val = x.values();
  if (x.nnz() <= m) {
    plan.preserved.assign(idx.begin(), idx.end());
    return plan;
  }

  std::vector<std::size_t> order(x.nnz());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ma = std::abs(val[a]);
    const double mb = std::abs(val[b]);
    return ma != mb ? ma > mb : idx[a] < idx[b];
  });

  // tail[d] = sum of magnitudes of order[d..], accumulated smallest first.
  std::vector<double> tail(order.size() + 1, 0.0);
  for (std::size_t j = order.size(); j-- > 0;) {
    tail[j] = tail[j + 1] + std::abs(val[order[j]]);
  }

  std::size_t d = 0;
  while (d < order.size() && d < m &&
         std::abs(val[order[d]]) * static_cast<double>(m - d) >= tail[d]) {
    plan.preserved.push_back(idx[order[d]]);
    ++d;
  }
  fill_candidates(x, m, plan);

  // Rounding can push a probability to 1; such entries are certain.
  for (;;) {
    std::vector<SparseVector::index_type> certain;
    for (std::size_t i = 0; i < plan.candidates.size(); ++i) {
      if (plan.probabilities[i] >= kCertainInclusion) {
        certain.push_back(plan.candidates[i]);
      }
    }
    if (certain.empty()) {
      break;
    }
    plan.preserved.insert(plan.preserved.end(), certain.begin(), certain.end());
    fill_candidates(x, m, plan);
  }
  return plan;
}

std::vector<std::size_t> pivotal_sample(std::span<const double> p, std::size_t g,
                                        RandomStream& rng) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || v > 1.0 + 1e-12) {
      throw std::invalid_argument("pivotal_sample: probabilities must lie in [0, 1]");
    }
    total += v;
  }
  if (std::abs(total - static_cast<double>(g)) > 1e-9) {
    std::ostringstream msg;
    msg << "pivotal_sample: probabilities sum to " << total << " but budget is " << g;
    throw std::invalid_argument(msg.str());
  }

  std::vector<std::size_t> chosen;
  chosen.reserve(g);
  std::vector<std::size_t> order;
  order.reserve(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] >= kCertainInclusion) {
      chosen.push_back(i);
    } else if (p[i] > 0.0) {
      order.push_back(i);
    }
  }
  if (chosen.size() > g) {
    throw std::invalid_argument("pivotal_sample: more certain inclusions than budget");
  }
  std::size_t remaining = g - chosen.size();

  struct Member {
    std::size_t pos;
    double mass;
  };
  std::optional<Member> carry;
  std::vector<Member> group;
  std::size_t cursor = 0;

  while (remaining > 0) {
    group.clear();
    double group_sum = 0.0;
    if (carry) {
      group.push_back(*carry);
      group_sum = carry->mass;
    }
    while (cursor < order.size() && group_sum + p[order[cursor]] < 1.0) {
      group.push_back({order[cursor], p[order[cursor]]});
      group_sum += p[order[cursor]];
      ++cursor;
    }

    auto pick = [&]() {
      const double target = rng.uniform() * group_sum;
      double cumulative = 0.0;
      std::size_t last_positive = 0;
      for (std::size_t j = 0; j < group.size(); ++j) {
        if (group[j].mass <= 0.0) {
          continue;
        }
        last_positive = j;
        cumulative += group[j].mass;
        if (target < cumulative) {
          return j;
        }
      }
      return last_positive;
    };

    if (cursor == order.size()) {
      // The leftover mass is 1 up to rounding: exactly one more inclusion.
      if (group.empty() || group_sum <= 0.0 || remaining != 1) {
        throw std::logic_error("pivotal_sample: inconsistent residual mass");
      }
      chosen.push_back(group[pick()].pos);
      remaining = 0;
      break;
    }

    const std::size_t next = order[cursor++];
    const double a = 1.0 - group_sum;
    const double b = p[next] - a;
    const Member h = group[pick()];
    const double keep_h = 1.0 - a / (1.0 - b);
    if (rng.uniform() < keep_h) {
      chosen.push_back(h.pos);
      carry = Member{next, b};
    } else {
      chosen.push_back(next);
      carry = Member{h.pos, b};
    }
    --remaining;
  }

  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

SparseVector apply_plan(const SparseVector& x, const CompressionPlan& plan,
                        std::span<const std::size_t> sampled_positions) {
  std::vector<std::pair<SparseVector::index_type, double>> entries;
  entries.reserve(plan.preserved.size() + sampled_positions.size());
  for (auto i : plan.preserved) {
    entries.emplace_back(i, x.at(i));
  }
  for (auto pos : sampled_positions) {
    const auto i = plan.candidates[pos];
    entries.emplace_back(i, x.at(i) / plan.probabilities[pos]);
  }
  return SparseVector::from_entries(x.dim(), std::move(entries));
}

SparseVector compress(const SparseVector& x, CompressionBudget m, RandomStream& rng) {
  if (x.nnz() <= m.value()) {
    return x;
  }
  const CompressionPlan plan = select_preserved(x, m);
  const auto sampled = pivotal_sample(plan.probabilities, plan.sample_count, rng);
  return apply_plan(x, plan, sampled);
}

std::vector<SparseVector> compress_block(std::span<const SparseVector> columns,
                                         CompressionBudget m, const RandomStream& parent) {
  std::vector<SparseVector> out;
  out.reserve(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    RandomStream stream = parent.split(j);
    out.push_back(compress(columns[j], m, stream));
  }
  return out;
}

}  // namespace rsi
