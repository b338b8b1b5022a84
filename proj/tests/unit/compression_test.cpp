#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rsi/compression.hpp"
#include "rsi/oracle/dense.hpp"
#include "test_support.hpp"

using namespace rsi;

namespace {

SparseVector dense_vec(std::vector<double> v) { return SparseVector::from_dense(v); }

// Sequential magnitude rule checked directly on a plan.
void check_plan_invariants(const SparseVector& x, std::size_t m, const CompressionPlan& plan) {
  const double g = static_cast<double>(plan.sample_count);
  REQUIRE(plan.preserved.size() + plan.sample_count <= m);
  if (plan.candidates.empty()) {
    return;
  }
  const double sum_p = std::accumulate(plan.probabilities.begin(), plan.probabilities.end(), 0.0);
  CHECK(std::abs(sum_p - g) < 1e-12 * std::max(1.0, g));
  double tail = 0.0;
  double min_kept = INFINITY;
  for (auto i : plan.preserved) {
    min_kept = std::min(min_kept, std::abs(x.at(i)));
  }
  for (std::size_t c = 0; c < plan.candidates.size(); ++c) {
    tail += std::abs(x.at(plan.candidates[c]));
    CHECK(plan.probabilities[c] > 0.0);
    CHECK(plan.probabilities[c] < 1.0);
  }
  for (auto i : plan.candidates) {
    CHECK(std::abs(x.at(i)) * g < tail);
    CHECK(std::abs(x.at(i)) <= min_kept);
    CHECK(plan.probability(i) > 0.0);
  }
  for (auto i : plan.preserved) {
    CHECK(plan.probability(i) == 0.0);
  }
}

}  // namespace

TEST_SUITE("compression") {

TEST_CASE("select_preserved: [4,2,1,1], m = 2") {
  const auto x = dense_vec({4, 2, 1, 1});
  const auto plan = select_preserved(x, CompressionBudget(2));
  CHECK(plan.preserved == std::vector<std::size_t>{0});
  CHECK(plan.sample_count == 1);
  CHECK(plan.probability(0) == 0.0);
  CHECK(plan.probability(1) == 0.5);
  CHECK(plan.probability(2) == 0.25);
  CHECK(plan.probability(3) == 0.25);
}

TEST_CASE("select_preserved: nnz <= m keeps everything") {
  const auto plan = select_preserved(dense_vec({1, 1, 1}), CompressionBudget(3));
  CHECK(plan.preserved == std::vector<std::size_t>{0, 1, 2});
  CHECK(plan.sample_count == 0);
  CHECK(plan.candidates.empty());
}

TEST_CASE("select_preserved: [5,1,1,1,1,1], m = 2") {
  const auto plan = select_preserved(dense_vec({5, 1, 1, 1, 1, 1}), CompressionBudget(2));
  CHECK(plan.preserved == std::vector<std::size_t>{0});
  CHECK(plan.sample_count == 1);
  for (std::size_t i = 1; i < 6; ++i) {
    CHECK(plan.probability(i) == doctest::Approx(0.2).epsilon(1e-15));
  }
}

TEST_CASE("select_preserved: tied magnitudes enter together") {
  const auto plan = select_preserved(dense_vec({0.1, 5, 5, 0.1, 0.1}), CompressionBudget(3));
  CHECK(plan.preserved == std::vector<std::size_t>{1, 2});
  CHECK(plan.sample_count == 1);
  const auto none = select_preserved(dense_vec({1, 3, 3, 3, 0.01}), CompressionBudget(2));
  CHECK(none.preserved.empty());
  check_plan_invariants(dense_vec({1, 3, 3, 3, 0.01}), 2, none);
}

TEST_CASE("select_preserved: plan invariants on random vectors") {
  RandomStream rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = testing::random_sparse(60, 5 + trial % 50, rng);
    const std::size_t m = 1 + static_cast<std::size_t>(rng.uniform() * 20);
    check_plan_invariants(x, m, select_preserved(x, CompressionBudget(m)));
  }
}

TEST_CASE("budget below one is rejected") { CHECK_THROWS(CompressionBudget(0)); }

TEST_CASE("pivotal_sample: certain entry, exact count, no repeats") {
  RandomStream rng(1);
  const std::vector<double> one{1.0};
  CHECK(pivotal_sample(one, 1, rng) == std::vector<std::size_t>{0});

  const std::vector<double> p{0.3, 0.7, 0.25, 0.45, 0.3, 0.5, 0.5};
  for (int i = 0; i < 1000; ++i) {
    const auto s = pivotal_sample(p, 3, rng);
    REQUIRE(s.size() == 3);
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
  }
}

TEST_CASE("pivotal_sample: sum mismatch is an error") {
  RandomStream rng(1);
  const std::vector<double> p{0.5, 0.4};
  CHECK_THROWS_AS(pivotal_sample(p, 1, rng), std::invalid_argument);
  const std::vector<double> bad{1.5, -0.5};
  CHECK_THROWS_AS(pivotal_sample(bad, 1, rng), std::invalid_argument);
}

TEST_CASE("pivotal_sample: Monte Carlo marginals") {
  const int draws = 100000;
  RandomStream rng(2);
  {
    const std::vector<double> p{0.5, 0.5};
    int hits0 = 0;
    for (int i = 0; i < draws; ++i) {
      hits0 += pivotal_sample(p, 1, rng)[0] == 0;
    }
    CHECK(std::abs(hits0 / double(draws) - 0.5) < 0.005);
  }
  {
    const std::vector<double> p{0.6, 0.5, 0.9};
    std::vector<int> hits(3, 0);
    for (int i = 0; i < draws; ++i) {
      for (auto s : pivotal_sample(p, 2, rng)) {
        ++hits[s];
      }
    }
    for (std::size_t i = 0; i < 3; ++i) {
      const double se = std::sqrt(p[i] * (1 - p[i]) / draws);
      CHECK(std::abs(hits[i] / double(draws) - p[i]) < 4.0 * se);
    }
  }
}

TEST_CASE("pivotal_sample marginals match exhaustive enumeration") {
  RandomStream rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const auto x = testing::random_sparse(8, 2 + trial % 7, rng);
    const std::size_t m = 1 + trial % 4;
    const auto plan = select_preserved(x, CompressionBudget(m));
    if (plan.candidates.empty()) {
      continue;
    }
    const auto e = oracle::enumerate_pivotal(plan.probabilities, plan.sample_count);
    CHECK(e.min_size == plan.sample_count);
    CHECK(e.max_size == plan.sample_count);
    for (std::size_t i = 0; i < e.marginals.size(); ++i) {
      CHECK(std::abs(e.marginals[i] - plan.probabilities[i]) < 1e-10);
    }
  }
}

TEST_CASE("compress: exact when nnz <= m") {
  RandomStream rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t nnz = 1 + trial % 30;
    const auto x = testing::random_sparse(100, nnz, rng);
    const std::size_t m = nnz + static_cast<std::size_t>(rng.uniform() * 5);
    const auto y = compress(x, CompressionBudget(m), rng);
    REQUIRE(y.nnz() == x.nnz());
    CHECK(std::equal(y.indices().begin(), y.indices().end(), x.indices().begin()));
    CHECK(std::memcmp(y.values().data(), x.values().data(), x.nnz() * sizeof(double)) == 0);
  }
}

TEST_CASE("compress: [4,2,1,1] with index 1 drawn gives [4,4,0,0]") {
  const auto x = dense_vec({4, 2, 1, 1});
  const auto plan = select_preserved(x, CompressionBudget(2));
  const std::vector<std::size_t> drawn{0};  // position of index 1 among candidates
  REQUIRE(plan.candidates[0] == 1);
  CHECK(apply_plan(x, plan, drawn).to_dense() == std::vector<double>{4, 4, 0, 0});
}

TEST_CASE("compress: cardinality and dominant entry") {
  RandomStream rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const auto x = testing::random_sparse(50, 40, rng);
    const std::size_t m = 1 + trial % 20;
    const auto y = compress(x, CompressionBudget(m), rng);
    CHECK(y.nnz() == std::min<std::size_t>(m, x.nnz()));
    const auto plan = select_preserved(x, CompressionBudget(m));
    std::size_t top = 0;
    for (std::size_t i = 0; i < 50; ++i) {
      if (std::abs(x.at(i)) > std::abs(x.at(top))) {
        top = i;
      }
    }
    const double tail = plan.tail_norm + std::abs(x.at(top));
    if (std::abs(x.at(top)) * static_cast<double>(m) >= tail) {
      CHECK(y.at(top) == x.at(top));
    }
  }
}

TEST_CASE("compress: empirical mean within 4 standard errors") {
  RandomStream rng(6);
  const auto x = testing::random_sparse(100, 100, rng);
  const int draws = 100000;
  std::vector<double> sum(100, 0.0);
  std::vector<double> sq(100, 0.0);
  for (int i = 0; i < draws; ++i) {
    const auto y = compress(x, CompressionBudget(10), rng);
    for (std::size_t j = 0; j < y.nnz(); ++j) {
      const auto idx = y.indices()[j];
      sum[idx] += y.values()[j];
      sq[idx] += y.values()[j] * y.values()[j];
    }
  }
  int outside = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const double mean = sum[i] / draws;
    const double se = std::sqrt(std::max(sq[i] / draws - mean * mean, 0.0) / draws);
    outside += std::abs(mean - x.at(i)) > 4.0 * se + 1e-15 * std::abs(x.at(i));
  }
  CHECK(outside == 0);
}

TEST_CASE("compress_block: k = 1 matches compress; columns use their own substreams") {
  RandomStream rng(7);
  const auto x = testing::random_sparse(80, 40, rng);
  const RandomStream parent(99);
  const std::vector<SparseVector> one{x};
  RandomStream s0 = parent.split(0);
  CHECK(compress_block(one, CompressionBudget(5), parent)[0] ==
        compress(x, CompressionBudget(5), s0));

  const std::vector<SparseVector> small{testing::random_sparse(80, 3, rng),
                                        testing::random_sparse(80, 4, rng)};
  CHECK(compress_block(small, CompressionBudget(4), parent) == small);
}

TEST_CASE("compress_block: cross-column noise is uncorrelated") {
  const auto x = dense_vec({1, 1, 1, 1, 1, 1, 1, 1});
  const std::vector<SparseVector> block{x, x};
  const int trials = 10000;
  double cov = 0.0;
  double var0 = 0.0;
  double var1 = 0.0;
  for (int t = 0; t < trials; ++t) {
    const auto y = compress_block(block, CompressionBudget(3), RandomStream(1000 + t));
    const double a = y[0].at(0) - 1.0;
    const double b = y[1].at(0) - 1.0;
    cov += a * b;
    var0 += a * a;
    var1 += b * b;
  }
  const double corr = cov / std::sqrt(var0 * var1);
  CHECK(std::abs(corr) < 4.0 / std::sqrt(double(trials)));
}

}  // TEST_SUITE
