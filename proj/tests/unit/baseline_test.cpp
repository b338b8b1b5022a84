#include <doctest.h>

#include <cmath>
#include <memory>

#include "rsi/baseline.hpp"
#include "rsi/errors.hpp"
#include "rsi/oracle/dense.hpp"
#include "rsi/oracle/synthetic.hpp"
#include "test_support.hpp"

using namespace rsi;

namespace {

struct Small {
  std::shared_ptr<const SparseColumnMatrix> a;
  std::vector<double> lambda;  // exact eigenvalues of A, descending
};

Small small_problem() {
  oracle::SyntheticSpec spec;
  spec.dims = {6, 5, 4};
  spec.k = 3;
  const auto syn = oracle::synthesize_test_matrix(spec);
  Small out{std::make_shared<const SparseColumnMatrix>(shift_scale(syn.h, spec.eps)), {}};
  for (double e : syn.energies) {
    out.lambda.push_back(1.0 - spec.eps * e);
  }
  return out;
}

std::vector<SparseVector> columns_of(const DenseMatrix& u) {
  std::vector<SparseVector> out;
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    const Eigen::VectorXd c = u.col(j);
    out.push_back(SparseVector::from_dense(std::span<const double>(c.data(), c.size())));
  }
  return out;
}

EngineConfig config(std::size_t m, std::size_t iters, std::size_t period) {
  EngineConfig c;
  c.m = m;
  c.ortho_period = period;
  c.total_iters = iters;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_SUITE("baseline_nonlinear") {

TEST_CASE("quadratic_ritz: exact eigenvectors give exact values") {
  const auto p = small_problem();
  const auto spec = oracle::dense_eigh(p.a->to_dense());
  const Eigen::MatrixXd top = spec.eigenvectors.rightCols(3);
  const auto qr = quadratic_ritz(columns_of(DenseMatrix(top)), *p.a);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(std::abs(qr.values[j] - p.lambda[j]) < 1e-12);
  }
}

TEST_CASE("quadratic_ritz: k = 1 is the Rayleigh quotient") {
  RandomStream rng(1);
  const Eigen::MatrixXd a = testing::random_symmetric(20, rng);
  const auto sa = SparseColumnMatrix::from_dense(DenseMatrix(a), true);
  const auto x = testing::random_sparse(20, 12, rng);
  const Eigen::VectorXd xd = testing::dense(x);
  const std::vector<SparseVector> block{x};
  CHECK(quadratic_ritz(block, sa).values[0] ==
        doctest::Approx(xd.dot(a * xd) / xd.dot(xd)).epsilon(1e-13));
}

TEST_CASE("quadratic_ritz: variational bound on random instances") {
  RandomStream rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::MatrixXd a = testing::random_symmetric(15, rng);
    auto exact = oracle::dense_eigh(a).eigenvalues;
    std::reverse(exact.begin(), exact.end());
    const auto sa = SparseColumnMatrix::from_dense(DenseMatrix(a), true);
    std::vector<SparseVector> block;
    for (int j = 0; j < 3; ++j) {
      block.push_back(testing::random_sparse(15, 8, rng));
    }
    const auto qr = quadratic_ritz(block, sa);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(qr.values[j] <= exact[j] + 1e-12);
      CHECK(qr.values[j] >= exact.back() - 1e-12);
    }
  }
}

TEST_CASE("quadratic_ritz: dependent columns raise insufficient sampling") {
  const auto x = SparseVector::from_dense(std::vector<double>{1, 2, 0});
  const std::vector<SparseVector> block{x, x.scaled(3.0)};
  CHECK_THROWS_AS(quadratic_ritz(block, SparseColumnMatrix::identity(3)), InsufficientSampling);
}

TEST_CASE("gram_schmidt: orthonormal output, dependence detected") {
  RandomStream rng(3);
  std::vector<SparseVector> cols;
  for (int j = 0; j < 4; ++j) {
    cols.push_back(testing::random_sparse(30, 20, rng));
  }
  const auto q = gram_schmidt(cols);
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t j = 0; j < q.size(); ++j) {
      CHECK(std::abs(dot(q[i], q[j]) - (i == j ? 1.0 : 0.0)) < 1e-10);
    }
  }
  const std::vector<SparseVector> dep{cols[0], cols[0].scaled(2.0)};
  CHECK_THROWS_AS(gram_schmidt(dep), InsufficientSampling);
}

TEST_CASE("gram_schmidt: nearly dependent columns stay orthogonal") {
  RandomStream rng(4);
  const auto a = testing::random_sparse(40, 30, rng);
  const auto b = testing::random_sparse(40, 30, rng);
  const std::vector<SparseVector> pair{a, linear_combination(std::vector<SparseVector>{a, b},
                                                             std::vector<double>{1.0, 1e-7})};
  const auto q = gram_schmidt(pair);
  CHECK(std::abs(dot(q[0], q[1])) < 1e-10);
}

TEST_CASE("deterministic limit equals classical subspace iteration") {
  const auto p = small_problem();
  const DenseMatrix u = diagonal_trial_basis(*p.a, 3);
  auto st = init_nonlinear(p.a, columns_of(u), config(120, 150, 20));
  const auto res = run_nonlinear(st);
  const auto ref = oracle::classical_subspace_iteration(p.a->to_dense(), Eigen::MatrixXd(u), 150, 20);
  REQUIRE(ref.size() == 150);
  double worst = 0.0;
  for (std::size_t i = 0; i < 150; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      worst = std::max(worst, std::abs(res.log[i].ritz[j] - ref[i][j]));
    }
  }
  CHECK(worst < 1e-9);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(std::abs(res.log.back().ritz[j] - p.lambda[j]) < 1e-9);
  }
  const auto v = averaged_variants(res.log, 149);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(v.mean_of_ritz[j] == res.log.back().ritz[j]);
    CHECK(std::abs(v.ritz_of_means[j] - res.log.back().ritz[j]) < 1e-13);
  }
}

TEST_CASE("stochastic run: variational, best estimates above exact energies") {
  const auto p = small_problem();
  const DenseMatrix u = diagonal_trial_basis(*p.a, 3);
  auto st = init_nonlinear(p.a, columns_of(u), config(10, 2000, 50));
  const auto res = run_nonlinear(st);
  for (const auto& rec : res.log) {
    for (std::size_t j = 0; j < 3; ++j) {
      REQUIRE(rec.ritz[j] <= p.lambda[j] + 1e-12);
    }
  }
  const auto v = averaged_variants(res.log, 500);
  for (std::size_t j = 0; j < 3; ++j) {
    // Largest lambda is the lowest energy; it still sits above the exact energy.
    CHECK(v.best[j] < p.lambda[j]);
    CHECK(v.mean_of_ritz[j] <= v.best[j]);
  }
}

TEST_CASE("init_nonlinear: input checks") {
  const auto p = small_problem();
  CHECK_THROWS_AS(init_nonlinear(p.a, {SparseVector(120)}, config(5, 10, 0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(init_nonlinear(p.a, {SparseVector::from_entries(50, {{0, 1.0}})},
                                 config(5, 10, 0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(averaged_variants(std::vector<NonlinearRecord>{}, 0), std::invalid_argument);
}

}  // TEST_SUITE
