#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "rsi/engine.hpp"
#include "rsi/errors.hpp"
#include "rsi/estimation.hpp"
#include "rsi/oracle/synthetic.hpp"
#include "test_support.hpp"

using namespace rsi;

namespace {

std::vector<double> ar1(std::size_t n, double phi, RandomStream& rng) {
  std::vector<double> x(n);
  double v = rng.normal() / std::sqrt(1.0 - phi * phi);
  for (auto& xi : x) {
    xi = v;
    v = phi * v + rng.normal();
  }
  return x;
}

// k = 1 log with S_i = 2 + e_i, T_i = 1.
std::vector<StepRecord> scalar_log(const std::vector<double>& e) {
  std::vector<StepRecord> log;
  for (double v : e) {
    StepRecord r;
    r.s = DenseMatrix::Constant(1, 1, 2.0 + v);
    r.t = DenseMatrix::Constant(1, 1, 1.0);
    r.norms = {1.0};
    log.push_back(std::move(r));
  }
  return log;
}

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("estimation") {

TEST_CASE("solve_ritz: k = 1 and diagonal pencils") {
  const auto one = solve_ritz(DenseMatrix::Constant(1, 1, 2.0), DenseMatrix::Constant(1, 1, 1.0));
  CHECK(one.real_values() == std::vector<double>{2.0});
  DenseMatrix s = DenseMatrix::Zero(2, 2);
  s(0, 0) = 1.0;
  s(1, 1) = 3.0;
  const auto d = solve_ritz(s, DenseMatrix::Identity(2, 2));
  CHECK(d.real_values() == std::vector<double>{3.0, 1.0});
  CHECK(std::abs(d.right(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(d.right(0, 1)) == doctest::Approx(1.0));
  CHECK_FALSE(d.has_complex);
}

TEST_CASE("solve_ritz: residual identities on random 5x5 pencils") {
  RandomStream rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const DenseMatrix s = testing::random_dense(5, 5, rng);
    DenseMatrix t = testing::random_dense(5, 5, rng);
    t.diagonal().array() += 4.0;
    const auto sol = solve_ritz(s, t);
    const Eigen::MatrixXcd sc = s.cast<std::complex<double>>();
    const Eigen::MatrixXcd tc = t.cast<std::complex<double>>();
    const Eigen::VectorXcd lam =
        Eigen::Map<const Eigen::VectorXcd>(sol.values.data(), static_cast<Eigen::Index>(sol.k()));
    const Eigen::MatrixXcd right = sc * sol.right - tc * sol.right * lam.asDiagonal();
    const Eigen::MatrixXcd left =
        sol.left.adjoint() * sc - lam.asDiagonal() * sol.left.adjoint() * tc;
    CHECK(max_abs(right) < 1e-11 * s.norm());
    CHECK(max_abs(left) < 1e-11 * s.norm() * max_abs(sol.left));
    CHECK(max_abs(sol.left.adjoint() * tc * sol.right - Eigen::MatrixXcd::Identity(5, 5)) < 1e-10);
    for (std::size_t j = 1; j < sol.k(); ++j) {
      CHECK(sol.values[j - 1].real() >= sol.values[j].real());
    }
  }
}

TEST_CASE("solve_ritz: complex pairs are flagged") {
  DenseMatrix s(2, 2);
  s << 0.0, 1.0, -1.0, 0.0;
  const auto sol = solve_ritz(s, DenseMatrix::Identity(2, 2));
  CHECK(sol.has_complex);
  CHECK(std::abs(std::abs(sol.values[0].imag()) - 1.0) < 1e-14);
}

TEST_CASE("solve_ritz: singular T raises insufficient sampling") {
  DenseMatrix t(2, 2);
  t << 1.0, 2.0, 1.0, 2.0;
  try {
    solve_ritz(DenseMatrix::Identity(2, 2), t);
    FAIL("expected InsufficientSampling");
  } catch (const InsufficientSampling& e) {
    CHECK(e.min_singular() < 1e-12 * e.max_singular());
  }
}

TEST_CASE("solve_ritz: ordering stable under 1e-10 perturbations") {
  RandomStream rng(2);
  DenseMatrix s = DenseMatrix::Zero(4, 4);
  s.diagonal() << 1.0, 0.9, 0.7, 0.4;
  const DenseMatrix mix = testing::random_dense(4, 4, rng) * 0.1 + Eigen::MatrixXd::Identity(4, 4);
  const DenseMatrix t = mix;
  const DenseMatrix s2 = s * mix;
  const auto base = solve_ritz(s2, t).real_values();
  for (int i = 0; i < 20; ++i) {
    const DenseMatrix ds = testing::random_dense(4, 4, rng) * 1e-10;
    const DenseMatrix dt = testing::random_dense(4, 4, rng) * 1e-10;
    const auto pert = solve_ritz(s2 + ds, t + dt).real_values();
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(std::abs(pert[j] - base[j]) < 1e-8);
    }
  }
}

TEST_CASE("instantaneous_ritz matches solve_ritz") {
  RandomStream rng(3);
  const DenseMatrix s = testing::random_dense(3, 3, rng);
  const DenseMatrix t = DenseMatrix::Identity(3, 3) + 0.1 * DenseMatrix(testing::random_dense(3, 3, rng));
  CHECK(instantaneous_ritz(s, t).values == solve_ritz(s, t).values);
  CHECK(instantaneous_ritz(DenseMatrix::Constant(1, 1, 2.0), DenseMatrix::Constant(1, 1, 1.0))
            .real_values() == std::vector<double>{2.0});
}

TEST_CASE("f_statistic: constant log gives zero") {
  std::vector<StepRecord> log(10, StepRecord{DenseMatrix::Identity(2, 2) * 3.0,
                                             DenseMatrix::Identity(2, 2), {1.0, 1.0}});
  log[0].s(0, 1) = 0.5;
  for (auto& r : log) {
    r.s(0, 1) = 0.5;
  }
  const auto sol = solve_ritz(log[0].s, log[0].t);
  for (std::size_t k = 0; k < 2; ++k) {
    for (double f : f_statistic(log, 2, sol, k)) {
      CHECK(std::abs(f) < 1e-14);
    }
  }
  CHECK_THROWS_AS(f_statistic(log, 10, sol, 0), std::invalid_argument);
}

TEST_CASE("f_statistic: zero mean on a stochastic trajectory") {
  oracle::SyntheticSpec spec;
  spec.dims = {6, 5, 4};
  spec.k = 3;
  const auto syn = oracle::synthesize_test_matrix(spec);
  auto a = std::make_shared<const SparseColumnMatrix>(shift_scale(syn.h, spec.eps));
  EngineConfig c;
  c.m = 12;
  c.alpha = 0.5;
  c.ortho_period = 50;
  c.total_iters = 3000;
  c.burn_in = 500;
  c.seed = 4;
  auto tr = init_trajectory(a, diagonal_trial_basis(*a, 3), std::nullopt, c);
  const auto res = run(tr);
  const auto& log = res.accumulator.log();
  const auto sol = solve_ritz(res.accumulator.mean_s(), res.accumulator.mean_t());
  // The averaged f vanishes identically; what is left is rounding at the
  // scale of the S and T entries.
  double scale = 0.0;
  for (std::size_t i = 500; i < log.size(); ++i) {
    scale = std::max({scale, log[i].s.cwiseAbs().maxCoeff(), log[i].t.cwiseAbs().maxCoeff()});
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const auto f = f_statistic(log, 500, sol, k);
    double mean = 0.0;
    for (double v : f) {
      mean += v;
    }
    mean /= static_cast<double>(f.size());
    double var = 0.0;
    for (double v : f) {
      var += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(var / static_cast<double>(f.size()));
    CHECK(sd > 1e-6 * scale);
    CHECK(std::abs(mean) < 1e-12 * scale);
  }
}

TEST_CASE("integrated_autocorrelation: white noise, AR(1) and constant") {
  RandomStream rng(5);
  std::vector<double> white(100000);
  for (auto& v : white) {
    v = rng.normal();
  }
  const auto w = integrated_autocorrelation(white);
  CHECK(std::abs(w.tau - 1.0) < 0.1);

  const auto r = integrated_autocorrelation(ar1(100000, 0.9, rng));
  CHECK(std::abs(r.tau - 19.0) < 0.2 * 19.0);
  CHECK(static_cast<double>(r.window) >= 5.0 * r.tau - 2.0);

  const auto c = integrated_autocorrelation(std::vector<double>(200, 4.0));
  CHECK(c.tau == 1.0);
  CHECK(c.zero_variance);
}

TEST_CASE("integrated_autocorrelation: input checks") {
  CHECK_THROWS_AS(integrated_autocorrelation(std::vector<double>(99, 1.0)), std::invalid_argument);
  std::vector<double> bad(200, 1.0);
  bad[7] = std::nan("");
  CHECK_THROWS_AS(integrated_autocorrelation(bad), std::invalid_argument);
}

TEST_CASE("standard_errors: deterministic log gives zero error") {
  const std::vector<StepRecord> log(
      150, StepRecord{DenseMatrix::Constant(1, 1, 0.8), DenseMatrix::Constant(1, 1, 1.0), {1.0}});
  const auto [s, t] = average_products(log, 50);
  const auto rep = standard_errors(log, 50, solve_ritz(s, t), 1e-3);
  CHECK(rep.estimates[0].stderr_lambda == 0.0);
  CHECK(rep.estimates[0].zero_variance);
  CHECK(rep.estimates[0].energy == doctest::Approx(200.0).epsilon(1e-12));
  CHECK(rep.samples == 100);
}

TEST_CASE("standard_errors: AR(1) noise matches the analytic error of the mean") {
  RandomStream rng(6);
  const std::size_t n = 100000;
  const auto log = scalar_log(ar1(n, 0.9, rng));
  const auto [s, t] = average_products(log, 0);
  const auto rep = standard_errors(log, 0, solve_ritz(s, t), 1e-3);
  // Long-run variance of AR(1) with unit innovations is 1 / (1 - phi)^2.
  const double analytic = (1.0 / (1.0 - 0.9)) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(rep.estimates[0].stderr_lambda - analytic) < 0.2 * analytic);
  CHECK(rep.estimates[0].stderr_energy == doctest::Approx(rep.estimates[0].stderr_lambda * 1e3));
  CHECK(rep.estimates[0].n_eff == doctest::Approx(n / rep.estimates[0].tau));
}

TEST_CASE("standard_errors: doubling N shrinks the error by sqrt(2)") {
  RandomStream rng(7);
  const auto series = ar1(400000, 0.5, rng);
  const std::vector<double> half(series.begin(), series.begin() + 200000);
  auto se = [](const std::vector<double>& e) {
    const auto log = scalar_log(e);
    const auto [s, t] = average_products(log, 0);
    return standard_errors(log, 0, solve_ritz(s, t), 1e-3).estimates[0].stderr_lambda;
  };
  const double ratio = se(half) / se(series);
  CHECK(std::abs(ratio - std::sqrt(2.0)) < 0.1 * std::sqrt(2.0));
}

TEST_CASE("standard_errors: invariant under rescaling of w and z") {
  RandomStream rng(8);
  std::vector<StepRecord> log;
  const DenseMatrix s0 = (DenseMatrix(2, 2) << 1.0, 0.2, 0.1, 0.6).finished();
  for (int i = 0; i < 500; ++i) {
    StepRecord r;
    r.s = s0 + 0.05 * DenseMatrix(testing::random_dense(2, 2, rng));
    r.t = DenseMatrix::Identity(2, 2) + 0.05 * DenseMatrix(testing::random_dense(2, 2, rng));
    r.norms = {1.0, 1.0};
    log.push_back(r);
  }
  const auto [s, t] = average_products(log, 100);
  auto sol = solve_ritz(s, t);
  const auto base = standard_errors(log, 100, sol, 1e-3);
  sol.right.col(0) *= std::complex<double>(2.5, 0.0);
  sol.left.col(0) *= std::complex<double>(-0.7, 0.0);
  sol.right.col(1) *= std::complex<double>(0.01, 0.0);
  const auto scaled = standard_errors(log, 100, sol, 1e-3);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(scaled.estimates[k].stderr_lambda ==
          doctest::Approx(base.estimates[k].stderr_lambda).epsilon(1e-12));
  }
}

TEST_CASE("average_products: reordering and blocking") {
  RandomStream rng(9);
  std::vector<StepRecord> log;
  for (int i = 0; i < 64; ++i) {
    log.push_back({DenseMatrix(testing::random_dense(3, 3, rng)),
                   DenseMatrix(testing::random_dense(3, 3, rng)), {1, 1, 1}});
  }
  const auto [s, t] = average_products(log, 0);
  std::vector<StepRecord> rev(log.rbegin(), log.rend());
  const auto [sr, tr] = average_products(rev, 0);
  CHECK((s - sr).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((t - tr).cwiseAbs().maxCoeff() < 1e-14);
  DenseMatrix blocked = DenseMatrix::Zero(3, 3);
  for (int b = 0; b < 4; ++b) {
    std::vector<StepRecord> part(log.begin() + 16 * b, log.begin() + 16 * (b + 1));
    blocked += average_products(part, 0).first / 4.0;
  }
  CHECK((s - blocked).cwiseAbs().maxCoeff() < 1e-14);
  // Same order, same bits.
  CHECK(average_products(log, 0).first == s);
}

TEST_CASE("energies_from_ritz") {
  CHECK(energies_from_ritz(std::vector<double>{1.0}, 1e-3)[0] == 0.0);
  CHECK(energies_from_ritz(std::vector<double>{0.0}, 1e-3)[0] == doctest::Approx(1000.0));
  RandomStream rng(10);
  for (int i = 0; i < 100; ++i) {
    const double e = 2000.0 * (rng.uniform() - 0.5);
    const double lambda = 1.0 - 1e-3 * e;
    CHECK(std::abs(energies_from_ritz(std::vector<double>{lambda}, 1e-3)[0] - e) < 1e-12 * 1000.0);
  }
  CHECK_THROWS(energies_from_ritz(std::vector<double>{1.0}, 0.0));
}

TEST_CASE("match_eigenpairs follows vectors, not values") {
  DenseMatrix s = DenseMatrix::Zero(2, 2);
  s.diagonal() << 2.0, 1.0;
  const auto ref = solve_ritz(s, DenseMatrix::Identity(2, 2));
  DenseMatrix s2 = DenseMatrix::Zero(2, 2);
  s2.diagonal() << 0.5, 3.0;  // eigenvalues crossed
  const auto inst = solve_ritz(s2, DenseMatrix::Identity(2, 2));
  const auto map =
      match_eigenpairs(inst, ref, DenseMatrix::Identity(2, 2), DenseMatrix::Identity(2, 2));
  CHECK(map == std::vector<std::size_t>{1, 0});
}

TEST_CASE("match_eigenpairs ignores the coordinates of the iterate") {
  // (S M, T M) is the same pencil seen through a different iterate basis.
  RandomStream rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const DenseMatrix t = testing::random_dense(4, 4, rng);
    DenseMatrix s = t * testing::random_symmetric(4, rng);
    const auto ref = solve_ritz(s, t);
    if (ref.has_complex) {
      continue;
    }
    DenseMatrix mix = testing::random_dense(4, 4, rng);
    mix.col(1) *= 1e6;
    mix.col(3) *= 1e-6;
    const auto inst = solve_ritz(s * mix, t * mix);
    const auto map = match_eigenpairs(inst, ref, t * mix, t);
    for (std::size_t r = 0; r < 4; ++r) {
      CHECK(map[r] == r);
    }
  }
}

}  // TEST_SUITE
