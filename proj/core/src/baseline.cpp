#include "rsi/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "rsi/compression.hpp"
#include "rsi/errors.hpp"
#include "rsi/estimation.hpp"

namespace rsi {

namespace {

constexpr double kGramRankTol = 1e-14;
constexpr double kDependenceTol = 1e-8;

}  // namespace

std::vector<double> solve_quadratic(const DenseMatrix& p, const DenseMatrix& q, bool symmetric) {
  const Eigen::MatrixXd qd(q);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram(qd, Eigen::EigenvaluesOnly);
  const double lo = gram.eigenvalues().minCoeff();
  const double hi = gram.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo <= kGramRankTol * hi) {
    std::ostringstream msg;
    msg << "insufficient sampling: Gram matrix of the compressed iterate is rank deficient"
        << " (eigenvalues " << lo << " to " << hi << ")";
    throw InsufficientSampling(msg.str(), std::sqrt(std::max(lo, 0.0)), std::sqrt(hi));
  }
  std::vector<double> out;
  if (symmetric) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(p), qd,
                                                                 Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
      throw std::runtime_error("quadratic_ritz: eigensolver failed");
    }
    const auto& v = es.eigenvalues();
    out.assign(v.data(), v.data() + v.size());
    std::sort(out.begin(), out.end(), std::greater<>());
  } else {
    out = solve_ritz(p, q).real_values();
  }
  return out;
}

QuadraticRitz quadratic_ritz(std::span<const SparseVector> xc, std::span<const SparseVector> axc,
                             bool symmetric) {
  const std::size_t k = xc.size();
  if (k == 0 || axc.size() != k) {
    throw std::invalid_argument("quadratic_ritz: empty or mismatched block");
  }
  const auto kk = static_cast<Eigen::Index>(k);
  QuadraticRitz out{{}, DenseMatrix(kk, kk), DenseMatrix(kk, kk)};
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      out.p(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = dot(xc[a], axc[b]);
    }
    for (std::size_t b = a; b < k; ++b) {
      const double v = dot(xc[a], xc[b]);
      out.q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
      out.q(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
    }
  }
  if (symmetric) {
    const DenseMatrix sym = 0.5 * (out.p + out.p.transpose());
    out.p = sym;
  }
  out.values = solve_quadratic(out.p, out.q, symmetric);
  return out;
}

QuadraticRitz quadratic_ritz(std::span<const SparseVector> xc, const SparseColumnMatrix& a) {
  std::vector<SparseVector> axc;
  axc.reserve(xc.size());
  SparseAccumulator ws(a.rows());
  for (const auto& x : xc) {
    axc.push_back(spmv(a, x, ws));
  }
  return quadratic_ritz(xc, axc, a.symmetric());
}

NonlinearState init_nonlinear(std::shared_ptr<const SparseColumnMatrix> a,
                              std::vector<SparseVector> x0, EngineConfig config) {
  if (!a || !a->square()) {
    throw std::invalid_argument("init_nonlinear: need a square matrix");
  }
  if (config.m < 1) {
    throw std::invalid_argument("init_nonlinear: m must be at least 1");
  }
  if (config.burn_in > config.total_iters) {
    throw std::invalid_argument("init_nonlinear: burn_in exceeds total_iters");
  }
  if (x0.empty()) {
    throw std::invalid_argument("init_nonlinear: need at least one column");
  }
  for (std::size_t j = 0; j < x0.size(); ++j) {
    if (x0[j].dim() != a->rows()) {
      throw std::invalid_argument("init_nonlinear: column dimension mismatch");
    }
    if (x0[j].empty()) {
      throw std::invalid_argument("init_nonlinear: column " + std::to_string(j) + " is zero");
    }
  }
  NonlinearState s;
  s.matrix = a;
  s.config = config;
  s.workspace = SparseAccumulator(a->rows());
  s.iterate.norm_state.assign(x0.size(), 1.0);
  s.iterate.columns = std::move(x0);
  return s;
}

std::vector<SparseVector> gram_schmidt(std::span<const SparseVector> columns) {
  std::vector<SparseVector> q;
  q.reserve(columns.size());
  std::vector<double> coeff;
  std::vector<SparseVector> basis_and_v;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    SparseVector v = columns[j];
    const double original = norm2(v);
    for (int pass = 0; pass < 2; ++pass) {
      if (q.empty()) {
        break;
      }
      // Classical Gram-Schmidt, applied twice.
      coeff.assign(q.size() + 1, 0.0);
      for (std::size_t a = 0; a < q.size(); ++a) {
        coeff[a] = -dot(q[a], v);
      }
      coeff[q.size()] = 1.0;
      basis_and_v.assign(q.begin(), q.end());
      basis_and_v.push_back(v);
      v = linear_combination(basis_and_v, coeff);
    }
    const double nv = norm2(v);
    if (!(nv > kDependenceTol * original)) {
      throw InsufficientSampling("gram_schmidt: column " + std::to_string(j) +
                                     " is linearly dependent on earlier columns",
                                 nv, original);
    }
    q.push_back(v.scaled(1.0 / nv));
  }
  return q;
}

NonlinearRecord nonlinear_step(NonlinearState& state, const RandomStream& root) {
  const auto& a = *state.matrix;
  const auto& cfg = state.config;
  auto& x = state.iterate;
  const std::size_t k = x.columns.size();
  const std::size_t i = x.iteration;
  const CompressionBudget budget(cfg.m);
  const RandomStream iteration_stream = root.split(i);

  NonlinearRecord rec;
  rec.products.norms.resize(k);
  std::vector<SparseVector> phi;
  phi.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    rec.products.norms[j] = col_norm1(x.columns[j]);
    RandomStream stream = iteration_stream.split(j);
    if (cfg.shards.count > 1) {
      phi.push_back(sharded_compress(partition(x.columns[j], cfg.shards), budget, stream).result);
    } else {
      phi.push_back(compress(x.columns[j], budget, stream));
    }
  }
  std::vector<SparseVector> y;
  y.reserve(k);
  for (const auto& p : phi) {
    y.push_back(spmv(a, p, state.workspace));
  }
  auto qr = quadratic_ritz(phi, y, a.symmetric());
  rec.products.s = std::move(qr.p);
  rec.products.t = std::move(qr.q);
  rec.ritz = std::move(qr.values);

  const bool orthogonalize = cfg.ortho_period > 0 && i % cfg.ortho_period == 0;
  std::vector<SparseVector> next;
  next.reserve(k);
  if (orthogonalize) {
    for (const auto& col : gram_schmidt(phi)) {
      next.push_back(spmv(a, col, state.workspace));
    }
  } else {
    for (std::size_t j = 0; j < k; ++j) {
      next.push_back(y[j].scaled(1.0 / col_norm1(phi[j])));
    }
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (next[j].empty()) {
      throw DeadColumn("iteration " + std::to_string(i) + ": column " + std::to_string(j) +
                           " collapsed to zero",
                       j);
    }
  }
  x.columns = std::move(next);
  ++x.iteration;
  return rec;
}

AveragedVariants averaged_variants(std::span<const NonlinearRecord> log, std::size_t burn_in,
                                   bool symmetric) {
  if (log.size() <= burn_in) {
    throw std::invalid_argument("averaged_variants: nothing left after burn_in");
  }
  const std::size_t k = log[burn_in].ritz.size();
  const auto kk = static_cast<Eigen::Index>(k);
  AveragedVariants out;
  out.mean_of_ritz.assign(k, 0.0);
  out.best.assign(k, -std::numeric_limits<double>::infinity());
  DenseMatrix p = DenseMatrix::Zero(kk, kk);
  DenseMatrix q = DenseMatrix::Zero(kk, kk);
  for (std::size_t i = burn_in; i < log.size(); ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      out.mean_of_ritz[j] += log[i].ritz[j];
      out.best[j] = std::max(out.best[j], log[i].ritz[j]);
    }
    p += log[i].products.s;
    q += log[i].products.t;
  }
  const double n = static_cast<double>(log.size() - burn_in);
  for (auto& v : out.mean_of_ritz) {
    v /= n;
  }
  out.ritz_of_means = solve_quadratic(p / n, q / n, symmetric);
  return out;
}

NonlinearRunResult run_nonlinear(NonlinearState& state, const NonlinearObserver& observer) {
  const RandomStream root(state.config.seed);
  NonlinearRunResult result;
  result.log.reserve(state.config.total_iters);
  for (std::size_t it = 0; it < state.config.total_iters; ++it) {
    const std::size_t i = state.iterate.iteration;
    auto rec = nonlinear_step(state, root);
    if (observer) {
      observer(i, rec);
    }
    result.log.push_back(std::move(rec));
  }
  result.final_state = state.iterate;
  return result;
}

}  // namespace rsi
