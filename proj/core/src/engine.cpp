#include "rsi/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "rsi/compression.hpp"
#include "rsi/errors.hpp"

namespace rsi {

namespace {

// Gram-matrix eigenvalue ratio below which U is treated as rank deficient
// (a condition number of U above 1e7).
constexpr double kGramRankTol = 1e-14;

}  // namespace

TrialSubspace::TrialSubspace(const SparseColumnMatrix& a, DenseMatrix basis)
    : basis_(std::move(basis)) {
  if (!a.square()) {
    throw std::invalid_argument("trial subspace: A must be square");
  }
  if (static_cast<std::size_t>(basis_.rows()) != a.rows()) {
    throw std::invalid_argument("trial subspace: U has " + std::to_string(basis_.rows()) +
                                " rows but A is " + std::to_string(a.rows()));
  }
  if (basis_.cols() < 1 || basis_.cols() > basis_.rows()) {
    throw std::invalid_argument("trial subspace: need 1 <= k <= n");
  }
  if (!basis_.allFinite()) {
    throw std::invalid_argument("trial subspace: U has non-finite entries");
  }
  const Eigen::MatrixXd gram = basis_.transpose() * basis_;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo <= kGramRankTol * hi) {
    throw std::invalid_argument("trial subspace: U is rank deficient");
  }

  adjoint_ = basis_.transpose();
  const auto k = basis_.cols();
  image_adjoint_ = DenseMatrix::Zero(k, basis_.rows());
  for (std::size_t j = 0; j < a.cols(); ++j) {
    const auto& col = a.column(j);
    auto idx = col.indices();
    auto val = col.values();
    for (std::size_t p = 0; p < idx.size(); ++p) {
      for (Eigen::Index r = 0; r < k; ++r) {
        image_adjoint_(r, static_cast<Eigen::Index>(j)) +=
            basis_(static_cast<Eigen::Index>(idx[p]), r) * val[p];
      }
    }
  }
}

DenseMatrix diagonal_trial_basis(const SparseColumnMatrix& a, std::size_t k) {
  if (!a.square() || k < 1 || k > a.rows()) {
    throw std::invalid_argument("diagonal trial basis: need square A and 1 <= k <= n");
  }
  const auto diag = a.diagonal();
  std::vector<std::size_t> order(diag.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return diag[x] > diag[y]; });
  DenseMatrix u = DenseMatrix::Zero(static_cast<Eigen::Index>(a.rows()),
                                    static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    u(static_cast<Eigen::Index>(order[j]), static_cast<Eigen::Index>(j)) = 1.0;
  }
  return u;
}

std::vector<SparseVector> GMatrix::apply_inverse(std::span<const SparseVector> y) const {
  if (y.size() != n.size()) {
    throw std::invalid_argument("G: block has wrong column count");
  }
  std::vector<SparseVector> out;
  out.reserve(y.size());
  if (kind == Kind::plain) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      out.push_back(y[j].scaled(1.0 / n[j]));
    }
    return out;
  }
  const DenseMatrix c = inverse();
  std::vector<double> coeff(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) {
    for (std::size_t a = 0; a < y.size(); ++a) {
      coeff[a] = c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j));
    }
    out.push_back(linear_combination(y, coeff));
  }
  return out;
}

DenseMatrix GMatrix::inverse() const {
  const auto k = static_cast<Eigen::Index>(n.size());
  DenseMatrix out = DenseMatrix::Zero(k, k);
  if (kind == Kind::plain) {
    for (Eigen::Index j = 0; j < k; ++j) {
      out(j, j) = 1.0 / n[static_cast<std::size_t>(j)];
    }
    return out;
  }
  // R^{-1} D^{-1} N^{-1}
  const DenseMatrix r_inv = r.triangularView<Eigen::Upper>().solve(DenseMatrix::Identity(k, k));
  for (Eigen::Index j = 0; j < k; ++j) {
    const double s = 1.0 / (d[static_cast<std::size_t>(j)] * n[static_cast<std::size_t>(j)]);
    out.col(j) = r_inv.col(j) * s;
  }
  return out;
}

TrajectoryAccumulator::TrajectoryAccumulator(std::size_t k, std::size_t burn_in, bool keep_log)
    : k_(k),
      burn_in_(burn_in),
      keep_log_(keep_log),
      sum_s_(DenseMatrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))),
      sum_t_(DenseMatrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))) {}

void TrajectoryAccumulator::record(std::size_t iteration, StepRecord record) {
  const auto k = static_cast<Eigen::Index>(k_);
  if (record.s.rows() != k || record.s.cols() != k || record.t.rows() != k ||
      record.t.cols() != k) {
    throw std::invalid_argument("accumulator: record has the wrong shape");
  }
  if (iteration >= burn_in_) {
    sum_s_ += record.s;
    sum_t_ += record.t;
    ++count_;
  }
  ++iterations_;
  if (keep_log_) {
    log_.push_back(std::move(record));
  }
}

DenseMatrix TrajectoryAccumulator::mean_s() const {
  if (count_ == 0) {
    throw std::logic_error("accumulator: no post-burn-in iterations");
  }
  return sum_s_ / static_cast<double>(count_);
}

DenseMatrix TrajectoryAccumulator::mean_t() const {
  if (count_ == 0) {
    throw std::logic_error("accumulator: no post-burn-in iterations");
  }
  return sum_t_ / static_cast<double>(count_);
}

Trajectory init_trajectory(std::shared_ptr<const SparseColumnMatrix> a, DenseMatrix basis,
                           std::optional<std::vector<SparseVector>> x0, EngineConfig config) {
  if (!a) {
    throw std::invalid_argument("init_trajectory: null matrix");
  }
  if (config.m < 1) {
    throw std::invalid_argument("init_trajectory: m must be at least 1");
  }
  if (!(config.alpha >= 0.0 && config.alpha <= 1.0)) {
    throw std::invalid_argument("init_trajectory: alpha must lie in [0, 1]");
  }
  if (config.burn_in > config.total_iters) {
    throw std::invalid_argument("init_trajectory: burn_in exceeds total_iters");
  }
  if (config.shards.count < 1) {
    throw std::invalid_argument("init_trajectory: shard count must be at least 1");
  }
  auto trial = std::make_shared<const TrialSubspace>(*a, std::move(basis));
  const std::size_t n = a->rows();
  const std::size_t k = trial->k();

  Trajectory t;
  t.matrix = a;
  t.trial = trial;
  t.config = config;
  t.workspace = SparseAccumulator(n);
  if (x0) {
    if (x0->size() != k) {
      throw std::invalid_argument("init_trajectory: X0 has " + std::to_string(x0->size()) +
                                  " columns, expected " + std::to_string(k));
    }
    for (std::size_t j = 0; j < k; ++j) {
      if ((*x0)[j].dim() != n) {
        throw std::invalid_argument("init_trajectory: X0 column dimension mismatch");
      }
      if ((*x0)[j].empty()) {
        throw std::invalid_argument("init_trajectory: X0 column " + std::to_string(j) +
                                    " is zero");
      }
    }
    t.iterate.columns = std::move(*x0);
  } else {
    const auto& u = trial->basis();
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<double> col(n);
      for (std::size_t i = 0; i < n; ++i) {
        col[i] = u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
      t.iterate.columns.push_back(SparseVector::from_dense(col));
      if (t.iterate.columns.back().empty()) {
        throw std::invalid_argument("init_trajectory: U column is zero");
      }
    }
  }
  t.iterate.norm_state.assign(k, 1.0);
  t.iterate.iteration = 0;
  return t;
}

std::vector<double> update_norm_state(std::span<const double> n_prev,
                                      std::span<const double> norms_curr,
                                      std::span<const double> norms_prev, double alpha) {
  if (n_prev.size() != norms_curr.size() || n_prev.size() != norms_prev.size()) {
    throw std::invalid_argument("update_norm_state: length mismatch");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("update_norm_state: alpha must lie in [0, 1]");
  }
  std::vector<double> out(n_prev.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (norms_curr[j] == 0.0) {
      throw DeadColumn("column " + std::to_string(j) + " collapsed to zero", j);
    }
    if (!(norms_curr[j] > 0.0) || !(norms_prev[j] > 0.0) || !(n_prev[j] > 0.0)) {
      throw std::invalid_argument("update_norm_state: norms must be positive");
    }
    out[j] = std::pow(norms_curr[j] / norms_prev[j], alpha) * std::pow(n_prev[j], 1.0 - alpha);
    if (!std::isfinite(out[j]) || !(out[j] > 0.0)) {
      throw std::invalid_argument("update_norm_state: normalization left the finite range");
    }
  }
  return out;
}

GMatrix build_g_plain(std::span<const double> n) {
  GMatrix g;
  g.kind = GMatrix::Kind::plain;
  g.n.assign(n.begin(), n.end());
  return g;
}

GMatrix build_g_orthogonalizing(const DenseMatrix& s, std::span<const SparseVector> phi,
                                std::span<const double> n, double singular_tol) {
  const auto k = static_cast<Eigen::Index>(n.size());
  if (s.rows() != k || s.cols() != k || phi.size() != n.size()) {
    throw std::invalid_argument("build_g_orthogonalizing: shape mismatch");
  }
  const auto [lo, hi] = equilibrated_singular_range(s);
  if (!(hi > 0.0) || lo <= singular_tol * hi) {
    std::ostringstream msg;
    msg << "insufficient sampling: U*A Phi(X) is singular at an orthogonalization step"
        << " (smallest singular value " << lo << ", largest " << hi << ")";
    throw InsufficientSampling(msg.str(), lo, hi);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(s)};
  DenseMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < k; ++i) {
    if (r(i, i) < 0.0) {
      r.row(i) *= -1.0;
    }
  }
  const DenseMatrix r_inv = r.triangularView<Eigen::Upper>().solve(DenseMatrix::Identity(k, k));

  GMatrix g;
  g.kind = GMatrix::Kind::orthogonalizing;
  g.n.assign(n.begin(), n.end());
  g.d.resize(n.size());
  std::vector<double> coeff(n.size());
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index a = 0; a < k; ++a) {
      coeff[static_cast<std::size_t>(a)] = r_inv(a, j);
    }
    const double num = col_norm1(linear_combination(phi, coeff));
    const double den = col_norm1(phi[static_cast<std::size_t>(j)]);
    if (!(num > 0.0) || !(den > 0.0)) {
      throw DeadColumn("column " + std::to_string(j) + " vanished during orthogonalization",
                       static_cast<std::size_t>(j));
    }
    g.d[static_cast<std::size_t>(j)] = num / den;
  }
  g.r = std::move(r);
  return g;
}

StepRecord step(Trajectory& state, const RandomStream& root) {
  const auto& a = *state.matrix;
  const auto& trial = *state.trial;
  const auto& cfg = state.config;
  auto& x = state.iterate;
  const std::size_t k = x.columns.size();
  const std::size_t i = x.iteration;
  const CompressionBudget budget(cfg.m);
  const RandomStream iteration_stream = root.split(i);

  StepRecord rec;
  rec.s = DenseMatrix(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  rec.t = DenseMatrix(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  rec.norms.resize(k);

  std::vector<SparseVector> phi;
  phi.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    rec.norms[j] = col_norm1(x.columns[j]);
    RandomStream stream = iteration_stream.split(j);
    if (cfg.shards.count > 1) {
      const auto shards = partition(x.columns[j], cfg.shards);
      phi.push_back(sharded_compress(shards, budget, stream).result);
    } else {
      phi.push_back(compress(x.columns[j], budget, stream));
    }
    rec.s.col(static_cast<Eigen::Index>(j)) = project(trial.image_adjoint(), phi[j]);
    rec.t.col(static_cast<Eigen::Index>(j)) = project(trial.adjoint(), x.columns[j]);
  }

  std::vector<SparseVector> y;
  y.reserve(k);
  std::vector<double> norms_next(k);
  for (std::size_t j = 0; j < k; ++j) {
    y.push_back(spmv(a, phi[j], state.workspace));
    norms_next[j] = col_norm1(y[j]);
    if (norms_next[j] == 0.0) {
      throw DeadColumn("iteration " + std::to_string(i) + ": column " + std::to_string(j) +
                           " collapsed to zero",
                       j);
    }
  }

  x.norm_state = update_norm_state(x.norm_state, norms_next, rec.norms, cfg.alpha);
  const bool orthogonalize = cfg.ortho_period > 0 && i % cfg.ortho_period == 0;
  const GMatrix g = orthogonalize
                        ? build_g_orthogonalizing(rec.s, phi, x.norm_state, cfg.singular_tol)
                        : build_g_plain(x.norm_state);
  x.columns = g.apply_inverse(y);
  ++x.iteration;
  return rec;
}

RunResult run(Trajectory& state, const StepObserver& observer, bool keep_log) {
  const RandomStream root(state.config.seed);
  RunResult result{TrajectoryAccumulator(state.iterate.columns.size(), state.config.burn_in,
                                         keep_log),
                   {},
                   {}};
  result.min_singular_t.reserve(state.config.total_iters);
  for (std::size_t it = 0; it < state.config.total_iters; ++it) {
    const std::size_t i = state.iterate.iteration;
    StepRecord rec = step(state, root);
    result.min_singular_t.push_back(equilibrated_singular_range(rec.t).first);
    if (observer) {
      observer(i, rec);
    }
    result.accumulator.record(i, std::move(rec));
  }
  result.final_state = state.iterate;
  return result;
}

}  // namespace rsi
