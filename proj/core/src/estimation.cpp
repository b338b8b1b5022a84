#include "rsi/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "rsi/errors.hpp"

namespace rsi {

std::vector<double> RitzSolution::real_values() const {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = values[i].real();
  }
  return out;
}

std::pair<double, double> singular_range(const DenseMatrix& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd{Eigen::MatrixXd(m)};
  const auto& sv = svd.singularValues();
  return {sv.minCoeff(), sv.maxCoeff()};
}

std::pair<double, double> equilibrated_singular_range(const DenseMatrix& m) {
  Eigen::MatrixXd scaled(m);
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    const double norm = scaled.col(j).norm();
    if (norm == 0.0) {
      return {0.0, singular_range(m).second};
    }
    scaled.col(j) /= norm;
  }
  return singular_range(scaled);
}

RitzSolution solve_ritz(const DenseMatrix& s, const DenseMatrix& t, double singular_tol) {
  const auto k = s.rows();
  if (k < 1 || s.cols() != k || t.rows() != k || t.cols() != k) {
    throw std::invalid_argument("solve_ritz: S and T must be square and of equal size");
  }
  if (!s.allFinite() || !t.allFinite()) {
    throw std::invalid_argument("solve_ritz: non-finite input");
  }
  const auto [lo, hi] = equilibrated_singular_range(t);
  if (!(hi > 0.0) || lo <= singular_tol * hi) {
    std::ostringstream msg;
    msg << "insufficient sampling: U*X is singular (smallest singular value " << lo
        << ", largest " << hi << ")";
    throw InsufficientSampling(msg.str(), lo, hi);
  }

  // Column scaling of the iterate scales S and T alike; undo it before the
  // unbalanced eigensolver sees the pencil. w = D w_scaled.
  // Powers of two keep the rescaling exact.
  Eigen::VectorXd d(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    d[j] = std::exp2(-std::round(std::log2(t.col(j).norm())));
  }
  const Eigen::MatrixXd ts = Eigen::MatrixXd(t) * d.asDiagonal();
  const Eigen::MatrixXd ts_inv = ts.partialPivLu().inverse();
  const Eigen::MatrixXd m = ts_inv * (Eigen::MatrixXd(s) * d.asDiagonal());
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, true);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("solve_ritz: eigen-decomposition did not converge");
  }
  const Eigen::VectorXcd vals = es.eigenvalues();
  Eigen::MatrixXcd vecs = es.eigenvectors();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (vals[a].real() != vals[b].real()) {
      return vals[a].real() > vals[b].real();
    }
    return vals[a].imag() > vals[b].imag();
  });

  RitzSolution sol;
  sol.min_singular_t = lo;
  sol.max_singular_t = hi;
  sol.right.resize(k, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::Index src = order[static_cast<std::size_t>(c)];
    sol.values.push_back(vals[src]);
    if (vals[src].imag() != 0.0) {
      sol.has_complex = true;
    }
    Eigen::VectorXcd w = d.cast<std::complex<double>>().asDiagonal() * vecs.col(src);
    w /= w.norm();
    Eigen::Index big = 0;
    for (Eigen::Index i = 1; i < k; ++i) {
      if (std::abs(w[i]) > std::abs(w[big])) {
        big = i;
      }
    }
    w *= std::conj(w[big]) / std::abs(w[big]);
    w[big] = std::abs(w[big]);
    sol.right.col(c) = w;
  }
  // Z* = W^{-1} T^{-1} = (D^{-1} W)^{-1} (T D)^{-1}.
  const Eigen::MatrixXcd unscaled = d.cwiseInverse().cast<std::complex<double>>().asDiagonal() *
                                    sol.right;
  const Eigen::MatrixXcd z_adj = unscaled.inverse() * ts_inv.cast<std::complex<double>>();
  sol.left = z_adj.adjoint();
  return sol;
}

RitzSolution instantaneous_ritz(const DenseMatrix& s, const DenseMatrix& t,
                                double singular_tol) {
  return solve_ritz(s, t, singular_tol);
}

namespace {

std::complex<double> bilinear(const Eigen::VectorXcd& z, const DenseMatrix& m,
                              const Eigen::VectorXcd& w) {
  return z.adjoint() * (m.cast<std::complex<double>>() * w);
}

void check_log(std::span<const StepRecord> log, std::size_t burn_in) {
  if (log.size() <= burn_in) {
    throw std::invalid_argument("log has " + std::to_string(log.size()) +
                                " iterations, not more than burn_in " + std::to_string(burn_in));
  }
}

}  // namespace

std::vector<double> f_statistic(std::span<const StepRecord> log, std::size_t burn_in,
                                const RitzSolution& solution, std::size_t index) {
  check_log(log, burn_in);
  if (index >= solution.k()) {
    throw std::invalid_argument("f_statistic: eigenpair index out of range");
  }
  const Eigen::VectorXcd w = solution.right.col(static_cast<Eigen::Index>(index));
  const Eigen::VectorXcd z = solution.left.col(static_cast<Eigen::Index>(index));
  const std::complex<double> lambda = solution.values[index];
  std::vector<double> f;
  f.reserve(log.size() - burn_in);
  for (std::size_t i = burn_in; i < log.size(); ++i) {
    const auto zs = bilinear(z, log[i].s, w);
    const auto zt = bilinear(z, log[i].t, w);
    f.push_back((zs - lambda * zt).real());
  }
  return f;
}

Autocorrelation integrated_autocorrelation(std::span<const double> series,
                                           double window_constant) {
  const std::size_t n = series.size();
  if (n < kMinSeriesLength) {
    throw std::invalid_argument("integrated_autocorrelation: need at least " +
                                std::to_string(kMinSeriesLength) + " samples, got " +
                                std::to_string(n));
  }
  if (!(window_constant > 0.0)) {
    throw std::invalid_argument("integrated_autocorrelation: window constant must be positive");
  }
  double mean = 0.0;
  for (double v : series) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("integrated_autocorrelation: non-finite sample");
    }
    mean += v;
  }
  mean /= static_cast<double>(n);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) {
    centered[i] = series[i] - mean;
  }
  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) {
      acc += centered[i] * centered[i + lag];
    }
    return acc / static_cast<double>(n);
  };

  Autocorrelation out;
  const double c0 = autocov(0);
  out.variance = c0;
  if (c0 == 0.0) {
    out.zero_variance = true;
    return out;
  }
  double tau = 1.0;
  const std::size_t max_window = n / 2;
  std::size_t w = 1;
  for (; w <= max_window; ++w) {
    tau += 2.0 * autocov(w) / c0;
    if (static_cast<double>(w) >= window_constant * tau) {
      break;
    }
  }
  out.window = std::min(w, max_window);
  out.tau = std::max(tau, 1.0);
  return out;
}

ErrorReport standard_errors(std::span<const StepRecord> log, std::size_t burn_in,
                            const RitzSolution& solution, double eps, double window_constant) {
  check_log(log, burn_in);
  if (!(eps > 0.0)) {
    throw std::invalid_argument("standard_errors: eps must be positive");
  }
  ErrorReport report;
  report.samples = log.size() - burn_in;
  report.burn_in = burn_in;
  report.eps = eps;
  report.window_constant = window_constant;
  report.min_singular_t = solution.min_singular_t;
  report.max_singular_t = solution.max_singular_t;
  report.has_complex = solution.has_complex;
  const double n = static_cast<double>(report.samples);

  for (std::size_t k = 0; k < solution.k(); ++k) {
    const auto f = f_statistic(log, burn_in, solution, k);
    const Eigen::VectorXcd w = solution.right.col(static_cast<Eigen::Index>(k));
    const Eigen::VectorXcd z = solution.left.col(static_cast<Eigen::Index>(k));
    std::complex<double> denom = 0.0;
    for (std::size_t i = burn_in; i < log.size(); ++i) {
      denom += bilinear(z, log[i].t, w);
    }
    denom /= n;

    const auto ac = integrated_autocorrelation(f, window_constant);
    EigenEstimate e;
    e.lambda = solution.values[k].real();
    e.lambda_imag = solution.values[k].imag();
    e.energy = (1.0 - e.lambda) / eps;
    e.tau = ac.tau;
    e.window = ac.window;
    e.zero_variance = ac.zero_variance;
    e.n_eff = n / ac.tau;
    e.stderr_lambda = std::sqrt(ac.variance) * std::sqrt(ac.tau / n) / std::abs(denom);
    e.stderr_energy = e.stderr_lambda / eps;
    report.estimates.push_back(e);
  }
  return report;
}

std::pair<DenseMatrix, DenseMatrix> average_products(std::span<const StepRecord> log,
                                                     std::size_t burn_in) {
  check_log(log, burn_in);
  const auto k = log[burn_in].s.rows();
  DenseMatrix s = DenseMatrix::Zero(k, k);
  DenseMatrix t = DenseMatrix::Zero(k, k);
  for (std::size_t i = burn_in; i < log.size(); ++i) {
    s += log[i].s;
    t += log[i].t;
  }
  const double n = static_cast<double>(log.size() - burn_in);
  return {s / n, t / n};
}

std::vector<double> energies_from_ritz(std::span<const double> lambda, double eps) {
  if (!(eps > 0.0)) {
    throw std::invalid_argument("energies_from_ritz: eps must be positive");
  }
  std::vector<double> out(lambda.size());
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    out[i] = (1.0 - lambda[i]) / eps;
  }
  return out;
}

std::vector<std::size_t> match_eigenpairs(const RitzSolution& instantaneous,
                                          const RitzSolution& reference,
                                          const DenseMatrix& t_instantaneous,
                                          const DenseMatrix& t_reference) {
  const std::size_t k = reference.k();
  if (instantaneous.k() != k) {
    throw std::invalid_argument("match_eigenpairs: solutions differ in size");
  }
  const auto ki = static_cast<Eigen::Index>(k);
  if (t_instantaneous.rows() != ki || t_instantaneous.cols() != ki ||
      t_reference.rows() != ki || t_reference.cols() != ki) {
    throw std::invalid_argument("match_eigenpairs: T must be k x k");
  }
  const Eigen::MatrixXcd images = t_instantaneous.cast<std::complex<double>>() * instantaneous.right;
  const Eigen::MatrixXcd basis = t_reference.cast<std::complex<double>>() * reference.right;
  const Eigen::MatrixXcd coeff = reference.left.adjoint() * images;
  Eigen::MatrixXd weight(ki, ki);
  for (Eigen::Index c = 0; c < ki; ++c) {
    const double image_norm = images.col(c).norm();
    for (Eigen::Index r = 0; r < ki; ++r) {
      weight(r, c) = image_norm > 0.0 ? std::abs(coeff(r, c)) * basis.col(r).norm() / image_norm
                                      : 0.0;
    }
  }
  std::vector<std::size_t> out(k, 0);
  std::vector<char> row_done(k, 0);
  std::vector<char> col_done(k, 0);
  for (std::size_t step = 0; step < k; ++step) {
    double best = -1.0;
    std::size_t br = 0;
    std::size_t bc = 0;
    for (std::size_t r = 0; r < k; ++r) {
      for (std::size_t c = 0; c < k && !row_done[r]; ++c) {
        const double w = weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        if (!col_done[c] && w > best) {
          best = w;
          br = r;
          bc = c;
        }
      }
    }
    row_done[br] = 1;
    col_done[bc] = 1;
    out[br] = bc;
  }
  return out;
}

}  // namespace rsi
