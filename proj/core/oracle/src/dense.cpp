#include "rsi/oracle/dense.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace rsi::oracle {

Spectrum dense_eigh(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("dense_eigh: matrix is not square");
  }
  if (static_cast<std::size_t>(a.rows()) > kDenseLimit) {
    throw std::invalid_argument("dense_eigh: n exceeds the dense limit");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-14 * scale) {
    throw std::invalid_argument("dense_eigh: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("dense_eigh: eigensolver failed");
  }
  Spectrum out;
  out.eigenvalues.assign(es.eigenvalues().data(),
                         es.eigenvalues().data() + es.eigenvalues().size());
  out.eigenvectors = es.eigenvectors();
  return out;
}

double max_residual(const Eigen::MatrixXd& a, const Spectrum& spectrum) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < spectrum.eigenvectors.cols(); ++j) {
    const Eigen::VectorXd v = spectrum.eigenvectors.col(j);
    worst = std::max(worst,
                     (a * v - spectrum.eigenvalues[static_cast<std::size_t>(j)] * v).norm());
  }
  return worst;
}

namespace {

Eigen::VectorXd column_l1(const Eigen::MatrixXd& x) { return x.cwiseAbs().colwise().sum(); }

std::vector<double> descending_real_eigs(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  std::vector<double> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out.push_back(es.eigenvalues()[i].real());
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

}  // namespace

DeterministicTrace deterministic_subspace_iteration(const Eigen::MatrixXd& a,
                                                    const Eigen::MatrixXd& u,
                                                    const Eigen::MatrixXd& x0, std::size_t iters,
                                                    double alpha, std::size_t ortho_period) {
  const Eigen::Index k = u.cols();
  if (a.rows() != a.cols() || u.rows() != a.rows() || x0.rows() != a.rows() || x0.cols() != k) {
    throw std::invalid_argument("deterministic_subspace_iteration: shape mismatch");
  }
  DeterministicTrace out;
  Eigen::MatrixXd x = x0;
  Eigen::VectorXd n = Eigen::VectorXd::Ones(k);
  const Eigen::MatrixXd ut = u.transpose();
  for (std::size_t i = 0; i < iters; ++i) {
    const Eigen::MatrixXd y = a * x;
    const Eigen::MatrixXd t = ut * x;
    const Eigen::MatrixXd s = ut * y;
    out.t.push_back(t);
    out.s.push_back(s);
    out.ritz.push_back(descending_real_eigs(t.fullPivLu().solve(s)));

    const Eigen::VectorXd prev = column_l1(x);
    const Eigen::VectorXd curr = column_l1(y);
    for (Eigen::Index j = 0; j < k; ++j) {
      n[j] = std::pow(curr[j] / prev[j], alpha) * std::pow(n[j], 1.0 - alpha);
    }
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(k, k);
    if (ortho_period > 0 && i % ortho_period == 0) {
      // S^T S = R^T R with R upper triangular, positive diagonal.
      const Eigen::MatrixXd gram = s.transpose() * s;
      Eigen::LLT<Eigen::MatrixXd> llt(gram);
      if (llt.info() != Eigen::Success) {
        throw std::runtime_error("deterministic_subspace_iteration: S is singular");
      }
      const Eigen::MatrixXd r = llt.matrixU();
      const Eigen::MatrixXd r_inv = r.inverse();
      const Eigen::VectorXd d =
          column_l1(x * r_inv).cwiseQuotient(column_l1(x));
      c = r_inv * d.cwiseInverse().asDiagonal();
    }
    x = y * c * n.cwiseInverse().asDiagonal();
  }
  out.final_iterate = x;
  return out;
}

std::vector<std::vector<double>> classical_subspace_iteration(const Eigen::MatrixXd& a,
                                                              const Eigen::MatrixXd& x0,
                                                              std::size_t iters,
                                                              std::size_t ortho_period) {
  std::vector<std::vector<double>> out;
  Eigen::MatrixXd x = x0;
  const Eigen::Index k = x.cols();
  for (std::size_t i = 0; i < iters; ++i) {
    const Eigen::MatrixXd q = x.transpose() * x;
    Eigen::MatrixXd p = x.transpose() * a * x;
    p = 0.5 * (p + p.transpose()).eval();
    // Reduce to a standard problem with the Cholesky factor of q.
    Eigen::LLT<Eigen::MatrixXd> llt(q);
    const Eigen::MatrixXd l_inv = Eigen::MatrixXd(llt.matrixL()).inverse();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l_inv * p * l_inv.transpose(),
                                                      Eigen::EigenvaluesOnly);
    std::vector<double> vals(es.eigenvalues().data(), es.eigenvalues().data() + k);
    std::sort(vals.begin(), vals.end(), std::greater<>());
    out.push_back(std::move(vals));

    if (ortho_period > 0 && i % ortho_period == 0) {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
      Eigen::MatrixXd qthin = qr.householderQ() * Eigen::MatrixXd::Identity(x.rows(), k);
      const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
      for (Eigen::Index j = 0; j < k; ++j) {
        if (r(j, j) < 0.0) {
          qthin.col(j) *= -1.0;
        }
      }
      x = a * qthin;
    } else {
      x = a * x * column_l1(x).cwiseInverse().asDiagonal();
    }
  }
  return out;
}

namespace {

struct Item {
  std::size_t index;
  double p;
};

struct Walker {
  std::vector<double> marginals;
  PivotalEnumeration* out;

  void leaf(const std::vector<std::size_t>& chosen, double weight) {
    out->total_weight += weight;
    ++out->branches;
    out->min_size = std::min(out->min_size, chosen.size());
    out->max_size = std::max(out->max_size, chosen.size());
    for (auto i : chosen) {
      marginals[i] += weight;
    }
  }

  void walk(std::vector<Item> items, std::vector<std::size_t> chosen, double weight) {
    if (weight == 0.0) {
      return;
    }
    if (items.empty()) {
      leaf(chosen, weight);
      return;
    }
    // s: the longest prefix whose probabilities sum below one.
    double prefix = 0.0;
    std::size_t s = 0;
    while (s < items.size() && prefix + items[s].p < 1.0) {
      prefix += items[s].p;
      ++s;
    }
    if (s == items.size()) {
      // Leftover mass is either ~0 (done) or ~1 (one more index).
      if (prefix < 0.5) {
        leaf(chosen, weight);
        return;
      }
      for (const auto& it : items) {
        auto next = chosen;
        next.push_back(it.index);
        leaf(next, weight * it.p / prefix);
      }
      return;
    }
    const double a = 1.0 - prefix;
    const double b = items[s].p - a;
    const double keep = 1.0 - a / (1.0 - b);
    for (std::size_t h = 0; h < s; ++h) {
      const double wh = weight * items[h].p / prefix;
      std::vector<Item> rest(items.begin() + static_cast<std::ptrdiff_t>(s) + 1, items.end());

      std::vector<Item> kept{{items[s].index, b}};
      kept.insert(kept.end(), rest.begin(), rest.end());
      auto with_h = chosen;
      with_h.push_back(items[h].index);
      walk(std::move(kept), std::move(with_h), wh * keep);

      std::vector<Item> swapped{{items[h].index, b}};
      swapped.insert(swapped.end(), rest.begin(), rest.end());
      auto with_next = chosen;
      with_next.push_back(items[s].index);
      walk(std::move(swapped), std::move(with_next), wh * (1.0 - keep));
    }
  }
};

}  // namespace

PivotalEnumeration enumerate_pivotal(const std::vector<double>& p, std::size_t g) {
  if (p.size() > kEnumerationLimit) {
    throw std::invalid_argument("enumerate_pivotal: too many entries to enumerate");
  }
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || v > 1.0 + 1e-12) {
      throw std::invalid_argument("enumerate_pivotal: probabilities must lie in [0, 1]");
    }
    total += v;
  }
  if (std::abs(total - static_cast<double>(g)) > 1e-9) {
    throw std::invalid_argument("enumerate_pivotal: probabilities do not sum to g");
  }
  PivotalEnumeration out;
  out.min_size = static_cast<std::size_t>(-1);
  Walker w{std::vector<double>(p.size(), 0.0), &out};
  std::vector<Item> items;
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] >= 1.0 - 1e-12) {
      chosen.push_back(i);
    } else if (p[i] > 0.0) {
      items.push_back({i, p[i]});
    }
  }
  w.walk(std::move(items), std::move(chosen), 1.0);
  out.marginals = std::move(w.marginals);
  return out;
}

}  // namespace rsi::oracle
