// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Tolerances are pinned below and must not be edited to make a run pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "rsi/compression.hpp"
#include "rsi/estimation.hpp"
#include "rsi/matrix_market.hpp"
#include "rsi/oracle/dense.hpp"
#include "rsi/oracle/synthetic.hpp"
#include "rsi/sharded.hpp"
#include "rsi/workbench/commands.hpp"
#include "rsi/workbench/config.hpp"
#include "test_support.hpp"

using namespace rsi;
namespace fs = std::filesystem;
namespace wb = rsi::workbench;

namespace {

// Pinned tolerances.
constexpr double kSigmas = 4.0;                // criteria 1, 4
constexpr double kMeanUlpFloor = 1e-12;        // criterion 1, preserved entries (relative)
constexpr double kMarginalTol = 1e-10;         // criterion 3
constexpr double kConservationTol = 1e-12;     // criterion 4, sum of adjusted probabilities
constexpr double kDeterministicTol = 1e-8;     // criterion 5, energy units of H
constexpr double kStderrMultiple = 5.0;        // criterion 6
constexpr double kRelativeFloor = 1e-3;        // criterion 6
constexpr double kVariationalSlack = 1e-9;     // criterion 8, times max(1, |E|)
constexpr double kProjectedTol = 1e-10;        // criterion 9, eigenvalues of A
constexpr double kTauTol = 0.20;               // criterion 10, AR(1)
constexpr double kWhiteTauTol = 0.10;          // criterion 10, white noise
constexpr double kSqrtScalingTol = 0.10;       // criterion 10, stderr ratio

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;
int ran = 0;
std::vector<int> only;  // criterion ids from the command line; empty runs all

void report(int id, const char* name, const std::function<Outcome()>& body) {
  if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) {
    return;
  }
  ++ran;
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  failures += o.pass ? 0 : 1;
  std::printf("%s criterion %2d: %s (%s; %.1f s)\n", o.pass ? "PASS" : "FAIL", id, name,
              o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

fs::path workdir() {
  const auto dir = fs::temp_directory_path() / "rsi_acceptance";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// The n = 1000 synthetic problem with k = 5 and the planted 0.9 gap.
wb::RunConfig base_config() {
  wb::RunConfig c;
  c.source = wb::RunConfig::Source::synthetic;
  c.k = 5;
  c.ortho_period = 50;
  c.seed = 7;
  return c;
}

wb::RunConfig stochastic_config() {
  wb::RunConfig c = base_config();
  c.m = 100;
  c.alpha = 0.5;
  c.total_iters = 50000;
  c.burn_in = 20000;
  return c;
}

Outcome unbiasedness() {
  RandomStream gen(101);
  RandomStream rng(102);
  constexpr int kDraws = 100000;
  double worst = 0.0;  // |mean - x| / (4 se + floor)
  for (int v = 0; v < 20; ++v) {
    const auto x = testing::random_sparse(100, 50, gen);
    std::vector<double> sum(100, 0.0);
    std::vector<double> sq(100, 0.0);
    for (int d = 0; d < kDraws; ++d) {
      const auto y = compress(x, CompressionBudget(10), rng);
      const auto idx = y.indices();
      const auto val = y.values();
      for (std::size_t e = 0; e < idx.size(); ++e) {
        sum[idx[e]] += val[e];
        sq[idx[e]] += val[e] * val[e];
      }
    }
    for (std::size_t i = 0; i < 100; ++i) {
      const double mean = sum[i] / kDraws;
      const double var = std::max(sq[i] / kDraws - mean * mean, 0.0);
      const double bound = kSigmas * std::sqrt(var / kDraws) + kMeanUlpFloor * std::abs(x.at(i));
      const double dev = std::abs(mean - x.at(i));
      if (bound == 0.0) {
        if (dev != 0.0) {
          return {false, "zero-variance entry moved"};
        }
        continue;
      }
      worst = std::max(worst, dev / bound);
    }
  }
  return {worst <= 1.0, "worst |mean - x| / bound = " + num(worst)};
}

Outcome exactness() {
  RandomStream gen(201);
  RandomStream rng(202);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(gen.uniform() * 200);
    const std::size_t nnz = static_cast<std::size_t>(gen.uniform() * static_cast<double>(n + 1));
    const std::size_t m = std::max<std::size_t>(1, nnz + static_cast<std::size_t>(gen.uniform() * 5));
    const auto x = testing::random_sparse(n, nnz, gen);
    const auto y = compress(x, CompressionBudget(m), rng);
    if (!(y == x) || y.nnz() != x.nnz() ||
        !std::equal(x.values().begin(), x.values().end(), y.values().begin(),
                    [](double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; })) {
      return {false, "instance " + std::to_string(trial) + " changed"};
    }
  }
  return {true, "1000 instances bit-identical"};
}

Outcome pivotal_marginals() {
  RandomStream gen(301);
  double worst = 0.0;
  std::size_t cases = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t len = 1 + trial % 8;
    std::vector<double> dense(len);
    for (auto& v : dense) {
      // Quantized magnitudes produce ties.
      v = (trial % 3 == 0) ? 1.0 + std::floor(gen.uniform() * 3) : 0.05 + gen.uniform();
    }
    const auto x = SparseVector::from_dense(dense);
    for (std::size_t m = 1; m < len; ++m) {
      const auto plan = select_preserved(x, CompressionBudget(m));
      if (plan.sample_count == 0) {
        continue;
      }
      const auto e = oracle::enumerate_pivotal(plan.probabilities, plan.sample_count);
      if (e.min_size != plan.sample_count || e.max_size != plan.sample_count) {
        return {false, "branch size differs from g"};
      }
      for (std::size_t i = 0; i < plan.probabilities.size(); ++i) {
        worst = std::max(worst, std::abs(e.marginals[i] - plan.probabilities[i]));
      }
      worst = std::max(worst, std::abs(e.total_weight - 1.0));
      ++cases;
    }
  }
  return {worst <= kMarginalTol,
          std::to_string(cases) + " plans, max marginal error " + num(worst)};
}

Outcome sharded_equivalence() {
  // Hand case.
  const std::vector<double> q{0.5, 0.5, 0.5};
  if (adjust_probabilities(q, 0.5, 2, 1.5) != std::vector<double>{1.0, 0.5, 0.5}) {
    return {false, "hand case q' != (1, 0.5, 0.5)"};
  }
  // Conservation on random shards.
  RandomStream gen(401);
  double worst_sum = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t len = 2 + trial % 20;
    std::vector<double> p(len);
    for (auto& v : p) {
      v = 0.02 + 0.9 * gen.uniform();
    }
    const double expected = std::accumulate(p.begin(), p.end(), 0.0);
    const auto fl = static_cast<std::size_t>(std::floor(expected));
    const double residual = expected - static_cast<double>(fl);
    for (std::size_t b : {fl, fl + 1}) {
      if (b == 0 || b > len || (b > fl && residual == 0.0)) {
        continue;
      }
      const auto adj = adjust_probabilities(p, residual, b, expected);
      worst_sum = std::max(worst_sum,
                           std::abs(std::accumulate(adj.begin(), adj.end(), 0.0) - double(b)));
    }
  }
  if (worst_sum > kConservationTol) {
    return {false, "adjusted sum off by " + num(worst_sum)};
  }
  // Budget split and end-to-end mean.
  const auto x = testing::random_sparse(60, 60, gen);
  const auto shards = partition(x, {4, PartitionStrategy::strided});
  const auto plan = select_preserved(x, CompressionBudget(15));
  RandomStream rng(402);
  constexpr int kDraws = 100000;
  std::vector<double> sum(60, 0.0);
  std::vector<double> sq(60, 0.0);
  for (int d = 0; d < kDraws; ++d) {
    const auto out = sharded_compress(shards, CompressionBudget(15), rng);
    const std::size_t g = 15 - out.selection.preserved.size();
    const std::size_t realized =
        std::accumulate(out.budget.realized.begin(), out.budget.realized.end(), std::size_t{0});
    if (realized != g || out.result.nnz() != 15) {
      return {false, "draw " + std::to_string(d) + ": sum g_k = " + std::to_string(realized) +
                         ", g = " + std::to_string(g)};
    }
    const auto idx = out.result.indices();
    const auto val = out.result.values();
    for (std::size_t e = 0; e < idx.size(); ++e) {
      sum[idx[e]] += val[e];
      sq[idx[e]] += val[e] * val[e];
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < 60; ++i) {
    const double mean = sum[i] / kDraws;
    const double se = std::sqrt(std::max(sq[i] / kDraws - mean * mean, 0.0) / kDraws);
    const double bound = kSigmas * se + kMeanUlpFloor * std::abs(x.at(i));
    worst = std::max(worst, std::abs(mean - x.at(i)) / bound);
  }
  return {worst <= 1.0, "sum g_k = g on 1e5 draws, preserved " +
                            std::to_string(plan.preserved.size()) +
                            ", worst |mean - x| / bound = " + num(worst) +
                            ", max conservation error " + num(worst_sum)};
}

struct Exact {
  std::vector<double> energies;  // ascending, all n
};

const Exact& exact_spectrum() {
  static const Exact e{wb::cmd_oracle(base_config()).energies};
  return e;
}

Outcome deterministic_limit() {
  wb::RunConfig c = base_config();
  c.m = 1000;
  c.alpha = 1.0;
  c.total_iters = 3000;
  c.burn_in = 2000;
  const auto r = wb::cmd_eigs(c);
  const auto& exact = exact_spectrum().energies;
  double worst = 0.0;
  for (std::size_t j = 0; j < 5; ++j) {
    worst = std::max(worst, std::abs(r.report.estimates[j].energy - exact[j]));
  }
  return {worst <= kDeterministicTol, "3000 iterations, max |E - E_exact| = " + num(worst)};
}

// Shared between criteria 6, 7 and 12.
struct StochasticRuns {
  wb::EigsResult first;
  fs::path dir_a;
  fs::path dir_b;
};

const StochasticRuns& stochastic_runs() {
  static const StochasticRuns runs = [] {
    StochasticRuns out;
    out.dir_a = workdir() / "run_a";
    out.dir_b = workdir() / "run_b";
    fs::remove_all(out.dir_a);
    fs::remove_all(out.dir_b);
    wb::RunConfig c = stochastic_config();
    c.output_dir = out.dir_a;
    out.first = wb::cmd_eigs(c);
    return out;
  }();
  return runs;
}

Outcome stochastic_recovery() {
  const auto& r = stochastic_runs().first;
  const auto& exact = exact_spectrum().energies;
  std::ostringstream d;
  bool ok = true;
  for (std::size_t j = 0; j < 5; ++j) {
    const auto& e = r.report.estimates[j];
    const double dev = std::abs(e.energy - exact[j]);
    const double allowed =
        std::max(kStderrMultiple * e.stderr_energy, kRelativeFloor * std::abs(exact[j]));
    ok = ok && std::isfinite(e.stderr_energy) && dev <= allowed;
    d << (j ? ", " : "") << "E" << j << " dev " << num(dev) << " se " << num(e.stderr_energy);
  }
  return {ok, d.str()};
}

double max_abs_bias(const std::vector<double>& est) {
  const auto& exact = exact_spectrum().energies;
  double worst = 0.0;
  for (std::size_t j = 0; j < 5; ++j) {
    worst = std::max(worst, std::abs(est[j] - exact[j]));
  }
  return worst;
}

Outcome bias_ordering() {
  const auto& r = stochastic_runs().first;
  std::vector<double> averaged;
  for (const auto& e : r.report.estimates) {
    averaged.push_back(e.energy);
  }
  const double linear = max_abs_bias(averaged);
  const double instantaneous = max_abs_bias(r.instantaneous_mean);
  const auto b = wb::cmd_baseline(stochastic_config());
  // The most favourable of the nonlinear variants.
  const double nonlinear =
      std::min({max_abs_bias(b.best), max_abs_bias(b.ritz_of_means), max_abs_bias(b.mean_of_ritz)});
  const bool ok = instantaneous > linear && nonlinear > instantaneous && nonlinear > linear;
  return {ok, "max |bias|: averaged " + num(linear) + ", instantaneous " + num(instantaneous) +
                  ", nonlinear " + num(nonlinear)};
}

Outcome variational_floor() {
  wb::RunConfig c = stochastic_config();
  c.total_iters = 10000;
  c.burn_in.reset();
  const auto b = wb::cmd_baseline(c);
  const auto& exact = exact_spectrum().energies;
  double worst = -1e300;  // largest violation (exact - slack - value)
  for (const auto& row : b.trace) {
    for (std::size_t j = 0; j < 5; ++j) {
      const double floor = exact[j] - kVariationalSlack * std::max(1.0, std::abs(exact[j]));
      worst = std::max(worst, floor - row[j]);
    }
  }
  return {b.trace.size() == 10000 && worst <= 0.0,
          std::to_string(b.trace.size()) + " steps, min (E_ritz - E_exact) = " +
              num(-worst)};
}

Outcome projected_exactness() {
  oracle::SyntheticSpec spec;
  const auto syn = oracle::synthesize_test_matrix(spec);
  const Eigen::MatrixXd u = syn.lowest_eigenvectors(5);
  const Eigen::MatrixXd a = shift_scale(syn.h, spec.eps).to_dense();
  const Eigen::MatrixXd ua = u.transpose() * a;
  RandomStream rng(901);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd x = testing::random_dense(1000, 5, rng);
    const auto sol = instantaneous_ritz(ua * x, u.transpose() * x);
    if (sol.has_complex) {
      return {false, "complex Ritz values"};
    }
    const auto lambda = sol.real_values();
    for (std::size_t j = 0; j < 5; ++j) {
      worst = std::max(worst, std::abs(lambda[j] - (1.0 - spec.eps * syn.energies[j])));
    }
  }
  return {worst <= kProjectedTol, "100 iterates, max |lambda - lambda_exact| = " + num(worst)};
}

std::vector<double> ar1(std::size_t n, double phi, RandomStream& rng) {
  std::vector<double> out(n);
  double v = rng.normal() / std::sqrt(1.0 - phi * phi);
  for (auto& o : out) {
    o = v;
    v = phi * v + rng.normal();
  }
  return out;
}

double stderr_of(const std::vector<double>& series) {
  const auto ac = integrated_autocorrelation(series);
  return std::sqrt(ac.variance * ac.tau / static_cast<double>(series.size()));
}

Outcome calibration() {
  RandomStream rng(1001);
  const double tau_ar = integrated_autocorrelation(ar1(100000, 0.9, rng)).tau;
  const double tau_white = integrated_autocorrelation(ar1(100000, 0.0, rng)).tau;
  // Stderr ratio between N and 4N, each averaged over 16 independent series.
  double small = 0.0;
  double large = 0.0;
  for (int r = 0; r < 16; ++r) {
    small += stderr_of(ar1(25000, 0.9, rng));
    large += stderr_of(ar1(100000, 0.9, rng));
  }
  const double ratio = small / large;
  const bool ok = std::abs(tau_ar - 19.0) <= kTauTol * 19.0 &&
                  std::abs(tau_white - 1.0) <= kWhiteTauTol &&
                  std::abs(ratio - 2.0) <= kSqrtScalingTol * 2.0;
  return {ok, "tau AR(1) " + num(tau_ar) + ", tau white " + num(tau_white) +
                  ", stderr(N)/stderr(4N) " + num(ratio)};
}

Outcome insufficient_sampling() {
  // Column 0 of A = I - eps H is e0 and column 1 is (e0 + e1) / 2: with m = 1
  // the iterates collapse onto e0 and the averaged U*X is singular.
  const double eps = 1e-3;
  const auto h =
      SparseColumnMatrix::from_triplets(2, 2, {{0, 1, -0.5 / eps}, {1, 1, 0.5 / eps}});
  const auto path = workdir() / "absorbing.mtx";
  mm::write_matrix(path, h);
  wb::RunConfig c;
  c.source = wb::RunConfig::Source::file;
  c.matrix_path = path;
  c.eps = eps;
  c.k = 2;
  c.m = 1;
  c.ortho_period = 0;
  c.total_iters = 400;
  c.burn_in = 200;
  c.seed = 1;
  try {
    wb::cmd_eigs(c);
  } catch (const wb::CommandError& e) {
    const bool ok = e.code() == wb::ExitCode::insufficient_sampling &&
                    std::string(e.what()).find("singular") != std::string::npos;
    return {ok, e.what()};
  }
  return {false, "run returned estimates"};
}

Outcome determinism() {
  const auto& runs = stochastic_runs();
  wb::RunConfig c = stochastic_config();
  c.output_dir = runs.dir_b;
  wb::cmd_eigs(c);
  std::size_t bytes = 0;
  for (const char* f : {"report.json", "trace.csv", "config.txt", "trajectory.rsilog"}) {
    const auto a = slurp(runs.dir_a / f);
    const auto b = slurp(runs.dir_b / f);
    if (a.empty() || a != b) {
      return {false, std::string(f) + " differs"};
    }
    bytes += a.size();
  }
  return {true, "4 bundle files, " + std::to_string(bytes) + " bytes identical"};
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    only.push_back(std::atoi(argv[i]));
  }
  report(1, "compression unbiasedness", unbiasedness);
  report(2, "compression exactness for nnz <= m", exactness);
  report(3, "pivotal marginals by enumeration", pivotal_marginals);
  report(4, "sharded compression equivalence", sharded_equivalence);
  report(5, "deterministic-limit recovery", deterministic_limit);
  report(6, "stochastic recovery", stochastic_recovery);
  report(7, "bias ordering", bias_ordering);
  report(8, "variational floor of the baseline", variational_floor);
  report(9, "projected exactness", projected_exactness);
  report(10, "error estimator calibration", calibration);
  report(11, "insufficient-sampling failure mode", insufficient_sampling);
  report(12, "determinism", determinism);
  std::printf("%d of %d criteria failed\n", failures, ran);
  return failures == 0 ? 0 : 1;
}
