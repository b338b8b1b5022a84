#include "rsi/workbench/commands.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rsi/engine.hpp"
#include "rsi/errors.hpp"
#include "rsi/matrix_market.hpp"
#include "rsi/oracle/dense.hpp"
#include "rsi/oracle/synthetic.hpp"

namespace rsi::workbench {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class F>
auto staged(const std::string& stage, ExitCode fallback, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const CommandError&) {
    throw;
  } catch (const InsufficientSampling& e) {
    throw CommandError(ExitCode::insufficient_sampling, stage, e.what());
  } catch (const DeadColumn& e) {
    throw CommandError(ExitCode::numerical, stage, e.what());
  } catch (const IoError& e) {
    throw CommandError(ExitCode::io, stage, e.what());
  } catch (const fs::filesystem_error& e) {
    throw CommandError(ExitCode::io, stage, e.what());
  } catch (const ConfigError& e) {
    throw CommandError(ExitCode::usage, stage, e.what());
  } catch (const std::exception& e) {
    throw CommandError(fallback, stage, e.what());
  }
}

double energy(double lambda, double eps) { return (1.0 - lambda) / eps; }

std::vector<double> energies(const std::vector<double>& lambda, double eps) {
  return energies_from_ritz(lambda, eps);
}

// Averaged solve plus error bars. Short post-burn-in windows get estimates
// without error bars (NaN), since the autocorrelation needs 100 samples.
ErrorReport estimate(std::span<const StepRecord> log, std::size_t burn_in, double eps,
                     double window_constant, double singular_tol) {
  const auto [s_bar, t_bar] = average_products(log, burn_in);
  const RitzSolution sol = solve_ritz(s_bar, t_bar, singular_tol);
  if (log.size() - burn_in >= kMinSeriesLength) {
    return standard_errors(log, burn_in, sol, eps, window_constant);
  }
  ErrorReport report;
  report.samples = log.size() - burn_in;
  report.burn_in = burn_in;
  report.eps = eps;
  report.window_constant = window_constant;
  report.min_singular_t = sol.min_singular_t;
  report.max_singular_t = sol.max_singular_t;
  report.has_complex = sol.has_complex;
  for (const auto& v : sol.values) {
    EigenEstimate e;
    e.lambda = v.real();
    e.lambda_imag = v.imag();
    e.energy = energy(v.real(), eps);
    e.stderr_lambda = e.stderr_energy = e.tau = e.n_eff = kNaN;
    report.estimates.push_back(e);
  }
  return report;
}

DenseMatrix check_trial(DenseMatrix u, std::size_t n, std::size_t k) {
  if (static_cast<std::size_t>(u.rows()) != n || static_cast<std::size_t>(u.cols()) != k) {
    throw ConfigError("trial basis is " + std::to_string(u.rows()) + " x " +
                      std::to_string(u.cols()) + ", expected " + std::to_string(n) + " x " +
                      std::to_string(k));
  }
  return u;
}

EngineConfig engine_config(const RunConfig& c) {
  EngineConfig e;
  e.m = c.m;
  e.alpha = c.alpha;
  e.ortho_period = c.ortho_period;
  e.burn_in = c.effective_burn_in();
  e.total_iters = c.total_iters;
  e.seed = *c.seed;
  e.shards = ShardLayout{c.shards, c.shard_strategy};
  e.singular_tol = c.singular_tol;
  return e;
}

LogHeader log_header(const RunConfig& c, std::size_t n, LogVariant variant) {
  LogHeader h;
  h.variant = variant;
  h.n = n;
  h.k = c.k;
  h.m = c.m;
  h.alpha = c.alpha;
  h.ortho_period = c.ortho_period;
  h.seed = *c.seed;
  h.burn_in = c.effective_burn_in();
  return h;
}

std::vector<SparseVector> trial_columns(const DenseMatrix& u) {
  std::vector<SparseVector> out;
  std::vector<double> col(static_cast<std::size_t>(u.rows()));
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      col[static_cast<std::size_t>(i)] = u(i, j);
    }
    out.push_back(SparseVector::from_dense(col));
  }
  return out;
}

std::string fmt(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
}

std::string trace_csv(const std::string& hash, const std::vector<std::vector<double>>& trace,
                      std::size_t k) {
  std::ostringstream out;
  out << "# config_hash=" << hash << '\n' << "iteration";
  for (std::size_t j = 0; j < k; ++j) {
    out << ",E" << j + 1;
  }
  out << '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << i;
    for (double e : trace[i]) {
      out << ',' << fmt(e);
    }
    out << '\n';
  }
  return out.str();
}

json config_object(const RunConfig& c) {
  json out = json::object();
  std::istringstream in(echo(c));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json number_array(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) {
    out.push_back(nullable(x));
  }
  return out;
}

json report_object(const ErrorReport& r) {
  json out;
  out["samples"] = r.samples;
  out["burn_in"] = r.burn_in;
  out["eps"] = r.eps;
  out["window_constant"] = r.window_constant;
  out["singular_t"] = {{"min", r.min_singular_t}, {"max", r.max_singular_t}};
  out["has_complex"] = r.has_complex;
  json pairs = json::array();
  for (std::size_t i = 0; i < r.estimates.size(); ++i) {
    const auto& e = r.estimates[i];
    pairs.push_back({{"index", i},
                     {"lambda", e.lambda},
                     {"lambda_imag", e.lambda_imag},
                     {"energy", e.energy},
                     {"stderr_lambda", nullable(e.stderr_lambda)},
                     {"stderr_energy", nullable(e.stderr_energy)},
                     {"tau", nullable(e.tau)},
                     {"n_eff", nullable(e.n_eff)},
                     {"window", e.window},
                     {"zero_variance", e.zero_variance}});
  }
  out["eigenpairs"] = std::move(pairs);
  return out;
}

void write_bundle(const RunConfig& c, const std::string& hash, const std::string& report,
                  const std::string& trace, const LogHeader& header,
                  std::span<const StepRecord> records) {
  fs::create_directories(c.output_dir);
  write_text(c.output_dir / "config.txt", "# config_hash=" + hash + "\n" + echo(c));
  write_text(c.output_dir / "report.json", report);
  write_text(c.output_dir / "trace.csv", trace);
  write_trajectory_log(c.output_dir / "trajectory.rsilog", header, records);
}

}  // namespace

Problem load_problem(const RunConfig& c) {
  Problem p;
  SparseColumnMatrix h = staged("ingest", ExitCode::usage, [&] {
    if (c.source == RunConfig::Source::file) {
      auto m = staged("ingest/matrix_market", ExitCode::io, [&] { return mm::read_matrix(c.matrix_path); });
      if (!m.square()) {
        throw ConfigError("matrix is " + std::to_string(m.rows()) + " x " +
                          std::to_string(m.cols()) + ", expected square");
      }
      if (!m.symmetric() && m.is_symmetric()) {
        std::vector<SparseVector> cols(m.columns().begin(), m.columns().end());
        m = SparseColumnMatrix(m.rows(), m.cols(), std::move(cols), true);
      }
      return m;
    }
    oracle::SyntheticSpec spec = c.synthetic;
    spec.eps = c.eps;
    spec.k = c.k;
    auto syn = staged("ingest/synthetic", ExitCode::usage,
                      [&] { return oracle::synthesize_test_matrix(spec); });
    p.exact_energies = std::move(syn.energies);
    return std::move(syn.h);
  });
  if (c.k > h.rows()) {
    throw CommandError(ExitCode::usage, "ingest",
                       "k = " + std::to_string(c.k) + " exceeds n = " + std::to_string(h.rows()));
  }
  p.h = std::make_shared<const SparseColumnMatrix>(std::move(h));
  p.a = staged("shift", ExitCode::numerical, [&] {
    return std::make_shared<const SparseColumnMatrix>(shift_scale(*p.h, c.eps));
  });
  p.trial = staged("ingest/trial", ExitCode::usage, [&] {
    if (c.trial_path) {
      DenseMatrix u = staged("ingest/trial", ExitCode::io, [&] { return mm::read_dense(*c.trial_path); });
      return check_trial(std::move(u), p.h->rows(), c.k);
    }
    return diagonal_trial_basis(*p.a, c.k);
  });
  return p;
}

EigsResult cmd_eigs(const RunConfig& c) {
  staged("config", ExitCode::usage, [&] { validate(c); });
  const Problem prob = load_problem(c);
  EigsResult out;
  out.config_hash = config_hash(c);
  out.n = prob.a->rows();
  out.exact_energies = prob.exact_energies;
  const std::size_t burn_in = c.effective_burn_in();

  auto trajectory = staged("engine", ExitCode::usage, [&] {
    return init_trajectory(prob.a, prob.trial, std::nullopt, engine_config(c));
  });
  auto run_result = staged("engine", ExitCode::numerical, [&] { return run(trajectory); });
  out.log = run_result.accumulator.log();

  out.report = staged("estimation", ExitCode::numerical, [&] {
    return estimate(out.log, burn_in, c.eps, c.window_constant, c.singular_tol);
  });

  // Instantaneous branches follow the averaged eigenpairs by overlap, so a
  // level crossing in one iteration does not swap columns of the trace.
  const auto [s_bar, t_bar] = average_products(out.log, burn_in);
  const RitzSolution reference = solve_ritz(s_bar, t_bar, c.singular_tol);
  out.trace.reserve(out.log.size());
  out.instantaneous_mean.assign(c.k, 0.0);
  std::size_t used = 0;
  for (std::size_t i = 0; i < out.log.size(); ++i) {
    std::vector<double> row(c.k, kNaN);
    try {
      const auto inst = instantaneous_ritz(out.log[i].s, out.log[i].t, c.singular_tol);
      const auto map = match_eigenpairs(inst, reference, out.log[i].t, t_bar);
      for (std::size_t j = 0; j < c.k; ++j) {
        row[j] = energy(inst.values[map[j]].real(), c.eps);
      }
    } catch (const InsufficientSampling&) {
      if (i >= burn_in) {
        ++out.instantaneous_failures;
      }
    }
    if (i >= burn_in && std::isfinite(row[0])) {
      for (std::size_t j = 0; j < c.k; ++j) {
        out.instantaneous_mean[j] += row[j];
      }
      ++used;
    }
    out.trace.push_back(std::move(row));
  }
  for (auto& v : out.instantaneous_mean) {
    v = used ? v / static_cast<double>(used) : kNaN;
  }

  if (!c.output_dir.empty()) {
    staged("output", ExitCode::io, [&] {
      write_bundle(c, out.config_hash, eigs_json(c, out), trace_csv(out.config_hash, out.trace, c.k),
                   log_header(c, out.n, LogVariant::linear), out.log);
    });
  }
  return out;
}

BaselineResult cmd_baseline(const RunConfig& c) {
  staged("config", ExitCode::usage, [&] { validate(c); });
  const Problem prob = load_problem(c);
  BaselineResult out;
  out.config_hash = config_hash(c);
  out.n = prob.a->rows();
  out.exact_energies = prob.exact_energies;
  const std::size_t burn_in = c.effective_burn_in();

  auto state = staged("baseline", ExitCode::usage, [&] {
    return init_nonlinear(prob.a, trial_columns(prob.trial), engine_config(c));
  });
  auto result = staged("baseline", ExitCode::numerical, [&] { return run_nonlinear(state); });
  out.log = std::move(result.log);
  const auto variants = staged("baseline", ExitCode::numerical, [&] {
    return averaged_variants(out.log, burn_in, prob.a->symmetric());
  });
  out.mean_of_ritz = energies(variants.mean_of_ritz, c.eps);
  out.ritz_of_means = energies(variants.ritz_of_means, c.eps);
  out.best = energies(variants.best, c.eps);
  out.trace.reserve(out.log.size());
  for (const auto& rec : out.log) {
    out.trace.push_back(energies(rec.ritz, c.eps));
  }

  if (!c.output_dir.empty()) {
    staged("output", ExitCode::io, [&] {
      std::vector<StepRecord> products;
      products.reserve(out.log.size());
      for (const auto& rec : out.log) {
        products.push_back(rec.products);
      }
      write_bundle(c, out.config_hash, baseline_json(c, out),
                   trace_csv(out.config_hash, out.trace, c.k),
                   log_header(c, out.n, LogVariant::nonlinear), products);
    });
  }
  return out;
}

OracleResult cmd_oracle(const RunConfig& c) {
  const Problem prob = load_problem(c);
  if (prob.h->rows() > oracle::kDenseLimit) {
    throw CommandError(ExitCode::usage, "oracle",
                       "n = " + std::to_string(prob.h->rows()) + " exceeds the dense limit " +
                           std::to_string(oracle::kDenseLimit));
  }
  OracleResult out;
  out.config_hash = config_hash(c);
  staged("oracle", ExitCode::usage, [&] {
    const Eigen::MatrixXd h = prob.h->to_dense();
    const auto spectrum = oracle::dense_eigh(h);
    out.energies = spectrum.eigenvalues;
    out.max_residual = oracle::max_residual(h, spectrum);
  });
  out.lambda.reserve(out.energies.size());
  for (double e : out.energies) {
    out.lambda.push_back(1.0 - c.eps * e);
  }
  if (!c.output_dir.empty()) {
    staged("output", ExitCode::io, [&] {
      fs::create_directories(c.output_dir);
      write_text(c.output_dir / "spectrum.json", oracle_json(out, c.k));
    });
  }
  return out;
}

AnalyzeResult cmd_analyze(const fs::path& log_path, std::optional<std::size_t> burn_in, double eps,
                          double window_constant) {
  if (!(eps > 0.0) || !(window_constant > 0.0)) {
    throw CommandError(ExitCode::usage, "analyze", "eps and window constant must be positive");
  }
  const TrajectoryLog log =
      staged("analyze/trajectory_log", ExitCode::io, [&] { return read_trajectory_log(log_path); });
  AnalyzeResult out;
  out.header = log.header;
  out.burn_in = burn_in ? *burn_in : static_cast<std::size_t>(log.header.burn_in);
  if (out.burn_in >= log.records.size()) {
    throw CommandError(ExitCode::usage, "analyze",
                       "burn_in " + std::to_string(out.burn_in) + " leaves no samples in a log of " +
                           std::to_string(log.records.size()) + " iterations");
  }
  staged("analyze/estimation", ExitCode::numerical, [&] {
    if (log.header.variant == LogVariant::linear) {
      out.report = estimate(log.records, out.burn_in, eps, window_constant, kDefaultSingularTol);
      return;
    }
    const auto [p_bar, q_bar] = average_products(log.records, out.burn_in);
    const bool symmetric = p_bar == p_bar.transpose();
    out.ritz_of_means = energies(solve_quadratic(p_bar, q_bar, symmetric), eps);
    std::vector<double> mean(log.header.k, 0.0);
    for (std::size_t i = out.burn_in; i < log.records.size(); ++i) {
      const auto& r = log.records[i];
      const auto values = solve_quadratic(r.s, r.t, symmetric);
      for (std::size_t j = 0; j < mean.size(); ++j) {
        mean[j] += values[j];
      }
    }
    for (auto& v : mean) {
      v /= static_cast<double>(log.records.size() - out.burn_in);
    }
    out.mean_of_ritz = energies(mean, eps);
  });
  return out;
}

CompressResult cmd_compress(const fs::path& vector_path, std::size_t m, std::uint64_t seed,
                            const fs::path& output) {
  if (m < 1) {
    throw CommandError(ExitCode::usage, "compress", "m must be at least 1");
  }
  CompressResult out;
  out.input = staged("compress/matrix_market", ExitCode::io, [&] { return mm::read_vector(vector_path); });
  staged("compression", ExitCode::numerical, [&] {
    const CompressionBudget budget(m);
    out.plan = select_preserved(out.input, budget);
    if (out.input.nnz() <= m) {
      out.output = out.input;
      return;
    }
    RandomStream rng(seed);
    out.sampled = pivotal_sample(out.plan.probabilities, out.plan.sample_count, rng);
    out.output = apply_plan(out.input, out.plan, out.sampled);
  });
  if (!output.empty()) {
    staged("output", ExitCode::io, [&] { mm::write_vector(output, out.output); });
  }
  return out;
}

std::string eigs_json(const RunConfig& c, const EigsResult& r) {
  json out;
  out["command"] = "eigs";
  out["config_hash"] = r.config_hash;
  out["config"] = config_object(c);
  if (!c.output_dir.empty()) {
    out["trajectory_log"] = "trajectory.rsilog";
  }
  out["n"] = r.n;
  out["k"] = c.k;
  out["estimate"] = report_object(r.report);
  out["instantaneous_mean_energy"] = number_array(r.instantaneous_mean);
  out["instantaneous_failures"] = r.instantaneous_failures;
  if (r.exact_energies) {
    out["exact_energy"] = std::vector<double>(r.exact_energies->begin(),
                                              r.exact_energies->begin() + static_cast<long>(c.k));
  }
  return out.dump(2) + "\n";
}

std::string baseline_json(const RunConfig& c, const BaselineResult& r) {
  json out;
  out["command"] = "baseline";
  out["config_hash"] = r.config_hash;
  out["config"] = config_object(c);
  if (!c.output_dir.empty()) {
    out["trajectory_log"] = "trajectory.rsilog";
  }
  out["n"] = r.n;
  out["k"] = c.k;
  out["samples"] = r.log.size() - c.effective_burn_in();
  out["mean_of_ritz_energy"] = number_array(r.mean_of_ritz);
  out["ritz_of_means_energy"] = number_array(r.ritz_of_means);
  out["best_energy"] = number_array(r.best);
  if (r.exact_energies) {
    out["exact_energy"] = std::vector<double>(r.exact_energies->begin(),
                                              r.exact_energies->begin() + static_cast<long>(c.k));
  }
  return out.dump(2) + "\n";
}

std::string oracle_json(const OracleResult& r, std::size_t k) {
  json out;
  out["command"] = "oracle";
  out["config_hash"] = r.config_hash;
  out["n"] = r.energies.size();
  out["max_residual"] = r.max_residual;
  const std::size_t shown = std::min(k, r.energies.size());
  out["lowest_energy"] = std::vector<double>(r.energies.begin(), r.energies.begin() + static_cast<long>(shown));
  out["dominant_lambda"] =
      std::vector<double>(r.lambda.begin(), r.lambda.begin() + static_cast<long>(shown));
  out["energies"] = r.energies;
  return out.dump(2) + "\n";
}

std::string analyze_json(const AnalyzeResult& r) {
  json out;
  out["command"] = "analyze";
  out["variant"] = r.header.variant == LogVariant::linear ? "linear" : "nonlinear";
  out["log"] = {{"n", r.header.n},         {"k", r.header.k},
                {"m", r.header.m},         {"alpha", r.header.alpha},
                {"ortho_period", r.header.ortho_period},
                {"seed", r.header.seed},   {"burn_in", r.header.burn_in}};
  out["burn_in"] = r.burn_in;
  if (r.report) {
    out["estimate"] = report_object(*r.report);
  }
  if (r.ritz_of_means) {
    out["ritz_of_means_energy"] = number_array(*r.ritz_of_means);
    out["mean_of_ritz_energy"] = number_array(*r.mean_of_ritz);
  }
  return out.dump(2) + "\n";
}

std::string compress_json(const CompressResult& r) {
  json out;
  out["command"] = "compress";
  out["n"] = r.input.dim();
  out["nnz_in"] = r.input.nnz();
  out["nnz_out"] = r.output.nnz();
  out["preserved"] = r.plan.preserved;
  out["sample_count"] = r.plan.sample_count;
  out["tail_norm"] = r.plan.tail_norm;
  json candidates = json::array();
  for (std::size_t i = 0; i < r.plan.candidates.size(); ++i) {
    candidates.push_back({{"index", r.plan.candidates[i]}, {"p", r.plan.probabilities[i]}});
  }
  out["candidates"] = std::move(candidates);
  std::vector<std::size_t> sampled;
  for (auto pos : r.sampled) {
    sampled.push_back(r.plan.candidates[pos]);
  }
  out["sampled"] = sampled;
  json entries = json::array();
  auto idx = r.output.indices();
  auto val = r.output.values();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    entries.push_back({idx[i], val[i]});
  }
  out["output"] = std::move(entries);
  return out.dump(2) + "\n";
}

}  // namespace rsi::workbench
