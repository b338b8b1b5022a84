#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsi/baseline.hpp"
#include "rsi/compression.hpp"
#include "rsi/estimation.hpp"
#include "rsi/sparse.hpp"
#include "rsi/trajectory_log.hpp"
#include "rsi/workbench/config.hpp"

namespace rsi::workbench {

enum class ExitCode : int {
  ok = 0,
  usage = 1,                  // bad arguments or configuration
  io = 2,                     // unreadable input, unwritable output, corrupt log
  insufficient_sampling = 3,  // singular U*X (or U*A Phi(X)) at the chosen m
  numerical = 4,              // dead column, non-finite values, solver failure
};

/// A failure tagged with the pipeline stage and module that raised it.
class CommandError : public std::runtime_error {
public:
  CommandError(ExitCode code, std::string stage, const std::string& message)
      : std::runtime_error("[" + stage + "] " + message), code_(code), stage_(std::move(stage)) {}

  ExitCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

private:
  ExitCode code_;
  std::string stage_;
};

/// H as loaded or synthesized, A = I - eps H and the exact energies when known.
struct Problem {
  std::shared_ptr<const SparseColumnMatrix> h;
  std::shared_ptr<const SparseColumnMatrix> a;
  DenseMatrix trial;                      // n x k
  std::optional<std::vector<double>> exact_energies;  // synthetic only, ascending
};

/// @throws CommandError (stage "ingest").
Problem load_problem(const RunConfig& config);

struct EigsResult {
  std::string config_hash;
  std::size_t n = 0;
  std::optional<std::vector<double>> exact_energies;
  ErrorReport report;
  /// Post-burn-in mean of the instantaneous Ritz values, as energies.
  std::vector<double> instantaneous_mean;
  std::size_t instantaneous_failures = 0;  // iterations with a singular T_i
  /// Instantaneous energies per iteration (NaN when T_i was singular); column
  /// j is the branch with the largest overlap with averaged eigenpair j.
  std::vector<std::vector<double>> trace;
  std::vector<StepRecord> log;
};

struct BaselineResult {
  std::string config_hash;
  std::size_t n = 0;
  std::optional<std::vector<double>> exact_energies;
  std::vector<double> mean_of_ritz;   // energies
  std::vector<double> ritz_of_means;  // energies
  std::vector<double> best;           // energies (lowest seen per index)
  std::vector<std::vector<double>> trace;
  std::vector<NonlinearRecord> log;
};

struct OracleResult {
  std::string config_hash;
  std::vector<double> energies;  // ascending, all n
  std::vector<double> lambda;    // eigenvalues of A, descending
  double max_residual = 0.0;
};

struct AnalyzeResult {
  LogHeader header;
  std::size_t burn_in = 0;
  std::optional<ErrorReport> report;               // linear logs
  std::optional<std::vector<double>> ritz_of_means;  // nonlinear logs, energies
  std::optional<std::vector<double>> mean_of_ritz;   // nonlinear logs, energies
};

struct CompressResult {
  SparseVector input;
  CompressionPlan plan;
  std::vector<std::size_t> sampled;  // positions into plan.candidates
  SparseVector output;
};

/**
 * @brief Full pipeline: ingest, shift, run, solve, report.
 *
 * When config.output_dir is set, writes report.json, trace.csv,
 * trajectory.rsilog and config.txt there; every file carries the config
 * hash. Contents depend only on the config, so equal configs give
 * byte-identical bundles.
 *
 * @throws CommandError with ExitCode::insufficient_sampling when the
 *         averaged U*X is singular.
 */
EigsResult cmd_eigs(const RunConfig& config);

/// The quadratic baseline on the same problem; reports all averaged variants.
BaselineResult cmd_baseline(const RunConfig& config);

/// Exact spectrum by dense diagonalization (n up to the oracle limit).
OracleResult cmd_oracle(const RunConfig& config);

/// Re-solves a stored trajectory log. burn_in defaults to the one in the log.
AnalyzeResult cmd_analyze(const std::filesystem::path& log_path,
                          std::optional<std::size_t> burn_in, double eps,
                          double window_constant = 5.0);

/// One compression of a Matrix Market n x 1 vector with RandomStream(seed).
/// Writes the result to `output` when it is non-empty.
CompressResult cmd_compress(const std::filesystem::path& vector_path, std::size_t m,
                            std::uint64_t seed, const std::filesystem::path& output = {});

// JSON renderings shared by the CLI and the bundle writer.
std::string eigs_json(const RunConfig& config, const EigsResult& result);
std::string baseline_json(const RunConfig& config, const BaselineResult& result);
std::string oracle_json(const OracleResult& result, std::size_t k);
std::string analyze_json(const AnalyzeResult& result);
std::string compress_json(const CompressResult& result);

}  // namespace rsi::workbench
