#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <span>
#include <vector>

#include "rsi/sparse.hpp"

namespace rsi {

/// The k x k products recorded at one iteration. For the linear method
/// s = U* A Phi(X), t = U* X; for the quadratic baseline s = Phi(X)* A Phi(X),
/// t = Phi(X)* Phi(X). `norms` are the l1 norms of the iterate columns
/// before compression.
struct StepRecord {
  DenseMatrix s;
  DenseMatrix t;
  std::vector<double> norms;
};

enum class LogVariant : std::uint32_t { linear = 0, nonlinear = 1 };

/**
 * Binary layout (all little-endian):
 *
 *   offset  size  field
 *        0     8  magic "RSITRAJ\0"
 *        8     4  u32 version (1)
 *       12     4  u32 variant (0 linear, 1 nonlinear)
 *       16     8  u64 n
 *       24     8  u64 k
 *       32     8  u64 m
 *       40     8  f64 alpha
 *       48     8  u64 ortho_period
 *       56     8  u64 seed
 *       64     8  u64 burn_in
 *       72        records
 *
 * Each record is k*k f64 of S (row-major), k*k f64 of T (row-major), then
 * k f64 column norms. The record count follows from the file size.
 */
struct LogHeader {
  LogVariant variant = LogVariant::linear;
  std::uint64_t n = 0;
  std::uint64_t k = 0;
  std::uint64_t m = 0;
  double alpha = 0.0;
  std::uint64_t ortho_period = 0;
  std::uint64_t seed = 0;
  std::uint64_t burn_in = 0;

  friend bool operator==(const LogHeader&, const LogHeader&) = default;
};

inline constexpr std::uint32_t kLogVersion = 1;
inline constexpr std::size_t kLogHeaderBytes = 72;

struct TrajectoryLog {
  LogHeader header;
  std::vector<StepRecord> records;
};

/// Streams records to disk as they are produced.
class TrajectoryLogWriter {
public:
  TrajectoryLogWriter(const std::filesystem::path& path, const LogHeader& header);

  void append(const StepRecord& record);
  void flush();

private:
  std::ofstream out_;
  std::uint64_t k_;
};

void write_trajectory_log(const std::filesystem::path& path, const LogHeader& header,
                          std::span<const StepRecord> records);

/// @throws IoError on a bad magic/version or a truncated record.
TrajectoryLog read_trajectory_log(const std::filesystem::path& path);

/// One row per iteration: iteration, S entries, T entries, norms.
void export_csv(std::ostream& out, const TrajectoryLog& log);

}  // namespace rsi
