#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "rsi/oracle/synthetic.hpp"
#include "rsi/sharded.hpp"

namespace rsi::workbench {

/**
 * @brief Everything that determines a run.
 *
 * The matrix source is a Matrix Market file holding H, or a synthetic
 * recipe. The engine works on A = I - eps H; reported energies are
 * E = (1 - lambda) / eps in the units of H.
 *
 * Text form: one `key = value` per line, `#` starts a comment. Keys:
 *
 *   matrix                      path to H (.mtx) or the word `synthetic`
 *   synthetic.kind              kronecker | diagonal
 *   synthetic.dims              comma list of factor sizes, e.g. 10,10,10
 *   synthetic.gap_ratio         lambda_{k+1} / lambda_k of A
 *   synthetic.mixing            factor rotation strength
 *   synthetic.cluster           spacing of the k lowest levels (relative)
 *   synthetic.lowest_ratio      |lambda_min| / lambda_{k+1} of A
 *   synthetic.ground_energy_hartree
 *   synthetic.diagonal_hartree  comma list (diagonal kind)
 *   synthetic.seed
 *   eps_inv_hartree             eps; A = I - eps H is dimensionless
 *   k, m, alpha, ortho_period, burn_in, total_iters, seed
 *   shards, shard_strategy      shard count; contiguous | strided
 *   trial                       `diagonal` or a path to an n x k .mtx
 *   window_constant, singular_tol
 *   output_dir                  bundle destination (not hashed)
 */
struct RunConfig {
  enum class Source { file, synthetic };

  Source source = Source::synthetic;
  std::filesystem::path matrix_path;
  oracle::SyntheticSpec synthetic{};
  double eps = 1e-3;
  std::size_t k = 5;
  std::size_t m = 0;
  double alpha = 0.5;
  std::size_t ortho_period = 1000;
  std::optional<std::size_t> burn_in;  // 40% of total_iters when unset
  std::size_t total_iters = 0;
  std::optional<std::uint64_t> seed;
  std::size_t shards = 1;
  PartitionStrategy shard_strategy = PartitionStrategy::contiguous;
  std::optional<std::filesystem::path> trial_path;  // diagonal rule when unset
  double window_constant = 5.0;
  double singular_tol = 1e-12;
  std::filesystem::path output_dir;

  std::size_t effective_burn_in() const;
};

/// Thrown for malformed text, unknown keys or values out of range.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Sets one key. Unknown keys and unparsable values throw ConfigError.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// `key=value` form used by command-line overrides.
void apply_override(RunConfig& config, std::string_view assignment);

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// @throws ConfigError unless k >= 1, m >= 1, burn_in < total_iters, a seed
///         is set and the remaining knobs are in range.
void validate(const RunConfig& config);

/// Canonical text of every knob that affects numerics, in a fixed order
/// with round-trip precision. Parsing it back reproduces the same config.
std::string echo(const RunConfig& config);

/// 64-bit FNV-1a of the echo, as 16 hex digits.
std::string config_hash(const RunConfig& config);

std::uint64_t fnv1a(std::string_view bytes);

}  // namespace rsi::workbench
