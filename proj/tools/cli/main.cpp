#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rsi/workbench/commands.hpp"
#include "rsi/workbench/config.hpp"

namespace wb = rsi::workbench;

namespace {

struct RunOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::size_t> m;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> total_iters;
  std::optional<std::size_t> burn_in;
  std::string output;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "key = value configuration file");
  cmd->add_option("-s,--set", o.overrides, "override one key (key=value), repeatable");
  cmd->add_option("--m", o.m, "compression budget per column");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--total-iters", o.total_iters, "iterations to run");
  cmd->add_option("--burn-in", o.burn_in, "iterations excluded from averages");
  cmd->add_option("-o,--output", o.output, "bundle directory");
}

wb::RunConfig build_config(const RunOptions& o) {
  wb::RunConfig c = o.config_path.empty() ? wb::RunConfig{} : wb::load_config(o.config_path);
  for (const auto& s : o.overrides) {
    wb::apply_override(c, s);
  }
  if (o.m) {
    c.m = *o.m;
  }
  if (o.seed) {
    c.seed = *o.seed;
  }
  if (o.total_iters) {
    c.total_iters = *o.total_iters;
  }
  if (o.burn_in) {
    c.burn_in = *o.burn_in;
  }
  if (!o.output.empty()) {
    c.output_dir = o.output;
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized subspace iteration workbench"};
  app.require_subcommand(1);

  RunOptions eigs_opts;
  auto* eigs = app.add_subcommand("eigs", "run a trajectory and report averaged eigenvalues");
  add_run_options(eigs, eigs_opts);

  RunOptions base_opts;
  auto* baseline = app.add_subcommand("baseline", "run the quadratic Rayleigh-Ritz baseline");
  add_run_options(baseline, base_opts);

  RunOptions oracle_opts;
  auto* oracle = app.add_subcommand("oracle", "exact spectrum by dense diagonalization");
  oracle->add_option("-c,--config", oracle_opts.config_path, "configuration file");
  oracle->add_option("-s,--set", oracle_opts.overrides, "override one key (key=value)");
  oracle->add_option("-o,--output", oracle_opts.output, "directory for spectrum.json");

  std::string log_path;
  std::optional<std::size_t> analyze_burn_in;
  double analyze_eps = 1e-3;
  double analyze_c = 5.0;
  auto* analyze = app.add_subcommand("analyze", "re-estimate from a stored trajectory log");
  analyze->add_option("log", log_path, "trajectory.rsilog")->required();
  analyze->add_option("--burn-in", analyze_burn_in, "override the logged burn-in");
  analyze->add_option("--eps", analyze_eps, "eps used for A = I - eps H");
  analyze->add_option("--window-constant", analyze_c, "autocorrelation window constant");

  std::string vector_path;
  std::string compress_out;
  std::size_t compress_m = 0;
  std::uint64_t compress_seed = 0;
  auto* compress = app.add_subcommand("compress", "compress one vector and print the plan");
  compress->add_option("vector", vector_path, "n x 1 Matrix Market vector")->required();
  compress->add_option("--m", compress_m, "nonzero budget")->required();
  compress->add_option("--seed", compress_seed, "random seed")->required();
  compress->add_option("-o,--output", compress_out, "write the compressed vector here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(wb::ExitCode::usage);
  }

  try {
    if (*eigs) {
      const auto c = build_config(eigs_opts);
      std::cout << wb::eigs_json(c, wb::cmd_eigs(c));
    } else if (*baseline) {
      const auto c = build_config(base_opts);
      std::cout << wb::baseline_json(c, wb::cmd_baseline(c));
    } else if (*oracle) {
      const auto c = build_config(oracle_opts);
      std::cout << wb::oracle_json(wb::cmd_oracle(c), c.k);
    } else if (*analyze) {
      std::cout << wb::analyze_json(
          wb::cmd_analyze(log_path, analyze_burn_in, analyze_eps, analyze_c));
    } else if (*compress) {
      std::cout << wb::compress_json(
          wb::cmd_compress(vector_path, compress_m, compress_seed, compress_out));
    }
  } catch (const wb::CommandError& e) {
    std::fprintf(stderr, "rsi: %s\n", e.what());
    return static_cast<int>(e.code());
  } catch (const wb::ConfigError& e) {
    std::fprintf(stderr, "rsi: [config] %s\n", e.what());
    return static_cast<int>(wb::ExitCode::usage);
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "rsi: [config] %s\n", e.what());
    return static_cast<int>(wb::ExitCode::io);
  }
  return 0;
}
