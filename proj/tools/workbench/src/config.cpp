#include "rsi/workbench/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace rsi::workbench {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError(std::string(key) + " = '" + std::string(value) +
                    "' is not " + std::string(want));
}

double parse_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    bad_value(key, value, "a finite number");
  }
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    bad_value(key, value, "a non-negative integer");
  }
  return out;
}

std::size_t parse_size(std::string_view key, std::string_view value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

template <class T, class F>
std::vector<T> parse_list(std::string_view key, std::string_view value, F parse_one) {
  std::vector<T> out;
  while (!value.empty()) {
    const auto comma = value.find(',');
    out.push_back(parse_one(key, trim(value.substr(0, comma))));
    if (comma == std::string_view::npos) {
      break;
    }
    value.remove_prefix(comma + 1);
  }
  if (out.empty()) {
    bad_value(key, value, "a non-empty list");
  }
  return out;
}

// Shortest text that parses back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) {
      out += ',';
    }
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt_double(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

}  // namespace

std::size_t RunConfig::effective_burn_in() const {
  return burn_in ? *burn_in : total_iters * 2 / 5;
}

void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
  value = trim(value);
  auto& syn = c.synthetic;
  if (key == "matrix") {
    if (value == "synthetic") {
      c.source = RunConfig::Source::synthetic;
      c.matrix_path.clear();
    } else if (value.empty()) {
      bad_value(key, value, "a path or 'synthetic'");
    } else {
      c.source = RunConfig::Source::file;
      c.matrix_path = std::filesystem::path(value);
    }
  } else if (key == "synthetic.kind") {
    if (value == "kronecker") {
      syn.kind = oracle::SyntheticSpec::Kind::kronecker;
    } else if (value == "diagonal") {
      syn.kind = oracle::SyntheticSpec::Kind::diagonal;
    } else {
      bad_value(key, value, "kronecker or diagonal");
    }
  } else if (key == "synthetic.dims") {
    syn.dims = parse_list<std::size_t>(key, value, parse_size);
  } else if (key == "synthetic.gap_ratio") {
    syn.gap_ratio = parse_double(key, value);
  } else if (key == "synthetic.mixing") {
    syn.mixing = parse_double(key, value);
  } else if (key == "synthetic.cluster") {
    syn.cluster = parse_double(key, value);
  } else if (key == "synthetic.lowest_ratio") {
    syn.lowest_ratio = parse_double(key, value);
  } else if (key == "synthetic.ground_energy_hartree") {
    syn.ground_energy = parse_double(key, value);
  } else if (key == "synthetic.diagonal_hartree") {
    syn.diagonal = parse_list<double>(key, value, parse_double);
  } else if (key == "synthetic.seed") {
    syn.seed = parse_u64(key, value);
  } else if (key == "eps_inv_hartree") {
    c.eps = parse_double(key, value);
  } else if (key == "k") {
    c.k = parse_size(key, value);
  } else if (key == "m") {
    c.m = parse_size(key, value);
  } else if (key == "alpha") {
    c.alpha = parse_double(key, value);
  } else if (key == "ortho_period") {
    c.ortho_period = parse_size(key, value);
  } else if (key == "burn_in") {
    c.burn_in = parse_size(key, value);
  } else if (key == "total_iters") {
    c.total_iters = parse_size(key, value);
  } else if (key == "seed") {
    c.seed = parse_u64(key, value);
  } else if (key == "shards") {
    c.shards = parse_size(key, value);
  } else if (key == "shard_strategy") {
    if (value == "contiguous") {
      c.shard_strategy = PartitionStrategy::contiguous;
    } else if (value == "strided") {
      c.shard_strategy = PartitionStrategy::strided;
    } else {
      bad_value(key, value, "contiguous or strided");
    }
  } else if (key == "trial") {
    if (value == "diagonal") {
      c.trial_path.reset();
    } else if (value.empty()) {
      bad_value(key, value, "a path or 'diagonal'");
    } else {
      c.trial_path = std::filesystem::path(value);
    }
  } else if (key == "window_constant") {
    c.window_constant = parse_double(key, value);
  } else if (key == "singular_tol") {
    c.singular_tol = parse_double(key, value);
  } else if (key == "output_dir") {
    c.output_dir = std::filesystem::path(value);
  } else {
    throw ConfigError("unknown key '" + std::string(key) + "'");
  }
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  apply_setting(config, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + " is not key = value");
    }
    apply_setting(c, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::filesystem::filesystem_error("cannot open config", path,
                                            std::make_error_code(std::errc::no_such_file_or_directory));
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.source == RunConfig::Source::file && c.matrix_path.empty()) {
    fail("matrix path is empty");
  }
  if (c.k < 1) {
    fail("k must be at least 1");
  }
  if (c.m < 1) {
    fail("m must be at least 1 (set m)");
  }
  if (!(c.eps > 0.0)) {
    fail("eps_inv_hartree must be positive");
  }
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) {
    fail("alpha must lie in [0, 1]");
  }
  if (c.total_iters < 1) {
    fail("total_iters must be at least 1");
  }
  if (c.effective_burn_in() >= c.total_iters) {
    fail("burn_in must be less than total_iters");
  }
  if (!c.seed) {
    fail("seed must be set explicitly");
  }
  if (c.shards < 1) {
    fail("shards must be at least 1");
  }
  if (!(c.window_constant > 0.0)) {
    fail("window_constant must be positive");
  }
  if (!(c.singular_tol >= 0.0 && c.singular_tol < 1.0)) {
    fail("singular_tol must lie in [0, 1)");
  }
}

std::string echo(const RunConfig& c) {
  std::ostringstream out;
  auto line = [&](std::string_view key, const std::string& value) {
    out << key << " = " << value << '\n';
  };
  if (c.source == RunConfig::Source::file) {
    line("matrix", c.matrix_path.generic_string());
  } else {
    const auto& s = c.synthetic;
    line("matrix", "synthetic");
    const bool diag = s.kind == oracle::SyntheticSpec::Kind::diagonal;
    line("synthetic.kind", diag ? "diagonal" : "kronecker");
    if (diag) {
      line("synthetic.diagonal_hartree", join(s.diagonal));
    } else {
      line("synthetic.dims", join(s.dims));
      line("synthetic.gap_ratio", fmt_double(s.gap_ratio));
      line("synthetic.mixing", fmt_double(s.mixing));
      line("synthetic.cluster", fmt_double(s.cluster));
      line("synthetic.lowest_ratio", fmt_double(s.lowest_ratio));
      line("synthetic.ground_energy_hartree", fmt_double(s.ground_energy));
      line("synthetic.seed", std::to_string(s.seed));
    }
  }
  line("eps_inv_hartree", fmt_double(c.eps));
  line("k", std::to_string(c.k));
  line("m", std::to_string(c.m));
  line("alpha", fmt_double(c.alpha));
  line("ortho_period", std::to_string(c.ortho_period));
  line("burn_in", std::to_string(c.effective_burn_in()));
  line("total_iters", std::to_string(c.total_iters));
  line("seed", c.seed ? std::to_string(*c.seed) : std::string("unset"));
  line("shards", std::to_string(c.shards));
  line("shard_strategy",
       c.shard_strategy == PartitionStrategy::strided ? "strided" : "contiguous");
  line("trial", c.trial_path ? c.trial_path->generic_string() : std::string("diagonal"));
  line("window_constant", fmt_double(c.window_constant));
  line("singular_tol", fmt_double(c.singular_tol));
  return out.str();
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(echo(config))));
  return buf;
}

}  // namespace rsi::workbench
