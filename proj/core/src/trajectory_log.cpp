#include "rsi/trajectory_log.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>

#include "rsi/errors.hpp"

namespace rsi {

namespace {

constexpr std::array<char, 8> kMagic = {'R', 'S', 'I', 'T', 'R', 'A', 'J', '\0'};

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  auto bits = std::bit_cast<U>(value);
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get(const unsigned char* data) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<U>(data[i]) << (8 * i);
  }
  return std::bit_cast<T>(bits);
}

void put_header(std::ostream& out, const LogHeader& h) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kLogVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(h.variant));
  put<std::uint64_t>(out, h.n);
  put<std::uint64_t>(out, h.k);
  put<std::uint64_t>(out, h.m);
  put<double>(out, h.alpha);
  put<std::uint64_t>(out, h.ortho_period);
  put<std::uint64_t>(out, h.seed);
  put<std::uint64_t>(out, h.burn_in);
}

void put_record(std::ostream& out, const StepRecord& r, std::uint64_t k) {
  const auto kk = static_cast<Eigen::Index>(k);
  if (r.s.rows() != kk || r.s.cols() != kk || r.t.rows() != kk || r.t.cols() != kk ||
      r.norms.size() != k) {
    throw std::invalid_argument("trajectory record does not match header k");
  }
  for (Eigen::Index i = 0; i < kk; ++i) {
    for (Eigen::Index j = 0; j < kk; ++j) {
      put<double>(out, r.s(i, j));
    }
  }
  for (Eigen::Index i = 0; i < kk; ++i) {
    for (Eigen::Index j = 0; j < kk; ++j) {
      put<double>(out, r.t(i, j));
    }
  }
  for (double v : r.norms) {
    put<double>(out, v);
  }
}

}  // namespace

TrajectoryLogWriter::TrajectoryLogWriter(const std::filesystem::path& path,
                                         const LogHeader& header)
    : out_(path, std::ios::binary | std::ios::trunc), k_(header.k) {
  if (!out_) {
    throw IoError("cannot write trajectory log " + path.string());
  }
  put_header(out_, header);
}

void TrajectoryLogWriter::append(const StepRecord& record) {
  put_record(out_, record, k_);
  if (!out_) {
    throw IoError("write to trajectory log failed");
  }
}

void TrajectoryLogWriter::flush() { out_.flush(); }

void write_trajectory_log(const std::filesystem::path& path, const LogHeader& header,
                          std::span<const StepRecord> records) {
  TrajectoryLogWriter writer(path, header);
  for (const auto& r : records) {
    writer.append(r);
  }
  writer.flush();
}

TrajectoryLog read_trajectory_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open trajectory log " + path.string());
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < kLogHeaderBytes ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw IoError(path.string() + ": not a trajectory log");
  }
  const unsigned char* p = bytes.data();
  if (get<std::uint32_t>(p + 8) != kLogVersion) {
    throw IoError(path.string() + ": unsupported trajectory log version");
  }
  TrajectoryLog log;
  auto& h = log.header;
  const auto variant = get<std::uint32_t>(p + 12);
  if (variant > 1) {
    throw IoError(path.string() + ": unknown trajectory log variant");
  }
  h.variant = static_cast<LogVariant>(variant);
  h.n = get<std::uint64_t>(p + 16);
  h.k = get<std::uint64_t>(p + 24);
  h.m = get<std::uint64_t>(p + 32);
  h.alpha = get<double>(p + 40);
  h.ortho_period = get<std::uint64_t>(p + 48);
  h.seed = get<std::uint64_t>(p + 56);
  h.burn_in = get<std::uint64_t>(p + 64);
  if (h.k == 0 || h.k > 4096) {
    throw IoError(path.string() + ": implausible k in trajectory log header");
  }

  const std::size_t record_bytes = 8 * (2 * h.k * h.k + h.k);
  const std::size_t payload = bytes.size() - kLogHeaderBytes;
  if (payload % record_bytes != 0) {
    throw IoError(path.string() + ": truncated trajectory record");
  }
  const std::size_t count = payload / record_bytes;
  const auto kk = static_cast<Eigen::Index>(h.k);
  log.records.reserve(count);
  p += kLogHeaderBytes;
  for (std::size_t r = 0; r < count; ++r) {
    StepRecord rec{DenseMatrix(kk, kk), DenseMatrix(kk, kk), std::vector<double>(h.k)};
    for (Eigen::Index i = 0; i < kk; ++i) {
      for (Eigen::Index j = 0; j < kk; ++j, p += 8) {
        rec.s(i, j) = get<double>(p);
      }
    }
    for (Eigen::Index i = 0; i < kk; ++i) {
      for (Eigen::Index j = 0; j < kk; ++j, p += 8) {
        rec.t(i, j) = get<double>(p);
      }
    }
    for (auto& v : rec.norms) {
      v = get<double>(p);
      p += 8;
    }
    log.records.push_back(std::move(rec));
  }
  return log;
}

void export_csv(std::ostream& out, const TrajectoryLog& log) {
  const auto k = static_cast<Eigen::Index>(log.header.k);
  out << "iteration";
  for (const char* name : {"S", "T"}) {
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        out << ',' << name << '_' << i << '_' << j;
      }
    }
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    out << ",norm_" << j;
  }
  out << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t it = 0; it < log.records.size(); ++it) {
    const auto& r = log.records[it];
    out << it;
    for (const DenseMatrix* m : {&r.s, &r.t}) {
      for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
          out << ',' << (*m)(i, j);
        }
      }
    }
    for (double v : r.norms) {
      out << ',' << v;
    }
    out << '\n';
  }
}

}  // namespace rsi
