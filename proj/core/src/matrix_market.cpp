#include "rsi/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include "rsi/errors.hpp"

namespace rsi::mm {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

struct Header {
  bool coordinate = true;
  bool symmetric = false;
};

Header parse_banner(const std::string& line) {
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket" || lower(object) != "matrix") {
    throw IoError("not a Matrix Market matrix file");
  }
  Header h;
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (format == "coordinate") {
    h.coordinate = true;
  } else if (format == "array") {
    h.coordinate = false;
  } else {
    throw IoError("unsupported Matrix Market format: " + format);
  }
  if (field != "real" && field != "integer" && field != "double") {
    throw IoError("unsupported Matrix Market field: " + field);
  }
  if (symmetry == "general") {
    h.symmetric = false;
  } else if (symmetry == "symmetric") {
    h.symmetric = true;
  } else {
    throw IoError("unsupported Matrix Market symmetry: " + symmetry);
  }
  return h;
}

bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '%') {
      continue;
    }
    return true;
  }
  return false;
}

std::vector<Triplet> read_triplets(std::istream& in, std::size_t& rows, std::size_t& cols,
                                   bool& symmetric) {
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError("empty Matrix Market stream");
  }
  Header h = parse_banner(line);
  symmetric = h.symmetric;
  if (!next_data_line(in, line)) {
    throw IoError("missing Matrix Market size line");
  }
  std::istringstream size_line(line);
  std::vector<Triplet> triplets;
  if (h.coordinate) {
    std::size_t nnz = 0;
    if (!(size_line >> rows >> cols >> nnz)) {
      throw IoError("malformed Matrix Market size line");
    }
    triplets.reserve(h.symmetric ? 2 * nnz : nnz);
    for (std::size_t e = 0; e < nnz; ++e) {
      if (!next_data_line(in, line)) {
        throw IoError("Matrix Market file truncated");
      }
      std::istringstream entry(line);
      std::size_t i = 0, j = 0;
      double v = 0.0;
      if (!(entry >> i >> j >> v) || i == 0 || j == 0 || i > rows || j > cols) {
        throw IoError("malformed Matrix Market entry: " + line);
      }
      triplets.push_back({i - 1, j - 1, v});
      if (h.symmetric && i != j) {
        if (i < j) {
          throw IoError("symmetric Matrix Market file must store the lower triangle");
        }
        triplets.push_back({j - 1, i - 1, v});
      }
    }
  } else {
    if (!(size_line >> rows >> cols)) {
      throw IoError("malformed Matrix Market size line");
    }
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t i = h.symmetric ? j : 0; i < rows; ++i) {
        if (!next_data_line(in, line)) {
          throw IoError("Matrix Market file truncated");
        }
        double v = std::stod(line);
        triplets.push_back({i, j, v});
        if (h.symmetric && i != j) {
          triplets.push_back({j, i, v});
        }
      }
    }
  }
  return triplets;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

}  // namespace

SparseColumnMatrix read_matrix(std::istream& in) {
  std::size_t rows = 0, cols = 0;
  bool symmetric = false;
  auto triplets = read_triplets(in, rows, cols, symmetric);
  try {
    return SparseColumnMatrix::from_triplets(rows, cols, std::move(triplets), symmetric);
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("invalid Matrix Market content: ") + e.what());
  }
}

SparseColumnMatrix read_matrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_matrix(in);
}

DenseMatrix read_dense(const std::filesystem::path& path) {
  return read_matrix(path).to_dense();
}

SparseVector read_vector(const std::filesystem::path& path) {
  auto a = read_matrix(path);
  if (a.cols() != 1) {
    throw IoError(path.string() + ": expected a single-column matrix");
  }
  return a.column(0);
}

void write_matrix(std::ostream& out, const SparseColumnMatrix& a) {
  std::vector<Triplet> entries = a.triplets();
  if (a.symmetric()) {
    std::erase_if(entries, [](const Triplet& t) { return t.row < t.col; });
  }
  out << "%%MatrixMarket matrix coordinate real " << (a.symmetric() ? "symmetric" : "general")
      << '\n';
  out << a.rows() << ' ' << a.cols() << ' ' << entries.size() << '\n';
  for (const auto& t : entries) {
    out << t.row + 1 << ' ' << t.col + 1 << ' ' << t.value << '\n';
  }
}

void write_matrix(const std::filesystem::path& path, const SparseColumnMatrix& a) {
  auto out = open_out(path);
  write_matrix(out, a);
}

void write_dense(const std::filesystem::path& path, const DenseMatrix& a) {
  auto out = open_out(path);
  out << "%%MatrixMarket matrix array real general\n";
  out << a.rows() << ' ' << a.cols() << '\n';
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out << a(i, j) << '\n';
    }
  }
}

void write_vector(const std::filesystem::path& path, const SparseVector& x) {
  write_matrix(path, SparseColumnMatrix(x.dim(), 1, {x}));
}

}  // namespace rsi::mm
