#pragma once

#include <filesystem>
#include <iosfwd>

#include "rsi/sparse.hpp"

namespace rsi::mm {

/// Reads a real/integer `coordinate` file (general or symmetric) or a real
/// `array` file. Symmetric inputs are expanded to full storage and flagged.
SparseColumnMatrix read_matrix(std::istream& in);
SparseColumnMatrix read_matrix(const std::filesystem::path& path);

/// Same formats, materialized densely (used for trial bases).
DenseMatrix read_dense(const std::filesystem::path& path);

/// An n x 1 matrix read as a sparse vector.
SparseVector read_vector(const std::filesystem::path& path);

/// Writes `coordinate real general`, or `coordinate real symmetric` (lower
/// triangle only) when the matrix carries the symmetric flag.
void write_matrix(std::ostream& out, const SparseColumnMatrix& a);
void write_matrix(const std::filesystem::path& path, const SparseColumnMatrix& a);

void write_dense(const std::filesystem::path& path, const DenseMatrix& a);
void write_vector(const std::filesystem::path& path, const SparseVector& x);

}  // namespace rsi::mm
