#pragma once

#include <filesystem>
#include <iosfwd>

#include "faclearn/sparse_matrix.hpp"

namespace faclearn {

/// `%%MatrixMarket matrix coordinate real general`; also reads `integer` and
/// `pattern` fields. Values are written with round-trip precision.
SparseMatrix read_matrix_market(std::istream& in);
SparseMatrix read_matrix_market(const std::filesystem::path& path);
void write_matrix_market(std::ostream& out, const SparseMatrix& m);
void write_matrix_market(const std::filesystem::path& path, const SparseMatrix& m);

/// Binary cache: magic `ILG1`, then little-endian u64 rows, cols, nnz, row
/// extents (rows + 1), column indices (nnz), and f64 values (nnz).
SparseMatrix read_binary(std::istream& in);
SparseMatrix read_binary(const std::filesystem::path& path);
void write_binary(std::ostream& out, const SparseMatrix& m);
void write_binary(const std::filesystem::path& path, const SparseMatrix& m);

/// Dispatches on extension: `.ilg` is the binary cache, anything else Matrix Market.
SparseMatrix read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const SparseMatrix& m);

}  // namespace faclearn
