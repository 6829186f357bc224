#include "faclearn/matrix_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "faclearn/errors.hpp"

namespace faclearn {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> buf{};
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf.data(), 8);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> buf{};
  if (!in.read(reinterpret_cast<char*>(buf.data()), 8)) {
    throw ValidationError("ILG1: truncated file");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

SparseMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("MatrixMarket: empty input");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket" || lower(object) != "matrix" || lower(format) != "coordinate") {
    throw ValidationError("MatrixMarket: expected coordinate matrix banner, got '" + line + "'");
  }
  field = lower(field);
  if (field != "real" && field != "integer" && field != "pattern") {
    throw ValidationError("MatrixMarket: unsupported field '" + field + "'");
  }
  if (lower(symmetry) != "general") {
    throw ValidationError("MatrixMarket: only general symmetry is supported");
  }
  do {
    if (!std::getline(in, line)) throw ValidationError("MatrixMarket: missing size line");
  } while (line.empty() || line[0] == '%');

  std::size_t rows = 0, cols = 0, entries = 0;
  {
    std::istringstream size_line(line);
    if (!(size_line >> rows >> cols >> entries)) {
      throw ValidationError("MatrixMarket: malformed size line '" + line + "'");
    }
  }
  std::vector<Triplet> triplets;
  triplets.reserve(entries);
  const bool pattern = field == "pattern";
  while (triplets.size() < entries && std::getline(in, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream entry(line);
    std::size_t r = 0, c = 0;
    double v = 1.0;
    if (!(entry >> r >> c) || (!pattern && !(entry >> v)) || r == 0 || c == 0) {
      throw ValidationError("MatrixMarket: malformed entry '" + line + "'");
    }
    triplets.push_back({r - 1, c - 1, v});
  }
  if (triplets.size() != entries) {
    throw ValidationError("MatrixMarket: expected " + std::to_string(entries) + " entries, read " +
                          std::to_string(triplets.size()));
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(triplets));
}

SparseMatrix read_matrix_market(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in);
  return read_matrix_market(in);
}

void write_matrix_market(std::ostream& out, const SparseMatrix& m) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << ' ' << m.cols() << ' ' << m.nnz() << '\n';
  char buf[64];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto cols = m.row_cols(r);
    auto vals = m.row_values(r);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      auto res = std::to_chars(buf, buf + sizeof(buf), vals[i]);
      out << (r + 1) << ' ' << (cols[i] + 1) << ' ' << std::string_view(buf, res.ptr - buf)
          << '\n';
    }
  }
}

void write_matrix_market(const std::filesystem::path& path, const SparseMatrix& m) {
  auto out = open_out(path, std::ios::out | std::ios::trunc);
  write_matrix_market(out, m);
}

SparseMatrix read_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "ILG1", 4) != 0) {
    throw ValidationError("ILG1: bad magic");
  }
  const std::uint64_t rows = get_u64(in);
  const std::uint64_t cols = get_u64(in);
  const std::uint64_t nnz = get_u64(in);
  std::vector<std::size_t> row_ptr(rows + 1);
  for (auto& v : row_ptr) v = get_u64(in);
  std::vector<std::size_t> col_idx(nnz);
  for (auto& v : col_idx) v = get_u64(in);
  std::vector<double> values(nnz);
  for (auto& v : values) v = std::bit_cast<double>(get_u64(in));
  return SparseMatrix::from_csr(rows, cols, std::move(row_ptr), std::move(col_idx),
                                std::move(values));
}

SparseMatrix read_binary(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  return read_binary(in);
}

void write_binary(std::ostream& out, const SparseMatrix& m) {
  out.write("ILG1", 4);
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  put_u64(out, m.nnz());
  for (auto v : m.row_ptr()) put_u64(out, v);
  for (auto v : m.col_idx()) put_u64(out, v);
  for (double v : m.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void write_binary(const std::filesystem::path& path, const SparseMatrix& m) {
  auto out = open_out(path, std::ios::out | std::ios::binary | std::ios::trunc);
  write_binary(out, m);
}

SparseMatrix read_matrix(const std::filesystem::path& path) {
  return path.extension() == ".ilg" ? read_binary(path) : read_matrix_market(path);
}

void write_matrix(const std::filesystem::path& path, const SparseMatrix& m) {
  if (path.extension() == ".ilg") {
    write_binary(path, m);
  } else {
    write_matrix_market(path, m);
  }
}

}  // namespace faclearn
