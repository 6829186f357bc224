#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <exception>
#include <thread>
#include <utility>
#include <vector>

#include "faclearn/sparse_matrix.hpp"

namespace faclearn::detail {

/// Splits [0, n) into `parts` contiguous ranges. Range boundaries depend only
/// on n and parts.
inline std::pair<std::size_t, std::size_t> chunk(std::size_t n, std::size_t parts,
                                                 std::size_t index) {
  const std::size_t base = n / parts;
  const std::size_t extra = n % parts;
  const std::size_t begin = index * base + std::min(index, extra);
  return {begin, begin + base + (index < extra ? 1 : 0)};
}

inline unsigned effective_threads(unsigned requested, std::size_t work_items) {
  const unsigned t = std::max(1u, requested);
  return static_cast<unsigned>(std::min<std::size_t>(t, std::max<std::size_t>(1, work_items)));
}

/// Runs fn(begin, end, part) over `parts` contiguous chunks of [0, n), one
/// thread per chunk. Exceptions are rethrown on the calling thread.
template <class Fn>
void parallel_chunks(std::size_t n, unsigned parts, Fn&& fn) {
  if (parts <= 1) {
    fn(std::size_t{0}, n, 0u);
    return;
  }
  std::vector<std::exception_ptr> errors(parts);
  {
    std::vector<std::jthread> workers;
    workers.reserve(parts - 1);
    for (unsigned p = 1; p < parts; ++p) {
      workers.emplace_back([&, p] {
        try {
          auto [b, e] = chunk(n, parts, p);
          fn(b, e, p);
        } catch (...) {
          errors[p] = std::current_exception();
        }
      });
    }
    try {
      auto [b, e] = chunk(n, parts, 0);
      fn(b, e, 0u);
    } catch (...) {
      errors[0] = std::current_exception();
    }
  }
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

/// Builds a CSR matrix row by row in parallel. `emit_row(row, cols, vals)`
/// appends the row's entries in increasing column order. Output is identical
/// for any thread count.
template <class EmitRow>
SparseMatrix build_rows(std::size_t rows, std::size_t cols, unsigned threads, EmitRow&& emit_row) {
  const unsigned parts = effective_threads(threads, rows);
  std::vector<std::vector<std::size_t>> part_cols(parts);
  std::vector<std::vector<double>> part_vals(parts);
  std::vector<std::size_t> row_counts(rows, 0);

  parallel_chunks(rows, parts, [&](std::size_t begin, std::size_t end, unsigned p) {
    auto& pc = part_cols[p];
    auto& pv = part_vals[p];
    for (std::size_t r = begin; r < end; ++r) {
      const std::size_t before = pc.size();
      emit_row(r, pc, pv);
      row_counts[r] = pc.size() - before;
    }
  });

  std::vector<std::size_t> row_ptr(rows + 1, 0);
  for (std::size_t r = 0; r < rows; ++r) row_ptr[r + 1] = row_ptr[r] + row_counts[r];
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
  col_idx.reserve(row_ptr[rows]);
  values.reserve(row_ptr[rows]);
  for (unsigned p = 0; p < parts; ++p) {
    col_idx.insert(col_idx.end(), part_cols[p].begin(), part_cols[p].end());
    values.insert(values.end(), part_vals[p].begin(), part_vals[p].end());
  }
  return SparseMatrix::from_csr(rows, cols, std::move(row_ptr), std::move(col_idx),
                                std::move(values));
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline void record(const ExecContext& ctx, const OpTrace& t) {
  if (ctx.trace != nullptr) *ctx.trace += t;
}

}  // namespace faclearn::detail
