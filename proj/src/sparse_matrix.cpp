#include "faclearn/sparse_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "faclearn/errors.hpp"
#include "parallel.hpp"

namespace faclearn {

using detail::build_rows;
using detail::record;
using detail::Stopwatch;

OpTrace& OpTrace::operator+=(const OpTrace& other) {
  multiply_adds += other.multiply_adds;
  bytes_read += other.bytes_read;
  bytes_written += other.bytes_written;
  wall_time += other.wall_time;
  return *this;
}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

SparseMatrix SparseMatrix::from_csr(std::size_t rows, std::size_t cols,
                                    std::vector<std::size_t> row_ptr,
                                    std::vector<std::size_t> col_idx,
                                    std::vector<double> values) {
  if (row_ptr.size() != rows + 1) {
    throw ValidationError("row extents: expected " + std::to_string(rows + 1) + " entries, got " +
                          std::to_string(row_ptr.size()));
  }
  if (col_idx.size() != values.size()) {
    throw ValidationError("column index / value arrays differ in length");
  }
  if (row_ptr.front() != 0 || row_ptr.back() != values.size()) {
    throw ValidationError("row extents must start at 0 and end at nnz");
  }
  bool has_zero = false;
  for (std::size_t r = 0; r < rows; ++r) {
    if (row_ptr[r + 1] < row_ptr[r]) {
      throw ValidationError("row extents decrease at row " + std::to_string(r));
    }
    for (std::size_t i = row_ptr[r]; i < row_ptr[r + 1]; ++i) {
      if (col_idx[i] >= cols) {
        throw ValidationError("column index " + std::to_string(col_idx[i]) +
                              " out of range in row " + std::to_string(r));
      }
      if (i > row_ptr[r] && col_idx[i] <= col_idx[i - 1]) {
        throw ValidationError("column indices not strictly increasing in row " +
                              std::to_string(r));
      }
      has_zero = has_zero || values[i] == 0.0;
    }
  }

  SparseMatrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  if (has_zero) {
    std::size_t out = 0;
    std::size_t begin = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t end = row_ptr[r + 1];
      for (std::size_t i = begin; i < end; ++i) {
        if (values[i] != 0.0) {
          col_idx[out] = col_idx[i];
          values[out] = values[i];
          ++out;
        }
      }
      begin = end;
      row_ptr[r + 1] = out;
    }
    col_idx.resize(out);
    values.resize(out);
  }
  m.row_ptr_ = std::move(row_ptr);
  m.col_idx_ = std::move(col_idx);
  m.values_ = std::move(values);
  return m;
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      throw ValidationError("triplet (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                            ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    }
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> row_ptr(rows + 1, 0);
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
  col_idx.reserve(triplets.size());
  values.reserve(triplets.size());
  for (std::size_t i = 0; i < triplets.size();) {
    const auto& t = triplets[i];
    double sum = 0.0;
    std::size_t j = i;
    for (; j < triplets.size() && triplets[j].row == t.row && triplets[j].col == t.col; ++j) {
      sum += triplets[j].value;
    }
    if (sum != 0.0) {
      col_idx.push_back(t.col);
      values.push_back(sum);
      ++row_ptr[t.row + 1];
    }
    i = j;
  }
  std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
  return from_csr(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
}

SparseMatrix SparseMatrix::from_dense(std::size_t rows, std::size_t cols,
                                      std::span<const double> row_major) {
  if (row_major.size() != rows * cols) {
    throw ShapeError("dense buffer of " + std::to_string(row_major.size()) +
                     " values does not fill " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  std::vector<std::size_t> row_ptr(rows + 1, 0);
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = row_major[r * cols + c];
      if (v != 0.0) {
        col_idx.push_back(c);
        values.push_back(v);
      }
    }
    row_ptr[r + 1] = values.size();
  }
  return from_csr(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<std::size_t> row_ptr(n + 1);
  std::iota(row_ptr.begin(), row_ptr.end(), std::size_t{0});
  std::vector<std::size_t> col_idx(n);
  std::iota(col_idx.begin(), col_idx.end(), std::size_t{0});
  return from_csr(n, n, std::move(row_ptr), std::move(col_idx), std::vector<double>(n, 1.0));
}

SparseMatrix SparseMatrix::ones(std::size_t rows, std::size_t cols) {
  return from_dense(rows, cols, std::vector<double>(rows * cols, 1.0));
}

double SparseMatrix::density() const {
  if (rows_ == 0 || cols_ == 0) return 0.0;
  return static_cast<double>(nnz()) / (static_cast<double>(rows_) * static_cast<double>(cols_));
}

std::size_t SparseMatrix::storage_bytes() const {
  return row_ptr_.size() * sizeof(std::size_t) + col_idx_.size() * sizeof(std::size_t) +
         values_.size() * sizeof(double);
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  if (r >= rows_ || c >= cols_) {
    throw std::out_of_range("(" + std::to_string(r) + ", " + std::to_string(c) +
                            ") outside " + shape_string());
  }
  auto cols = row_cols(r);
  auto it = std::lower_bound(cols.begin(), cols.end(), c);
  if (it == cols.end() || *it != c) return 0.0;
  return values_[row_ptr_[r] + static_cast<std::size_t>(it - cols.begin())];
}

std::vector<double> SparseMatrix::to_dense() const {
  std::vector<double> out(rows_ * cols_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t i = row_ptr_[r]; i < row_ptr_[r + 1]; ++i) {
      out[r * cols_ + col_idx_[i]] = values_[i];
    }
  }
  return out;
}

std::string SparseMatrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

// --- ScalarFn --------------------------------------------------------------

ScalarFn::ScalarFn(Kind kind, double arg) : kind_(kind), arg_(arg) {
  switch (kind) {
    case Kind::kScale: name_ = "scale"; break;
    case Kind::kDivide: name_ = "divide"; break;
    case Kind::kSquare: name_ = "square"; break;
    case Kind::kAbs: name_ = "abs"; break;
    case Kind::kExpm1: name_ = "expm1"; break;
    case Kind::kLogisticCentered: name_ = "logistic_centered"; break;
    case Kind::kCustom: name_ = "custom"; break;
  }
}

ScalarFn ScalarFn::divide(double x) {
  if (x == 0.0) throw std::invalid_argument("divide: scalar divisor is zero");
  return ScalarFn(Kind::kDivide, x);
}

ScalarFn ScalarFn::custom(std::string name, std::function<double(double)> fn) {
  ScalarFn f(Kind::kCustom, 0.0);
  f.name_ = std::move(name);
  f.custom_ = std::move(fn);
  return f;
}

double ScalarFn::operator()(double v) const {
  switch (kind_) {
    case Kind::kScale: return v * arg_;
    case Kind::kDivide: return v / arg_;
    case Kind::kSquare: return v * v;
    case Kind::kAbs: return std::fabs(v);
    case Kind::kExpm1: return std::expm1(v);
    case Kind::kLogisticCentered: return 1.0 / (1.0 + std::exp(-v)) - 0.5;
    case Kind::kCustom: return custom_(v);
  }
  return 0.0;
}

// --- kernels ---------------------------------------------------------------

namespace {

void require_same_shape(const SparseMatrix& a, const SparseMatrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

void finish(const ExecContext& ctx, OpTrace t, const Stopwatch& sw) {
  t.wall_time = std::max(sw.seconds(), 1e-9);
  record(ctx, t);
}

// Row-wise merge of two sorted rows: combine(av, bv) where a missing side is 0.
template <class Combine>
SparseMatrix merge_rows(const SparseMatrix& a, const SparseMatrix& b, const ExecContext& ctx,
                        Combine combine, bool intersect_only) {
  Stopwatch sw;
  SparseMatrix out = build_rows(
      a.rows(), a.cols(), ctx.threads,
      [&](std::size_t r, std::vector<std::size_t>& cols, std::vector<double>& vals) {
        auto ac = a.row_cols(r);
        auto av = a.row_values(r);
        auto bc = b.row_cols(r);
        auto bv = b.row_values(r);
        std::size_t i = 0;
        std::size_t j = 0;
        auto push = [&](std::size_t c, double v) {
          if (v != 0.0) {
            cols.push_back(c);
            vals.push_back(v);
          }
        };
        while (i < ac.size() || j < bc.size()) {
          if (j == bc.size() || (i < ac.size() && ac[i] < bc[j])) {
            if (!intersect_only) push(ac[i], combine(av[i], 0.0));
            ++i;
          } else if (i == ac.size() || bc[j] < ac[i]) {
            if (!intersect_only) push(bc[j], combine(0.0, bv[j]));
            ++j;
          } else {
            push(ac[i], combine(av[i], bv[j]));
            ++i;
            ++j;
          }
        }
      });
  OpTrace t;
  t.multiply_adds = a.nnz() + b.nnz();
  t.bytes_read = a.storage_bytes() + b.storage_bytes();
  t.bytes_written = out.storage_bytes();
  finish(ctx, t, sw);
  return out;
}

}  // namespace

SparseMatrix spmm(const SparseMatrix& a, const SparseMatrix& b, const ExecContext& ctx) {
  if (a.cols() != b.rows()) {
    throw ShapeError("spmm: inner dimensions differ, " + a.shape_string() + " times " +
                     b.shape_string());
  }
  Stopwatch sw;
  const std::size_t width = b.cols();
  const unsigned parts = detail::effective_threads(ctx.threads, a.rows());
  std::vector<std::uint64_t> work(parts, 0);

  // Per-part dense accumulators, indexed by the part that owns the row range.
  struct Accumulator {
    std::vector<double> acc;
    std::vector<unsigned char> seen;
    std::vector<std::size_t> touched;
  };
  std::vector<Accumulator> accs(parts);
  std::vector<std::vector<std::size_t>> part_cols(parts);
  std::vector<std::vector<double>> part_vals(parts);
  std::vector<std::size_t> row_counts(a.rows(), 0);
  const bool cost_model = ctx.counting == CountingMode::kCostModel;
  const std::uint64_t b_nnz = b.nnz();
  // Few output columns: scan the whole accumulator instead of tracking touched ones.
  const bool narrow = width <= 32;

  detail::parallel_chunks(a.rows(), parts, [&](std::size_t begin, std::size_t end, unsigned p) {
    auto& ac = accs[p];
    ac.acc.assign(width, 0.0);
    ac.seen.assign(width, 0);
    auto& out_cols = part_cols[p];
    auto& out_vals = part_vals[p];
    std::uint64_t count = 0;
    for (std::size_t r = begin; r < end; ++r) {
      auto a_cols = a.row_cols(r);
      auto a_vals = a.row_values(r);
      for (std::size_t i = 0; i < a_cols.size(); ++i) {
        const std::size_t k = a_cols[i];
        const double av = a_vals[i];
        auto b_cols = b.row_cols(k);
        auto b_vals = b.row_values(k);
        if (!cost_model) count += b_cols.size();
        if (narrow) {
          for (std::size_t j = 0; j < b_cols.size(); ++j) ac.acc[b_cols[j]] += av * b_vals[j];
          continue;
        }
        for (std::size_t j = 0; j < b_cols.size(); ++j) {
          const std::size_t c = b_cols[j];
          if (!ac.seen[c]) {
            ac.seen[c] = 1;
            ac.touched.push_back(c);
            ac.acc[c] = av * b_vals[j];
          } else {
            ac.acc[c] += av * b_vals[j];
          }
        }
      }
      if (cost_model) count += a_cols.size() * width + b_nnz;

      const std::size_t before = out_cols.size();
      if (narrow) {
        for (std::size_t c = 0; c < width; ++c) {
          if (ac.acc[c] != 0.0) {
            out_cols.push_back(c);
            out_vals.push_back(ac.acc[c]);
            ac.acc[c] = 0.0;
          }
        }
      } else if (ac.touched.size() * 8 > width) {
        for (std::size_t c = 0; c < width; ++c) {
          if (ac.seen[c]) {
            if (ac.acc[c] != 0.0) {
              out_cols.push_back(c);
              out_vals.push_back(ac.acc[c]);
            }
            ac.seen[c] = 0;
          }
        }
      } else {
        std::sort(ac.touched.begin(), ac.touched.end());
        for (std::size_t c : ac.touched) {
          if (ac.acc[c] != 0.0) {
            out_cols.push_back(c);
            out_vals.push_back(ac.acc[c]);
          }
          ac.seen[c] = 0;
        }
      }
      ac.touched.clear();
      row_counts[r] = out_cols.size() - before;
    }
    work[p] = count;
  });

  std::vector<std::size_t> row_ptr(a.rows() + 1, 0);
  for (std::size_t r = 0; r < a.rows(); ++r) row_ptr[r + 1] = row_ptr[r] + row_counts[r];
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
  col_idx.reserve(row_ptr.back());
  values.reserve(row_ptr.back());
  for (unsigned p = 0; p < parts; ++p) {
    col_idx.insert(col_idx.end(), part_cols[p].begin(), part_cols[p].end());
    values.insert(values.end(), part_vals[p].begin(), part_vals[p].end());
  }
  SparseMatrix out = SparseMatrix::from_csr(a.rows(), b.cols(), std::move(row_ptr),
                                            std::move(col_idx), std::move(values));
  OpTrace t;
  t.multiply_adds = std::accumulate(work.begin(), work.end(), std::uint64_t{0});
  t.bytes_read = a.storage_bytes() + b.storage_bytes();
  t.bytes_written = out.storage_bytes();
  finish(ctx, t, sw);
  return out;
}

SparseMatrix transpose(const SparseMatrix& a, const ExecContext& ctx) {
  Stopwatch sw;
  std::vector<std::size_t> row_ptr(a.cols() + 1, 0);
  for (std::size_t c : a.col_idx()) ++row_ptr[c + 1];
  std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
  std::vector<std::size_t> cursor(row_ptr.begin(), row_ptr.end() - 1);
  std::vector<std::size_t> col_idx(a.nnz());
  std::vector<double> values(a.nnz());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto cols = a.row_cols(r);
    auto vals = a.row_values(r);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const std::size_t dst = cursor[cols[i]]++;
      col_idx[dst] = r;
      values[dst] = vals[i];
    }
  }
  SparseMatrix out = SparseMatrix::from_csr(a.cols(), a.rows(), std::move(row_ptr),
                                            std::move(col_idx), std::move(values));
  OpTrace t;
  t.bytes_read = a.storage_bytes();
  t.bytes_written = out.storage_bytes();
  finish(ctx, t, sw);
  return out;
}

SparseMatrix elementwise(const SparseMatrix& a, const ScalarFn& f, const ExecContext& ctx) {
  if (f(0.0) != 0.0) {
    throw std::invalid_argument("elementwise: " + f.name() + " does not map 0 to 0");
  }
  Stopwatch sw;
  SparseMatrix out = build_rows(
      a.rows(), a.cols(), ctx.threads,
      [&](std::size_t r, std::vector<std::size_t>& cols, std::vector<double>& vals) {
        auto ac = a.row_cols(r);
        auto av = a.row_values(r);
        for (std::size_t i = 0; i < ac.size(); ++i) {
          const double v = f(av[i]);
          if (v != 0.0) {
            cols.push_back(ac[i]);
            vals.push_back(v);
          }
        }
      });
  OpTrace t;
  t.multiply_adds = a.nnz();
  t.bytes_read = a.storage_bytes();
  t.bytes_written = out.storage_bytes();
  finish(ctx, t, sw);
  return out;
}

SparseMatrix row_sum(const SparseMatrix& a, const ExecContext& ctx) {
  Stopwatch sw;
  SparseMatrix out = build_rows(
      a.rows(), 1, ctx.threads,
      [&](std::size_t r, std::vector<std::size_t>& cols, std::vector<double>& vals) {
        double s = 0.0;
        for (double v : a.row_values(r)) s += v;
        if (s != 0.0) {
          cols.push_back(0);
          vals.push_back(s);
        }
      });
  OpTrace t;
  t.multiply_adds = a.nnz();
  t.bytes_read = a.storage_bytes();
  t.bytes_written = out.storage_bytes();
  finish(ctx, t, sw);
  return out;
}

SparseMatrix col_sum(const SparseMatrix& a, const ExecContext& ctx) {
  Stopwatch sw;
  // Deterministic mode reduces fixed-size row blocks in block order, so the
  // floating-point association does not depend on the thread count.
  constexpr std::size_t kBlockRows = 2048;
  const std::size_t blocks =
      ctx.deterministic ? std::max<std::size_t>(1, (a.rows() + kBlockRows - 1) / kBlockRows)
                        : detail::effective_threads(ctx.threads, a.rows());
  std::vector<std::vector<double>> partial(blocks, std::vector<double>(a.cols(), 0.0));
  const unsigned parts = detail::effective_threads(ctx.threads, blocks);
  detail::parallel_chunks(blocks, parts, [&](std::size_t b0, std::size_t b1, unsigned) {
    for (std::size_t blk = b0; blk < b1; ++blk) {
      auto [r0, r1] = detail::chunk(a.rows(), blocks, blk);
      auto& acc = partial[blk];
      for (std::size_t r = r0; r < r1; ++r) {
        auto cols = a.row_cols(r);
        auto vals = a.row_values(r);
        for (std::size_t i = 0; i < cols.size(); ++i) acc[cols[i]] += vals[i];
      }
    }
  });
  std::vector<double> total(a.cols(), 0.0);
  for (const auto& p : partial) {
    for (std::size_t c = 0; c < a.cols(); ++c) total[c] += p[c];
  }
  SparseMatrix out = SparseMatrix::from_dense(1, a.cols(), total);
  OpTrace t;
  t.multiply_adds = a.nnz();
  t.bytes_read = a.storage_bytes();
  t.bytes_written = out.storage_bytes();
  finish(ctx, t, sw);
  return out;
}

SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b, const ExecContext& ctx) {
  require_same_shape(a, b, "add");
  return merge_rows(a, b, ctx, [](double x, double y) { return x + y; }, false);
}

SparseMatrix sub(const SparseMatrix& a, const SparseMatrix& b, const ExecContext& ctx) {
  require_same_shape(a, b, "sub");
  return merge_rows(a, b, ctx, [](double x, double y) { return x - y; }, false);
}

SparseMatrix hadamard(const SparseMatrix& a, const SparseMatrix& b, const ExecContext& ctx) {
  require_same_shape(a, b, "hadamard");
  return merge_rows(a, b, ctx, [](double x, double y) { return x * y; }, true);
}

SparseMatrix gather_rows(const SparseMatrix& a, std::span<const std::int64_t> source,
                         const ExecContext& ctx) {
  Stopwatch sw;
  for (std::int64_t s : source) {
    if (s >= static_cast<std::int64_t>(a.rows())) {
      throw ShapeError("gather_rows: source row " + std::to_string(s) + " outside " +
                       a.shape_string());
    }
  }
  SparseMatrix out = build_rows(
      source.size(), a.cols(), ctx.threads,
      [&](std::size_t r, std::vector<std::size_t>& cols, std::vector<double>& vals) {
        if (source[r] < 0) return;
        const auto s = static_cast<std::size_t>(source[r]);
        auto c = a.row_cols(s);
        auto v = a.row_values(s);
        cols.insert(cols.end(), c.begin(), c.end());
        vals.insert(vals.end(), v.begin(), v.end());
      });
  OpTrace t;
  t.bytes_read = out.storage_bytes();
  t.bytes_written = out.storage_bytes();
  finish(ctx, t, sw);
  return out;
}

double squared_norm(const SparseMatrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return s;
}

double frobenius_norm(const SparseMatrix& a) { return std::sqrt(squared_norm(a)); }

}  // namespace faclearn
