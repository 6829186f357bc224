#pragma once

// Compressed sparse row matrix and the kernels every other module builds on.
//
// Matrices are immutable after construction. Kernels take an ExecContext that
// carries the worker-thread count and an optional OpTrace accumulator.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace faclearn {

class TraceLog;

/// Work performed by one or more kernels.
///
/// multiply_adds counts scalar arithmetic units: one per product formed in a
/// matrix multiply, one per stored value touched by elementwise maps and
/// reductions. Pure data movement (row gathers, metadata scatters) shows up in
/// the byte counters only, as do metadata applications in the factorized
/// operators (indicator aggregation, mapping scatter, partial-sum assembly).
struct OpTrace {
  std::uint64_t multiply_adds = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
  double wall_time = 0.0;  // seconds

  OpTrace& operator+=(const OpTrace& other);
  bool empty() const { return multiply_adds == 0 && bytes_read == 0 && bytes_written == 0; }
};

enum class CountingMode {
  /// Count the multiply-adds actually executed.
  kPerformed,
  /// Charge the dense-accumulator cost model: a sparse product A*B is billed
  /// cols(B) per nonzero of A plus nnz(B) per row of A.
  kCostModel,
};

struct ExecContext {
  unsigned threads = 1;
  /// Fixed-order reductions, so results are bit-identical for any thread count.
  bool deterministic = true;
  CountingMode counting = CountingMode::kPerformed;
  OpTrace* trace = nullptr;
  /// Per-operator rows, filled by the target-table operators.
  TraceLog* log = nullptr;
  /// Factorized LMM switches from sparse to dense accumulation above this
  /// estimated output density.
  double dense_accumulate_threshold = 0.25;
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

class SparseMatrix {
 public:
  /// 0 x 0 matrix.
  SparseMatrix() : row_ptr_(1, 0) {}
  /// All-zero rows x cols matrix.
  SparseMatrix(std::size_t rows, std::size_t cols);

  /// Takes ownership of raw CSR arrays. Throws ValidationError if the arrays
  /// break the CSR invariants (monotone extents, strictly increasing in-range
  /// column indices). Explicit zeros are dropped.
  static SparseMatrix from_csr(std::size_t rows, std::size_t cols,
                               std::vector<std::size_t> row_ptr,
                               std::vector<std::size_t> col_idx,
                               std::vector<double> values);
  /// Duplicates are summed; entries summing to zero are dropped.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);
  /// Row-major dense input; zeros are not stored.
  static SparseMatrix from_dense(std::size_t rows, std::size_t cols,
                                 std::span<const double> row_major);
  static SparseMatrix identity(std::size_t n);
  static SparseMatrix ones(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }
  double density() const;
  /// Bytes held by the three CSR arrays.
  std::size_t storage_bytes() const;

  std::span<const std::size_t> row_ptr() const { return row_ptr_; }
  std::span<const std::size_t> col_idx() const { return col_idx_; }
  std::span<const double> values() const { return values_; }

  std::span<const std::size_t> row_cols(std::size_t r) const {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::size_t row_nnz(std::size_t r) const { return row_ptr_[r + 1] - row_ptr_[r]; }

  /// Random access by binary search within the row.
  double at(std::size_t r, std::size_t c) const;
  std::vector<double> to_dense() const;
  std::string shape_string() const;

  bool operator==(const SparseMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

/// Scalar maps with f(0) == 0, applied to stored nonzeros only.
class ScalarFn {
 public:
  enum class Kind { kScale, kDivide, kSquare, kAbs, kExpm1, kLogisticCentered, kCustom };

  static ScalarFn scale(double x) { return ScalarFn(Kind::kScale, x); }
  /// Throws std::invalid_argument for x == 0.
  static ScalarFn divide(double x);
  static ScalarFn square() { return ScalarFn(Kind::kSquare, 0.0); }
  static ScalarFn abs() { return ScalarFn(Kind::kAbs, 0.0); }
  static ScalarFn expm1() { return ScalarFn(Kind::kExpm1, 0.0); }
  /// sigma(v) - 1/2.
  static ScalarFn logistic_centered() { return ScalarFn(Kind::kLogisticCentered, 0.0); }
  /// Unregistered map. Kernels that require f(0) == 0 check it at call time.
  static ScalarFn custom(std::string name, std::function<double(double)> fn);

  Kind kind() const { return kind_; }
  bool registered() const { return kind_ != Kind::kCustom; }
  const std::string& name() const { return name_; }
  double operator()(double v) const;

 private:
  ScalarFn(Kind kind, double arg);

  Kind kind_;
  double arg_;
  std::string name_;
  std::function<double(double)> custom_;
};

// --- kernels ---------------------------------------------------------------

/// Row-parallel Gustavson product. Throws ShapeError on a.cols != b.rows.
SparseMatrix spmm(const SparseMatrix& a, const SparseMatrix& b, const ExecContext& ctx = {});
SparseMatrix transpose(const SparseMatrix& a, const ExecContext& ctx = {});
/// Throws std::invalid_argument if f(0) != 0.
SparseMatrix elementwise(const SparseMatrix& a, const ScalarFn& f, const ExecContext& ctx = {});
/// rows x 1.
SparseMatrix row_sum(const SparseMatrix& a, const ExecContext& ctx = {});
/// 1 x cols.
SparseMatrix col_sum(const SparseMatrix& a, const ExecContext& ctx = {});
SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b, const ExecContext& ctx = {});
SparseMatrix sub(const SparseMatrix& a, const SparseMatrix& b, const ExecContext& ctx = {});
SparseMatrix hadamard(const SparseMatrix& a, const SparseMatrix& b, const ExecContext& ctx = {});

/// Output row i is a.row(source[i]), or empty when source[i] < 0.
/// Multiplication by a binary matrix with at most one nonzero per row.
SparseMatrix gather_rows(const SparseMatrix& a, std::span<const std::int64_t> source,
                         const ExecContext& ctx = {});

/// Sum of squares of the stored values.
double squared_norm(const SparseMatrix& a);
double frobenius_norm(const SparseMatrix& a);

}  // namespace faclearn
