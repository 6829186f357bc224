#pragma once

// Target-table operators that run either on a materialized T or directly over
// the sources of a FactorizedTable:
//
//   T X     ->  sum_k I_k (S_k (M_k^T X))
//   T^T X   ->  sum_k M_k (S_k^T (I_k^T X))
//   X T     ->  (T^T X^T)^T
//   f(T)    ->  f applied to each S_k, metadata unchanged (requires f(0) = 0)
//   rowSum  ->  sum_k I_k rowSum(S_k)
//   colSum  ->  sum_k ((1^T I_k) S_k) M_k^T

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "faclearn/di_metadata.hpp"
#include "faclearn/sparse_matrix.hpp"

namespace faclearn {

enum class ExecPath { kMaterialized, kFactorized };

std::string to_string(ExecPath p);

/// One source with its metadata and a cached transpose.
struct PreparedSource {
  SparseMatrix matrix;
  SparseMatrix transposed;
  std::shared_ptr<const MappingMatrix> mapping;
  std::shared_ptr<const IndicatorMatrix> indicator;
};

/// Either a materialized target matrix or a validated factorized table. Both
/// expose the same logical shape r_T x c_T. Cheap to copy; immutable.
class TargetHandle {
 public:
  static TargetHandle materialized(SparseMatrix t);
  /// Validates the table; throws ValidationError on violations.
  static TargetHandle factorized(const FactorizedTable& ft);
  /// Factorized handle with the same metadata and new source matrices.
  static TargetHandle with_sources(const TargetHandle& base, std::vector<SparseMatrix> sources);

  ExecPath path() const { return path_; }
  bool is_factorized() const { return path_ == ExecPath::kFactorized; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  /// Materialized path only.
  const SparseMatrix& matrix() const;
  const SparseMatrix& matrix_transposed() const;
  /// Factorized path only.
  const std::vector<PreparedSource>& sources() const;
  JoinType join_type() const { return join_type_; }

  /// Returns T, materializing a factorized handle.
  SparseMatrix to_matrix(const ExecContext& ctx = {}) const;

 private:
  TargetHandle() = default;

  ExecPath path_ = ExecPath::kMaterialized;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  JoinType join_type_ = JoinType::kInner;
  std::shared_ptr<const SparseMatrix> t_;
  std::shared_ptr<const SparseMatrix> t_transposed_;
  std::shared_ptr<const std::vector<PreparedSource>> sources_;
};

/// T x. Throws ShapeError unless x.rows == c_T.
SparseMatrix lmm(const TargetHandle& t, const SparseMatrix& x, const ExecContext& ctx = {});
/// x T. Throws ShapeError unless x.cols == r_T.
SparseMatrix rmm(const SparseMatrix& x, const TargetHandle& t, const ExecContext& ctx = {});
/// T^T x. Throws ShapeError unless x.rows == r_T.
SparseMatrix transpose_lmm(const TargetHandle& t, const SparseMatrix& x, const ExecContext& ctx = {});
/// f(T). Throws std::invalid_argument ("requires materialization fallback")
/// for unregistered maps or maps with f(0) != 0.
TargetHandle elementwise_t(const TargetHandle& t, const ScalarFn& f, const ExecContext& ctx = {});
/// r_T x 1.
SparseMatrix row_sum_t(const TargetHandle& t, const ExecContext& ctx = {});
/// 1 x c_T.
SparseMatrix col_sum_t(const TargetHandle& t, const ExecContext& ctx = {});

struct TraceRow {
  std::string op;
  ExecPath side;
  OpTrace trace;
};

/// Per-operator trace rows, exportable as CSV:
/// op,side,multiply_adds,bytes_read,bytes_written,wall_time
class TraceLog {
 public:
  void add(std::string op, ExecPath side, const OpTrace& trace);
  const std::vector<TraceRow>& rows() const { return rows_; }
  OpTrace total() const;
  void write_csv(std::ostream& out) const;

 private:
  std::vector<TraceRow> rows_;
};

}  // namespace faclearn
