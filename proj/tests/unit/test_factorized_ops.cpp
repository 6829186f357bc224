#include <gtest/gtest.h>

#include <sstream>

#include "faclearn/errors.hpp"
#include "faclearn/factorized_ops.hpp"
#include "helpers.hpp"

namespace faclearn {
namespace {

using testing::dense;
using testing::random_sparse;
using testing::rel_frobenius;
using testing::two_source_instance;

struct Handles {
  TargetHandle fact;
  TargetHandle mat;
};

Handles both(const FactorizedTable& ft) {
  return {TargetHandle::factorized(ft), TargetHandle::materialized(materialize(ft))};
}

TEST(TargetHandle, ShapesAgreeAndAccessorsGuardPath) {
  auto h = both(two_source_instance());
  EXPECT_EQ(h.fact.rows(), h.mat.rows());
  EXPECT_EQ(h.fact.cols(), h.mat.cols());
  EXPECT_TRUE(h.fact.is_factorized());
  EXPECT_FALSE(h.mat.is_factorized());
  EXPECT_EQ(h.fact.to_matrix(), h.mat.matrix());
  EXPECT_THROW(h.fact.matrix(), std::logic_error);
  EXPECT_THROW(h.mat.sources(), std::logic_error);
}

TEST(TargetHandle, FactorizedRejectsInvalidTable) {
  auto ft = two_source_instance();
  ft.mappings[0] = dense(4, 2, {1, 0, 0, 0, 0, 1, 0, 0});
  ft.mappings[1] = dense(4, 2, {1, 0, 0, 0, 0, 0, 0, 1});
  EXPECT_THROW(TargetHandle::factorized(ft), ValidationError);
}

TEST(Lmm, IdentityOperandMaterializes) {
  auto ft = two_source_instance();
  EXPECT_EQ(lmm(TargetHandle::factorized(ft), SparseMatrix::identity(4)), materialize(ft));
}

TEST(Lmm, OnesGivesRowSums) {
  auto h = both(two_source_instance());
  auto got = lmm(h.fact, SparseMatrix::ones(4, 1));
  EXPECT_EQ(got, row_sum(h.mat.matrix()));
  EXPECT_EQ(got, dense(4, 1, {4.5, 9, 12.5, 17}));
}

TEST(Lmm, SingleSourceCollapses) {
  auto s = random_sparse(7, 5, 0.5, 1);
  auto x = random_sparse(5, 3, 0.7, 2);
  EXPECT_LE(rel_frobenius(lmm(TargetHandle::factorized(testing::identity_instance(s)), x), spmm(s, x)), 1e-15);
}

TEST(Lmm, ShapeMismatch) {
  auto h = both(two_source_instance());
  EXPECT_THROW(lmm(h.fact, SparseMatrix(3, 1)), ShapeError);
  EXPECT_THROW(lmm(h.mat, SparseMatrix(3, 1)), ShapeError);
}

TEST(Rmm, Examples) {
  auto ft = two_source_instance();
  auto h = both(ft);
  EXPECT_EQ(rmm(SparseMatrix::identity(4), h.fact), materialize(ft));
  EXPECT_EQ(rmm(SparseMatrix::ones(1, 4), h.fact), col_sum(h.mat.matrix()));
  auto e2 = dense(1, 4, {0, 0, 1, 0});
  EXPECT_EQ(rmm(e2, h.fact), dense(1, 4, {5, 6, 1, 0.5}));
  EXPECT_THROW(rmm(SparseMatrix(1, 3), h.fact), ShapeError);
}

TEST(TransposeLmm, Examples) {
  auto ft = two_source_instance();
  auto h = both(ft);
  EXPECT_EQ(transpose_lmm(h.fact, SparseMatrix::identity(4)), transpose(materialize(ft)));
  EXPECT_EQ(transpose_lmm(h.fact, SparseMatrix::ones(4, 1)), transpose(col_sum(h.mat.matrix())));
  auto s = random_sparse(6, 4, 0.5, 3);
  auto x = random_sparse(6, 2, 0.8, 4);
  EXPECT_LE(rel_frobenius(transpose_lmm(TargetHandle::factorized(testing::identity_instance(s)), x),
                          spmm(transpose(s), x)),
            1e-15);
  EXPECT_THROW(transpose_lmm(h.fact, SparseMatrix(3, 1)), ShapeError);
}

TEST(ElementwiseT, Examples) {
  auto ft = two_source_instance();
  auto h = both(ft);
  auto sq = elementwise_t(h.fact, ScalarFn::square());
  EXPECT_TRUE(sq.is_factorized());
  EXPECT_EQ(sq.to_matrix(), elementwise(h.mat.matrix(), ScalarFn::square()));
  EXPECT_EQ(elementwise_t(h.fact, ScalarFn::scale(0.0)).to_matrix().nnz(), 0u);
  EXPECT_EQ(elementwise_t(h.fact, ScalarFn::scale(1.0)).to_matrix(), h.mat.matrix());
}

TEST(ElementwiseT, UnregisteredOrNonzeroAtOriginIsRejected) {
  auto h = both(two_source_instance());
  auto shift = ScalarFn::custom("shift", [](double v) { return v + 1.0; });
  auto dbl = ScalarFn::custom("double", [](double v) { return 2.0 * v; });
  for (const auto& f : {shift, dbl}) {
    try {
      elementwise_t(h.fact, f);
      FAIL() << "expected rejection";
    } catch (const std::invalid_argument& e) {
      EXPECT_NE(std::string(e.what()).find("requires materialization fallback"), std::string::npos);
    }
  }
}

TEST(Sums, Examples) {
  auto s = random_sparse(5, 4, 0.6, 5);
  EXPECT_EQ(row_sum_t(TargetHandle::factorized(testing::identity_instance(s))), row_sum(s));
  auto h = both(two_source_instance());
  EXPECT_EQ(row_sum_t(h.fact), row_sum(h.mat.matrix()));
  EXPECT_EQ(col_sum_t(h.fact), col_sum(h.mat.matrix()));

  // Target row 1 has no fact contribution and no dimension match.
  auto ft = two_source_instance();
  ft.join_type = JoinType::kOuter;
  ft.indicators[0] = dense(4, 4, {1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
  ft.indicators[1] = dense(4, 2, {1, 0, 0, 0, 1, 0, 0, 1});
  auto rs = row_sum_t(TargetHandle::factorized(ft));
  EXPECT_EQ(rs.at(1, 0), 0.0);
  EXPECT_EQ(rs, row_sum(materialize(ft)));
}

TEST(Equivalence, AllOperatorsOnGeneratedTables) {
  std::size_t i = 0;
  for (const auto& spec : testing::small_grid(60, 17, 200)) {
    auto ft = generate(spec).table;
    auto h = both(ft);
    const std::size_t c = 1 + (i++ % 4);
    auto x = random_sparse(ft.target_cols, c, 0.8, 50 + i);
    auto xr = random_sparse(c, ft.target_rows, 0.8, 90 + i);
    auto xt = random_sparse(ft.target_rows, c, 0.8, 130 + i);
    EXPECT_LE(rel_frobenius(lmm(h.fact, x), lmm(h.mat, x)), 1e-9) << spec.id;
    EXPECT_LE(rel_frobenius(rmm(xr, h.fact), rmm(xr, h.mat)), 1e-9) << spec.id;
    EXPECT_LE(rel_frobenius(transpose_lmm(h.fact, xt), transpose_lmm(h.mat, xt)), 1e-9) << spec.id;
    EXPECT_LE(rel_frobenius(row_sum_t(h.fact), row_sum_t(h.mat)), 1e-9) << spec.id;
    EXPECT_LE(rel_frobenius(col_sum_t(h.fact), col_sum_t(h.mat)), 1e-9) << spec.id;
    // Commutes with materialization exactly.
    EXPECT_EQ(elementwise_t(h.fact, ScalarFn::square()).to_matrix(),
              elementwise(h.mat.matrix(), ScalarFn::square()))
        << spec.id;
    EXPECT_EQ(elementwise_t(h.fact, ScalarFn::logistic_centered()).to_matrix(),
              elementwise(h.mat.matrix(), ScalarFn::logistic_centered()))
        << spec.id;
  }
}

TEST(Equivalence, DenseAccumulationThresholdDoesNotChangeResults) {
  auto ft = generate(testing::small_grid(1, 3, 300, 300).front()).table;
  auto h = TargetHandle::factorized(ft);
  auto x = random_sparse(ft.target_cols, 3, 1.0, 1);
  ExecContext sparse_acc;
  sparse_acc.dense_accumulate_threshold = 2.0;
  ExecContext dense_acc;
  dense_acc.dense_accumulate_threshold = 0.0;
  EXPECT_EQ(lmm(h, x, sparse_acc), lmm(h, x, dense_acc));
}

std::uint64_t oracle_count(const SparseMatrix& a, const SparseMatrix& b) {
  std::uint64_t n = 0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t k : a.row_cols(r)) n += b.row_nnz(k);
  }
  return n;
}

TEST(Trace, LmmCountsMatchOracleWithinBounds) {
  for (const auto& spec : testing::small_grid(20, 23, 200)) {
    auto ft = generate(spec).table;
    auto h = both(ft);
    auto x = random_sparse(ft.target_cols, 2, 0.6, 7);
    const double m_x = static_cast<double>(x.nnz());
    const double c_x = static_cast<double>(x.cols());

    OpTrace mat;
    ExecContext mc;
    mc.trace = &mat;
    lmm(h.mat, x, mc);
    const auto& t = h.mat.matrix();
    EXPECT_EQ(mat.multiply_adds, oracle_count(t, x));
    EXPECT_LE(mat.multiply_adds, c_x * t.nnz() + t.rows() * m_x);

    OpTrace fac;
    ExecContext fc;
    fc.trace = &fac;
    lmm(h.fact, x, fc);
    std::uint64_t oracle = 0;
    double bound = 0;
    for (std::size_t k = 0; k < ft.size(); ++k) {
      oracle += oracle_count(ft.sources[k], spmm(transpose(ft.mappings[k]), x));
      bound += c_x * ft.sources[k].nnz() + ft.sources[k].rows() * m_x;
    }
    EXPECT_EQ(fac.multiply_adds, oracle) << spec.id;
    EXPECT_LE(fac.multiply_adds, bound) << spec.id;
  }
}

TEST(Trace, LogRowsAndCsv) {
  auto h = both(two_source_instance());
  TraceLog log;
  ExecContext ctx;
  ctx.log = &log;
  lmm(h.fact, SparseMatrix::ones(4, 1), ctx);
  transpose_lmm(h.mat, SparseMatrix::ones(4, 1), ctx);
  ASSERT_EQ(log.rows().size(), 2u);
  EXPECT_EQ(log.rows()[0].op, "lmm");
  EXPECT_EQ(log.rows()[0].side, ExecPath::kFactorized);
  EXPECT_GT(log.rows()[0].trace.wall_time, 0.0);
  std::ostringstream out;
  log.write_csv(out);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "op,side,multiply_adds,bytes_read,bytes_written,wall_time");
  EXPECT_NE(out.str().find("transpose_lmm,materialized"), std::string::npos);
}

TEST(Determinism, FactorizedOpsBitIdenticalAcrossThreads) {
  auto ft = generate(testing::small_grid(1, 29, 400, 400).front()).table;
  auto h = TargetHandle::factorized(ft);
  auto x = random_sparse(ft.target_cols, 3, 1.0, 1);
  auto xt = random_sparse(ft.target_rows, 3, 1.0, 2);
  ExecContext one;
  for (unsigned threads : {2u, 8u}) {
    ExecContext ctx;
    ctx.threads = threads;
    EXPECT_EQ(lmm(h, x, ctx), lmm(h, x, one));
    EXPECT_EQ(transpose_lmm(h, xt, ctx), transpose_lmm(h, xt, one));
  }
}

}  // namespace
}  // namespace faclearn
