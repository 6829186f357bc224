#include <gtest/gtest.h>

#include "faclearn/errors.hpp"
#include "helpers.hpp"

namespace faclearn {
namespace {

using testing::dense;
using testing::random_sparse;

TEST(SparseMatrix, FromCsrRejectsBrokenInvariants) {
  EXPECT_THROW(SparseMatrix::from_csr(2, 2, {0, 2, 1}, {0, 1}, {1, 1}), ValidationError);
  EXPECT_THROW(SparseMatrix::from_csr(1, 2, {0, 2}, {1, 0}, {1, 1}), ValidationError);
  EXPECT_THROW(SparseMatrix::from_csr(1, 2, {0, 1}, {2}, {1}), ValidationError);
  EXPECT_THROW(SparseMatrix::from_csr(1, 2, {0, 2}, {0, 0}, {1, 1}), ValidationError);
}

TEST(SparseMatrix, ExplicitZerosAreDropped) {
  auto m = SparseMatrix::from_csr(1, 3, {0, 3}, {0, 1, 2}, {1.0, 0.0, 2.0});
  EXPECT_EQ(m.nnz(), 2u);
  EXPECT_EQ(m.at(0, 1), 0.0);
  EXPECT_EQ(m.at(0, 2), 2.0);
}

TEST(SparseMatrix, TripletsSumDuplicates) {
  auto m = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}, {1, 1, 1.0}, {1, 1, -1.0}});
  EXPECT_EQ(m.nnz(), 1u);
  EXPECT_EQ(m.at(0, 0), 3.0);
}

TEST(Spmm, IdentityTimesB) {
  auto b = dense(3, 2, {1, 2, 0, 3, 4, 0});
  EXPECT_EQ(spmm(SparseMatrix::identity(3), b), b);
}

TEST(Spmm, SmallProduct) {
  auto c = spmm(dense(2, 2, {1, 0, 2, 3}), dense(2, 1, {1, 1}));
  EXPECT_EQ(c, dense(2, 1, {1, 5}));
}

TEST(Spmm, ZeroLeftOperand) {
  auto c = spmm(SparseMatrix(2, 4), random_sparse(4, 3, 0.8, 1));
  EXPECT_EQ(c.rows(), 2u);
  EXPECT_EQ(c.cols(), 3u);
  EXPECT_EQ(c.nnz(), 0u);
}

TEST(Spmm, ShapeMismatchNamesBothShapes) {
  try {
    spmm(SparseMatrix(2, 3), SparseMatrix(4, 1));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("4x1"), std::string::npos) << msg;
  }
}

TEST(Spmm, IdentityIsNeutralOnRandomMatrices) {
  detail::Rng rng(7);
  for (int i = 0; i < 30; ++i) {
    const std::size_t r = 1 + rng.below(100);
    const std::size_t c = 1 + rng.below(100);
    auto a = random_sparse(r, c, rng.uniform(0.0, 0.3), 100 + i);
    EXPECT_EQ(spmm(a, SparseMatrix::identity(c)), a);
    EXPECT_EQ(spmm(SparseMatrix::identity(r), a), a);
  }
}

TEST(Spmm, MatchesDenseReference) {
  detail::Rng rng(11);
  for (int i = 0; i < 120; ++i) {
    const std::size_t r = 1 + rng.below(30);
    const std::size_t k = 1 + rng.below(30);
    const std::size_t c = 1 + rng.below(30);
    auto a = random_sparse(r, k, rng.uniform(0.0, 0.6), 1000 + i);
    auto b = random_sparse(k, c, rng.uniform(0.0, 0.6), 2000 + i);
    DenseMatrix expected = to_dense(a) * to_dense(b);
    DenseMatrix got = to_dense(spmm(a, b));
    EXPECT_LE((got - expected).cwiseAbs().maxCoeff(), 1e-12) << "pair " << i;
  }
}

// Counting oracle: one multiply-add per (a_ik, b_kj) pair with both stored.
std::uint64_t oracle_count(const SparseMatrix& a, const SparseMatrix& b) {
  std::uint64_t n = 0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t k : a.row_cols(r)) n += b.row_nnz(k);
  }
  return n;
}

TEST(Spmm, InstrumentedCountMatchesOracleAndBound) {
  detail::Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    auto a = random_sparse(1 + rng.below(40), 25, rng.uniform(0.0, 0.5), 3000 + i);
    auto b = random_sparse(25, 1 + rng.below(40), rng.uniform(0.0, 0.5), 4000 + i);
    OpTrace trace;
    ExecContext ctx;
    ctx.trace = &trace;
    spmm(a, b, ctx);
    EXPECT_EQ(trace.multiply_adds, oracle_count(a, b));
    EXPECT_LE(trace.multiply_adds, b.cols() * a.nnz() + a.rows() * b.nnz());
    if (trace.multiply_adds > 0) EXPECT_GT(trace.wall_time, 0.0);
  }
}

TEST(Spmm, CostModelCountingChargesFormula) {
  auto a = random_sparse(20, 15, 0.3, 5);
  auto b = random_sparse(15, 6, 0.4, 6);
  OpTrace trace;
  ExecContext ctx;
  ctx.trace = &trace;
  ctx.counting = CountingMode::kCostModel;
  spmm(a, b, ctx);
  EXPECT_EQ(trace.multiply_adds, b.cols() * a.nnz() + a.rows() * b.nnz());
}

TEST(Spmm, BitIdenticalAcrossThreadCounts) {
  auto a = random_sparse(300, 80, 0.1, 21);
  auto b = random_sparse(80, 40, 0.2, 22);
  ExecContext one;
  const auto ref = spmm(a, b, one);
  for (unsigned threads : {2u, 8u}) {
    ExecContext ctx;
    ctx.threads = threads;
    EXPECT_EQ(spmm(a, b, ctx), ref) << threads << " threads";
  }
}

TEST(Transpose, Examples) {
  EXPECT_EQ(transpose(SparseMatrix::identity(4)), SparseMatrix::identity(4));
  EXPECT_EQ(transpose(dense(2, 2, {1, 2, 0, 3})), dense(2, 2, {1, 0, 2, 3}));
  auto a = random_sparse(50, 7, 0.1, 3);
  auto t = transpose(a);
  EXPECT_EQ(t.rows(), 7u);
  EXPECT_EQ(transpose(t), a);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) EXPECT_EQ(t.at(c, r), a.at(r, c));
  }
}

TEST(Elementwise, Examples) {
  auto a = random_sparse(5, 5, 0.5, 4);
  EXPECT_EQ(elementwise(a, ScalarFn::scale(1.0)), a);
  EXPECT_EQ(elementwise(dense(2, 2, {2, 0, 0, -3}), ScalarFn::square()), dense(2, 2, {4, 0, 0, 9}));
  EXPECT_EQ(elementwise(dense(1, 2, {2, 4}), ScalarFn::divide(2.0)), dense(1, 2, {1, 2}));
  EXPECT_THROW(ScalarFn::divide(0.0), std::invalid_argument);
}

TEST(Elementwise, RegisteredMapsKeepStructure) {
  auto a = random_sparse(10, 10, 0.3, 5);
  for (const auto& f : {ScalarFn::abs(), ScalarFn::expm1(), ScalarFn::logistic_centered(), ScalarFn::square()}) {
    EXPECT_EQ(f(0.0), 0.0);
    auto b = elementwise(a, f);
    EXPECT_EQ(b.nnz(), a.nnz());
    for (std::size_t i = 0; i < a.nnz(); ++i) EXPECT_DOUBLE_EQ(b.values()[i], f(a.values()[i]));
  }
}

TEST(Elementwise, CustomMapWithNonzeroAtOriginIsRejected) {
  auto f = ScalarFn::custom("plus_one", [](double v) { return v + 1.0; });
  EXPECT_THROW(elementwise(SparseMatrix::identity(2), f), std::invalid_argument);
}

TEST(Reductions, Examples) {
  EXPECT_EQ(row_sum(SparseMatrix::identity(3)), dense(3, 1, {1, 1, 1}));
  EXPECT_EQ(col_sum(dense(2, 2, {1, 2, 3, 4})), dense(1, 2, {4, 6}));
  auto z = row_sum(SparseMatrix(3, 4));
  EXPECT_EQ(z.rows(), 3u);
  EXPECT_EQ(z.cols(), 1u);
  EXPECT_EQ(z.nnz(), 0u);
}

TEST(Arithmetic, Examples) {
  auto a = random_sparse(4, 6, 0.5, 8);
  EXPECT_EQ(add(a, SparseMatrix(4, 6)), a);
  EXPECT_EQ(sub(dense(1, 2, {1, 2}), dense(1, 2, {1, 2})).nnz(), 0u);
  EXPECT_EQ(hadamard(dense(1, 2, {2, 3}), dense(1, 2, {4, 0})), dense(1, 2, {8, 0}));
  EXPECT_THROW(add(a, SparseMatrix(4, 5)), ShapeError);
  EXPECT_THROW(hadamard(a, SparseMatrix(3, 6)), ShapeError);
}

TEST(Arithmetic, MatchesDense) {
  auto a = random_sparse(12, 9, 0.4, 9);
  auto b = random_sparse(12, 9, 0.4, 10);
  EXPECT_LE((to_dense(add(a, b)) - (to_dense(a) + to_dense(b))).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((to_dense(sub(a, b)) - (to_dense(a) - to_dense(b))).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((to_dense(hadamard(a, b)) - to_dense(a).cwiseProduct(to_dense(b))).cwiseAbs().maxCoeff(), 0.0);
}

TEST(GatherRows, PicksRowsAndPads) {
  auto a = dense(2, 2, {1, 2, 3, 4});
  std::vector<std::int64_t> src = {1, -1, 0, 1};
  EXPECT_EQ(gather_rows(a, src), dense(4, 2, {3, 4, 0, 0, 1, 2, 3, 4}));
}

TEST(OpTrace, Accumulates) {
  OpTrace a{1, 2, 3, 0.5};
  a += OpTrace{10, 20, 30, 1.0};
  EXPECT_EQ(a.multiply_adds, 11u);
  EXPECT_EQ(a.bytes_read, 22u);
  EXPECT_EQ(a.bytes_written, 33u);
  EXPECT_DOUBLE_EQ(a.wall_time, 1.5);
}

}  // namespace
}  // namespace faclearn
