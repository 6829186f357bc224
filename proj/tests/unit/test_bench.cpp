#include <gtest/gtest.h>

#include <sstream>

#include "faclearn/bench.hpp"
#include "faclearn/errors.hpp"
#include "helpers.hpp"

namespace faclearn {
namespace {

BenchOptions quick() {
  BenchOptions o;
  o.train.iterations = 3;
  o.train.clusters = 2;
  o.train.rank = 2;
  return o;
}

TEST(BenchOptions, Validation) {
  BenchOptions o;
  EXPECT_NO_THROW(o.validate());
  o.repeats = 0;
  EXPECT_THROW(o.validate(), ConfigError);
  o = {};
  o.threads = {};
  EXPECT_THROW(o.validate(), ConfigError);
  o = {};
  o.models = {};
  EXPECT_THROW(o.validate(), ConfigError);
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({3, 1, 2}), 2);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_THROW(median({}), std::invalid_argument);
}

TEST(MakeLabels, LinearAndMedianSplit) {
  auto t = TargetHandle::factorized(testing::two_source_instance());
  EXPECT_FALSE(make_labels(t, ModelKind::kKMeans, 1).has_value());
  auto y = make_labels(t, ModelKind::kLinearRegression, 1);
  ASSERT_TRUE(y.has_value());
  EXPECT_EQ(y->rows(), 4u);
  auto yb = make_labels(t, ModelKind::kLogisticRegression, 1);
  std::size_t ones = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double v = yb->at(i, 0);
    EXPECT_TRUE(v == 0.0 || v == 1.0);
    ones += v == 1.0;
  }
  EXPECT_GE(ones, 1u);
  EXPECT_LE(ones, 2u);
}

TEST(BenchGrid, TwoDatasetsGiveSixteenRuns) {
  auto specs = testing::small_grid(2, 3, 200, 100);
  std::size_t calls = 0;
  auto rows = bench_grid(specs, quick(), [&](std::size_t done, std::size_t total, const std::string&) {
    ++calls;
    EXPECT_EQ(done, calls);
    EXPECT_EQ(total, 2u);
  });
  EXPECT_EQ(rows.size(), 16u);
  EXPECT_EQ(calls, 2u);
  auto corpus = to_corpus(rows);
  EXPECT_EQ(corpus.size(), 16u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    EXPECT_TRUE(r.equivalent) << r.dataset << " " << to_string(r.model) << " " << r.max_loss_rel_diff;
    EXPECT_GT(r.t_fact, 0.0);
    EXPECT_GT(r.t_mat, 0.0);
    EXPECT_DOUBLE_EQ(r.speedup(), r.t_mat / r.t_fact);
    EXPECT_EQ(corpus[i].label, r.t_fact < r.t_mat);
    EXPECT_EQ(corpus[i].features[feature_index("parallelism")], r.threads);
    EXPECT_GT(r.trace_fact.multiply_adds, 0u);
  }
}

TEST(BenchDataset, ReportedTimeIsMedianOfRepeats) {
  auto o = quick();
  o.models = {ModelKind::kLinearRegression};
  o.threads = {1};
  o.repeats = 3;
  auto rows = bench_dataset(testing::two_source_instance(), "toy", o);
  ASSERT_EQ(rows.size(), 1u);
  ASSERT_EQ(rows[0].fact_samples.size(), 3u);
  ASSERT_EQ(rows[0].mat_samples.size(), 3u);
  EXPECT_EQ(rows[0].t_fact, median(rows[0].fact_samples));
  EXPECT_EQ(rows[0].t_mat, median(rows[0].mat_samples));
}

TEST(BenchDataset, NonEquivalentRowsLeaveTheCorpus) {
  auto o = quick();
  o.models = {ModelKind::kLinearRegression};
  o.threads = {1};
  o.equivalence_tolerance = -1.0;  // nothing can pass
  auto rows = bench_dataset(testing::two_source_instance(), "toy", o);
  EXPECT_FALSE(rows[0].equivalent);
  EXPECT_TRUE(to_corpus(rows).empty());
}

FactorizedTable identity_dataset() {
  return testing::identity_instance(testing::random_sparse(4000, 60, 0.3, 1, 0.0, 1.0));
}

// Fact table with 2 columns joined to a dense 200 x 60 dimension, fanout 40.
FactorizedTable redundant_dataset() {
  const std::size_t rows = 8000, dim_rows = 200, fact_cols = 2, dim_cols = 60;
  FactorizedTable ft;
  ft.join_type = JoinType::kInner;
  ft.target_rows = rows;
  ft.target_cols = fact_cols + dim_cols;
  ft.sources = {testing::random_sparse(rows, fact_cols, 1.0, 2, 0.0, 1.0),
                testing::random_sparse(dim_rows, dim_cols, 1.0, 3, 0.0, 1.0)};
  std::vector<Triplet> m0, m1, i0, i1;
  for (std::size_t c = 0; c < fact_cols; ++c) m0.push_back({c, c, 1.0});
  for (std::size_t c = 0; c < dim_cols; ++c) m1.push_back({fact_cols + c, c, 1.0});
  for (std::size_t r = 0; r < rows; ++r) {
    i0.push_back({r, r, 1.0});
    i1.push_back({r, r % dim_rows, 1.0});
  }
  ft.mappings = {SparseMatrix::from_triplets(ft.target_cols, fact_cols, m0),
                 SparseMatrix::from_triplets(ft.target_cols, dim_cols, m1)};
  ft.indicators = {SparseMatrix::from_triplets(rows, rows, i0), SparseMatrix::from_triplets(rows, dim_rows, i1)};
  return ft;
}

BenchOptions linreg_timing() {
  BenchOptions o;
  o.models = {ModelKind::kLinearRegression};
  o.threads = {1};
  o.repeats = 5;
  o.train.iterations = 20;
  return o;
}

TEST(BenchTiming, IdentityMetadataSpeedupNearOne) {
  auto rows = bench_dataset(identity_dataset(), "identity", linreg_timing());
  EXPECT_GE(rows[0].speedup(), 0.8);
  EXPECT_LE(rows[0].speedup(), 1.2);
}

TEST(BenchTiming, IdentityMetadataLabelIsMaterialize) {
  auto rows = bench_dataset(identity_dataset(), "identity", linreg_timing());
  EXPECT_FALSE(to_corpus(rows).at(0).label) << "speedup " << rows[0].speedup();
}

TEST(BenchTiming, HighRedundancyLinregFactorizes) {
  auto ft = redundant_dataset();
  EXPECT_GE(redundancy_stats(ft).tuple_ratios[1], 20.0);
  auto rows = bench_dataset(ft, "redundant", linreg_timing());
  EXPECT_GT(rows[0].speedup(), 1.0);
}

TEST(BenchCsv, RoundTrip) {
  auto o = quick();
  o.threads = {1};
  auto rows = bench_dataset(testing::two_source_instance(), "toy", o);
  std::stringstream ss;
  write_bench_csv(ss, rows);
  auto back = read_bench_csv(ss);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].dataset, rows[i].dataset);
    EXPECT_EQ(back[i].model, rows[i].model);
    EXPECT_EQ(back[i].t_fact, rows[i].t_fact);
    EXPECT_EQ(back[i].t_mat, rows[i].t_mat);
    EXPECT_EQ(back[i].equivalent, rows[i].equivalent);
    EXPECT_EQ(back[i].trace_fact.multiply_adds, rows[i].trace_fact.multiply_adds);
  }
  std::istringstream empty("");
  EXPECT_TRUE(read_bench_csv(empty).empty());
  std::istringstream bad("a,b\n");
  EXPECT_THROW(read_bench_csv(bad), ValidationError);
}

}  // namespace
}  // namespace faclearn
