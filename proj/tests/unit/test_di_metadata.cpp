#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "faclearn/errors.hpp"
#include "helpers.hpp"

namespace faclearn {
namespace {

using testing::dense;
using testing::join_oracle;
using testing::two_source_instance;

TEST(Materialize, IdentityMetadataGivesSource) {
  auto s = testing::random_sparse(6, 4, 0.5, 1);
  EXPECT_EQ(materialize(testing::identity_instance(s)), s);
}

TEST(Materialize, TwoSourceHandJoin) {
  auto t = materialize(two_source_instance());
  EXPECT_EQ(t, dense(4, 4, {1, 2, 1, 0.5,  //
                            3, 4, 2, 0,    //
                            5, 6, 1, 0.5,  //
                            7, 8, 2, 0}));
}

TEST(Materialize, OuterPaddingRowIsZeroInDimColumns) {
  auto ft = two_source_instance();
  ft.join_type = JoinType::kOuter;
  ft.indicators[1] = dense(4, 2, {1, 0, 0, 1, 0, 0, 0, 1});
  auto t = materialize(ft);
  EXPECT_EQ(t.at(2, 2), 0.0);
  EXPECT_EQ(t.at(2, 3), 0.0);
  EXPECT_EQ(t.at(2, 0), 5.0);
}

TEST(Materialize, InvalidTableThrowsNamingSource) {
  auto ft = two_source_instance();
  ft.indicators[1] = dense(4, 2, {1, 0, 0, 0.5, 1, 0, 0, 1});
  try {
    materialize(ft);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("source 1"), std::string::npos) << e.what();
  }
}

TEST(Validate, ValidTableHasEmptyReport) { EXPECT_TRUE(validate(two_source_instance()).ok()); }

TEST(Validate, MappingColumnWithTwoNonzeros) {
  auto ft = two_source_instance();
  ft.mappings[1] = dense(4, 2, {0, 0, 0, 0, 1, 0, 1, 1});
  auto report = validate(ft);
  ASSERT_TRUE(report.has("column maps twice")) << report.summary();
  EXPECT_EQ(report.violations.front().source, 1u);
}

TEST(Validate, NonBinaryIndicator) {
  auto ft = two_source_instance();
  ft.indicators[1] = dense(4, 2, {1, 0, 0, 0.5, 1, 0, 0, 1});
  auto report = validate(ft);
  EXPECT_TRUE(report.has("non-binary entry")) << report.summary();
}

TEST(Validate, StructuralFindings) {
  auto ft = two_source_instance();
  ft.indicators[1] = dense(4, 2, {1, 1, 0, 1, 1, 0, 0, 1});
  EXPECT_TRUE(validate(ft).has("row matches twice"));

  ft = two_source_instance();
  ft.mappings[1] = dense(4, 2, {1, 0, 0, 0, 0, 0, 0, 1});
  EXPECT_TRUE(validate(ft).has("column claimed twice"));

  ft = two_source_instance();
  ft.mappings[1] = dense(4, 2, {0, 0, 0, 0, 1, 0, 0, 0});
  EXPECT_TRUE(validate(ft).has("unmapped column"));

  ft = two_source_instance();
  ft.indicators.pop_back();
  EXPECT_TRUE(validate(ft).has("length mismatch"));

  EXPECT_TRUE(validate(FactorizedTable{}).has("empty table"));

  ft = two_source_instance();
  ft.indicators[1] = SparseMatrix(3, 2);
  EXPECT_TRUE(validate(ft).has("indicator shape"));
}

TEST(Validate, UnionAllowsSharedColumnsOnDisjointRows) {
  FactorizedTable ft;
  ft.join_type = JoinType::kUnion;
  ft.target_rows = 3;
  ft.target_cols = 2;
  ft.sources = {dense(2, 2, {1, 2, 3, 4}), dense(1, 2, {5, 6})};
  ft.mappings = {SparseMatrix::identity(2), SparseMatrix::identity(2)};
  ft.indicators = {dense(3, 2, {1, 0, 0, 1, 0, 0}), dense(3, 1, {0, 0, 1})};
  EXPECT_TRUE(validate(ft).ok()) << validate(ft).summary();
  EXPECT_EQ(materialize(ft), dense(3, 2, {1, 2, 3, 4, 5, 6}));

  ft.indicators[1] = dense(3, 1, {1, 0, 0});
  EXPECT_TRUE(validate(ft).has("row fed twice"));
  ft.join_type = JoinType::kInner;
  ft.indicators[1] = dense(3, 1, {0, 0, 1});
  EXPECT_TRUE(validate(ft).has("column claimed twice"));
}

TEST(RedundancyStats, IdentityCase) {
  auto s = redundancy_stats(testing::identity_instance(testing::random_sparse(5, 3, 0.5, 2)));
  EXPECT_EQ(s.tuple_ratios, std::vector<double>{1.0});
  EXPECT_EQ(s.feature_ratios, std::vector<double>{1.0});
  EXPECT_EQ(s.rho_c, 1.0);
}

TEST(RedundancyStats, TwoSourceInstance) {
  auto s = redundancy_stats(two_source_instance());
  EXPECT_EQ(s.tuple_ratios, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(s.feature_ratios, (std::vector<double>{2.0, 2.0}));
  EXPECT_EQ(s.rho_c, 1.0);
  EXPECT_DOUBLE_EQ(s.sparsity_T, 2.0 / 16.0);
}

TEST(RedundancyStats, MovieLikeCardinalities) {
  const std::size_t r_t = 1'000'000;
  const std::size_t r_dim = 6040;
  FactorizedTable ft;
  ft.join_type = JoinType::kInner;
  ft.target_rows = r_t;
  ft.target_cols = 2;
  ft.sources = {SparseMatrix(r_t, 1), SparseMatrix(r_dim, 1)};
  ft.mappings = {dense(2, 1, {1, 0}), dense(2, 1, {0, 1})};
  std::vector<Triplet> fact;
  std::vector<Triplet> dim;
  for (std::size_t i = 0; i < r_t; ++i) {
    fact.push_back({i, i, 1.0});
    dim.push_back({i, i % r_dim, 1.0});
  }
  ft.indicators = {SparseMatrix::from_triplets(r_t, r_t, std::move(fact)),
                   SparseMatrix::from_triplets(r_t, r_dim, std::move(dim))};
  auto s = redundancy_stats(ft);
  EXPECT_NEAR(s.tuple_ratios[1], 165.6, 0.05);
}

TEST(Materialize, MatchesRowByRowJoinOnGeneratedTables) {
  for (const auto& spec : testing::small_grid(40, 5, 500)) {
    auto ft = generate(spec).table;
    ASSERT_TRUE(validate(ft).ok()) << spec.id;
    DenseMatrix oracle = join_oracle(ft);
    EXPECT_EQ(to_dense(materialize(ft)), oracle) << spec.id;
  }
}

TEST(Materialize, NnzIsSumOfSourceContributions) {
  for (const auto& spec : testing::small_grid(30, 6)) {
    auto ft = generate(spec).table;
    std::uint64_t sum = 0;
    for (std::size_t k = 0; k < ft.size(); ++k) sum += spmm(ft.indicators[k], ft.sources[k]).nnz();
    EXPECT_EQ(materialize(ft).nnz(), sum) << spec.id;
    EXPECT_EQ(target_nnz(ft), sum) << spec.id;
  }
}

TEST(Generated, IndicatorCoverageFollowsJoinType) {
  for (JoinType j : {JoinType::kInner, JoinType::kLeft, JoinType::kOuter}) {
    GenSpec spec;
    spec.target_rows = 200;
    spec.n_sources = 3;
    spec.join_type = j;
    spec.seed = 9;
    auto ft = generate(spec).table;
    bool padded = false;
    for (std::size_t k = 0; k < ft.size(); ++k) {
      for (std::size_t r = 0; r < ft.target_rows; ++r) {
        const auto n = ft.indicators[k].row_nnz(r);
        if (j == JoinType::kInner) EXPECT_EQ(n, 1u);
        padded = padded || n == 0;
      }
    }
    EXPECT_EQ(padded, j != JoinType::kInner) << to_string(j);
  }
}

TEST(MappingMatrix, Lookups) {
  auto m = MappingMatrix::from(dense(4, 2, {0, 0, 0, 1, 1, 0, 0, 0}));
  EXPECT_EQ(m.target_of(), (std::vector<std::int64_t>{2, 1}));
  EXPECT_EQ(m.source_of(), (std::vector<std::int64_t>{-1, 1, 0, -1}));
  EXPECT_THROW(MappingMatrix::from(dense(2, 1, {1, 1})), ValidationError);
}

TEST(IndicatorMatrix, Lookups) {
  auto ind = IndicatorMatrix::from(dense(4, 2, {1, 0, 0, 0, 1, 0, 0, 1}));
  EXPECT_EQ(ind.source_of(), (std::vector<std::int64_t>{0, -1, 0, 1}));
  EXPECT_EQ(ind.fanout(0), 2u);
  EXPECT_EQ(ind.fanout(1), 1u);
  EXPECT_THROW(IndicatorMatrix::from(dense(1, 2, {1, 1})), ValidationError);
}

TEST(Dataset, WriteLoadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "faclearn_dataset_test";
  std::filesystem::remove_all(dir);
  auto ft = two_source_instance();
  DatasetManifest m;
  m.id = "toy";
  for (const char* ext : {".mtx", ".ilg"}) {
    write_dataset(dir / ext, ft, m, ext);
    auto loaded = load_dataset(dir / ext);
    EXPECT_EQ(loaded.manifest.id, "toy");
    EXPECT_EQ(loaded.manifest.target_rows, 4u);
    EXPECT_EQ(loaded.table.sources, ft.sources);
    EXPECT_EQ(loaded.table.mappings, ft.mappings);
    EXPECT_EQ(loaded.table.indicators, ft.indicators);
  }
  std::filesystem::remove_all(dir);
}

TEST(Manifest, MissingFieldIsConfigError) {
  EXPECT_THROW(manifest_from_json(nlohmann::json{{"id", "x"}}), ConfigError);
  EXPECT_THROW(join_type_from_string("cross"), ConfigError);
}

// Nested-loop reference for a star join over keyed tables.
DenseMatrix nested_loop_join(const std::vector<KeyedTable>& tables, const IngestSpec& spec) {
  const KeyedTable& fact = tables[0];
  std::size_t cols = 0;
  for (const auto& t : tables) cols += t.feature_names.size();
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> referenced(tables.size());
  for (std::size_t k = 1; k < tables.size(); ++k) referenced[k].assign(tables[k].rows(), false);
  for (std::size_t r = 0; r < fact.rows(); ++r) {
    std::vector<double> row(fact.features[r]);
    bool all = true;
    for (std::size_t k = 1; k < tables.size(); ++k) {
      const auto& fk = fact.key(spec.links[k - 1].foreign_key)[r];
      const auto& pk = tables[k].key(spec.links[k - 1].primary_key);
      bool found = false;
      for (std::size_t d = 0; d < tables[k].rows(); ++d) {
        if (pk[d] == fk) {
          row.insert(row.end(), tables[k].features[d].begin(), tables[k].features[d].end());
          referenced[k][d] = true;
          found = true;
        }
      }
      if (!found) row.insert(row.end(), tables[k].feature_names.size(), 0.0);
      all = all && found;
    }
    if (all || spec.join_type != JoinType::kInner) rows.push_back(row);
  }
  if (spec.join_type == JoinType::kOuter) {
    for (std::size_t k = 1; k < tables.size(); ++k) {
      std::size_t before = 0;
      for (std::size_t j = 0; j < k; ++j) before += tables[j].feature_names.size();
      for (std::size_t d = 0; d < tables[k].rows(); ++d) {
        if (referenced[k][d]) continue;
        std::vector<double> row(cols, 0.0);
        std::copy(tables[k].features[d].begin(), tables[k].features[d].end(), row.begin() + before);
        rows.push_back(row);
      }
    }
  }
  DenseMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = rows[r][c];
  }
  return out;
}

std::vector<KeyedTable> keyed_star() {
  KeyedTable fact{"fact", {"a", "b"}, {{1, 2}, {3, 0}, {5, 6}, {7, 8}, {9, 1}},
                  {{"user", {"u1", "u2", "u1", "u9", "u3"}}, {"item", {"i2", "i1", "i1", "i2", "i7"}}}};
  KeyedTable users{"users", {"age"}, {{30}, {40}, {50}, {60}}, {{"id", {"u1", "u2", "u3", "u4"}}}};
  KeyedTable items{"items", {"price", "rating"}, {{1.5, 4}, {2.5, 0}, {9, 9}}, {{"id", {"i1", "i2", "i3"}}}};
  return {fact, users, items};
}

TEST(Ingest, StarJoinsMatchNestedLoopJoin) {
  const auto tables = keyed_star();
  for (JoinType j : {JoinType::kInner, JoinType::kLeft, JoinType::kOuter}) {
    IngestSpec spec{j, {{"id", "user"}, {"id", "item"}}};
    auto ft = ingest(tables, spec);
    ASSERT_TRUE(validate(ft).ok()) << validate(ft).summary();
    EXPECT_EQ(to_dense(materialize(ft)), nested_loop_join(tables, spec)) << to_string(j);
  }
}

TEST(Ingest, UnionAlignsColumnsByName) {
  KeyedTable a{"a", {"x", "y"}, {{1, 2}}, {}};
  KeyedTable b{"b", {"y", "z"}, {{3, 4}, {5, 6}}, {}};
  auto ft = ingest({a, b}, IngestSpec{JoinType::kUnion, {}});
  ASSERT_TRUE(validate(ft).ok());
  EXPECT_EQ(materialize(ft), dense(3, 3, {1, 2, 0, 0, 3, 4, 0, 5, 6}));
}

TEST(Ingest, DuplicatePrimaryKeyIsRejected) {
  auto tables = keyed_star();
  tables[1].keys[0].second[1] = "u1";
  EXPECT_THROW(ingest(tables, IngestSpec{JoinType::kInner, {{"id", "user"}, {"id", "item"}}}), ValidationError);
}

TEST(Ingest, CsvManifest) {
  const auto dir = std::filesystem::temp_directory_path() / "faclearn_ingest_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "fact.csv") << "rating,uid\n5,a\n3,b\n4,a\n";
  std::ofstream(dir / "users.csv") << "id,age\na,20\nb,30\n";
  std::ofstream(dir / "m.json")
      << R"({"join_type": "inner", "sources": [{"path": "fact.csv"},
            {"path": "users.csv", "primary_key": "id", "foreign_key": "uid"}]})";
  auto ft = ingest_csv(dir / "m.json");
  EXPECT_EQ(materialize(ft), dense(3, 2, {5, 20, 3, 30, 4, 20}));
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace faclearn
