#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "faclearn/errors.hpp"
#include "faclearn/matrix_io.hpp"
#include "helpers.hpp"

namespace faclearn {
namespace {

TEST(MatrixMarket, RoundTripsExactly) {
  auto m = testing::random_sparse(40, 13, 0.2, 1, -1e3, 1e3);
  std::stringstream ss;
  write_matrix_market(ss, m);
  EXPECT_EQ(read_matrix_market(ss), m);
}

TEST(MatrixMarket, ReadsIntegerAndPatternFields) {
  std::istringstream integer("%%MatrixMarket matrix coordinate integer general\n% c\n2 2 2\n1 1 3\n2 2 -4\n");
  EXPECT_EQ(read_matrix_market(integer), testing::dense(2, 2, {3, 0, 0, -4}));
  std::istringstream pattern("%%MatrixMarket matrix coordinate pattern general\n2 3 2\n1 3\n2 1\n");
  EXPECT_EQ(read_matrix_market(pattern), testing::dense(2, 3, {0, 0, 1, 1, 0, 0}));
}

TEST(MatrixMarket, RejectsMalformedInput) {
  std::istringstream bad_header("%%NotMatrixMarket\n1 1 0\n");
  EXPECT_THROW(read_matrix_market(bad_header), ValidationError);
  std::istringstream out_of_range("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n");
  EXPECT_THROW(read_matrix_market(out_of_range), ValidationError);
  std::istringstream truncated("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n");
  EXPECT_THROW(read_matrix_market(truncated), ValidationError);
}

TEST(BinaryCache, RoundTripsAndChecksMagic) {
  auto m = testing::random_sparse(33, 21, 0.15, 2);
  std::stringstream ss;
  write_binary(ss, m);
  EXPECT_EQ(ss.str().substr(0, 4), "ILG1");
  EXPECT_EQ(read_binary(ss), m);
  std::istringstream bad("XXXX");
  EXPECT_THROW(read_binary(bad), ValidationError);
}

TEST(MatrixFiles, DispatchOnExtension) {
  const auto dir = std::filesystem::temp_directory_path() / "faclearn_io_test";
  std::filesystem::create_directories(dir);
  auto m = testing::random_sparse(9, 4, 0.5, 3);
  write_matrix(dir / "m.mtx", m);
  write_matrix(dir / "m.ilg", m);
  EXPECT_EQ(read_matrix(dir / "m.mtx"), m);
  EXPECT_EQ(read_matrix(dir / "m.ilg"), m);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace faclearn
