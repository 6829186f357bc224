#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "faclearn/datagen.hpp"
#include "faclearn/dense.hpp"
#include "faclearn/di_metadata.hpp"
#include "faclearn/sparse_matrix.hpp"
#include "random.hpp"

namespace faclearn::testing {

inline SparseMatrix dense(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return SparseMatrix::from_dense(rows, cols, v);
}

inline SparseMatrix random_sparse(std::size_t rows, std::size_t cols, double density, std::uint64_t seed,
                                  double lo = -1.0, double hi = 1.0) {
  detail::Rng rng(seed);
  std::vector<Triplet> t;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (rng.uniform() < density) {
        double v = rng.uniform(lo, hi);
        if (v == 0.0) v = 0.5;
        t.push_back({r, c, v});
      }
    }
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

/// ||a - b||_F / max(||b||_F, tiny).
inline double rel_frobenius(const DenseMatrix& a, const DenseMatrix& b) {
  const double denom = std::max(b.norm(), 1e-300);
  return (a - b).norm() / denom;
}
inline double rel_frobenius(const SparseMatrix& a, const SparseMatrix& b) {
  return rel_frobenius(to_dense(a), to_dense(b));
}

/// Fact table S1 (4x2) joined with dimension S2 (2x2); target rows 0,2 take
/// dimension row 0 and rows 1,3 take dimension row 1. Target columns are
/// [S1 | S2].
inline FactorizedTable two_source_instance() {
  FactorizedTable ft;
  ft.join_type = JoinType::kInner;
  ft.target_rows = 4;
  ft.target_cols = 4;
  ft.sources = {dense(4, 2, {1, 2, 3, 4, 5, 6, 7, 8}), dense(2, 2, {1, 0.5, 2, 0})};
  ft.mappings = {dense(4, 2, {1, 0, 0, 1, 0, 0, 0, 0}), dense(4, 2, {0, 0, 0, 0, 1, 0, 0, 1})};
  ft.indicators = {SparseMatrix::identity(4), dense(4, 2, {1, 0, 0, 1, 1, 0, 0, 1})};
  return ft;
}

/// Same structure with every stored value nonzero, so m_T = 16, m_1 = 8, m_2 = 4.
inline FactorizedTable two_source_dense_instance() {
  FactorizedTable ft = two_source_instance();
  ft.sources[1] = dense(2, 2, {1, 0.5, 2, 3});
  return ft;
}

/// Single source with identity metadata.
inline FactorizedTable identity_instance(const SparseMatrix& s) {
  FactorizedTable ft;
  ft.join_type = JoinType::kInner;
  ft.target_rows = s.rows();
  ft.target_cols = s.cols();
  ft.sources = {s};
  ft.mappings = {SparseMatrix::identity(s.cols())};
  ft.indicators = {SparseMatrix::identity(s.rows())};
  return ft;
}

/// Feasible small specs covering n in {2,3,4}, all join types, p in [0, 0.9].
inline std::vector<GenSpec> small_grid(std::size_t count, std::uint64_t seed, std::size_t max_rows = 400,
                                       std::size_t min_rows = 20) {
  std::vector<std::size_t> rows;
  for (std::size_t r = min_rows; r <= max_rows; r += (max_rows - min_rows) / 7 + 1) rows.push_back(r);
  nlohmann::json cfg = {{"seed", seed},
                        {"count", count},
                        {"target_rows", rows},
                        {"n_sources", {2, 3, 4}},
                        {"source_cols", {2, 12}},
                        {"sparsity", {0.0, 0.9}},
                        {"rho_c", {0.3, 1.0}}};
  return expand_grid(cfg);
}

/// T built cell by cell: for each target row, copy every matched source row
/// into the target columns its mapping names.
inline DenseMatrix join_oracle(const FactorizedTable& ft) {
  DenseMatrix t = DenseMatrix::Zero(static_cast<Eigen::Index>(ft.target_rows),
                                    static_cast<Eigen::Index>(ft.target_cols));
  for (std::size_t k = 0; k < ft.size(); ++k) {
    const SparseMatrix& ind = ft.indicators[k];
    const SparseMatrix& map = ft.mappings[k];
    std::vector<std::size_t> target_col(map.cols());
    for (std::size_t r = 0; r < map.rows(); ++r) {
      for (std::size_t c : map.row_cols(r)) target_col[c] = r;
    }
    for (std::size_t i = 0; i < ft.target_rows; ++i) {
      for (std::size_t j : ind.row_cols(i)) {
        const auto cols = ft.sources[k].row_cols(j);
        const auto vals = ft.sources[k].row_values(j);
        for (std::size_t e = 0; e < cols.size(); ++e) {
          t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(target_col[cols[e]])) += vals[e];
        }
      }
    }
  }
  return t;
}

}  // namespace faclearn::testing
