#pragma once

#include <Eigen/Dense>

#include "faclearn/sparse_matrix.hpp"

namespace faclearn {

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline SparseMatrix to_sparse(const DenseMatrix& m) {
  return SparseMatrix::from_dense(static_cast<std::size_t>(m.rows()),
                                  static_cast<std::size_t>(m.cols()),
                                  std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
}

inline DenseMatrix to_dense(const SparseMatrix& m) {
  DenseMatrix out = DenseMatrix::Zero(static_cast<Eigen::Index>(m.rows()),
                                      static_cast<Eigen::Index>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto cols = m.row_cols(r);
    auto vals = m.row_values(r);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cols[i])) = vals[i];
    }
  }
  return out;
}

}  // namespace faclearn
