#pragma once

#include <cstddef>
#include <string>

namespace faclearn {

/// Target-table operators with a materialized and a factorized cost.
enum class OpKind { kElementwise, kRowSum, kColSum, kLmm, kRmm, kTransposeLmm };

std::string to_string(OpKind op);

/// Symbolic operand dimension, resolved against a table and a TrainConfig.
enum class Dim { kOne, kTargetRows, kTargetCols, kClusters, kRank };

enum class Fill {
  kDense,      // nnz = rows * cols
  kOnePerRow,  // nnz = rows (selection and one-hot assignment matrices)
};

struct OperandShape {
  Dim rows = Dim::kOne;
  Dim cols = Dim::kOne;
  Fill fill = Fill::kDense;
};

/// One operator a trainer executes against T. Setup steps run once, the rest
/// once per iteration.
struct OperatorStep {
  OpKind op;
  OperandShape operand;
  bool setup = false;
};

}  // namespace faclearn
