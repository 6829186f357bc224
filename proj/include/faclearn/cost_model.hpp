#pragma once

// Closed-form arithmetic and memory-traffic estimates for the target-table
// operators on both execution paths.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "faclearn/di_metadata.hpp"
#include "faclearn/operators.hpp"
#include "faclearn/trainers.hpp"

namespace faclearn {

struct SourceDescriptor {
  double rows = 0;
  double cols = 0;
  double nnz = 0;
};

/// Shape and nonzero counts of T and its sources; all a cost estimate needs.
struct TableDescriptor {
  double rows = 0;
  double cols = 0;
  double nnz = 0;  // m_T
  JoinType join = JoinType::kInner;
  std::vector<SourceDescriptor> sources;

  static TableDescriptor from(const FactorizedTable& ft);
  double source_nnz() const;
};

struct OperandDescriptor {
  double rows = 0;
  double cols = 0;
  double nnz = 0;
};

OperandDescriptor resolve(const OperandShape& shape, const TableDescriptor& t, const TrainConfig& cfg);

/// Multiply-add count of one operator. For X with r_X x c_X and m_X nonzeros:
///   elementwise, rowSum, colSum:  m_T                      | sum m_k
///   T X:                          c_X m_T + r_T m_X        | sum c_X m_k + r_k m_X
///   X T:                          r_X m_T + c_T m_X        | sum r_X m_k + c_k m_X
///   T^T X:                        c_X m_T + c_T m_X        | sum c_X m_k + c_k m_X
double op_cost(OpKind op, const TableDescriptor& t, const OperandDescriptor& x, bool factorized);

/// Upper bound on the output nonzeros of one operator.
double output_nnz(OpKind op, const TableDescriptor& t, const OperandDescriptor& x, bool factorized);

struct ByteEstimate {
  double read = 0;
  double written = 0;
  double total() const { return read + written; }
};

inline constexpr double kElementSize = 8.0;
/// Index arrays travel with the values; reads are billed at this multiple.
inline constexpr double kIndexOverhead = 1.5;

ByteEstimate op_bytes(OpKind op, const TableDescriptor& t, const OperandDescriptor& x, bool factorized,
                      double index_overhead = kIndexOverhead);

struct OpCostEntry {
  OpKind op;
  bool setup = false;
  OperandDescriptor operand;
  double materialized = 0;  // per execution
  double factorized = 0;
};

struct CostProfile {
  std::vector<OpCostEntry> ops;
  double o_materialized = 0;
  double o_factorized = 0;
  ByteEstimate bytes_materialized;
  ByteEstimate bytes_factorized;

  /// O_mat / O_fact.
  double ratio() const;
  nlohmann::json to_json() const;
};

/// Setup steps counted once, the rest cfg.iterations times.
CostProfile sequence_cost(const std::vector<OperatorStep>& steps, const TableDescriptor& t,
                          const TrainConfig& cfg, double index_overhead = kIndexOverhead);
CostProfile model_cost(ModelKind model, const TableDescriptor& t, const TrainConfig& cfg);
/// One gradient step of linear regression: T w followed by T^T r.
CostProfile linreg_cost(const TableDescriptor& t);

/// Throws ConfigError for unknown tags.
OpKind op_kind_from_string(const std::string& s);

struct HardwareSpec {
  double parallelism = 1;
  double memory_bandwidth = 1e10;  // bytes per second
  std::string label = "default";

  /// Throws ConfigError unless parallelism >= 1 and bandwidth > 0.
  void validate() const;
  nlohmann::json to_json() const;
  static HardwareSpec from_json(const nlohmann::json& j);
};

}  // namespace faclearn
