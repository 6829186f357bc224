#include "faclearn/cost_model.hpp"

#include <stdexcept>

#include "faclearn/errors.hpp"

namespace faclearn {

std::string to_string(OpKind op) {
  switch (op) {
    case OpKind::kElementwise: return "elementwise";
    case OpKind::kRowSum: return "row_sum";
    case OpKind::kColSum: return "col_sum";
    case OpKind::kLmm: return "lmm";
    case OpKind::kRmm: return "rmm";
    case OpKind::kTransposeLmm: return "transpose_lmm";
  }
  return "?";
}

TableDescriptor TableDescriptor::from(const FactorizedTable& ft) {
  TableDescriptor d;
  d.rows = static_cast<double>(ft.target_rows);
  d.cols = static_cast<double>(ft.target_cols);
  d.nnz = static_cast<double>(target_nnz(ft));
  d.join = ft.join_type;
  for (const auto& s : ft.sources) {
    d.sources.push_back({static_cast<double>(s.rows()), static_cast<double>(s.cols()),
                         static_cast<double>(s.nnz())});
  }
  return d;
}

double TableDescriptor::source_nnz() const {
  double m = 0;
  for (const auto& s : sources) m += s.nnz;
  return m;
}

OperandDescriptor resolve(const OperandShape& shape, const TableDescriptor& t, const TrainConfig& cfg) {
  auto dim = [&](Dim d) -> double {
    switch (d) {
      case Dim::kOne: return 1;
      case Dim::kTargetRows: return t.rows;
      case Dim::kTargetCols: return t.cols;
      case Dim::kClusters: return static_cast<double>(cfg.clusters);
      case Dim::kRank: return static_cast<double>(cfg.rank);
    }
    return 0;
  };
  OperandDescriptor x{dim(shape.rows), dim(shape.cols), 0};
  x.nnz = shape.fill == Fill::kDense ? x.rows * x.cols : x.rows;
  return x;
}

double op_cost(OpKind op, const TableDescriptor& t, const OperandDescriptor& x, bool factorized) {
  if (!factorized) {
    switch (op) {
      case OpKind::kElementwise:
      case OpKind::kRowSum:
      case OpKind::kColSum: return t.nnz;
      case OpKind::kLmm: return x.cols * t.nnz + t.rows * x.nnz;
      case OpKind::kRmm: return x.rows * t.nnz + t.cols * x.nnz;
      case OpKind::kTransposeLmm: return x.cols * t.nnz + t.cols * x.nnz;
    }
    return 0;
  }
  double sum = 0;
  for (const auto& s : t.sources) {
    switch (op) {
      case OpKind::kElementwise:
      case OpKind::kRowSum:
      case OpKind::kColSum: sum += s.nnz; break;
      case OpKind::kLmm: sum += x.cols * s.nnz + s.rows * x.nnz; break;
      case OpKind::kRmm: sum += x.rows * s.nnz + s.cols * x.nnz; break;
      case OpKind::kTransposeLmm: sum += x.cols * s.nnz + s.cols * x.nnz; break;
    }
  }
  return sum;
}

double output_nnz(OpKind op, const TableDescriptor& t, const OperandDescriptor& x, bool factorized) {
  switch (op) {
    case OpKind::kElementwise: return factorized ? t.source_nnz() : t.nnz;
    case OpKind::kRowSum: return t.rows;
    case OpKind::kColSum: return t.cols;
    case OpKind::kLmm: return t.rows * x.cols;
    case OpKind::kRmm: return x.rows * t.cols;
    case OpKind::kTransposeLmm: return t.cols * x.cols;
  }
  return 0;
}

ByteEstimate op_bytes(OpKind op, const TableDescriptor& t, const OperandDescriptor& x, bool factorized,
                      double index_overhead) {
  return {kElementSize * index_overhead * op_cost(op, t, x, factorized),
          kElementSize * output_nnz(op, t, x, factorized)};
}

double CostProfile::ratio() const {
  if (o_factorized <= 0) throw std::domain_error("factorized cost is zero");
  return o_materialized / o_factorized;
}

CostProfile sequence_cost(const std::vector<OperatorStep>& steps, const TableDescriptor& t,
                           const TrainConfig& cfg, double index_overhead) {
  CostProfile c;
  const double iters = static_cast<double>(cfg.iterations);
  for (const auto& step : steps) {
    const OperandDescriptor x = resolve(step.operand, t, cfg);
    const double times = step.setup ? 1.0 : iters;
    OpCostEntry e{step.op, step.setup, x, op_cost(step.op, t, x, false), op_cost(step.op, t, x, true)};
    c.o_materialized += times * e.materialized;
    c.o_factorized += times * e.factorized;
    c.ops.push_back(e);
    const ByteEstimate bm = op_bytes(step.op, t, x, false, index_overhead);
    const ByteEstimate bf = op_bytes(step.op, t, x, true, index_overhead);
    c.bytes_materialized.read += times * bm.read;
    c.bytes_materialized.written += times * bm.written;
    c.bytes_factorized.read += times * bf.read;
    c.bytes_factorized.written += times * bf.written;
  }
  return c;
}

nlohmann::json CostProfile::to_json() const {
  nlohmann::json ops_json = nlohmann::json::array();
  for (const auto& e : ops) {
    ops_json.push_back({{"op", to_string(e.op)}, {"setup", e.setup}, {"materialized", e.materialized},
                        {"factorized", e.factorized}});
  }
  return {{"ops", std::move(ops_json)},
          {"o_materialized", o_materialized},
          {"o_factorized", o_factorized},
          {"complexity_ratio", o_factorized > 0 ? ratio() : 0.0},
          {"bytes_read_materialized", bytes_materialized.read},
          {"bytes_written_materialized", bytes_materialized.written},
          {"bytes_read_factorized", bytes_factorized.read},
          {"bytes_written_factorized", bytes_factorized.written}};
}

OpKind op_kind_from_string(const std::string& s) {
  for (OpKind op : {OpKind::kElementwise, OpKind::kRowSum, OpKind::kColSum, OpKind::kLmm, OpKind::kRmm,
                    OpKind::kTransposeLmm}) {
    if (to_string(op) == s) return op;
  }
  throw ConfigError("unknown operator '" + s + "'");
}

void HardwareSpec::validate() const {
  if (!(parallelism >= 1)) throw ConfigError("hardware parallelism must be at least 1");
  if (!(memory_bandwidth > 0)) throw ConfigError("hardware memory_bandwidth must be positive");
}

nlohmann::json HardwareSpec::to_json() const {
  return {{"parallelism", parallelism}, {"memory_bandwidth", memory_bandwidth}, {"label", label}};
}

HardwareSpec HardwareSpec::from_json(const nlohmann::json& j) {
  HardwareSpec h;
  h.parallelism = j.value("parallelism", h.parallelism);
  h.memory_bandwidth = j.value("memory_bandwidth", h.memory_bandwidth);
  h.label = j.value("label", h.label);
  h.validate();
  return h;
}

CostProfile model_cost(ModelKind model, const TableDescriptor& t, const TrainConfig& cfg) {
  return sequence_cost(operator_sequence(model), t, cfg);
}

CostProfile linreg_cost(const TableDescriptor& t) {
  TrainConfig one;
  one.iterations = 1;
  return sequence_cost(operator_sequence(ModelKind::kLinearRegression), t, one);
}

}  // namespace faclearn
