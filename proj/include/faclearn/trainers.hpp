#pragma once

// Batch-gradient trainers that touch the data only through the target-table
// operators, so the same code runs on materialized and factorized handles.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "faclearn/dense.hpp"
#include "faclearn/factorized_ops.hpp"
#include "faclearn/operators.hpp"

namespace faclearn {

enum class ModelKind { kLinearRegression, kLogisticRegression, kKMeans, kGaussianNmf };

inline constexpr ModelKind kAllModels[] = {ModelKind::kLinearRegression, ModelKind::kLogisticRegression,
                                           ModelKind::kKMeans, ModelKind::kGaussianNmf};

/// "linreg", "logreg", "kmeans", "gnmf".
std::string to_string(ModelKind m);
/// Throws ConfigError for unknown names.
ModelKind model_from_string(const std::string& s);
bool needs_labels(ModelKind m);

struct TrainConfig {
  std::size_t iterations = 20;
  double learning_rate = 1e-3;
  std::size_t clusters = 4;  // KMeans
  std::size_t rank = 4;      // GNMF
  std::uint64_t seed = 0;

  /// Throws ConfigError on zero iterations, clusters or rank, or a
  /// non-positive learning rate.
  void validate() const;
};

struct TrainResult {
  ModelKind model = ModelKind::kLinearRegression;
  ExecPath path = ExecPath::kMaterialized;
  unsigned threads = 1;
  /// linreg/logreg: "w" (c_T x 1). kmeans: "centroids" (k x c_T) and
  /// "assignments" (r_T x 1). gnmf: "W" (r_T x rank) and "H" (rank x c_T).
  std::map<std::string, DenseMatrix> parameters;
  /// One entry per iteration. Regression and KMeans record the objective at the
  /// parameters an update starts from; GNMF records it after each update.
  std::vector<double> losses;
  /// Operator work, excluding loss evaluation.
  OpTrace trace;
  /// Seconds spent in training, excluding loss evaluation.
  double wall_time = 0.0;

  nlohmann::json to_json(const std::string& dataset_id = "") const;
};

struct NmfInit {
  DenseMatrix w;
  DenseMatrix h;
};

/// Loss 1/2 ||Tw - y||^2, update w -= lr * T^T (Tw - y), starting at w = 0.
/// Throws DivergenceError when the loss stops being finite.
TrainResult linear_regression(const TargetHandle& t, const SparseMatrix& y, const TrainConfig& cfg,
                              const ExecContext& ctx = {});
/// Labels in {0, 1}. Loss sum log(1 + e^z) - y z with z = Tw.
TrainResult logistic_regression(const TargetHandle& t, const SparseMatrix& y, const TrainConfig& cfg,
                                const ExecContext& ctx = {});
/// Lloyd iterations from cfg.clusters distinct seeded rows. Ties go to the
/// lowest cluster index; an empty cluster keeps its centroid.
TrainResult kmeans(const TargetHandle& t, const TrainConfig& cfg, const ExecContext& ctx = {});
/// Multiplicative updates for T ~ W H. Throws std::invalid_argument on negative
/// entries in T.
TrainResult gaussian_nmf(const TargetHandle& t, const TrainConfig& cfg, const ExecContext& ctx = {},
                         const std::optional<NmfInit>& init = std::nullopt);

/// Dispatch; `labels` is required for the regression models.
TrainResult train(ModelKind model, const TargetHandle& t, const SparseMatrix* labels, const TrainConfig& cfg,
                  const ExecContext& ctx = {});

/// T^T (T w - y).
DenseMatrix linreg_gradient(const TargetHandle& t, const SparseMatrix& y, const DenseMatrix& w,
                            const ExecContext& ctx = {});
/// 1/2 ||T w - y||^2.
double linreg_loss(const TargetHandle& t, const SparseMatrix& y, const DenseMatrix& w,
                   const ExecContext& ctx = {});

/// 1 / ||T||_F^2: a step size that keeps gradient descent stable for both
/// regression losses.
double stable_learning_rate(const TargetHandle& t);

/// Operators each training run executes, for the cost model.
std::vector<OperatorStep> operator_sequence(ModelKind model);

}  // namespace faclearn
