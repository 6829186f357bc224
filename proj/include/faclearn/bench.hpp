#pragma once

// Dual-path benchmark harness: time each model on the materialized and the
// factorized path, check that both paths agree, and label the run.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "faclearn/cost_model.hpp"
#include "faclearn/datagen.hpp"
#include "faclearn/estimator.hpp"
#include "faclearn/trainers.hpp"

namespace faclearn {

struct BenchOptions {
  std::vector<ModelKind> models = {std::begin(kAllModels), std::end(kAllModels)};
  std::vector<unsigned> threads = {1, 2};
  /// Timed repetitions per path; the reported time is their median.
  std::size_t repeats = 3;
  /// One discarded single-iteration run per path before timing.
  bool warmup = true;
  TrainConfig train;
  /// Use stable_learning_rate() of each dataset instead of train.learning_rate.
  bool auto_learning_rate = true;
  double memory_bandwidth = 1e10;
  std::string hardware_label = "local";
  /// Per-iteration losses of the two paths must agree to this relative error.
  double equivalence_tolerance = 1e-6;

  /// Throws ConfigError on empty model/thread lists or zero repeats.
  void validate() const;
};

struct BenchRow {
  std::string dataset;
  ModelKind model = ModelKind::kLinearRegression;
  unsigned threads = 1;
  /// Median seconds. t_mat includes building T from the sources.
  double t_fact = 0.0;
  double t_mat = 0.0;
  /// Per-repeat seconds behind the medians.
  std::vector<double> fact_samples;
  std::vector<double> mat_samples;
  bool equivalent = false;
  double max_loss_rel_diff = 0.0;
  bool tr_fr = false;     // TR&FR baseline decision
  bool max_rule = false;  // max-aggregated threshold rule decision
  FeatureVector features{};
  OpTrace trace_fact;
  OpTrace trace_mat;

  double speedup() const { return t_fact > 0.0 ? t_mat / t_fact : 0.0; }
};

/// Middle element, or the mean of the two middle elements. Throws
/// std::invalid_argument on an empty input.
double median(std::vector<double> v);

/// Synthetic regression targets for a dataset: T w* for linreg and its
/// median split for logreg, with w* uniform in [-1, 1]. Null for the
/// unsupervised models.
std::optional<SparseMatrix> make_labels(const TargetHandle& t, ModelKind model, std::uint64_t seed);

/// All (model, threads) combinations for one dataset.
std::vector<BenchRow> bench_dataset(const FactorizedTable& ft, const std::string& id, const BenchOptions& opts);

/// Rows that passed the equivalence check, as estimator training data.
std::vector<LabeledRun> to_corpus(const std::vector<BenchRow>& rows);

using BenchProgress = std::function<void(std::size_t done, std::size_t total, const std::string& id)>;

/// Generates each dataset in turn and benchmarks it; datasets are never held
/// in memory together.
std::vector<BenchRow> bench_grid(const std::vector<GenSpec>& specs, const BenchOptions& opts,
                                 const BenchProgress& progress = {});

/// Columns: dataset, model, threads, t_fact, t_mat, speedup, equivalent,
/// max_loss_rel_diff, tr_fr, max_rule, madds_fact, madds_mat.
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);
/// Reads the columns written by write_bench_csv (features are not stored).
std::vector<BenchRow> read_bench_csv(std::istream& in);

}  // namespace faclearn
