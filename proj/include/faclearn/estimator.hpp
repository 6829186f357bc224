#pragma once

// Factorize-or-materialize decision: feature extraction, the boosted-tree
// estimator, threshold baselines and evaluation.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "faclearn/cost_model.hpp"
#include "faclearn/di_metadata.hpp"
#include "faclearn/gbdt.hpp"
#include "faclearn/trainers.hpp"

namespace faclearn {

inline constexpr std::size_t kFeatureCount = 33;
using FeatureVector = std::array<double, kFeatureCount>;

/// Column names in feature order. Data features come first, then complexity
/// features, then the hardware group.
const std::array<std::string_view, kFeatureCount>& feature_names();

inline constexpr std::size_t kDataFeatures = 15;
inline constexpr std::size_t kComplexityFeatures = 12;
inline constexpr std::size_t kHardwareFeatures = 6;
inline constexpr std::size_t kFirstHardwareFeature = kDataFeatures + kComplexityFeatures;

/// Index of a named feature; throws std::out_of_range for unknown names.
std::size_t feature_index(std::string_view name);

/// Pure function of its inputs; no training runs.
FeatureVector extract_features(const TableDescriptor& t, ModelKind model, const TrainConfig& cfg,
                               const HardwareSpec& hw);

/// Mask for fit(): true = feature may be used. Without hardware, the last six
/// features are hidden.
std::vector<bool> feature_mask(bool use_hardware);

struct LabeledRun {
  std::string dataset;
  std::string model;
  unsigned threads = 1;
  FeatureVector features{};
  bool label = false;  // factorized was faster
  double t_fact = 0.0;
  double t_mat = 0.0;

  static LabeledRun from_times(FeatureVector f, double t_fact, double t_mat);
};

GbdtModel fit_estimator(const std::vector<LabeledRun>& train, const GbdtParams& params = {},
                        bool use_hardware = true);

struct Prediction {
  double probability = 0.0;
  bool factorize = false;
};

Prediction predict(const GbdtModel& m, const FeatureVector& f);

/// Factorize iff min tuple ratio > tr and min feature ratio > fr.
bool baseline_tr_fr(const RedundancyStats& stats, double tr = 5.0, double fr = 1.0);
bool baseline_tr_fr(const FeatureVector& f, double tr = 5.0, double fr = 1.0);

/// Threshold family over per-source redundancy. The max-aggregated variant
/// factorizes when any one source is redundant enough; it approximates the
/// single-dimension-table rule used by earlier factorized-learning systems.
struct ThresholdRule {
  enum class Aggregate { kMin, kMax };
  Aggregate aggregate = Aggregate::kMax;
  double tuple_ratio = 5.0;
  double feature_ratio = 1.0;

  bool decide(const FeatureVector& f) const;
};

using Decider = std::function<bool(const LabeledRun&)>;

struct Metrics {
  std::size_t n = 0;
  double accuracy = 0.0;
  double f1 = 0.0;  // positive class = factorize
  double overall_speedup = 0.0;
};

/// Throws std::invalid_argument on an empty test set.
Metrics evaluate(const std::vector<LabeledRun>& test, const Decider& decide);
Metrics evaluate(const GbdtModel& m, const std::vector<LabeledRun>& test);

/// Deterministic shuffle with the given seed, then the first round(n * fraction)
/// rows train and the rest test.
struct Split {
  std::vector<LabeledRun> train;
  std::vector<LabeledRun> test;
};
Split split_corpus(const std::vector<LabeledRun>& runs, std::uint64_t seed, double train_fraction = 0.8);

/// Held-out comparison of the fitted estimators and the baselines.
struct MetricsTable {
  /// Rows in display order: gbdt, gbdt_no_hardware, tr_fr, max_rule,
  /// always_materialize, oracle.
  std::vector<std::pair<std::string, Metrics>> rows;

  const Metrics& at(const std::string& name) const;
  nlohmann::json to_json() const;
  void write_csv(std::ostream& out) const;
};

inline constexpr std::size_t kMinCorpusRows = 50;

struct ProtocolResult {
  GbdtModel full;
  GbdtModel no_hardware;
  MetricsTable metrics;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
};

/// Seeded 80/20 split, fit with and without hardware features, evaluate
/// everything on the test part. Throws ValidationError below kMinCorpusRows.
ProtocolResult run_protocol(const std::vector<LabeledRun>& corpus, std::uint64_t seed, const GbdtParams& params = {});
/// Evaluation half of run_protocol with already fitted models.
MetricsTable evaluate_protocol(const std::vector<LabeledRun>& corpus, std::uint64_t seed, const GbdtModel& full,
                               const GbdtModel& no_hardware);

/// CSV: dataset, model, threads, the 33 features, label, t_fact, t_mat.
void write_corpus_csv(std::ostream& out, const std::vector<LabeledRun>& runs);
/// Throws ValidationError on malformed rows.
std::vector<LabeledRun> read_corpus_csv(std::istream& in);

}  // namespace faclearn
