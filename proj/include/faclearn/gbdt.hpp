#pragma once

// Gradient-boosted regression trees for binary classification: logistic loss,
// Newton steps, exact greedy splits.

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

namespace faclearn {

struct GbdtParams {
  std::size_t rounds = 100;
  std::size_t max_depth = 4;
  double learning_rate = 0.1;
  double lambda = 1.0;
  double min_child_weight = 1.0;

  void validate() const;
  bool operator==(const GbdtParams&) const = default;
};

/// Internal nodes send x[feature] < threshold left. Leaves have feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // root at 0

  double predict(std::span<const double> x) const;
  /// Edges on the longest root-to-leaf path.
  std::size_t depth() const;
  bool operator==(const RegressionTree&) const = default;
};

class GbdtModel {
 public:
  /// Rows of `x` all have the same length. `mask`, when non-empty, marks the
  /// features the trees may split on. Throws std::invalid_argument with fewer
  /// than 20 rows or a single class.
  static GbdtModel fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                       const GbdtParams& params = {}, std::vector<bool> mask = {});

  double margin(std::span<const double> x) const;
  /// sigma(margin), in (0, 1).
  double probability(std::span<const double> x) const;
  /// probability > 0.5; a tie falls to the negative class.
  bool decide(std::span<const double> x) const { return probability(x) > 0.5; }

  const std::vector<RegressionTree>& trees() const { return trees_; }
  double base_score() const { return base_score_; }
  const GbdtParams& params() const { return params_; }
  std::size_t feature_count() const { return n_features_; }
  const std::vector<bool>& mask() const { return mask_; }
  /// Mean training log-loss before the first tree and after each round.
  const std::vector<double>& training_loss() const { return training_loss_; }

  /// Keeps only the first `rounds` trees.
  GbdtModel truncated(std::size_t rounds) const;

  nlohmann::json to_json() const;
  static GbdtModel from_json(const nlohmann::json& j);

  bool operator==(const GbdtModel&) const = default;

 private:
  GbdtParams params_;
  double base_score_ = 0.0;
  std::size_t n_features_ = 0;
  std::vector<bool> mask_;
  std::vector<RegressionTree> trees_;
  std::vector<double> training_loss_;
};

}  // namespace faclearn
