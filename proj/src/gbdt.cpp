#include "faclearn/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "faclearn/errors.hpp"

namespace faclearn {

namespace {

constexpr std::size_t kMinExamples = 20;
constexpr double kMinHessian = 1e-16;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double mean_logloss(const std::vector<double>& margin, const std::vector<int>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += softplus(margin[i]) - y[i] * margin[i];
  return s / static_cast<double>(y.size());
}

struct Candidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  double g_left = 0.0;
  double h_left = 0.0;
};

struct ScanState {
  double g = 0.0;
  double h = 0.0;
  double last = 0.0;
  bool seen = false;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& x, const std::vector<std::vector<std::size_t>>& order,
              const std::vector<bool>& mask, const GbdtParams& p)
      : x_(x), order_(order), mask_(mask), p_(p) {}

  // Returns the tree and, through node_of, each row's leaf.
  RegressionTree build(const std::vector<double>& g, const std::vector<double>& h, std::vector<int>& node_of) {
    const std::size_t n = g.size();
    RegressionTree tree;
    tree.nodes.emplace_back();
    grad_.assign(1, 0.0);
    hess_.assign(1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      grad_[0] += g[i];
      hess_[0] += h[i];
    }
    node_of.assign(n, 0);
    std::vector<int> level{0};

    for (std::size_t depth = 0; depth < p_.max_depth && !level.empty(); ++depth) {
      std::vector<Candidate> best(tree.nodes.size());
      std::vector<char> active(tree.nodes.size(), 0);
      for (int id : level) active[static_cast<std::size_t>(id)] = 1;
      std::vector<ScanState> state(tree.nodes.size());

      for (std::size_t f = 0; f < mask_.size(); ++f) {
        if (!mask_[f]) continue;
        for (int id : level) state[static_cast<std::size_t>(id)] = {};
        for (std::size_t i : order_[f]) {
          const int id = node_of[i];
          if (id < 0 || !active[static_cast<std::size_t>(id)]) continue;
          const auto node = static_cast<std::size_t>(id);
          ScanState& s = state[node];
          const double v = x_[i][f];
          if (s.seen && v != s.last) consider(node, f, s, v, best[node]);
          s.g += g[i];
          s.h += h[i];
          s.last = v;
          s.seen = true;
        }
      }

      std::vector<int> next;
      for (int id : level) {
        const auto node = static_cast<std::size_t>(id);
        const Candidate c = best[node];
        if (c.feature < 0) continue;
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        grad_.push_back(c.g_left);
        hess_.push_back(c.h_left);
        grad_.push_back(grad_[node] - c.g_left);
        hess_.push_back(hess_[node] - c.h_left);
        TreeNode& tn = tree.nodes[node];
        tn.feature = c.feature;
        tn.threshold = c.threshold;
        tn.left = left;
        tn.right = left + 1;
        next.push_back(left);
        next.push_back(left + 1);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const TreeNode& tn = tree.nodes[static_cast<std::size_t>(node_of[i])];
        if (!tn.leaf()) {
          node_of[i] = x_[i][static_cast<std::size_t>(tn.feature)] < tn.threshold ? tn.left : tn.right;
        }
      }
      level = std::move(next);
    }

    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      if (tree.nodes[id].leaf()) tree.nodes[id].value = -grad_[id] / (hess_[id] + p_.lambda);
    }
    return tree;
  }

 private:
  double score(double g, double h) const { return g * g / (h + p_.lambda); }

  void consider(std::size_t node, std::size_t f, const ScanState& s, double v, Candidate& best) const {
    const double gr = grad_[node] - s.g;
    const double hr = hess_[node] - s.h;
    if (s.h < p_.min_child_weight || hr < p_.min_child_weight) return;
    const double sl = score(s.g, s.h), sr = score(gr, hr), sp = score(grad_[node], hess_[node]);
    const double gain = 0.5 * (sl + sr - sp);
    // Gains within rounding of each other (or of zero) are ties; the first
    // candidate wins so that the result does not depend on summation order.
    if (!(gain > best.gain + 1e-10 * (sl + sr + sp))) return;
    double threshold = s.last + (v - s.last) / 2.0;
    if (!(threshold > s.last)) threshold = v;
    best = {gain, static_cast<int>(f), threshold, s.g, s.h};
  }

  const std::vector<std::vector<double>>& x_;
  const std::vector<std::vector<std::size_t>>& order_;
  const std::vector<bool>& mask_;
  const GbdtParams& p_;
  std::vector<double> grad_;
  std::vector<double> hess_;
};

}  // namespace

void GbdtParams::validate() const {
  if (max_depth == 0) throw ConfigError("gbdt max_depth must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("gbdt learning_rate must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("gbdt lambda must be non-negative");
  if (!(min_child_weight >= 0.0)) throw ConfigError("gbdt min_child_weight must be non-negative");
}

double RegressionTree::predict(std::span<const double> x) const {
  std::size_t id = 0;
  while (!nodes[id].leaf()) {
    const TreeNode& n = nodes[id];
    id = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
  }
  return nodes[id].value;
}

std::size_t RegressionTree::depth() const {
  std::size_t deepest = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes[id].leaf()) {
      stack.push_back({static_cast<std::size_t>(nodes[id].left), d + 1});
      stack.push_back({static_cast<std::size_t>(nodes[id].right), d + 1});
    }
  }
  return deepest;
}

GbdtModel GbdtModel::fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                         const GbdtParams& params, std::vector<bool> mask) {
  params.validate();
  if (x.size() != y.size()) throw std::invalid_argument("gbdt: feature and label counts differ");
  if (x.size() < kMinExamples) {
    throw std::invalid_argument("gbdt: need at least " + std::to_string(kMinExamples) + " examples, got " +
                                std::to_string(x.size()));
  }
  const std::size_t nf = x.front().size();
  for (const auto& row : x) {
    if (row.size() != nf) throw std::invalid_argument("gbdt: ragged feature rows");
    for (double v : row) {
      if (!std::isfinite(v)) throw std::invalid_argument("gbdt: non-finite feature value");
    }
  }
  std::size_t positives = 0;
  for (int v : y) {
    if (v != 0 && v != 1) throw std::invalid_argument("gbdt: labels must be 0 or 1");
    positives += static_cast<std::size_t>(v);
  }
  if (positives == 0 || positives == y.size()) {
    throw std::invalid_argument("gbdt: training labels contain a single class");
  }
  if (mask.empty()) mask.assign(nf, true);
  if (mask.size() != nf) throw std::invalid_argument("gbdt: feature mask length differs from feature count");

  GbdtModel m;
  m.params_ = params;
  m.n_features_ = nf;
  m.mask_ = mask;
  const double prior = static_cast<double>(positives) / static_cast<double>(y.size());
  m.base_score_ = std::log(prior / (1.0 - prior));

  const std::size_t n = x.size();
  std::vector<std::vector<std::size_t>> order(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    if (!mask[f]) continue;
    order[f].resize(n);
    std::iota(order[f].begin(), order[f].end(), std::size_t{0});
    std::stable_sort(order[f].begin(), order[f].end(),
                     [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
  }

  std::vector<double> margin(n, m.base_score_);
  std::vector<double> g(n), h(n);
  std::vector<int> leaf_of;
  m.training_loss_.push_back(mean_logloss(margin, y));
  TreeBuilder builder(x, order, mask, params);
  for (std::size_t round = 0; round < params.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      g[i] = p - y[i];
      h[i] = std::max(p * (1.0 - p), kMinHessian);
    }
    RegressionTree tree = builder.build(g, h, leaf_of);
    for (std::size_t i = 0; i < n; ++i) {
      margin[i] += params.learning_rate * tree.nodes[static_cast<std::size_t>(leaf_of[i])].value;
    }
    m.trees_.push_back(std::move(tree));
    m.training_loss_.push_back(mean_logloss(margin, y));
  }
  return m;
}

double GbdtModel::margin(std::span<const double> x) const {
  if (x.size() != n_features_) {
    throw std::invalid_argument("gbdt: expected " + std::to_string(n_features_) + " features, got " +
                                std::to_string(x.size()));
  }
  double s = 0.0;
  for (const auto& t : trees_) s += t.predict(x);
  return base_score_ + params_.learning_rate * s;
}

double GbdtModel::probability(std::span<const double> x) const { return sigmoid(margin(x)); }

GbdtModel GbdtModel::truncated(std::size_t rounds) const {
  GbdtModel m = *this;
  if (rounds < m.trees_.size()) {
    m.trees_.resize(rounds);
    m.training_loss_.resize(rounds + 1);
  }
  return m;
}

nlohmann::json GbdtModel::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) {
    std::vector<int> feature, left, right;
    std::vector<double> threshold, value;
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
                     {"value", value}});
  }
  return {{"format", "faclearn-gbdt"},
          {"version", 1},
          {"params",
           {{"rounds", params_.rounds},
            {"max_depth", params_.max_depth},
            {"learning_rate", params_.learning_rate},
            {"lambda", params_.lambda},
            {"min_child_weight", params_.min_child_weight}}},
          {"base_score", base_score_},
          {"n_features", n_features_},
          {"mask", mask_},
          {"training_loss", training_loss_},
          {"trees", std::move(trees)}};
}

GbdtModel GbdtModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "faclearn-gbdt") throw ValidationError("not a faclearn-gbdt model");
  if (j.value("version", 0) != 1) throw ValidationError("unsupported gbdt model version");
  GbdtModel m;
  const auto& p = j.at("params");
  m.params_.rounds = p.at("rounds").get<std::size_t>();
  m.params_.max_depth = p.at("max_depth").get<std::size_t>();
  m.params_.learning_rate = p.at("learning_rate").get<double>();
  m.params_.lambda = p.at("lambda").get<double>();
  m.params_.min_child_weight = p.at("min_child_weight").get<double>();
  m.base_score_ = j.at("base_score").get<double>();
  m.n_features_ = j.at("n_features").get<std::size_t>();
  m.mask_ = j.at("mask").get<std::vector<bool>>();
  m.training_loss_ = j.at("training_loss").get<std::vector<double>>();
  for (const auto& tj : j.at("trees")) {
    const auto feature = tj.at("feature").get<std::vector<int>>();
    const auto threshold = tj.at("threshold").get<std::vector<double>>();
    const auto left = tj.at("left").get<std::vector<int>>();
    const auto right = tj.at("right").get<std::vector<int>>();
    const auto value = tj.at("value").get<std::vector<double>>();
    const std::size_t size = feature.size();
    if (size == 0 || threshold.size() != size || left.size() != size || right.size() != size ||
        value.size() != size) {
      throw ValidationError("gbdt tree arrays have inconsistent lengths");
    }
    RegressionTree t;
    for (std::size_t i = 0; i < size; ++i) {
      TreeNode n{feature[i], threshold[i], left[i], right[i], value[i]};
      if (!n.leaf()) {
        const auto in_range = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(size); };
        if (static_cast<std::size_t>(n.feature) >= m.n_features_ || !in_range(n.left) || !in_range(n.right)) {
          throw ValidationError("gbdt tree node " + std::to_string(i) + " is malformed");
        }
      }
      t.nodes.push_back(n);
    }
    m.trees_.push_back(std::move(t));
  }
  return m;
}

}  // namespace faclearn
