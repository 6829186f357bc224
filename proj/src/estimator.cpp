#include "faclearn/estimator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "faclearn/errors.hpp"
#include "random.hpp"

namespace faclearn {

namespace {

constexpr std::array<std::string_view, kFeatureCount> kNames = {
    // data
    "r_T", "c_T", "n_sources", "sum_r_k", "sum_c_k", "sparsity_T", "tuple_ratio_min", "tuple_ratio_max",
    "feature_ratio_min", "feature_ratio_max", "rho_c", "join_inner", "join_left", "join_outer", "join_union",
    // complexity
    "complexity_ratio", "o_materialized", "o_factorized", "bytes_read_materialized",
    "bytes_written_materialized", "bytes_read_factorized", "bytes_written_factorized", "iterations",
    "model_linreg", "model_logreg", "model_kmeans", "model_gnmf",
    // hardware
    "parallelism", "memory_bandwidth", "o_materialized_per_thread", "o_factorized_per_thread",
    "bytes_materialized_per_bandwidth", "bytes_factorized_per_bandwidth"};

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError("corpus line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace

const std::array<std::string_view, kFeatureCount>& feature_names() { return kNames; }

std::size_t feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return i;
  }
  throw std::out_of_range("unknown feature '" + std::string(name) + "'");
}

FeatureVector extract_features(const TableDescriptor& t, ModelKind model, const TrainConfig& cfg,
                               const HardwareSpec& hw) {
  FeatureVector f{};
  double sum_r = 0, sum_c = 0;
  double tr_min = INFINITY, tr_max = 0, fr_min = INFINITY, fr_max = 0;
  for (const auto& s : t.sources) {
    sum_r += s.rows;
    sum_c += s.cols;
    const double tr = s.rows > 0 ? t.rows / s.rows : 0.0;
    const double fr = s.cols > 0 ? t.cols / s.cols : 0.0;
    tr_min = std::min(tr_min, tr);
    tr_max = std::max(tr_max, tr);
    fr_min = std::min(fr_min, fr);
    fr_max = std::max(fr_max, fr);
  }
  if (t.sources.empty()) tr_min = fr_min = 0;
  const double cells = t.rows * t.cols;

  std::size_t i = 0;
  f[i++] = t.rows;
  f[i++] = t.cols;
  f[i++] = static_cast<double>(t.sources.size());
  f[i++] = sum_r;
  f[i++] = sum_c;
  f[i++] = cells > 0 ? 1.0 - t.nnz / cells : 1.0;
  f[i++] = tr_min;
  f[i++] = tr_max;
  f[i++] = fr_min;
  f[i++] = fr_max;
  f[i++] = t.cols > 0 ? sum_c / t.cols : 0.0;
  for (JoinType j : {JoinType::kInner, JoinType::kLeft, JoinType::kOuter, JoinType::kUnion}) {
    f[i++] = t.join == j ? 1.0 : 0.0;
  }

  const CostProfile cost = model_cost(model, t, cfg);
  f[i++] = cost.o_factorized > 0 ? cost.ratio() : 0.0;
  f[i++] = cost.o_materialized;
  f[i++] = cost.o_factorized;
  f[i++] = cost.bytes_materialized.read;
  f[i++] = cost.bytes_materialized.written;
  f[i++] = cost.bytes_factorized.read;
  f[i++] = cost.bytes_factorized.written;
  f[i++] = static_cast<double>(cfg.iterations);
  for (ModelKind m : kAllModels) f[i++] = m == model ? 1.0 : 0.0;

  f[i++] = hw.parallelism;
  f[i++] = hw.memory_bandwidth;
  f[i++] = cost.o_materialized / hw.parallelism;
  f[i++] = cost.o_factorized / hw.parallelism;
  f[i++] = cost.bytes_materialized.total() / hw.memory_bandwidth;
  f[i++] = cost.bytes_factorized.total() / hw.memory_bandwidth;
  return f;
}

std::vector<bool> feature_mask(bool use_hardware) {
  std::vector<bool> mask(kFeatureCount, true);
  if (!use_hardware) {
    for (std::size_t i = kFirstHardwareFeature; i < kFeatureCount; ++i) mask[i] = false;
  }
  return mask;
}

LabeledRun LabeledRun::from_times(FeatureVector f, double t_fact, double t_mat) {
  LabeledRun r;
  r.features = f;
  r.t_fact = t_fact;
  r.t_mat = t_mat;
  r.label = t_fact < t_mat;
  return r;
}

GbdtModel fit_estimator(const std::vector<LabeledRun>& train, const GbdtParams& params, bool use_hardware) {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  x.reserve(train.size());
  for (const auto& r : train) {
    x.emplace_back(r.features.begin(), r.features.end());
    y.push_back(r.label ? 1 : 0);
  }
  return GbdtModel::fit(x, y, params, feature_mask(use_hardware));
}

Prediction predict(const GbdtModel& m, const FeatureVector& f) {
  const double p = m.probability(f);
  return {p, p > 0.5};
}

bool baseline_tr_fr(const RedundancyStats& stats, double tr, double fr) {
  if (stats.tuple_ratios.empty()) return false;
  const double tr_min = *std::min_element(stats.tuple_ratios.begin(), stats.tuple_ratios.end());
  const double fr_min = *std::min_element(stats.feature_ratios.begin(), stats.feature_ratios.end());
  return tr_min > tr && fr_min > fr;
}

bool baseline_tr_fr(const FeatureVector& f, double tr, double fr) {
  return f[feature_index("tuple_ratio_min")] > tr && f[feature_index("feature_ratio_min")] > fr;
}

bool ThresholdRule::decide(const FeatureVector& f) const {
  const bool use_min = aggregate == Aggregate::kMin;
  const double trv = f[feature_index(use_min ? "tuple_ratio_min" : "tuple_ratio_max")];
  const double frv = f[feature_index(use_min ? "feature_ratio_min" : "feature_ratio_max")];
  return trv > tuple_ratio && frv > feature_ratio;
}

Metrics evaluate(const std::vector<LabeledRun>& test, const Decider& decide) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  Metrics m;
  m.n = test.size();
  std::size_t correct = 0, tp = 0, fp = 0, fn = 0;
  double sum_mat = 0.0, sum_chosen = 0.0;
  for (const auto& r : test) {
    const bool d = decide(r);
    correct += d == r.label;
    tp += d && r.label;
    fp += d && !r.label;
    fn += !d && r.label;
    sum_mat += r.t_mat;
    sum_chosen += d ? r.t_fact : r.t_mat;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  const std::size_t denom = 2 * tp + fp + fn;
  m.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  m.overall_speedup = sum_chosen > 0.0 ? sum_mat / sum_chosen : 1.0;
  return m;
}

Metrics evaluate(const GbdtModel& model, const std::vector<LabeledRun>& test) {
  return evaluate(test, [&](const LabeledRun& r) { return predict(model, r.features).factorize; });
}

Split split_corpus(const std::vector<LabeledRun>& runs, std::uint64_t seed, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must be in (0, 1)");
  }
  std::vector<std::size_t> order(runs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  detail::Rng rng(seed);
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(runs.size())));
  Split s;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? s.train : s.test).push_back(runs[order[i]]);
  }
  return s;
}

const Metrics& MetricsTable::at(const std::string& name) const {
  for (const auto& [n, m] : rows) {
    if (n == name) return m;
  }
  throw std::out_of_range("no metrics row '" + name + "'");
}

nlohmann::json MetricsTable::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [name, m] : rows) {
    j.push_back({{"estimator", name},
                 {"n", m.n},
                 {"accuracy", m.accuracy},
                 {"f1", m.f1},
                 {"overall_speedup", m.overall_speedup}});
  }
  return j;
}

void MetricsTable::write_csv(std::ostream& out) const {
  out << "estimator,n,accuracy,f1,overall_speedup\n";
  for (const auto& [name, m] : rows) {
    out << name << ',' << m.n << ',' << format_double(m.accuracy) << ',' << format_double(m.f1) << ','
        << format_double(m.overall_speedup) << '\n';
  }
}

namespace {

Split checked_split(const std::vector<LabeledRun>& corpus, std::uint64_t seed) {
  if (corpus.size() < kMinCorpusRows) {
    throw ValidationError("corpus has " + std::to_string(corpus.size()) + " rows; at least " +
                          std::to_string(kMinCorpusRows) + " are needed");
  }
  return split_corpus(corpus, seed);
}

MetricsTable metrics_on(const std::vector<LabeledRun>& test, const GbdtModel& full, const GbdtModel& no_hw) {
  MetricsTable t;
  t.rows.emplace_back("gbdt", evaluate(full, test));
  t.rows.emplace_back("gbdt_no_hardware", evaluate(no_hw, test));
  t.rows.emplace_back("tr_fr", evaluate(test, [](const LabeledRun& r) { return baseline_tr_fr(r.features); }));
  t.rows.emplace_back("max_rule", evaluate(test, [](const LabeledRun& r) { return ThresholdRule{}.decide(r.features); }));
  t.rows.emplace_back("always_materialize", evaluate(test, [](const LabeledRun&) { return false; }));
  t.rows.emplace_back("oracle", evaluate(test, [](const LabeledRun& r) { return r.label; }));
  return t;
}

}  // namespace

ProtocolResult run_protocol(const std::vector<LabeledRun>& corpus, std::uint64_t seed, const GbdtParams& params) {
  const Split s = checked_split(corpus, seed);
  ProtocolResult r;
  r.full = fit_estimator(s.train, params, true);
  r.no_hardware = fit_estimator(s.train, params, false);
  r.metrics = metrics_on(s.test, r.full, r.no_hardware);
  r.train_rows = s.train.size();
  r.test_rows = s.test.size();
  return r;
}

MetricsTable evaluate_protocol(const std::vector<LabeledRun>& corpus, std::uint64_t seed, const GbdtModel& full,
                               const GbdtModel& no_hardware) {
  return metrics_on(checked_split(corpus, seed).test, full, no_hardware);
}

void write_corpus_csv(std::ostream& out, const std::vector<LabeledRun>& runs) {
  out << "dataset,model,threads";
  for (auto name : kNames) out << ',' << name;
  out << ",label,t_fact,t_mat\n";
  for (const auto& r : runs) {
    out << r.dataset << ',' << r.model << ',' << r.threads;
    for (double v : r.features) out << ',' << format_double(v);
    out << ',' << (r.label ? 1 : 0) << ',' << format_double(r.t_fact) << ',' << format_double(r.t_mat) << '\n';
  }
}

std::vector<LabeledRun> read_corpus_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  const std::size_t expected = 3 + kFeatureCount + 3;
  if (header.size() != expected || header[0] != "dataset" || header[3] != kNames[0]) {
    throw ValidationError("corpus header does not match the expected " + std::to_string(expected) + " columns");
  }
  std::vector<LabeledRun> runs;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != expected) {
      throw ValidationError("corpus line " + std::to_string(lineno) + ": expected " + std::to_string(expected) +
                            " cells, got " + std::to_string(cells.size()));
    }
    LabeledRun r;
    r.dataset = std::string(cells[0]);
    r.model = std::string(cells[1]);
    r.threads = static_cast<unsigned>(parse_double(cells[2], lineno));
    for (std::size_t i = 0; i < kFeatureCount; ++i) r.features[i] = parse_double(cells[3 + i], lineno);
    const std::size_t base = 3 + kFeatureCount;
    if (cells[base] != "0" && cells[base] != "1") {
      throw ValidationError("corpus line " + std::to_string(lineno) + ": label must be 0 or 1");
    }
    r.label = cells[base] == "1";
    r.t_fact = parse_double(cells[base + 1], lineno);
    r.t_mat = parse_double(cells[base + 2], lineno);
    runs.push_back(std::move(r));
  }
  return runs;
}

}  // namespace faclearn
