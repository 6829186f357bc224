#include "faclearn/bench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "faclearn/errors.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace faclearn {

namespace {

using detail::Stopwatch;

struct PathRun {
  double seconds = 0.0;
  TrainResult result;
};

PathRun run_materialized(const FactorizedTable& ft, ModelKind model, const SparseMatrix* y, const TrainConfig& cfg,
                         const ExecContext& ctx) {
  Stopwatch sw;
  TargetHandle h = TargetHandle::materialized(materialize(ft, ctx));
  const double prep = sw.seconds();
  PathRun r{0.0, train(model, h, y, cfg, ctx)};
  r.seconds = prep + r.result.wall_time;
  return r;
}

PathRun run_factorized(const FactorizedTable& ft, ModelKind model, const SparseMatrix* y, const TrainConfig& cfg,
                       const ExecContext& ctx) {
  Stopwatch sw;
  TargetHandle h = TargetHandle::factorized(ft);
  const double prep = sw.seconds();
  PathRun r{0.0, train(model, h, y, cfg, ctx)};
  r.seconds = prep + r.result.wall_time;
  return r;
}

double max_relative_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max(std::abs(a[i]), std::abs(b[i]));
    const double diff = std::abs(a[i] - b[i]);
    if (diff == 0.0) continue;
    worst = std::max(worst, scale > 0.0 ? diff / scale : INFINITY);
  }
  return worst;
}

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) return out;
    start = comma + 1;
  }
}

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void BenchOptions::validate() const {
  if (models.empty()) throw ConfigError("bench: no models selected");
  if (threads.empty()) throw ConfigError("bench: no thread counts selected");
  for (unsigned t : threads) {
    if (t == 0) throw ConfigError("bench: thread counts must be positive");
  }
  if (repeats == 0) throw ConfigError("bench: repeats must be positive");
  if (!(memory_bandwidth > 0.0)) throw ConfigError("bench: memory_bandwidth must be positive");
  train.validate();
}

std::optional<SparseMatrix> make_labels(const TargetHandle& t, ModelKind model, std::uint64_t seed) {
  if (!needs_labels(model)) return std::nullopt;
  detail::Rng rng(seed);
  DenseMatrix w(static_cast<Eigen::Index>(t.cols()), 1);
  for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, 0) = rng.uniform(-1.0, 1.0);
  DenseMatrix y = to_dense(lmm(t, to_sparse(w)));
  if (model == ModelKind::kLogisticRegression) {
    std::vector<double> sorted(y.data(), y.data() + y.size());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double mid = sorted[sorted.size() / 2];
    y = y.unaryExpr([mid](double v) { return v > mid ? 1.0 : 0.0; });
  }
  return to_sparse(y);
}

std::vector<BenchRow> bench_dataset(const FactorizedTable& ft, const std::string& id, const BenchOptions& opts) {
  opts.validate();
  const TableDescriptor desc = TableDescriptor::from(ft);
  const RedundancyStats stats = redundancy_stats(ft);
  const TargetHandle reference = TargetHandle::factorized(ft);
  TrainConfig cfg = opts.train;
  if (opts.auto_learning_rate) cfg.learning_rate = stable_learning_rate(reference);
  TrainConfig warm = cfg;
  warm.iterations = 1;

  std::vector<BenchRow> rows;
  for (ModelKind model : opts.models) {
    const auto labels = make_labels(reference, model, cfg.seed);
    const SparseMatrix* y = labels ? &*labels : nullptr;
    for (unsigned threads : opts.threads) {
      ExecContext ctx;
      ctx.threads = threads;
      if (opts.warmup) {
        run_materialized(ft, model, y, warm, ctx);
        run_factorized(ft, model, y, warm, ctx);
      }
      std::vector<double> t_mat, t_fact;
      BenchRow row;
      row.dataset = id;
      row.model = model;
      row.threads = threads;
      for (std::size_t rep = 0; rep < opts.repeats; ++rep) {
        PathRun m = run_materialized(ft, model, y, cfg, ctx);
        PathRun f = run_factorized(ft, model, y, cfg, ctx);
        t_mat.push_back(m.seconds);
        t_fact.push_back(f.seconds);
        if (rep == 0) {
          row.max_loss_rel_diff = max_relative_diff(m.result.losses, f.result.losses);
          row.equivalent = row.max_loss_rel_diff <= opts.equivalence_tolerance;
          row.trace_mat = m.result.trace;
          row.trace_fact = f.result.trace;
        }
      }
      row.t_mat = median(t_mat);
      row.t_fact = median(t_fact);
      row.mat_samples = std::move(t_mat);
      row.fact_samples = std::move(t_fact);
      const HardwareSpec hw{static_cast<double>(threads), opts.memory_bandwidth, opts.hardware_label};
      row.features = extract_features(desc, model, cfg, hw);
      row.tr_fr = baseline_tr_fr(stats);
      row.max_rule = ThresholdRule{}.decide(row.features);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<LabeledRun> to_corpus(const std::vector<BenchRow>& rows) {
  std::vector<LabeledRun> out;
  for (const auto& r : rows) {
    if (!r.equivalent) continue;
    LabeledRun l = LabeledRun::from_times(r.features, r.t_fact, r.t_mat);
    l.dataset = r.dataset;
    l.model = to_string(r.model);
    l.threads = r.threads;
    out.push_back(std::move(l));
  }
  return out;
}

std::vector<BenchRow> bench_grid(const std::vector<GenSpec>& specs, const BenchOptions& opts,
                                 const BenchProgress& progress) {
  std::vector<BenchRow> rows;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const GeneratedDataset d = generate(specs[i]);
    auto part = bench_dataset(d.table, d.manifest.id, opts);
    rows.insert(rows.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    if (progress) progress(i + 1, specs.size(), d.manifest.id);
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "dataset,model,threads,t_fact,t_mat,speedup,equivalent,max_loss_rel_diff,tr_fr,max_rule,madds_fact,"
         "madds_mat\n";
  for (const auto& r : rows) {
    out << r.dataset << ',' << to_string(r.model) << ',' << r.threads << ',' << fmt(r.t_fact) << ','
        << fmt(r.t_mat) << ',' << fmt(r.speedup()) << ',' << (r.equivalent ? 1 : 0) << ','
        << fmt(r.max_loss_rel_diff) << ',' << (r.tr_fr ? 1 : 0) << ',' << (r.max_rule ? 1 : 0) << ','
        << r.trace_fact.multiply_adds << ',' << r.trace_mat.multiply_adds << '\n';
  }
}

std::vector<BenchRow> read_bench_csv(std::istream& in) {
  std::string line;
  std::vector<BenchRow> rows;
  if (!std::getline(in, line)) return rows;
  if (split_line(line).size() != 12 || line.rfind("dataset,model,threads", 0) != 0) {
    throw ValidationError("bench report header not recognized");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c = split_line(line);
    if (c.size() != 12) throw ValidationError("bench report line " + std::to_string(lineno) + ": expected 12 cells");
    try {
      BenchRow r;
      r.dataset = c[0];
      r.model = model_from_string(c[1]);
      r.threads = static_cast<unsigned>(std::stoul(c[2]));
      r.t_fact = std::stod(c[3]);
      r.t_mat = std::stod(c[4]);
      r.equivalent = c[6] == "1";
      r.max_loss_rel_diff = std::stod(c[7]);
      r.tr_fr = c[8] == "1";
      r.max_rule = c[9] == "1";
      r.trace_fact.multiply_adds = std::stoull(c[10]);
      r.trace_mat.multiply_adds = std::stoull(c[11]);
      rows.push_back(std::move(r));
    } catch (const std::logic_error& e) {
      throw ValidationError("bench report line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace faclearn
