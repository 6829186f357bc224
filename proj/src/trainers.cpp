#include "faclearn/trainers.hpp"

#include <cmath>
#include <stdexcept>

#include "faclearn/errors.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace faclearn {

namespace {

using detail::Stopwatch;

constexpr double kNmfEpsilon = 1e-12;

// Runs training with a private trace, then forwards the totals to the caller.
struct Session {
  Session(TrainResult& result, const ExecContext& outer) : outer_(outer), result_(result) {
    ctx = outer;
    ctx.trace = &result.trace;
    quiet = outer;
    quiet.trace = nullptr;
    quiet.log = nullptr;
  }

  template <typename F>
  auto untimed(F&& f) {
    Stopwatch sw;
    auto v = f();
    excluded_ += sw.seconds();
    return v;
  }

  void finish() {
    result_.wall_time = std::max(0.0, clock_.seconds() - excluded_);
    result_.threads = outer_.threads;
    detail::record(outer_, result_.trace);
  }

  ExecContext ctx;
  ExecContext quiet;

 private:
  const ExecContext& outer_;
  TrainResult& result_;
  Stopwatch clock_;
  double excluded_ = 0.0;
};

DenseMatrix column(const SparseMatrix& y, std::size_t rows, const char* what) {
  if (y.rows() != rows || y.cols() != 1) {
    throw ShapeError(std::string(what) + ": labels must be " + std::to_string(rows) + "x1, got " +
                     y.shape_string());
  }
  return to_dense(y);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sum_all(const SparseMatrix& m) {
  double s = 0.0;
  for (double v : m.values()) s += v;
  return s;
}

void check_finite(double loss, ModelKind m, std::size_t iteration) {
  if (!std::isfinite(loss)) throw DivergenceError(to_string(m), iteration);
}

void check_labels(const TargetHandle& t, const SparseMatrix* labels, ModelKind m) {
  if (labels == nullptr) throw std::invalid_argument(to_string(m) + " requires labels");
  (void)t;
}

bool has_negative(const TargetHandle& t) {
  auto neg = [](const SparseMatrix& m) {
    for (double v : m.values()) {
      if (v < 0.0) return true;
    }
    return false;
  };
  if (!t.is_factorized()) return neg(t.matrix());
  for (const auto& s : t.sources()) {
    if (neg(s.matrix)) return true;
  }
  return false;
}

// Sum of squares of T, through the operators so it also works factorized.
double squared_norm_t(const TargetHandle& t, const ExecContext& ctx) {
  return sum_all(row_sum_t(elementwise_t(t, ScalarFn::square(), ctx), ctx));
}

}  // namespace

std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::kLinearRegression: return "linreg";
    case ModelKind::kLogisticRegression: return "logreg";
    case ModelKind::kKMeans: return "kmeans";
    case ModelKind::kGaussianNmf: return "gnmf";
  }
  return "?";
}

ModelKind model_from_string(const std::string& s) {
  for (ModelKind m : kAllModels) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown model '" + s + "' (expected linreg, logreg, kmeans or gnmf)");
}

bool needs_labels(ModelKind m) {
  return m == ModelKind::kLinearRegression || m == ModelKind::kLogisticRegression;
}

void TrainConfig::validate() const {
  if (iterations == 0) throw ConfigError("iterations must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (clusters == 0) throw ConfigError("clusters must be positive");
  if (rank == 0) throw ConfigError("rank must be positive");
}

nlohmann::json TrainResult::to_json(const std::string& dataset_id) const {
  nlohmann::json j;
  j["model"] = to_string(model);
  j["dataset"] = dataset_id;
  j["path"] = to_string(path);
  j["threads"] = threads;
  j["losses"] = losses;
  j["trace"] = {{"multiply_adds", trace.multiply_adds},
                {"bytes_read", trace.bytes_read},
                {"bytes_written", trace.bytes_written},
                {"wall_time", trace.wall_time}};
  j["wall_time"] = wall_time;
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, m] : parameters) {
    params[name] = {{"rows", m.rows()}, {"cols", m.cols()},
                    {"values", std::vector<double>(m.data(), m.data() + m.size())}};
  }
  j["parameters"] = std::move(params);
  return j;
}

DenseMatrix linreg_gradient(const TargetHandle& t, const SparseMatrix& y, const DenseMatrix& w,
                            const ExecContext& ctx) {
  const DenseMatrix yd = column(y, t.rows(), "linreg");
  DenseMatrix r = to_dense(lmm(t, to_sparse(w), ctx)) - yd;
  return to_dense(transpose_lmm(t, to_sparse(r), ctx));
}

double linreg_loss(const TargetHandle& t, const SparseMatrix& y, const DenseMatrix& w, const ExecContext& ctx) {
  const DenseMatrix yd = column(y, t.rows(), "linreg");
  return 0.5 * (to_dense(lmm(t, to_sparse(w), ctx)) - yd).squaredNorm();
}

double stable_learning_rate(const TargetHandle& t) {
  const double n2 = squared_norm_t(t, {});
  return n2 > 0.0 ? 1.0 / n2 : 1.0;
}

TrainResult linear_regression(const TargetHandle& t, const SparseMatrix& y, const TrainConfig& cfg,
                              const ExecContext& ctx) {
  cfg.validate();
  const DenseMatrix yd = column(y, t.rows(), "linreg");
  TrainResult res;
  res.model = ModelKind::kLinearRegression;
  res.path = t.path();
  Session s(res, ctx);

  DenseMatrix w = DenseMatrix::Zero(static_cast<Eigen::Index>(t.cols()), 1);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    DenseMatrix r = to_dense(lmm(t, to_sparse(w), s.ctx)) - yd;
    const double loss = s.untimed([&] { return 0.5 * r.squaredNorm(); });
    check_finite(loss, res.model, it);
    res.losses.push_back(loss);
    w -= cfg.learning_rate * to_dense(transpose_lmm(t, to_sparse(r), s.ctx));
  }
  res.parameters["w"] = std::move(w);
  s.finish();
  return res;
}

TrainResult logistic_regression(const TargetHandle& t, const SparseMatrix& y, const TrainConfig& cfg,
                                const ExecContext& ctx) {
  cfg.validate();
  const DenseMatrix yd = column(y, t.rows(), "logreg");
  for (Eigen::Index i = 0; i < yd.rows(); ++i) {
    if (yd(i, 0) != 0.0 && yd(i, 0) != 1.0) throw std::invalid_argument("logreg: labels must be 0 or 1");
  }
  TrainResult res;
  res.model = ModelKind::kLogisticRegression;
  res.path = t.path();
  Session s(res, ctx);

  DenseMatrix w = DenseMatrix::Zero(static_cast<Eigen::Index>(t.cols()), 1);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const DenseMatrix z = to_dense(lmm(t, to_sparse(w), s.ctx));
    const double loss = s.untimed([&] {
      double l = 0.0;
      for (Eigen::Index i = 0; i < z.rows(); ++i) l += softplus(z(i, 0)) - yd(i, 0) * z(i, 0);
      return l;
    });
    check_finite(loss, res.model, it);
    res.losses.push_back(loss);
    DenseMatrix resid = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }) - yd;
    w -= cfg.learning_rate * to_dense(transpose_lmm(t, to_sparse(resid), s.ctx));
  }
  res.parameters["w"] = std::move(w);
  s.finish();
  return res;
}

TrainResult kmeans(const TargetHandle& t, const TrainConfig& cfg, const ExecContext& ctx) {
  cfg.validate();
  const std::size_t k = cfg.clusters;
  if (k > t.rows()) {
    throw std::invalid_argument("kmeans: " + std::to_string(k) + " clusters for " + std::to_string(t.rows()) +
                                " rows");
  }
  TrainResult res;
  res.model = ModelKind::kKMeans;
  res.path = t.path();
  Session s(res, ctx);
  const auto n = static_cast<Eigen::Index>(t.rows());
  const auto kk = static_cast<Eigen::Index>(k);

  // Row norms of T feed every distance computation.
  const DenseMatrix row_sq = to_dense(row_sum_t(elementwise_t(t, ScalarFn::square(), s.ctx), s.ctx));

  detail::Rng rng(cfg.seed);
  std::vector<Triplet> pick;
  const auto chosen = rng.sample(t.rows(), k);
  for (std::size_t j = 0; j < k; ++j) pick.push_back({j, chosen[j], 1.0});
  DenseMatrix c = to_dense(rmm(SparseMatrix::from_triplets(k, t.rows(), std::move(pick)), t, s.ctx));

  std::vector<std::size_t> assign(t.rows(), 0);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const DenseMatrix cross = to_dense(lmm(t, to_sparse(c.transpose()), s.ctx));  // r_T x k
    const Eigen::VectorXd c_sq = c.rowwise().squaredNorm();
    double objective = 0.0;
    std::vector<Triplet> onehot;
    onehot.reserve(t.rows());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(kk);
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      double best_d = row_sq(i, 0) - 2.0 * cross(i, 0) + c_sq(0);
      for (Eigen::Index j = 1; j < kk; ++j) {
        const double d = row_sq(i, 0) - 2.0 * cross(i, j) + c_sq(j);
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      assign[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
      objective += std::max(best_d, 0.0);
      counts(best) += 1.0;
      onehot.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(best), 1.0});
    }
    check_finite(objective, res.model, it);
    res.losses.push_back(objective);

    const DenseMatrix sums = to_dense(transpose_lmm(
        t, SparseMatrix::from_triplets(t.rows(), k, std::move(onehot)), s.ctx));  // c_T x k
    for (Eigen::Index j = 0; j < kk; ++j) {
      if (counts(j) > 0.0) c.row(j) = sums.col(j).transpose() / counts(j);
    }
  }
  DenseMatrix a(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) a(i, 0) = static_cast<double>(assign[static_cast<std::size_t>(i)]);
  res.parameters["centroids"] = std::move(c);
  res.parameters["assignments"] = std::move(a);
  s.finish();
  return res;
}

TrainResult gaussian_nmf(const TargetHandle& t, const TrainConfig& cfg, const ExecContext& ctx,
                         const std::optional<NmfInit>& init) {
  cfg.validate();
  if (has_negative(t)) throw std::invalid_argument("gnmf: target has negative entries");
  const auto n = static_cast<Eigen::Index>(t.rows());
  const auto m = static_cast<Eigen::Index>(t.cols());
  const auto r = static_cast<Eigen::Index>(init ? init->w.cols() : static_cast<Eigen::Index>(cfg.rank));
  if (!init && cfg.rank > std::min(t.rows(), t.cols())) {
    throw std::invalid_argument("gnmf: rank " + std::to_string(cfg.rank) + " exceeds min(r_T, c_T)");
  }
  if (init && (init->w.rows() != n || init->h.rows() != r || init->h.cols() != m)) {
    throw ShapeError("gnmf: initial factors do not match the target shape");
  }

  TrainResult res;
  res.model = ModelKind::kGaussianNmf;
  res.path = t.path();
  Session s(res, ctx);

  DenseMatrix w, h;
  if (init) {
    w = init->w;
    h = init->h;
  } else {
    const double mean = sum_all(row_sum_t(t, s.ctx)) / (static_cast<double>(n) * static_cast<double>(m));
    const double scale = mean > 0.0 ? mean : 1.0;
    detail::Rng rng(cfg.seed);
    w.resize(n, r);
    h.resize(r, m);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform() * scale;
    for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = rng.uniform() * scale;
  }
  const double t_sq = s.untimed([&] { return squared_norm_t(t, s.quiet); });

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const DenseMatrix wt_t = to_dense(rmm(to_sparse(w.transpose()), t, s.ctx));  // r x c_T
    const DenseMatrix wtw = w.transpose() * w;
    h.array() *= wt_t.array() / ((wtw * h).array() + kNmfEpsilon);

    const DenseMatrix t_ht = to_dense(lmm(t, to_sparse(h.transpose()), s.ctx));  // r_T x r
    const DenseMatrix hht = h * h.transpose();
    w.array() *= t_ht.array() / ((w * hht).array() + kNmfEpsilon);

    const double loss = s.untimed([&] {
      const DenseMatrix wtw_new = w.transpose() * w;
      return t_sq - 2.0 * (w.array() * t_ht.array()).sum() + (wtw_new.array() * hht.array()).sum();
    });
    check_finite(loss, res.model, it);
    res.losses.push_back(loss);
  }
  res.parameters["W"] = std::move(w);
  res.parameters["H"] = std::move(h);
  s.finish();
  return res;
}

TrainResult train(ModelKind model, const TargetHandle& t, const SparseMatrix* labels, const TrainConfig& cfg,
                  const ExecContext& ctx) {
  switch (model) {
    case ModelKind::kLinearRegression:
      check_labels(t, labels, model);
      return linear_regression(t, *labels, cfg, ctx);
    case ModelKind::kLogisticRegression:
      check_labels(t, labels, model);
      return logistic_regression(t, *labels, cfg, ctx);
    case ModelKind::kKMeans: return kmeans(t, cfg, ctx);
    case ModelKind::kGaussianNmf: return gaussian_nmf(t, cfg, ctx);
  }
  throw std::invalid_argument("unknown model");
}

std::vector<OperatorStep> operator_sequence(ModelKind model) {
  using enum OpKind;
  switch (model) {
    case ModelKind::kLinearRegression:
    case ModelKind::kLogisticRegression:
      return {{kLmm, {Dim::kTargetCols, Dim::kOne, Fill::kDense}, false},
              {kTransposeLmm, {Dim::kTargetRows, Dim::kOne, Fill::kDense}, false}};
    case ModelKind::kKMeans:
      return {{kElementwise, {}, true},
              {kRowSum, {}, true},
              {kRmm, {Dim::kClusters, Dim::kTargetRows, Fill::kOnePerRow}, true},
              {kLmm, {Dim::kTargetCols, Dim::kClusters, Fill::kDense}, false},
              {kTransposeLmm, {Dim::kTargetRows, Dim::kClusters, Fill::kOnePerRow}, false}};
    case ModelKind::kGaussianNmf:
      return {{kRowSum, {}, true},
              {kRmm, {Dim::kRank, Dim::kTargetRows, Fill::kDense}, false},
              {kLmm, {Dim::kTargetCols, Dim::kRank, Fill::kDense}, false}};
  }
  return {};
}

}  // namespace faclearn
