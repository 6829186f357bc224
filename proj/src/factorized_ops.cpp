#include "faclearn/factorized_ops.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

#include "faclearn/errors.hpp"
#include "parallel.hpp"

namespace faclearn {

std::string to_string(ExecPath p) {
  return p == ExecPath::kFactorized ? "factorized" : "materialized";
}

// --- TargetHandle ------------------------------------------------------------

TargetHandle TargetHandle::materialized(SparseMatrix t) {
  TargetHandle h;
  h.path_ = ExecPath::kMaterialized;
  h.rows_ = t.rows();
  h.cols_ = t.cols();
  h.t_transposed_ = std::make_shared<const SparseMatrix>(transpose(t));
  h.t_ = std::make_shared<const SparseMatrix>(std::move(t));
  return h;
}

TargetHandle TargetHandle::factorized(const FactorizedTable& ft) {
  require_valid(ft);
  auto sources = std::make_shared<std::vector<PreparedSource>>();
  for (std::size_t k = 0; k < ft.size(); ++k) {
    PreparedSource ps;
    ps.matrix = ft.sources[k];
    ps.transposed = transpose(ps.matrix);
    ps.mapping = std::make_shared<const MappingMatrix>(MappingMatrix::from(ft.mappings[k]));
    ps.indicator = std::make_shared<const IndicatorMatrix>(IndicatorMatrix::from(ft.indicators[k]));
    sources->push_back(std::move(ps));
  }
  TargetHandle h;
  h.path_ = ExecPath::kFactorized;
  h.rows_ = ft.target_rows;
  h.cols_ = ft.target_cols;
  h.join_type_ = ft.join_type;
  h.sources_ = std::move(sources);
  return h;
}

TargetHandle TargetHandle::with_sources(const TargetHandle& base, std::vector<SparseMatrix> sources) {
  const auto& old = base.sources();
  if (sources.size() != old.size()) {
    throw ShapeError("with_sources: expected " + std::to_string(old.size()) + " sources");
  }
  auto prepared = std::make_shared<std::vector<PreparedSource>>();
  for (std::size_t k = 0; k < old.size(); ++k) {
    if (sources[k].rows() != old[k].matrix.rows() || sources[k].cols() != old[k].matrix.cols()) {
      throw ShapeError("with_sources: source " + std::to_string(k) + " is " +
                       sources[k].shape_string() + ", expected " + old[k].matrix.shape_string());
    }
    PreparedSource ps;
    ps.transposed = transpose(sources[k]);
    ps.matrix = std::move(sources[k]);
    ps.mapping = old[k].mapping;
    ps.indicator = old[k].indicator;
    prepared->push_back(std::move(ps));
  }
  TargetHandle h = base;
  h.sources_ = std::move(prepared);
  return h;
}

const SparseMatrix& TargetHandle::matrix() const {
  if (!t_) throw std::logic_error("TargetHandle::matrix on a factorized handle");
  return *t_;
}

const SparseMatrix& TargetHandle::matrix_transposed() const {
  if (!t_transposed_) throw std::logic_error("TargetHandle::matrix_transposed on a factorized handle");
  return *t_transposed_;
}

const std::vector<PreparedSource>& TargetHandle::sources() const {
  if (!sources_) throw std::logic_error("TargetHandle::sources on a materialized handle");
  return *sources_;
}

SparseMatrix TargetHandle::to_matrix(const ExecContext& ctx) const {
  if (!is_factorized()) return *t_;
  FactorizedTable ft;
  ft.join_type = join_type_;
  ft.target_rows = rows_;
  ft.target_cols = cols_;
  for (const auto& s : *sources_) {
    ft.sources.push_back(s.matrix);
    ft.mappings.push_back(s.mapping->matrix());
    ft.indicators.push_back(s.indicator->matrix());
  }
  return materialize(ft, ctx);
}

// --- helpers -------------------------------------------------------------------

namespace {

/// Runs `body` with a private trace, then charges the operator's wall time and
/// work to ctx and appends a log row.
template <class Body>
auto traced(const char* op, ExecPath side, const ExecContext& ctx, Body&& body) {
  OpTrace local;
  ExecContext inner = ctx;
  inner.trace = &local;
  inner.log = nullptr;
  detail::Stopwatch sw;
  auto result = body(inner);
  local.wall_time = std::max(sw.seconds(), 1e-9);
  if (ctx.trace != nullptr) *ctx.trace += local;
  if (ctx.log != nullptr) ctx.log->add(op, side, local);
  return result;
}

/// out.row(i) = sum_k parts[k].row(lookup[k][i]) over k in index order,
/// skipping lookup entries < 0.
SparseMatrix assemble(const std::vector<SparseMatrix>& parts,
                      const std::vector<const std::vector<std::int64_t>*>& lookup,
                      std::size_t rows, std::size_t cols, const ExecContext& ctx) {
  detail::Stopwatch sw;
  const std::size_t n = parts.size();
  std::uint64_t expected = 0;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::int64_t s : *lookup[k]) {
      if (s >= 0) expected += parts[k].row_nnz(static_cast<std::size_t>(s));
    }
  }
  const double cells = static_cast<double>(rows) * static_cast<double>(cols);
  const bool dense = cells > 0 && static_cast<double>(expected) / cells > ctx.dense_accumulate_threshold;

  SparseMatrix out;
  if (dense) {
    std::vector<double> buf(rows * cols, 0.0);
    const unsigned parts_n = detail::effective_threads(ctx.threads, rows);
    detail::parallel_chunks(rows, parts_n, [&](std::size_t b, std::size_t e, unsigned) {
      for (std::size_t r = b; r < e; ++r) {
        double* row = buf.data() + r * cols;
        for (std::size_t k = 0; k < n; ++k) {
          const std::int64_t s = (*lookup[k])[r];
          if (s < 0) continue;
          auto pc = parts[k].row_cols(static_cast<std::size_t>(s));
          auto pv = parts[k].row_values(static_cast<std::size_t>(s));
          for (std::size_t i = 0; i < pc.size(); ++i) row[pc[i]] += pv[i];
        }
      }
    });
    out = SparseMatrix::from_dense(rows, cols, buf);
  } else {
    out = detail::build_rows(
        rows, cols, ctx.threads,
        [&](std::size_t r, std::vector<std::size_t>& out_cols, std::vector<double>& out_vals) {
          thread_local std::vector<double> acc;
          thread_local std::vector<unsigned char> seen;
          thread_local std::vector<std::size_t> touched;
          if (acc.size() < cols) {
            acc.assign(cols, 0.0);
            seen.assign(cols, 0);
          }
          touched.clear();
          for (std::size_t k = 0; k < n; ++k) {
            const std::int64_t s = (*lookup[k])[r];
            if (s < 0) continue;
            auto pc = parts[k].row_cols(static_cast<std::size_t>(s));
            auto pv = parts[k].row_values(static_cast<std::size_t>(s));
            for (std::size_t i = 0; i < pc.size(); ++i) {
              const std::size_t c = pc[i];
              if (!seen[c]) {
                seen[c] = 1;
                touched.push_back(c);
                acc[c] = pv[i];
              } else {
                acc[c] += pv[i];
              }
            }
          }
          std::sort(touched.begin(), touched.end());
          for (std::size_t c : touched) {
            if (acc[c] != 0.0) {
              out_cols.push_back(c);
              out_vals.push_back(acc[c]);
            }
            seen[c] = 0;
          }
        });
  }
  OpTrace t;
  for (const auto& p : parts) t.bytes_read += p.storage_bytes();
  t.bytes_written = out.storage_bytes();
  t.wall_time = std::max(sw.seconds(), 1e-9);
  detail::record(ctx, t);
  return out;
}

/// I^T x: row j sums the rows of x at the target rows fed by source row j, in
/// increasing target-row order.
SparseMatrix aggregate_rows(const SparseMatrix& x, const IndicatorMatrix& ind, const ExecContext& ctx) {
  detail::Stopwatch sw;
  const std::size_t cols = x.cols();
  const auto& offsets = ind.offsets();
  const auto& targets = ind.targets();
  SparseMatrix out = detail::build_rows(
      ind.matrix().cols(), cols, ctx.threads,
      [&](std::size_t j, std::vector<std::size_t>& out_cols, std::vector<double>& out_vals) {
        const std::size_t b = offsets[j];
        const std::size_t e = offsets[j + 1];
        if (b == e) return;
        if (e - b == 1) {
          auto c = x.row_cols(targets[b]);
          auto v = x.row_values(targets[b]);
          out_cols.insert(out_cols.end(), c.begin(), c.end());
          out_vals.insert(out_vals.end(), v.begin(), v.end());
          return;
        }
        thread_local std::vector<double> acc;
        thread_local std::vector<unsigned char> seen;
        thread_local std::vector<std::size_t> touched;
        if (acc.size() < cols) {
          acc.assign(cols, 0.0);
          seen.assign(cols, 0);
        }
        touched.clear();
        for (std::size_t i = b; i < e; ++i) {
          auto c = x.row_cols(targets[i]);
          auto v = x.row_values(targets[i]);
          for (std::size_t q = 0; q < c.size(); ++q) {
            if (!seen[c[q]]) {
              seen[c[q]] = 1;
              touched.push_back(c[q]);
              acc[c[q]] = v[q];
            } else {
              acc[c[q]] += v[q];
            }
          }
        }
        std::sort(touched.begin(), touched.end());
        for (std::size_t c : touched) {
          if (acc[c] != 0.0) {
            out_cols.push_back(c);
            out_vals.push_back(acc[c]);
          }
          seen[c] = 0;
        }
      });
  OpTrace t;
  t.bytes_read = x.storage_bytes();
  t.bytes_written = out.storage_bytes();
  t.wall_time = std::max(sw.seconds(), 1e-9);
  detail::record(ctx, t);
  return out;
}

}  // namespace

// --- operators -----------------------------------------------------------------

SparseMatrix lmm(const TargetHandle& t, const SparseMatrix& x, const ExecContext& ctx) {
  if (x.rows() != t.cols()) {
    throw ShapeError("lmm: T is " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) +
                     ", X is " + x.shape_string());
  }
  return traced("lmm", t.path(), ctx, [&](const ExecContext& in) {
    if (!t.is_factorized()) return spmm(t.matrix(), x, in);
    const auto& sources = t.sources();
    std::vector<SparseMatrix> partials;
    std::vector<const std::vector<std::int64_t>*> lookup;
    partials.reserve(sources.size());
    for (const auto& s : sources) {
      SparseMatrix projected = gather_rows(x, s.mapping->target_of(), in);  // M_k^T X
      partials.push_back(spmm(s.matrix, projected, in));                   // S_k (M_k^T X)
      lookup.push_back(&s.indicator->source_of());                          // I_k (...)
    }
    return assemble(partials, lookup, t.rows(), x.cols(), in);
  });
}

SparseMatrix transpose_lmm(const TargetHandle& t, const SparseMatrix& x, const ExecContext& ctx) {
  if (x.rows() != t.rows()) {
    throw ShapeError("transpose_lmm: T is " + std::to_string(t.rows()) + "x" +
                     std::to_string(t.cols()) + ", X is " + x.shape_string());
  }
  return traced("transpose_lmm", t.path(), ctx, [&](const ExecContext& in) {
    if (!t.is_factorized()) return spmm(t.matrix_transposed(), x, in);
    const auto& sources = t.sources();
    std::vector<SparseMatrix> partials;
    std::vector<const std::vector<std::int64_t>*> lookup;
    partials.reserve(sources.size());
    for (const auto& s : sources) {
      SparseMatrix aggregated = aggregate_rows(x, *s.indicator, in);  // I_k^T X
      partials.push_back(spmm(s.transposed, aggregated, in));         // S_k^T (I_k^T X)
      lookup.push_back(&s.mapping->source_of());                      // M_k (...)
    }
    return assemble(partials, lookup, t.cols(), x.cols(), in);
  });
}

SparseMatrix rmm(const SparseMatrix& x, const TargetHandle& t, const ExecContext& ctx) {
  if (x.cols() != t.rows()) {
    throw ShapeError("rmm: X is " + x.shape_string() + ", T is " + std::to_string(t.rows()) + "x" +
                     std::to_string(t.cols()));
  }
  return traced("rmm", t.path(), ctx, [&](const ExecContext& in) {
    if (!t.is_factorized()) return spmm(x, t.matrix(), in);
    ExecContext quiet = in;
    quiet.log = nullptr;
    return transpose(transpose_lmm(t, transpose(x, in), quiet), in);
  });
}

TargetHandle elementwise_t(const TargetHandle& t, const ScalarFn& f, const ExecContext& ctx) {
  if (!f.registered() || f(0.0) != 0.0) {
    throw std::invalid_argument("elementwise_t: " + f.name() +
                                " requires materialization fallback (needs a registered map with f(0) = 0)");
  }
  return traced("elementwise", t.path(), ctx, [&](const ExecContext& in) {
    if (!t.is_factorized()) return TargetHandle::materialized(elementwise(t.matrix(), f, in));
    std::vector<SparseMatrix> mapped;
    for (const auto& s : t.sources()) mapped.push_back(elementwise(s.matrix, f, in));
    return TargetHandle::with_sources(t, std::move(mapped));
  });
}

SparseMatrix row_sum_t(const TargetHandle& t, const ExecContext& ctx) {
  return traced("row_sum", t.path(), ctx, [&](const ExecContext& in) {
    if (!t.is_factorized()) return row_sum(t.matrix(), in);
    std::vector<SparseMatrix> partials;
    std::vector<const std::vector<std::int64_t>*> lookup;
    for (const auto& s : t.sources()) {
      partials.push_back(row_sum(s.matrix, in));
      lookup.push_back(&s.indicator->source_of());
    }
    return assemble(partials, lookup, t.rows(), 1, in);
  });
}

SparseMatrix col_sum_t(const TargetHandle& t, const ExecContext& ctx) {
  return traced("col_sum", t.path(), ctx, [&](const ExecContext& in) {
    if (!t.is_factorized()) return col_sum(t.matrix(), in);
    detail::Stopwatch sw;
    std::vector<double> total(t.cols(), 0.0);
    OpTrace work;
    for (const auto& s : t.sources()) {
      // (1^T I_k) S_k: each source row weighted by the number of target rows it feeds.
      const auto& m = s.matrix;
      std::vector<double> weighted(m.cols(), 0.0);
      for (std::size_t j = 0; j < m.rows(); ++j) {
        const double w = static_cast<double>(s.indicator->fanout(j));
        if (w == 0.0) continue;
        auto c = m.row_cols(j);
        auto v = m.row_values(j);
        for (std::size_t i = 0; i < c.size(); ++i) weighted[c[i]] += w * v[i];
      }
      // ... M_k^T scatter into target columns.
      const auto& target_of = s.mapping->target_of();
      for (std::size_t c = 0; c < weighted.size(); ++c) {
        total[static_cast<std::size_t>(target_of[c])] += weighted[c];
      }
      work.multiply_adds += m.nnz();
      work.bytes_read += m.storage_bytes();
    }
    SparseMatrix out = SparseMatrix::from_dense(1, t.cols(), total);
    work.bytes_written = out.storage_bytes();
    work.wall_time = std::max(sw.seconds(), 1e-9);
    detail::record(in, work);
    return out;
  });
}

// --- TraceLog --------------------------------------------------------------------

void TraceLog::add(std::string op, ExecPath side, const OpTrace& trace) {
  rows_.push_back({std::move(op), side, trace});
}

OpTrace TraceLog::total() const {
  OpTrace t;
  for (const auto& r : rows_) t += r.trace;
  return t;
}

void TraceLog::write_csv(std::ostream& out) const {
  out << "op,side,multiply_adds,bytes_read,bytes_written,wall_time\n";
  for (const auto& r : rows_) {
    out << r.op << ',' << to_string(r.side) << ',' << r.trace.multiply_adds << ','
        << r.trace.bytes_read << ',' << r.trace.bytes_written << ',' << r.trace.wall_time << '\n';
  }
}

}  // namespace faclearn
