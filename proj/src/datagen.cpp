#include "faclearn/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "faclearn/errors.hpp"
#include "random.hpp"

namespace faclearn {

namespace {

using detail::Rng;
using nlohmann::json;

// Everything about a dataset except the source values.
struct Plan {
  std::size_t target_cols = 0;
  std::vector<std::size_t> source_cols;
  std::vector<std::size_t> source_rows;
  std::vector<std::vector<std::size_t>> column_targets;  // per source, sorted
  std::vector<std::vector<std::int64_t>> row_source;     // per source, length r_T, -1 = unmatched
  double covered_cells = 0.0;
};

std::vector<std::int64_t> balanced_assignment(std::size_t n, std::size_t buckets, Rng& rng) {
  std::vector<std::int64_t> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<std::int64_t>(i % buckets);
  rng.shuffle(a);
  return a;
}

void drop_fraction(std::vector<std::int64_t>& rows, std::size_t limit, double fraction, Rng& rng) {
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(limit)));
  for (std::size_t i : rng.sample(limit, std::min(count, limit))) rows[i] = -1;
}

Plan make_plan(const GenSpec& spec, Rng& rng) {
  spec.validate();
  const std::size_t n = spec.n_sources;
  const std::size_t r_t = spec.target_rows;
  Plan p;

  if (spec.target_cols) {
    p.target_cols = *spec.target_cols;
    const auto total = static_cast<std::size_t>(std::llround(spec.rho_c * static_cast<double>(p.target_cols)));
    if (total < n) {
      throw ConfigError("infeasible spec: rho_c * c_T = " + std::to_string(total) + " columns for " +
                        std::to_string(n) + " sources");
    }
    p.source_cols.assign(n, 1);
    for (std::size_t i = n; i < total; ++i) ++p.source_cols[rng.below(n)];
  } else {
    std::size_t total = 0;
    for (std::size_t k = 0; k < n; ++k) {
      p.source_cols.push_back(static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(spec.min_source_cols),
                                                                   static_cast<std::int64_t>(spec.max_source_cols))));
      total += p.source_cols.back();
    }
    p.target_cols = std::max(total, static_cast<std::size_t>(std::llround(static_cast<double>(total) / spec.rho_c)));
  }

  std::vector<std::size_t> perm(p.target_cols);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  std::size_t next = 0;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<std::size_t> cols(perm.begin() + static_cast<std::ptrdiff_t>(next),
                                  perm.begin() + static_cast<std::ptrdiff_t>(next + p.source_cols[k]));
    std::sort(cols.begin(), cols.end());
    p.column_targets.push_back(std::move(cols));
    next += p.source_cols[k];
  }

  auto fanout = [&] { return spec.fanouts[rng.below(spec.fanouts.size())]; };
  auto unmatched = [&] { return rng.uniform(spec.min_unmatched, spec.max_unmatched); };
  p.row_source.assign(n, std::vector<std::int64_t>(r_t, -1));
  p.source_rows.assign(n, 0);

  switch (spec.join_type) {
    case JoinType::kInner:
    case JoinType::kLeft: {
      p.source_rows[0] = r_t;
      for (std::size_t i = 0; i < r_t; ++i) p.row_source[0][i] = static_cast<std::int64_t>(i);
      for (std::size_t k = 1; k < n; ++k) {
        p.source_rows[k] = std::max<std::size_t>(1, r_t / fanout());
        p.row_source[k] = balanced_assignment(r_t, p.source_rows[k], rng);
        if (spec.join_type == JoinType::kLeft) drop_fraction(p.row_source[k], r_t, unmatched(), rng);
      }
      break;
    }
    case JoinType::kOuter: {
      const auto extra = static_cast<std::size_t>(std::llround(unmatched() * static_cast<double>(r_t)));
      const std::size_t fact_rows = r_t - std::min(extra, r_t - 1);
      const std::size_t dims = n - 1;
      p.source_rows[0] = fact_rows;
      for (std::size_t i = 0; i < fact_rows; ++i) p.row_source[0][i] = static_cast<std::int64_t>(i);
      std::size_t target = fact_rows;
      for (std::size_t k = 1; k < n; ++k) {
        const std::size_t only = (r_t - fact_rows) / dims + (k - 1 < (r_t - fact_rows) % dims ? 1 : 0);
        const std::size_t matched = std::max<std::size_t>(1, fact_rows / fanout());
        auto fact_part = balanced_assignment(fact_rows, matched, rng);
        drop_fraction(fact_part, fact_rows, unmatched(), rng);
        std::copy(fact_part.begin(), fact_part.end(), p.row_source[k].begin());
        for (std::size_t j = 0; j < only; ++j) {
          p.row_source[k][target++] = static_cast<std::int64_t>(matched + j);
        }
        p.source_rows[k] = matched + only;
      }
      break;
    }
    case JoinType::kUnion: {
      std::size_t target = 0;
      for (std::size_t k = 0; k < n; ++k) {
        p.source_rows[k] = r_t / n + (k < r_t % n ? 1 : 0);
        for (std::size_t j = 0; j < p.source_rows[k]; ++j) {
          p.row_source[k][target++] = static_cast<std::int64_t>(j);
        }
      }
      break;
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    const auto matched = static_cast<double>(
        std::count_if(p.row_source[k].begin(), p.row_source[k].end(), [](std::int64_t v) { return v >= 0; }));
    p.covered_cells += matched * static_cast<double>(p.source_cols[k]);
  }
  return p;
}

double required_density(const GenSpec& spec, const Plan& p) {
  const double cells = static_cast<double>(spec.target_rows) * static_cast<double>(p.target_cols);
  const double want = (1.0 - spec.sparsity) * cells;
  if (want == 0.0) return 0.0;
  const double d = want / p.covered_cells;
  if (d > 1.0 + 1e-9) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "infeasible spec: target density %.4f exceeds the %.4f the join structure can cover",
                  1.0 - spec.sparsity, p.covered_cells / cells);
    throw ConfigError(buf);
  }
  return std::min(d, 1.0);
}

SparseMatrix random_source(std::size_t rows, std::size_t cols, double density, Rng& rng) {
  std::vector<std::size_t> row_ptr{0}, col_idx;
  std::vector<double> values;
  const double per_row = density * static_cast<double>(cols);
  const auto base = static_cast<std::size_t>(std::floor(per_row));
  const double frac = per_row - static_cast<double>(base);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t q = std::min(cols, base + (rng.uniform() < frac ? 1 : 0));
    std::vector<std::size_t> chosen = q == cols ? std::vector<std::size_t>() : rng.sample(cols, q);
    if (q == cols) {
      chosen.resize(cols);
      for (std::size_t c = 0; c < cols; ++c) chosen[c] = c;
    }
    std::sort(chosen.begin(), chosen.end());
    for (std::size_t c : chosen) {
      col_idx.push_back(c);
      values.push_back(rng.positive_unit());
    }
    row_ptr.push_back(col_idx.size());
  }
  return SparseMatrix::from_csr(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
}

template <typename T>
T pick(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

std::pair<double, double> range(const json& j, const char* key, std::pair<double, double> fallback) {
  if (!j.contains(key)) return fallback;
  const auto v = pick<std::vector<double>>(j, key, {});
  if (v.size() == 1) return {v[0], v[0]};
  if (v.size() != 2 || v[0] > v[1]) throw ConfigError(std::string("field '") + key + "' must be [low, high]");
  return {v[0], v[1]};
}

template <typename T>
std::vector<T> choices(const json& j, const char* key, std::vector<T> fallback) {
  auto v = pick<std::vector<T>>(j, key, std::move(fallback));
  if (v.empty()) throw ConfigError(std::string("field '") + key + "' must not be empty");
  return v;
}

}  // namespace

void GenSpec::validate() const {
  if (target_rows < 2) throw ConfigError("target_rows must be at least 2");
  if (n_sources < 2 || n_sources > 4) throw ConfigError("n_sources must be between 2 and 4");
  if (min_source_cols == 0 || min_source_cols > max_source_cols) throw ConfigError("bad source column range");
  if (!(sparsity >= 0.0 && sparsity <= 0.9)) throw ConfigError("sparsity must be in [0, 0.9]");
  if (!(rho_c >= 0.1 && rho_c <= 1.0)) throw ConfigError("rho_c must be in [0.1, 1]");
  if (fanouts.empty()) throw ConfigError("fanouts must not be empty");
  for (std::size_t f : fanouts) {
    if (f == 0) throw ConfigError("fanouts must be positive");
  }
  if (!(min_unmatched >= 0.0 && min_unmatched <= max_unmatched && max_unmatched < 1.0)) {
    throw ConfigError("unmatched fraction range must lie in [0, 1)");
  }
  if (target_cols && *target_cols == 0) throw ConfigError("target_cols must be positive");
}

json GenSpec::to_json() const {
  json j = {{"id", id},
            {"target_rows", target_rows},
            {"n_sources", n_sources},
            {"source_cols", {min_source_cols, max_source_cols}},
            {"sparsity", sparsity},
            {"rho_c", rho_c},
            {"join_type", to_string(join_type)},
            {"fanouts", fanouts},
            {"unmatched_fraction", {min_unmatched, max_unmatched}},
            {"seed", seed}};
  if (target_cols) j["target_cols"] = *target_cols;
  return j;
}

GenSpec GenSpec::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("dataset spec must be an object");
  GenSpec s;
  s.id = pick<std::string>(j, "id", s.id);
  s.target_rows = pick<std::size_t>(j, "target_rows", s.target_rows);
  s.n_sources = pick<std::size_t>(j, "n_sources", s.n_sources);
  const auto cols = range(j, "source_cols", {10, 50});
  s.min_source_cols = static_cast<std::size_t>(cols.first);
  s.max_source_cols = static_cast<std::size_t>(cols.second);
  if (j.contains("target_cols")) s.target_cols = pick<std::size_t>(j, "target_cols", 0);
  s.sparsity = pick<double>(j, "sparsity", s.sparsity);
  s.rho_c = pick<double>(j, "rho_c", s.rho_c);
  s.join_type = join_type_from_string(pick<std::string>(j, "join_type", "inner"));
  s.fanouts = pick<std::vector<std::size_t>>(j, "fanouts", s.fanouts);
  const auto um = range(j, "unmatched_fraction", {s.min_unmatched, s.max_unmatched});
  s.min_unmatched = um.first;
  s.max_unmatched = um.second;
  s.seed = pick<std::uint64_t>(j, "seed", s.seed);
  s.validate();
  return s;
}

double max_density(const GenSpec& spec) {
  Rng rng(spec.seed);
  const Plan p = make_plan(spec, rng);
  return p.covered_cells / (static_cast<double>(spec.target_rows) * static_cast<double>(p.target_cols));
}

GeneratedDataset generate(const GenSpec& spec) {
  Rng rng(spec.seed);
  const Plan p = make_plan(spec, rng);
  const double density = required_density(spec, p);
  const std::size_t n = spec.n_sources;

  GeneratedDataset out;
  FactorizedTable& ft = out.table;
  ft.join_type = spec.join_type;
  ft.target_rows = spec.target_rows;
  ft.target_cols = p.target_cols;
  for (std::size_t k = 0; k < n; ++k) {
    ft.sources.push_back(random_source(p.source_rows[k], p.source_cols[k], density, rng));

    std::vector<Triplet> map;
    for (std::size_t c = 0; c < p.source_cols[k]; ++c) map.push_back({p.column_targets[k][c], c, 1.0});
    ft.mappings.push_back(SparseMatrix::from_triplets(p.target_cols, p.source_cols[k], std::move(map)));

    std::vector<Triplet> ind;
    for (std::size_t i = 0; i < spec.target_rows; ++i) {
      const std::int64_t src = p.row_source[k][i];
      if (src >= 0) ind.push_back({i, static_cast<std::size_t>(src), 1.0});
    }
    ft.indicators.push_back(SparseMatrix::from_triplets(spec.target_rows, p.source_rows[k], std::move(ind)));
  }

  DatasetManifest& m = out.manifest;
  m.id = spec.id.empty() ? "synthetic-" + std::to_string(spec.seed) : spec.id;
  m.join_type = ft.join_type;
  m.target_rows = ft.target_rows;
  m.target_cols = ft.target_cols;
  m.row_order = spec.join_type == JoinType::kUnion ? "source-major" : "fact-major";
  m.generator = spec.to_json();
  m.generator["id"] = m.id;
  return out;
}

std::vector<GenSpec> expand_grid(const json& config) {
  if (!config.is_object()) throw ConfigError("grid config must be a JSON object");
  std::vector<GenSpec> specs;
  if (config.contains("datasets")) {
    if (!config["datasets"].is_array()) throw ConfigError("'datasets' must be an array");
    std::size_t i = 0;
    for (const auto& dj : config["datasets"]) {
      GenSpec s = GenSpec::from_json(dj);
      if (s.id.empty()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "d%04zu", i);
        s.id = buf;
      }
      generate(s);  // surfaces infeasible specs before anything is written
      specs.push_back(std::move(s));
      ++i;
    }
    return specs;
  }

  const auto seed = pick<std::uint64_t>(config, "seed", 0);
  const auto count = pick<std::size_t>(config, "count", 0);
  if (count == 0) throw ConfigError("grid config needs a positive 'count' or a 'datasets' list");
  const auto rows = choices<std::size_t>(config, "target_rows", {5000, 20000});
  const auto n_sources = choices<std::size_t>(config, "n_sources", {2});
  const auto cols = range(config, "source_cols", {10, 50});
  const auto sparsity = range(config, "sparsity", {0.0, 0.9});
  const auto rho = range(config, "rho_c", {0.1, 1.0});
  std::vector<JoinType> joins;
  for (const auto& name : choices<std::string>(config, "join_types", {"inner", "left", "outer", "union"})) {
    joins.push_back(join_type_from_string(name));
  }
  const auto fanouts = choices<std::size_t>(config, "fanouts", {2, 5, 10, 20});
  const auto unmatched = range(config, "unmatched_fraction", {0.1, 0.3});

  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(detail::derive_seed(seed, i));
    GenSpec s;
    char buf[32];
    std::snprintf(buf, sizeof buf, "d%04zu", i);
    s.id = buf;
    s.join_type = joins[i % joins.size()];
    s.target_rows = rows[rng.below(rows.size())];
    s.n_sources = n_sources[rng.below(n_sources.size())];
    s.min_source_cols = static_cast<std::size_t>(cols.first);
    s.max_source_cols = static_cast<std::size_t>(cols.second);
    s.fanouts = fanouts;
    s.min_unmatched = unmatched.first;
    s.max_unmatched = unmatched.second;
    bool placed = false;
    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
      s.seed = rng.next();
      s.rho_c = rng.uniform(rho.first, rho.second);
      s.sparsity = sparsity.first;
      const double cover = max_density(s);
      // Keep the sparsity draw inside the feasible part of the interval.
      const double lo = std::max(sparsity.first, 1.0 - cover + 1e-6);
      if (lo > sparsity.second) continue;
      s.sparsity = rng.uniform(lo, sparsity.second);
      placed = true;
    }
    if (!placed) throw ConfigError("grid: no feasible dataset found for entry " + std::to_string(i));
    specs.push_back(std::move(s));
  }
  return specs;
}

std::vector<std::filesystem::path> write_grid(const std::filesystem::path& dir, const std::vector<GenSpec>& specs,
                                              const std::string& extension) {
  std::vector<std::filesystem::path> paths;
  for (const auto& s : specs) {
    GeneratedDataset d = generate(s);
    paths.push_back(write_dataset(dir / d.manifest.id, d.table, d.manifest, extension));
  }
  return paths;
}

}  // namespace faclearn
