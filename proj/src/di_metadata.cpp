#include "faclearn/di_metadata.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "faclearn/errors.hpp"
#include "faclearn/matrix_io.hpp"
#include "parallel.hpp"

namespace faclearn {

using nlohmann::json;

std::string to_string(JoinType j) {
  switch (j) {
    case JoinType::kInner: return "inner";
    case JoinType::kLeft: return "left";
    case JoinType::kOuter: return "outer";
    case JoinType::kUnion: return "union";
  }
  return "inner";
}

JoinType join_type_from_string(const std::string& s) {
  if (s == "inner") return JoinType::kInner;
  if (s == "left") return JoinType::kLeft;
  if (s == "outer") return JoinType::kOuter;
  if (s == "union") return JoinType::kUnion;
  throw ConfigError("unknown join type '" + s + "'");
}

bool ValidationReport::has(const std::string& kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::summary() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    if (v.source) out += "source " + std::to_string(*v.source) + ": ";
    out += v.kind + " (" + v.message + ")";
  }
  return out;
}

namespace {

void check_binary(const SparseMatrix& m, std::size_t k, const char* what,
                  std::vector<Violation>& out) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto cols = m.row_cols(r);
    auto vals = m.row_values(r);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (vals[i] != 1.0) {
        out.push_back({k, "non-binary entry",
                       std::string(what) + "[" + std::to_string(r) + "," +
                           std::to_string(cols[i]) + "] = " + std::to_string(vals[i])});
        return;
      }
    }
  }
}

void check_mapping(const SparseMatrix& m, std::size_t k, std::vector<Violation>& out) {
  check_binary(m, k, "M", out);
  std::vector<std::size_t> per_col(m.cols(), 0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (m.row_nnz(r) > 1) {
      out.push_back({k, "row mapped twice",
                     "target column " + std::to_string(r) + " receives " +
                         std::to_string(m.row_nnz(r)) + " source columns"});
    }
    for (std::size_t c : m.row_cols(r)) ++per_col[c];
  }
  for (std::size_t c = 0; c < m.cols(); ++c) {
    if (per_col[c] == 0) {
      out.push_back({k, "unmapped column", "source column " + std::to_string(c)});
    } else if (per_col[c] > 1) {
      out.push_back({k, "column maps twice",
                     "source column " + std::to_string(c) + " maps to " +
                         std::to_string(per_col[c]) + " target columns"});
    }
  }
}

void check_indicator(const SparseMatrix& m, std::size_t k, std::vector<Violation>& out) {
  check_binary(m, k, "I", out);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (m.row_nnz(r) > 1) {
      out.push_back({k, "row matches twice",
                     "target row " + std::to_string(r) + " draws from " +
                         std::to_string(m.row_nnz(r)) + " source rows"});
    }
  }
}

}  // namespace

ValidationReport validate(const FactorizedTable& ft) {
  ValidationReport report;
  auto& out = report.violations;
  const std::size_t n = ft.sources.size();
  if (n == 0) {
    out.push_back({std::nullopt, "empty table", "at least one source is required"});
    return report;
  }
  if (ft.mappings.size() != n || ft.indicators.size() != n) {
    out.push_back({std::nullopt, "length mismatch",
                   std::to_string(n) + " sources, " + std::to_string(ft.mappings.size()) +
                       " mappings, " + std::to_string(ft.indicators.size()) + " indicators"});
    return report;
  }

  std::vector<bool> shaped(n, true);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = ft.sources[k];
    const auto& m = ft.mappings[k];
    const auto& ind = ft.indicators[k];
    if (m.rows() != ft.target_cols || m.cols() != s.cols()) {
      out.push_back({k, "mapping shape",
                     "M is " + m.shape_string() + ", expected " + std::to_string(ft.target_cols) +
                         "x" + std::to_string(s.cols())});
      shaped[k] = false;
    }
    if (ind.rows() != ft.target_rows || ind.cols() != s.rows()) {
      out.push_back({k, "indicator shape",
                     "I is " + ind.shape_string() + ", expected " +
                         std::to_string(ft.target_rows) + "x" + std::to_string(s.rows())});
      shaped[k] = false;
    }
    if (!shaped[k]) continue;
    check_mapping(m, k, out);
    check_indicator(ind, k, out);
  }
  if (!report.ok()) return report;

  // Cell disjointness.
  std::vector<std::int64_t> owner(ft.target_cols, -1);
  bool column_overlap = false;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& m = ft.mappings[k];
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (m.row_nnz(r) == 0) continue;
      if (owner[r] >= 0) {
        column_overlap = true;
        if (ft.join_type != JoinType::kUnion) {
          out.push_back({k, "column claimed twice",
                         "target column " + std::to_string(r) + " also fed by source " +
                             std::to_string(owner[r])});
        }
      } else {
        owner[r] = static_cast<std::int64_t>(k);
      }
    }
  }
  if (column_overlap && ft.join_type == JoinType::kUnion) {
    std::vector<std::int64_t> row_owner(ft.target_rows, -1);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& ind = ft.indicators[k];
      for (std::size_t r = 0; r < ind.rows(); ++r) {
        if (ind.row_nnz(r) == 0) continue;
        if (row_owner[r] >= 0) {
          out.push_back({k, "row fed twice",
                         "union target row " + std::to_string(r) + " also fed by source " +
                             std::to_string(row_owner[r]) + " over shared columns"});
          break;
        }
        row_owner[r] = static_cast<std::int64_t>(k);
      }
    }
  }
  return report;
}

void require_valid(const FactorizedTable& ft) {
  auto report = validate(ft);
  if (!report.ok()) throw ValidationError("invalid factorized table: " + report.summary());
}

MappingMatrix MappingMatrix::from(SparseMatrix m) {
  std::vector<Violation> v;
  check_mapping(m, 0, v);
  if (!v.empty()) throw ValidationError("invalid mapping matrix: " + v.front().kind + " (" + v.front().message + ")");
  MappingMatrix out;
  out.target_of_.assign(m.cols(), -1);
  out.source_of_.assign(m.rows(), -1);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c : m.row_cols(r)) {
      out.target_of_[c] = static_cast<std::int64_t>(r);
      out.source_of_[r] = static_cast<std::int64_t>(c);
    }
  }
  out.matrix_ = std::move(m);
  return out;
}

IndicatorMatrix IndicatorMatrix::from(SparseMatrix m) {
  std::vector<Violation> v;
  check_indicator(m, 0, v);
  if (!v.empty()) throw ValidationError("invalid indicator matrix: " + v.front().kind + " (" + v.front().message + ")");
  IndicatorMatrix out;
  out.source_of_.assign(m.rows(), -1);
  out.offsets_.assign(m.cols() + 1, 0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto cols = m.row_cols(r);
    if (!cols.empty()) {
      out.source_of_[r] = static_cast<std::int64_t>(cols[0]);
      ++out.offsets_[cols[0] + 1];
    }
  }
  std::partial_sum(out.offsets_.begin(), out.offsets_.end(), out.offsets_.begin());
  out.targets_.resize(out.offsets_.back());
  std::vector<std::size_t> cursor(out.offsets_.begin(), out.offsets_.end() - 1);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (out.source_of_[r] >= 0) out.targets_[cursor[out.source_of_[r]]++] = r;
  }
  out.matrix_ = std::move(m);
  return out;
}

SparseMatrix materialize(const FactorizedTable& ft, const ExecContext& ctx) {
  require_valid(ft);
  detail::Stopwatch sw;
  const std::size_t n = ft.size();
  std::vector<MappingMatrix> maps;
  std::vector<IndicatorMatrix> inds;
  for (std::size_t k = 0; k < n; ++k) {
    maps.push_back(MappingMatrix::from(ft.mappings[k]));
    inds.push_back(IndicatorMatrix::from(ft.indicators[k]));
  }

  SparseMatrix out = detail::build_rows(
      ft.target_rows, ft.target_cols, ctx.threads,
      [&](std::size_t r, std::vector<std::size_t>& cols, std::vector<double>& vals) {
        const std::size_t start = cols.size();
        for (std::size_t k = 0; k < n; ++k) {
          const std::int64_t s = inds[k].source_of()[r];
          if (s < 0) continue;
          const auto& src = ft.sources[k];
          auto sc = src.row_cols(static_cast<std::size_t>(s));
          auto sv = src.row_values(static_cast<std::size_t>(s));
          const auto& target_of = maps[k].target_of();
          for (std::size_t i = 0; i < sc.size(); ++i) {
            cols.push_back(static_cast<std::size_t>(target_of[sc[i]]));
            vals.push_back(sv[i]);
          }
        }
        // Sort the row's entries by target column.
        const std::size_t len = cols.size() - start;
        if (len > 1) {
          std::vector<std::size_t> order(len);
          std::iota(order.begin(), order.end(), std::size_t{0});
          std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return cols[start + a] < cols[start + b];
          });
          std::vector<std::size_t> c2(len);
          std::vector<double> v2(len);
          for (std::size_t i = 0; i < len; ++i) {
            c2[i] = cols[start + order[i]];
            v2[i] = vals[start + order[i]];
          }
          std::copy(c2.begin(), c2.end(), cols.begin() + static_cast<std::ptrdiff_t>(start));
          std::copy(v2.begin(), v2.end(), vals.begin() + static_cast<std::ptrdiff_t>(start));
        }
      });
  OpTrace t;
  for (const auto& s : ft.sources) t.bytes_read += s.storage_bytes();
  t.bytes_written = out.storage_bytes();
  t.wall_time = std::max(sw.seconds(), 1e-9);
  detail::record(ctx, t);
  return out;
}

std::uint64_t target_nnz(const FactorizedTable& ft) {
  std::uint64_t total = 0;
  for (std::size_t k = 0; k < ft.size(); ++k) {
    const auto& ind = ft.indicators[k];
    for (std::size_t j : ind.col_idx()) total += ft.sources[k].row_nnz(j);
  }
  return total;
}

RedundancyStats redundancy_stats(const FactorizedTable& ft) {
  RedundancyStats st;
  const double rT = static_cast<double>(ft.target_rows);
  const double cT = static_cast<double>(ft.target_cols);
  double sum_c = 0.0;
  for (const auto& s : ft.sources) {
    st.tuple_ratios.push_back(s.rows() == 0 ? 0.0 : rT / static_cast<double>(s.rows()));
    st.feature_ratios.push_back(s.cols() == 0 ? 0.0 : cT / static_cast<double>(s.cols()));
    sum_c += static_cast<double>(s.cols());
  }
  const double cells = rT * cT;
  st.sparsity_T = cells == 0.0 ? 1.0 : 1.0 - static_cast<double>(target_nnz(ft)) / cells;
  st.rho_c = cT == 0.0 ? 0.0 : sum_c / cT;
  return st;
}

// --- manifests -----------------------------------------------------------------

json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["format"] = "faclearn-dataset";
  j["version"] = 1;
  j["id"] = m.id;
  j["n"] = m.sources.size();
  j["join_type"] = to_string(m.join_type);
  j["r_T"] = m.target_rows;
  j["c_T"] = m.target_cols;
  j["row_order"] = m.row_order;
  json sources = json::array();
  for (const auto& s : m.sources) {
    sources.push_back({{"matrix", s.matrix}, {"mapping", s.mapping}, {"indicator", s.indicator}});
  }
  j["sources"] = std::move(sources);
  if (!m.generator.is_null()) j["generator"] = m.generator;
  return j;
}

DatasetManifest manifest_from_json(const json& j) {
  try {
    DatasetManifest m;
    if (j.at("format").get<std::string>() != "faclearn-dataset") {
      throw ConfigError("manifest: unexpected format tag");
    }
    if (j.at("version").get<int>() != 1) throw ConfigError("manifest: unsupported version");
    m.id = j.at("id").get<std::string>();
    m.join_type = join_type_from_string(j.at("join_type").get<std::string>());
    m.target_rows = j.at("r_T").get<std::size_t>();
    m.target_cols = j.at("c_T").get<std::size_t>();
    m.row_order = j.value("row_order", std::string("source-major"));
    for (const auto& s : j.at("sources")) {
      m.sources.push_back({s.at("matrix").get<std::string>(), s.at("mapping").get<std::string>(),
                           s.at("indicator").get<std::string>()});
    }
    if (j.at("n").get<std::size_t>() != m.sources.size()) {
      throw ConfigError("manifest: n does not match the number of sources");
    }
    if (j.contains("generator")) m.generator = j.at("generator");
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
}

std::filesystem::path write_dataset(const std::filesystem::path& dir, const FactorizedTable& ft,
                                    DatasetManifest manifest, const std::string& extension) {
  std::filesystem::create_directories(dir);
  manifest.join_type = ft.join_type;
  manifest.target_rows = ft.target_rows;
  manifest.target_cols = ft.target_cols;
  manifest.sources.clear();
  for (std::size_t k = 0; k < ft.size(); ++k) {
    const std::string suffix = std::to_string(k) + extension;
    DatasetManifest::SourceFiles files{"S" + suffix, "M" + suffix, "I" + suffix};
    write_matrix(dir / files.matrix, ft.sources[k]);
    write_matrix(dir / files.mapping, ft.mappings[k]);
    write_matrix(dir / files.indicator, ft.indicators[k]);
    manifest.sources.push_back(std::move(files));
  }
  const auto path = dir / "manifest.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << manifest_to_json(manifest).dump(2) << '\n';
  return path;
}

LoadedDataset load_dataset(const std::filesystem::path& path) {
  const auto manifest_path =
      std::filesystem::is_directory(path) ? path / "manifest.json" : path;
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("cannot open manifest " + manifest_path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + manifest_path.string() + ": " + e.what());
  }
  LoadedDataset ds;
  ds.manifest = manifest_from_json(j);
  const auto base = manifest_path.parent_path();
  auto& ft = ds.table;
  ft.join_type = ds.manifest.join_type;
  ft.target_rows = ds.manifest.target_rows;
  ft.target_cols = ds.manifest.target_cols;
  for (const auto& s : ds.manifest.sources) {
    ft.sources.push_back(read_matrix(base / s.matrix));
    ft.mappings.push_back(read_matrix(base / s.mapping));
    ft.indicators.push_back(read_matrix(base / s.indicator));
  }
  return ds;
}

// --- ingestion -------------------------------------------------------------------

const std::vector<std::string>& KeyedTable::key(const std::string& column) const {
  for (const auto& [name, values] : keys) {
    if (name == column) return values;
  }
  throw ConfigError("table '" + name + "' has no key column '" + column + "'");
}

namespace {

SparseMatrix features_matrix(const KeyedTable& t) {
  const std::size_t c = t.feature_names.size();
  std::vector<double> dense;
  dense.reserve(t.rows() * c);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    if (t.features[r].size() != c) {
      throw ValidationError("table '" + t.name + "' row " + std::to_string(r) + " has " +
                            std::to_string(t.features[r].size()) + " values, expected " +
                            std::to_string(c));
    }
    dense.insert(dense.end(), t.features[r].begin(), t.features[r].end());
  }
  return SparseMatrix::from_dense(t.rows(), c, dense);
}

SparseMatrix indicator_from_matches(std::size_t target_rows, std::size_t source_rows,
                                    const std::vector<std::int64_t>& match) {
  std::vector<Triplet> trip;
  for (std::size_t r = 0; r < match.size(); ++r) {
    if (match[r] >= 0) trip.push_back({r, static_cast<std::size_t>(match[r]), 1.0});
  }
  return SparseMatrix::from_triplets(target_rows, source_rows, std::move(trip));
}

SparseMatrix mapping_from_targets(std::size_t target_cols, const std::vector<std::size_t>& target_of) {
  std::vector<Triplet> trip;
  for (std::size_t j = 0; j < target_of.size(); ++j) trip.push_back({target_of[j], j, 1.0});
  return SparseMatrix::from_triplets(target_cols, target_of.size(), std::move(trip));
}

FactorizedTable ingest_union(const std::vector<KeyedTable>& tables) {
  FactorizedTable ft;
  ft.join_type = JoinType::kUnion;
  std::vector<std::string> target_names;
  std::map<std::string, std::size_t> position;
  std::vector<std::vector<std::size_t>> target_of(tables.size());
  for (std::size_t k = 0; k < tables.size(); ++k) {
    for (const auto& name : tables[k].feature_names) {
      auto [it, inserted] = position.emplace(name, target_names.size());
      if (inserted) target_names.push_back(name);
      target_of[k].push_back(it->second);
    }
  }
  std::size_t rows = 0;
  for (const auto& t : tables) rows += t.rows();
  ft.target_rows = rows;
  ft.target_cols = target_names.size();
  std::size_t offset = 0;
  for (std::size_t k = 0; k < tables.size(); ++k) {
    std::vector<std::int64_t> match(rows, -1);
    for (std::size_t r = 0; r < tables[k].rows(); ++r) {
      match[offset + r] = static_cast<std::int64_t>(r);
    }
    offset += tables[k].rows();
    ft.sources.push_back(features_matrix(tables[k]));
    ft.mappings.push_back(mapping_from_targets(ft.target_cols, target_of[k]));
    ft.indicators.push_back(indicator_from_matches(rows, tables[k].rows(), match));
  }
  return ft;
}

}  // namespace

FactorizedTable ingest(const std::vector<KeyedTable>& tables, const IngestSpec& spec) {
  if (tables.empty()) throw ConfigError("ingest: no tables");
  if (spec.join_type == JoinType::kUnion) return ingest_union(tables);

  const std::size_t n = tables.size();
  if (spec.links.size() != n - 1) {
    throw ConfigError("ingest: expected " + std::to_string(n - 1) + " key links, got " +
                      std::to_string(spec.links.size()));
  }
  const KeyedTable& fact = tables[0];

  // Primary-key lookup per dimension; fact row -> dimension row matches.
  std::vector<std::vector<std::int64_t>> fact_match(n);
  fact_match[0].resize(fact.rows());
  std::iota(fact_match[0].begin(), fact_match[0].end(), std::int64_t{0});
  for (std::size_t k = 1; k < n; ++k) {
    const auto& pk = tables[k].key(spec.links[k - 1].primary_key);
    std::unordered_map<std::string, std::int64_t> index;
    for (std::size_t r = 0; r < pk.size(); ++r) {
      if (!index.emplace(pk[r], static_cast<std::int64_t>(r)).second) {
        throw ValidationError("table '" + tables[k].name + "': duplicate primary key '" + pk[r] +
                              "'");
      }
    }
    const auto& fk = fact.key(spec.links[k - 1].foreign_key);
    fact_match[k].resize(fact.rows());
    for (std::size_t r = 0; r < fact.rows(); ++r) {
      auto it = index.find(fk[r]);
      fact_match[k][r] = it == index.end() ? -1 : it->second;
    }
  }

  // Target rows: kept fact rows, then (outer only) unreferenced dimension rows.
  std::vector<std::vector<std::int64_t>> match(n);
  for (std::size_t r = 0; r < fact.rows(); ++r) {
    bool keep = true;
    if (spec.join_type == JoinType::kInner) {
      for (std::size_t k = 1; k < n; ++k) keep = keep && fact_match[k][r] >= 0;
    }
    if (!keep) continue;
    for (std::size_t k = 0; k < n; ++k) match[k].push_back(fact_match[k][r]);
  }
  if (spec.join_type == JoinType::kOuter) {
    for (std::size_t k = 1; k < n; ++k) {
      std::vector<bool> referenced(tables[k].rows(), false);
      for (std::int64_t m : match[k]) {
        if (m >= 0) referenced[static_cast<std::size_t>(m)] = true;
      }
      for (std::size_t r = 0; r < tables[k].rows(); ++r) {
        if (referenced[r]) continue;
        for (std::size_t j = 0; j < n; ++j) {
          match[j].push_back(j == k ? static_cast<std::int64_t>(r) : -1);
        }
      }
    }
  }

  FactorizedTable ft;
  ft.join_type = spec.join_type;
  ft.target_rows = match[0].size();
  std::size_t col = 0;
  for (const auto& t : tables) col += t.feature_names.size();
  ft.target_cols = col;
  col = 0;
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<std::size_t> target_of(tables[k].feature_names.size());
    std::iota(target_of.begin(), target_of.end(), col);
    col += target_of.size();
    ft.sources.push_back(features_matrix(tables[k]));
    ft.mappings.push_back(mapping_from_targets(ft.target_cols, target_of));
    ft.indicators.push_back(indicator_from_matches(ft.target_rows, tables[k].rows(), match[k]));
  }
  return ft;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

KeyedTable read_csv_table(const std::filesystem::path& path,
                          const std::vector<std::string>& key_columns) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": missing header");
  const auto header = split_csv_line(line);
  KeyedTable t;
  t.name = path.stem().string();
  std::vector<int> key_slot(header.size(), -1);
  for (std::size_t i = 0; i < header.size(); ++i) {
    auto it = std::find(key_columns.begin(), key_columns.end(), header[i]);
    if (it != key_columns.end()) {
      key_slot[i] = static_cast<int>(t.keys.size());
      t.keys.emplace_back(header[i], std::vector<std::string>{});
    } else {
      t.feature_names.push_back(header[i]);
    }
  }
  for (const auto& k : key_columns) (void)t.key(k);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(t.feature_names.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (key_slot[i] >= 0) {
        t.keys[static_cast<std::size_t>(key_slot[i])].second.push_back(fields[i]);
        continue;
      }
      double v = 0.0;
      if (!fields[i].empty()) {
        const char* b = fields[i].data();
        const char* e = b + fields[i].size();
        auto res = std::from_chars(b, e, v);
        if (res.ec != std::errc() || res.ptr != e) {
          throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": column '" +
                                header[i] + "' is not numeric: '" + fields[i] + "'");
        }
      }
      row.push_back(v);
    }
    t.features.push_back(std::move(row));
  }
  return t;
}

FactorizedTable ingest_csv(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("cannot open " + manifest_path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(manifest_path.string() + ": " + e.what());
  }
  const auto base = manifest_path.parent_path();
  try {
    IngestSpec spec;
    spec.join_type = join_type_from_string(j.at("join_type").get<std::string>());
    const auto& sources = j.at("sources");
    if (spec.join_type != JoinType::kUnion) {
      for (std::size_t k = 1; k < sources.size(); ++k) {
        spec.links.push_back({sources[k].at("primary_key").get<std::string>(),
                              sources[k].at("foreign_key").get<std::string>()});
      }
    }
    std::vector<KeyedTable> tables;
    for (std::size_t k = 0; k < sources.size(); ++k) {
      // The fact table carries every foreign key; dimensions carry their primary key.
      std::vector<std::string> keys;
      if (spec.join_type != JoinType::kUnion) {
        if (k == 0) {
          for (const auto& l : spec.links) keys.push_back(l.foreign_key);
        } else {
          keys.push_back(spec.links[k - 1].primary_key);
        }
      }
      tables.push_back(read_csv_table(base / sources[k].at("path").get<std::string>(), keys));
    }
    return ingest(tables, spec);
  } catch (const json::exception& e) {
    throw ConfigError(manifest_path.string() + ": " + e.what());
  }
}

}  // namespace faclearn
