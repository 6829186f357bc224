#pragma once

// Data-integration metadata as sparse binary matrices.
//
// A target table T (r_T x c_T) is described by n source matrices S_k together
// with a mapping matrix M_k (c_T x c_k, which target column each source column
// lands in) and an indicator matrix I_k (r_T x r_k, which source row feeds each
// target row). T = sum_k I_k S_k M_k^T.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "faclearn/sparse_matrix.hpp"

namespace faclearn {

enum class JoinType { kInner, kLeft, kOuter, kUnion };

std::string to_string(JoinType j);
/// Throws ConfigError on an unknown name.
JoinType join_type_from_string(const std::string& s);

struct FactorizedTable {
  std::vector<SparseMatrix> sources;
  std::vector<SparseMatrix> mappings;    // M_k, c_T x c_k
  std::vector<SparseMatrix> indicators;  // I_k, r_T x r_k
  JoinType join_type = JoinType::kInner;
  std::size_t target_rows = 0;
  std::size_t target_cols = 0;

  std::size_t size() const { return sources.size(); }
};

struct Violation {
  /// Source index the finding belongs to; nullopt for table-level findings.
  std::optional<std::size_t> source;
  std::string kind;     // stable tag, e.g. "column maps twice", "non-binary entry"
  std::string message;  // includes row/column indices
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(const std::string& kind) const;
  std::string summary() const;
};

/// Checks every structural invariant:
///  - equal list lengths, n >= 1, conforming shapes;
///  - metadata entries are exactly 1.0;
///  - each mapping column has exactly one nonzero, each mapping row at most one;
///  - each indicator row has at most one nonzero;
///  - no target cell is fed by two sources: mappings are column-disjoint, or,
///    for union tables only, indicators are row-disjoint.
ValidationReport validate(const FactorizedTable& ft);

/// Throws ValidationError naming the first offending source when invalid.
void require_valid(const FactorizedTable& ft);

/// Mapping matrix M_k after validation, with the column-to-target lookup.
class MappingMatrix {
 public:
  /// Throws ValidationError if `m` is not a valid mapping matrix.
  static MappingMatrix from(SparseMatrix m);

  const SparseMatrix& matrix() const { return matrix_; }
  /// target_of()[j] is the target column source column j maps to.
  const std::vector<std::int64_t>& target_of() const { return target_of_; }
  /// source_of()[i] is the source column feeding target column i, or -1.
  const std::vector<std::int64_t>& source_of() const { return source_of_; }

 private:
  SparseMatrix matrix_;
  std::vector<std::int64_t> target_of_;
  std::vector<std::int64_t> source_of_;
};

/// Indicator matrix I_k after validation, with both row lookups.
class IndicatorMatrix {
 public:
  /// Throws ValidationError if `m` is not a valid indicator matrix.
  static IndicatorMatrix from(SparseMatrix m);

  const SparseMatrix& matrix() const { return matrix_; }
  /// source_of()[i] is the source row feeding target row i, or -1.
  const std::vector<std::int64_t>& source_of() const { return source_of_; }
  /// Target rows fed by source row j: targets()[offsets()[j] .. offsets()[j+1]).
  const std::vector<std::size_t>& offsets() const { return offsets_; }
  const std::vector<std::size_t>& targets() const { return targets_; }
  /// Number of target rows each source row feeds (1^T I_k).
  std::size_t fanout(std::size_t source_row) const {
    return offsets_[source_row + 1] - offsets_[source_row];
  }

 private:
  SparseMatrix matrix_;
  std::vector<std::int64_t> source_of_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> targets_;
};

/// T = sum_k I_k S_k M_k^T. Throws ValidationError on invalid input.
SparseMatrix materialize(const FactorizedTable& ft, const ExecContext& ctx = {});

/// nnz(T) computed from sources and indicators without materializing.
std::uint64_t target_nnz(const FactorizedTable& ft);

struct RedundancyStats {
  std::vector<double> tuple_ratios;    // r_T / r_k
  std::vector<double> feature_ratios;  // c_T / c_k
  double sparsity_T = 0.0;             // 1 - nnz(T) / (r_T c_T)
  double rho_c = 0.0;                  // (sum c_k) / c_T
};

RedundancyStats redundancy_stats(const FactorizedTable& ft);

// --- dataset manifests -------------------------------------------------------

/// Manifest file (JSON): format/version, id, n, join_type, r_T, c_T, one entry
/// per source with `matrix`, `mapping`, `indicator` paths relative to the
/// manifest, optional `row_order` and `generator` objects.
struct DatasetManifest {
  std::string id;
  JoinType join_type = JoinType::kInner;
  std::size_t target_rows = 0;
  std::size_t target_cols = 0;
  struct SourceFiles {
    std::string matrix;
    std::string mapping;
    std::string indicator;
  };
  std::vector<SourceFiles> sources;
  std::string row_order = "source-major";
  nlohmann::json generator;  // generator parameters; null for ingested data
};

nlohmann::json manifest_to_json(const DatasetManifest& m);
/// Throws ConfigError on missing or mistyped fields.
DatasetManifest manifest_from_json(const nlohmann::json& j);

/// Writes `manifest.json` plus one matrix file per source/mapping/indicator
/// into `dir` (created if needed). `extension` is ".mtx" or ".ilg".
std::filesystem::path write_dataset(const std::filesystem::path& dir, const FactorizedTable& ft,
                                    DatasetManifest manifest, const std::string& extension = ".mtx");

struct LoadedDataset {
  DatasetManifest manifest;
  FactorizedTable table;
};

/// Reads a manifest (file path, or a directory containing manifest.json).
LoadedDataset load_dataset(const std::filesystem::path& path);

// --- relational ingestion ----------------------------------------------------

/// A keyed relational table: named numeric feature columns plus key columns.
struct KeyedTable {
  std::string name;
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> features;  // row-major: features[row][col]
  /// Key column values by key column name, one per row.
  std::vector<std::pair<std::string, std::vector<std::string>>> keys;

  std::size_t rows() const { return features.size(); }
  const std::vector<std::string>& key(const std::string& column) const;
};

/// How keyed tables combine into the target table.
///
/// Star joins (inner/left/outer): table 0 is the fact table; each dimension
/// table k >= 1 declares its primary key column and the fact column
/// referencing it. Inner keeps fact rows matching every dimension, left keeps
/// all fact rows, outer additionally appends one target row per unreferenced
/// dimension row. Union stacks tables in source-major order and aligns feature
/// columns by name.
struct IngestSpec {
  JoinType join_type = JoinType::kInner;
  struct Link {
    std::string primary_key;  // column in dimension table
    std::string foreign_key;  // column in fact table
  };
  std::vector<Link> links;  // links[k-1] for dimension table k
};

FactorizedTable ingest(const std::vector<KeyedTable>& tables, const IngestSpec& spec);

/// Reads a CSV with a header row. Columns listed in `key_columns` are kept as
/// strings; all other columns must parse as numbers (empty cells read as 0).
KeyedTable read_csv_table(const std::filesystem::path& path,
                          const std::vector<std::string>& key_columns);

/// Ingestion manifest (JSON):
///   {"join_type": "inner", "sources": [
///      {"path": "fact.csv"},
///      {"path": "dim.csv", "primary_key": "id", "foreign_key": "dim_id"}]}
/// Paths resolve relative to the manifest. Key columns are dropped from the
/// feature set.
FactorizedTable ingest_csv(const std::filesystem::path& manifest_path);

}  // namespace faclearn
