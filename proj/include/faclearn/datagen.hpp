#pragma once

// Synthetic star-schema and union datasets with known metadata matrices.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "faclearn/di_metadata.hpp"

namespace faclearn {

/// Star joins use source 0 as the fact table (one row per matched target row)
/// and sources 1.. as dimension tables with r_T / fanout rows. Unions stack the
/// sources' rows. Every source owns a disjoint block of target columns.
struct GenSpec {
  std::string id;
  std::size_t target_rows = 1000;
  std::size_t n_sources = 2;
  /// Source column counts are drawn from this range unless target_cols is
  /// set, in which case round(rho_c * target_cols) columns are split across
  /// the sources.
  std::size_t min_source_cols = 10;
  std::size_t max_source_cols = 50;
  std::optional<std::size_t> target_cols;
  /// Fraction of zero cells in T; source densities are calibrated to hit it.
  double sparsity = 0.5;
  /// (sum c_k) / c_T.
  double rho_c = 1.0;
  JoinType join_type = JoinType::kInner;
  std::vector<std::size_t> fanouts = {2, 5, 10, 20};
  /// Left/outer joins leave this fraction of rows unmatched per dimension.
  double min_unmatched = 0.1;
  double max_unmatched = 0.3;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range parameters.
  void validate() const;
  nlohmann::json to_json() const;
  /// Missing fields keep their defaults. Throws ConfigError on bad values.
  static GenSpec from_json(const nlohmann::json& j);
};

struct GeneratedDataset {
  FactorizedTable table;
  DatasetManifest manifest;
};

/// Deterministic in the spec. Throws ConfigError when the spec is infeasible:
/// fewer columns than sources, or a target density above what the join
/// structure can cover.
GeneratedDataset generate(const GenSpec& spec);

/// Largest achievable nnz(T) / (r_T c_T) for the spec's structure.
double max_density(const GenSpec& spec);

/// Grid config (JSON), either {"datasets": [GenSpec, ...]} or a sampled grid:
///   {"seed": 7, "count": 300, "target_rows": [5000, 20000], "n_sources": [2],
///    "source_cols": [10, 50], "sparsity": [0.0, 0.9], "rho_c": [0.1, 1.0],
///    "join_types": ["inner", "left", "outer", "union"], "fanouts": [2, 5, 10, 20],
///    "unmatched_fraction": [0.1, 0.3]}
/// List-valued fields are choices, two-element range fields are intervals.
/// Join types cycle so each appears equally often. Every returned spec is
/// feasible. Throws ConfigError on malformed configs.
std::vector<GenSpec> expand_grid(const nlohmann::json& config);

/// Writes each dataset to dir/<id>/ and returns the manifest paths.
std::vector<std::filesystem::path> write_grid(const std::filesystem::path& dir, const std::vector<GenSpec>& specs,
                                              const std::string& extension = ".mtx");

}  // namespace faclearn
