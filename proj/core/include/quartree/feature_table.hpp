#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "quartree/distance_matrix.hpp"

namespace quartree {

enum class FeatureRole : std::uint8_t { Signal, Noise, AltSignal, Unknown };

std::string_view to_string(FeatureRole role) noexcept;
std::optional<FeatureRole> parse_feature_role(std::string_view text) noexcept;

/// Leaf-by-feature matrix with labeled rows (leaves) and columns (features).
class FeatureTable {
 public:
  FeatureTable() = default;
  /// Roles default to Unknown when empty.
  FeatureTable(std::vector<std::string> row_labels, std::vector<std::string> column_labels,
               Eigen::MatrixXd values, std::vector<FeatureRole> roles = {});

  std::size_t rows() const noexcept { return row_labels_.size(); }
  std::size_t cols() const noexcept { return column_labels_.size(); }
  const std::vector<std::string>& row_labels() const noexcept { return row_labels_; }
  const std::vector<std::string>& column_labels() const noexcept { return column_labels_; }
  const std::vector<FeatureRole>& roles() const noexcept { return roles_; }
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  Eigen::MatrixXd& values() noexcept { return values_; }

  void set_row_labels(std::vector<std::string> labels);

  /// Columns side by side; row labels must agree.
  static FeatureTable hstack(const std::vector<const FeatureTable*>& parts);
  /// Rows reordered to follow `labels`.
  FeatureTable with_row_order(const std::vector<std::string>& labels) const;
  FeatureTable select_columns(const std::vector<std::size_t>& columns) const;
  std::vector<std::size_t> columns_with_role(FeatureRole role) const;

  bool has_roles() const noexcept;

 private:
  std::vector<std::string> row_labels_;
  std::vector<std::string> column_labels_;
  Eigen::MatrixXd values_;
  std::vector<FeatureRole> roles_;
};

/// Reads a CSV table: a header row of feature names whose first cell names
/// the label column, an optional second row starting with `#role` that tags
/// every column (signal|noise|altsig|unknown), then one row per leaf.
///
/// Throws IngestionError listing every offending row for ragged rows,
/// non-numeric or non-finite cells and duplicate leaf labels.
FeatureTable load_feature_csv(const std::filesystem::path& path);
FeatureTable parse_feature_csv(std::string_view text);

/// Writes the format read by load_feature_csv. Values use shortest
/// round-trip formatting, so save followed by load is exact.
void save_feature_csv(const FeatureTable& table, const std::filesystem::path& path);
std::string format_feature_csv(const FeatureTable& table);

/// Reads a square distance matrix CSV: header `label,<leaf>,...`, one row per
/// leaf in the same order.
DistanceMatrix load_distance_csv(const std::filesystem::path& path);
void save_distance_csv(const DistanceMatrix& matrix, const std::filesystem::path& path);

/// One row per taxon: the arithmetic mean of its member rows. Taxa appear in
/// order of their first member row. Every row must be mapped; a taxon with no
/// member rows raises DegenerateInputError.
FeatureTable aggregate_by_group(const FeatureTable& table,
                                const std::map<std::string, std::string>& taxon_of_row);

enum class PermutationMode : std::uint8_t { Leaf, Cell, Gene };

std::optional<PermutationMode> parse_permutation_mode(std::string_view text) noexcept;
std::string_view to_string(PermutationMode mode) noexcept;

/// Null-model shuffles. Leaf: permute row labels. Cell: permute entries
/// within each column independently. Gene: permute entries within each row
/// independently. Deterministic per seed.
FeatureTable permute_dataset(const FeatureTable& table, PermutationMode mode, std::uint64_t seed);

enum class DistanceKind : std::uint8_t { Euclidean, SquaredEuclidean };

std::optional<DistanceKind> parse_distance_kind(std::string_view text) noexcept;
std::string_view to_string(DistanceKind kind) noexcept;

/// Pairwise row distances of `table`.
DistanceMatrix feature_distances(const FeatureTable& table, DistanceKind kind);
DistanceMatrix row_distances(const Eigen::MatrixXd& rows, const std::vector<std::string>& labels,
                             DistanceKind kind);

}  // namespace quartree
