#include "quartree/feature_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "quartree/error.hpp"
#include "quartree/rng.hpp"

namespace quartree {

std::string_view to_string(FeatureRole role) noexcept {
  switch (role) {
    case FeatureRole::Signal: return "signal";
    case FeatureRole::Noise: return "noise";
    case FeatureRole::AltSignal: return "altsig";
    case FeatureRole::Unknown: return "unknown";
  }
  return "unknown";
}

std::optional<FeatureRole> parse_feature_role(std::string_view text) noexcept {
  if (text == "signal") return FeatureRole::Signal;
  if (text == "noise") return FeatureRole::Noise;
  if (text == "altsig") return FeatureRole::AltSignal;
  if (text == "unknown") return FeatureRole::Unknown;
  return std::nullopt;
}

FeatureTable::FeatureTable(std::vector<std::string> row_labels, std::vector<std::string> column_labels,
                           Eigen::MatrixXd values, std::vector<FeatureRole> roles)
    : row_labels_(std::move(row_labels)),
      column_labels_(std::move(column_labels)),
      values_(std::move(values)),
      roles_(std::move(roles)) {
  if (roles_.empty()) roles_.assign(column_labels_.size(), FeatureRole::Unknown);
  if (static_cast<std::size_t>(values_.rows()) != row_labels_.size() ||
      static_cast<std::size_t>(values_.cols()) != column_labels_.size() ||
      roles_.size() != column_labels_.size()) {
    throw InvalidArgumentError("feature table shape does not match its labels");
  }
  std::unordered_set<std::string> seen;
  for (const auto& label : row_labels_) {
    if (!seen.insert(label).second) throw InvalidArgumentError("duplicate row label '" + label + "'");
  }
}

void FeatureTable::set_row_labels(std::vector<std::string> labels) {
  if (labels.size() != row_labels_.size()) throw InvalidArgumentError("row label count mismatch");
  row_labels_ = std::move(labels);
}

FeatureTable FeatureTable::hstack(const std::vector<const FeatureTable*>& parts) {
  if (parts.empty()) return {};
  const auto& rows = parts.front()->row_labels();
  Eigen::Index total = 0;
  for (const auto* p : parts) {
    if (p->row_labels() != rows) throw InvalidArgumentError("hstack: row labels differ");
    total += p->values().cols();
  }
  Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()), total);
  std::vector<std::string> columns;
  std::vector<FeatureRole> roles;
  Eigen::Index at = 0;
  for (const auto* p : parts) {
    values.middleCols(at, p->values().cols()) = p->values();
    at += p->values().cols();
    columns.insert(columns.end(), p->column_labels().begin(), p->column_labels().end());
    roles.insert(roles.end(), p->roles().begin(), p->roles().end());
  }
  return FeatureTable(rows, std::move(columns), std::move(values), std::move(roles));
}

FeatureTable FeatureTable::with_row_order(const std::vector<std::string>& labels) const {
  if (labels.size() != rows()) throw InvalidArgumentError("row order has the wrong length");
  std::unordered_map<std::string, Eigen::Index> where;
  for (std::size_t i = 0; i < rows(); ++i) where.emplace(row_labels_[i], static_cast<Eigen::Index>(i));
  Eigen::MatrixXd values(values_.rows(), values_.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = where.find(labels[i]);
    if (it == where.end()) throw InvalidArgumentError("unknown row label '" + labels[i] + "'");
    values.row(static_cast<Eigen::Index>(i)) = values_.row(it->second);
  }
  return FeatureTable(labels, column_labels_, std::move(values), roles_);
}

FeatureTable FeatureTable::select_columns(const std::vector<std::size_t>& columns) const {
  Eigen::MatrixXd values(values_.rows(), static_cast<Eigen::Index>(columns.size()));
  std::vector<std::string> names;
  std::vector<FeatureRole> roles;
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] >= cols()) throw InvalidArgumentError("column index out of range");
    values.col(static_cast<Eigen::Index>(k)) = values_.col(static_cast<Eigen::Index>(columns[k]));
    names.push_back(column_labels_[columns[k]]);
    roles.push_back(roles_[columns[k]]);
  }
  return FeatureTable(row_labels_, std::move(names), std::move(values), std::move(roles));
}

std::vector<std::size_t> FeatureTable::columns_with_role(FeatureRole role) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < roles_.size(); ++j) {
    if (roles_[j] == role) out.push_back(j);
  }
  return out;
}

bool FeatureTable::has_roles() const noexcept {
  return std::any_of(roles_.begin(), roles_.end(), [](FeatureRole r) { return r != FeatureRole::Unknown; });
}

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                             : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

// from_chars rejects a leading '+'; accept it for interoperability.
std::optional<double> parse_number(std::string_view cell) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
  return value;
}

void append_number(std::string& out, double value) {
  char buffer[32];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  out.append(buffer, ptr);
}

std::string join_rows(const std::vector<std::string>& problems) {
  std::string out;
  for (const auto& p : problems) out += "\n  " + p;
  return out;
}

}  // namespace

FeatureTable parse_feature_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw IngestionError("feature table is empty");
  const auto header = split_line(lines.front());
  const std::size_t width = header.size() - 1;
  std::vector<std::string> columns;
  for (std::size_t j = 1; j < header.size(); ++j) columns.emplace_back(header[j]);

  std::size_t first_data = 1;
  std::vector<FeatureRole> roles;
  std::vector<std::string> problems;
  if (lines.size() > 1 && lines[1].starts_with("#role")) {
    first_data = 2;
    const auto cells = split_line(lines[1]);
    if (cells.size() != header.size()) {
      problems.push_back("role row: expected " + std::to_string(header.size()) + " cells, found " +
                         std::to_string(cells.size()));
    } else {
      for (std::size_t j = 1; j < cells.size(); ++j) {
        const auto role = parse_feature_role(cells[j]);
        if (!role) {
          problems.push_back("role row: unknown role '" + std::string(cells[j]) + "'");
          roles.push_back(FeatureRole::Unknown);
        } else {
          roles.push_back(*role);
        }
      }
    }
  }

  const std::size_t n = lines.size() - first_data;
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  std::vector<std::string> rows;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < n; ++r) {
    const auto cells = split_line(lines[first_data + r]);
    const std::string label(cells.front());
    const std::string where = "row " + std::to_string(r + 1) + " ('" + label + "')";
    rows.push_back(label);
    if (label.empty()) problems.push_back(where + ": empty leaf label");
    if (!seen.insert(label).second) problems.push_back(where + ": duplicate leaf label");
    if (cells.size() != header.size()) {
      problems.push_back(where + ": expected " + std::to_string(header.size()) + " cells, found " +
                         std::to_string(cells.size()));
      continue;
    }
    for (std::size_t j = 0; j < width; ++j) {
      const auto value = parse_number(cells[j + 1]);
      if (!value) {
        problems.push_back(where + ", column '" + columns[j] + "': not a number");
      } else if (!std::isfinite(*value)) {
        problems.push_back(where + ", column '" + columns[j] + "': non-finite value");
      } else {
        values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = *value;
      }
    }
  }
  if (!problems.empty()) throw IngestionError("invalid feature table:" + join_rows(problems));
  return FeatureTable(std::move(rows), std::move(columns), std::move(values), std::move(roles));
}

FeatureTable load_feature_csv(const std::filesystem::path& path) { return parse_feature_csv(slurp(path)); }

std::string format_feature_csv(const FeatureTable& table) {
  std::string out = "label";
  for (const auto& c : table.column_labels()) out += "," + c;
  out += '\n';
  if (table.has_roles()) {
    out += "#role";
    for (auto r : table.roles()) {
      out += ',';
      out += to_string(r);
    }
    out += '\n';
  }
  for (std::size_t i = 0; i < table.rows(); ++i) {
    out += table.row_labels()[i];
    for (std::size_t j = 0; j < table.cols(); ++j) {
      out += ',';
      append_number(out, table.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    out += '\n';
  }
  return out;
}

void save_feature_csv(const FeatureTable& table, const std::filesystem::path& path) {
  spit(path, format_feature_csv(table));
}

DistanceMatrix load_distance_csv(const std::filesystem::path& path) {
  const auto table = parse_feature_csv(slurp(path));
  if (table.column_labels() != table.row_labels()) {
    throw IngestionError("distance matrix header must list the row labels in order");
  }
  const std::size_t n = table.rows();
  std::vector<double> values(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      values[i * n + j] = table.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  DistanceMatrix matrix(table.row_labels(), std::move(values));
  try {
    matrix.validate();
  } catch (const InvalidArgumentError& e) {
    throw IngestionError(e.what());
  }
  return matrix;
}

void save_distance_csv(const DistanceMatrix& matrix, const std::filesystem::path& path) {
  std::string out = "label";
  for (const auto& l : matrix.labels()) out += "," + l;
  out += '\n';
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    out += matrix.labels()[i];
    for (std::size_t j = 0; j < matrix.size(); ++j) {
      out += ',';
      append_number(out, matrix(i, j));
    }
    out += '\n';
  }
  spit(path, out);
}

FeatureTable aggregate_by_group(const FeatureTable& table,
                                const std::map<std::string, std::string>& taxon_of_row) {
  std::vector<std::string> taxa;
  std::unordered_map<std::string, std::size_t> taxon_index;
  std::vector<std::size_t> group_of(table.rows());
  for (std::size_t i = 0; i < table.rows(); ++i) {
    const auto it = taxon_of_row.find(table.row_labels()[i]);
    if (it == taxon_of_row.end()) {
      throw InvalidArgumentError("row '" + table.row_labels()[i] + "' is not assigned to a taxon");
    }
    const auto [pos, inserted] = taxon_index.emplace(it->second, taxa.size());
    if (inserted) taxa.push_back(it->second);
    group_of[i] = pos->second;
  }
  // Taxa named in the mapping but matched by no row are empty groups.
  for (const auto& [row, taxon] : taxon_of_row) {
    if (!taxon_index.contains(taxon)) throw DegenerateInputError("taxon '" + taxon + "' has no member rows");
  }

  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(taxa.size()), table.values().cols());
  std::vector<double> counts(taxa.size(), 0.0);
  for (std::size_t i = 0; i < table.rows(); ++i) {
    sums.row(static_cast<Eigen::Index>(group_of[i])) += table.values().row(static_cast<Eigen::Index>(i));
    counts[group_of[i]] += 1.0;
  }
  for (std::size_t g = 0; g < taxa.size(); ++g) sums.row(static_cast<Eigen::Index>(g)) /= counts[g];
  return FeatureTable(std::move(taxa), table.column_labels(), std::move(sums), table.roles());
}

std::optional<PermutationMode> parse_permutation_mode(std::string_view text) noexcept {
  if (text == "leaf") return PermutationMode::Leaf;
  if (text == "cell") return PermutationMode::Cell;
  if (text == "gene") return PermutationMode::Gene;
  return std::nullopt;
}

std::string_view to_string(PermutationMode mode) noexcept {
  switch (mode) {
    case PermutationMode::Leaf: return "leaf";
    case PermutationMode::Cell: return "cell";
    case PermutationMode::Gene: return "gene";
  }
  return "leaf";
}

FeatureTable permute_dataset(const FeatureTable& table, PermutationMode mode, std::uint64_t seed) {
  Rng rng = Rng(seed).split("permute");
  FeatureTable out = table;
  auto& values = out.values();
  switch (mode) {
    case PermutationMode::Leaf: {
      auto labels = table.row_labels();
      rng.shuffle(std::span<std::string>(labels));
      out.set_row_labels(std::move(labels));
      break;
    }
    case PermutationMode::Cell: {
      for (Eigen::Index j = 0; j < values.cols(); ++j) {
        std::span<double> column(values.col(j).data(), static_cast<std::size_t>(values.rows()));
        rng.shuffle(column);
      }
      break;
    }
    case PermutationMode::Gene: {
      std::vector<double> row(static_cast<std::size_t>(values.cols()));
      for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) row[static_cast<std::size_t>(j)] = values(i, j);
        rng.shuffle(std::span<double>(row));
        for (Eigen::Index j = 0; j < values.cols(); ++j) values(i, j) = row[static_cast<std::size_t>(j)];
      }
      break;
    }
  }
  return out;
}

std::optional<DistanceKind> parse_distance_kind(std::string_view text) noexcept {
  if (text == "euclidean") return DistanceKind::Euclidean;
  if (text == "squared" || text == "squared_euclidean") return DistanceKind::SquaredEuclidean;
  return std::nullopt;
}

std::string_view to_string(DistanceKind kind) noexcept {
  return kind == DistanceKind::Euclidean ? "euclidean" : "squared_euclidean";
}

DistanceMatrix row_distances(const Eigen::MatrixXd& rows, const std::vector<std::string>& labels,
                             DistanceKind kind) {
  const auto n = static_cast<std::size_t>(rows.rows());
  if (labels.size() != n) throw InvalidArgumentError("label count does not match row count");
  DistanceMatrix out(labels);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double sq =
          (rows.row(static_cast<Eigen::Index>(i)) - rows.row(static_cast<Eigen::Index>(j))).squaredNorm();
      out.set(i, j, kind == DistanceKind::Euclidean ? std::sqrt(sq) : sq);
    }
  }
  return out;
}

DistanceMatrix feature_distances(const FeatureTable& table, DistanceKind kind) {
  return row_distances(table.values(), table.row_labels(), kind);
}

}  // namespace quartree
