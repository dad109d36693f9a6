#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace quartree {

/// Symmetric square matrix over an ordered set of leaf labels.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  /// Zero matrix over `labels`.
  explicit DistanceMatrix(std::vector<std::string> labels);
  /// Row-major `values` of size labels.size()^2.
  DistanceMatrix(std::vector<std::string> labels, std::vector<double> values);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  double operator()(std::size_t i, std::size_t j) const noexcept { return values_[i * size() + j]; }
  /// Sets both (i, j) and (j, i).
  void set(std::size_t i, std::size_t j, double value) noexcept {
    values_[i * size() + j] = value;
    values_[j * size() + i] = value;
  }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  /// Max |a - b| over all entries; labels must match.
  double max_abs_difference(const DistanceMatrix& other) const;
  bool is_symmetric(double tol = 0.0) const noexcept;
  /// Throws InvalidArgumentError on asymmetry, non-zero diagonal, or non-finite entries.
  void validate() const;

  /// Matrix restricted to (and reordered by) `indices`.
  DistanceMatrix subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<std::string> labels_;
  std::vector<double> values_;
};

}  // namespace quartree
