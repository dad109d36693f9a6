#include "quartree/distance_matrix.hpp"

#include <algorithm>
#include <cmath>

#include "quartree/error.hpp"

namespace quartree {

DistanceMatrix::DistanceMatrix(std::vector<std::string> labels)
    : labels_(std::move(labels)), values_(labels_.size() * labels_.size(), 0.0) {}

DistanceMatrix::DistanceMatrix(std::vector<std::string> labels, std::vector<double> values)
    : labels_(std::move(labels)), values_(std::move(values)) {
  if (values_.size() != labels_.size() * labels_.size()) {
    throw InvalidArgumentError("distance matrix: expected " +
                               std::to_string(labels_.size() * labels_.size()) + " values, got " +
                               std::to_string(values_.size()));
  }
}

double DistanceMatrix::max_abs_difference(const DistanceMatrix& other) const {
  if (labels_ != other.labels_) {
    throw InvalidArgumentError("distance matrix: label sets differ");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    worst = std::max(worst, std::abs(values_[k] - other.values_[k]));
  }
  return worst;
}

bool DistanceMatrix::is_symmetric(double tol) const noexcept {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    }
  }
  return true;
}

void DistanceMatrix::validate() const {
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    if ((*this)(i, i) != 0.0) {
      throw InvalidArgumentError("distance matrix: non-zero diagonal at " + labels_[i]);
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite((*this)(i, j))) {
        throw InvalidArgumentError("distance matrix: non-finite entry (" + labels_[i] + ", " +
                                   labels_[j] + ")");
      }
    }
  }
  if (!is_symmetric(0.0)) throw InvalidArgumentError("distance matrix: not symmetric");
}

DistanceMatrix DistanceMatrix::subset(std::span<const std::size_t> indices) const {
  std::vector<std::string> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) labels.push_back(labels_.at(i));
  DistanceMatrix out(std::move(labels));
  for (std::size_t a = 0; a < indices.size(); ++a) {
    for (std::size_t b = 0; b < indices.size(); ++b) {
      out.values_[a * indices.size() + b] = (*this)(indices[a], indices[b]);
    }
  }
  return out;
}

}  // namespace quartree
