#pragma once

#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "quartree/feature_table.hpp"
#include "quartree/quartet.hpp"

namespace quartree {

enum class LossKind : std::uint8_t { Quartet, Triplet, Quadruplet };

std::optional<LossKind> parse_loss_kind(std::string_view text) noexcept;
std::string_view to_string(LossKind kind) noexcept;

struct LossConfig {
  double lambda_add = 2.0;
  double w_close = 1.0;
  double w_push = 10.0;
  /// Deviation weight.
  double lambda = 0.01;
  double lambda_spar = 0.0;
  double m0 = 0.5;
  DistanceKind metric = DistanceKind::Euclidean;
  std::size_t quartets_per_step = 64;
  LossKind kind = LossKind::Quartet;
  /// Quadruplet margins; default to m0 and m0 / 2.
  std::optional<double> alpha;
  std::optional<double> beta_margin;
  /// Weight of ||G - I||_1 when the model carries a projection.
  double projection_l1 = 1.0;

  /// Throws ConfigError.
  void validate() const;
  double quadruplet_alpha() const { return alpha.value_or(m0); }
  double quadruplet_beta() const { return beta_margin.value_or(m0 / 2.0); }
};

/// Distance between rows i and j of Z under `metric`.
double embedding_distance(const Eigen::MatrixXd& z, Eigen::Index i, Eigen::Index j, DistanceKind metric);

/// Adds coeff * d(distance(i, j)) / dZ into dz. The euclidean gradient at
/// coincident points is taken as 0.
void add_distance_gradient(const Eigen::MatrixXd& z, Eigen::Index i, Eigen::Index j, DistanceKind metric, double coeff,
                           Eigen::MatrixXd& dz);

struct QuartetWeights {
  double w_close = 1.0;
  double w_push = 10.0;
  double m0 = 0.5;
};

struct QuartetLossValue {
  double close = 0.0;
  double push = 0.0;
  double total() const noexcept { return close + push; }
};

/// Additivity loss of one quartet. With an expected topology the sum pairing
/// the siblings plays S3 and the other two, in pairing order, play S1 and S2;
/// without one the observed sums are sorted descending. When `dz` is non-null
/// the gradient times `scale` is added to it.
QuartetLossValue quartet_loss(const Eigen::MatrixXd& z, const Quartet& q, std::optional<QuartetTopology> expected,
                              const QuartetWeights& weights, DistanceKind metric, Eigen::MatrixXd* dz = nullptr,
                              double scale = 1.0);

/// (1/N) ||D(Z) - D(X)||_F^2 over all ordered pairs. Gradients w.r.t. Z and X
/// are added into the non-null outputs.
double deviation_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, DistanceKind metric,
                      Eigen::MatrixXd* dz = nullptr, Eigen::MatrixXd* dx = nullptr, double scale = 1.0);

/// lambda_spar * sum(g) / d.
double sparsity_penalty(const Eigen::VectorXd& gates, double lambda_spar);

/// Leaf roles for the triplet and quadruplet losses.
struct TripletRoles {
  std::uint32_t anchor = 0;
  std::uint32_t positive = 0;
  std::uint32_t negative = 0;
  /// The fourth leaf, second negative of the quadruplet loss.
  std::uint32_t other = 0;
};

/// Anchor and positive are the closer sibling pair under `reference`
/// (the closest pair overall without a topology), anchor being the smaller
/// index; the negative is the remaining leaf farther from the anchor.
TripletRoles triplet_roles(const Quartet& q, std::optional<QuartetTopology> expected,
                           const std::function<double(std::uint32_t, std::uint32_t)>& reference);

/// [|A-P|^2 - |A-N|^2 + margin]_+ on squared euclidean distances.
double triplet_loss(const Eigen::MatrixXd& z, const TripletRoles& roles, double margin, Eigen::MatrixXd* dz = nullptr,
                    double scale = 1.0);

/// [|A-P|^2 - |A-N|^2 + alpha]_+ + [|A-P|^2 - |N'-N|^2 + beta]_+.
double quadruplet_loss(const Eigen::MatrixXd& z, const TripletRoles& roles, double alpha, double beta,
                       Eigen::MatrixXd* dz = nullptr, double scale = 1.0);

}  // namespace quartree
