#include "quartree/learn/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "quartree/error.hpp"

namespace quartree {

std::optional<LossKind> parse_loss_kind(std::string_view text) noexcept {
  if (text == "quartet") return LossKind::Quartet;
  if (text == "triplet") return LossKind::Triplet;
  if (text == "quadruplet") return LossKind::Quadruplet;
  return std::nullopt;
}

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::Quartet: return "quartet";
    case LossKind::Triplet: return "triplet";
    case LossKind::Quadruplet: return "quadruplet";
  }
  return "?";
}

void LossConfig::validate() const {
  const std::array<std::pair<const char*, double>, 7> weights{{{"lambda_add", lambda_add},
                                                               {"w_close", w_close},
                                                               {"w_push", w_push},
                                                               {"lambda", lambda},
                                                               {"lambda_spar", lambda_spar},
                                                               {"m0", m0},
                                                               {"projection_l1", projection_l1}}};
  for (const auto& [name, value] : weights) {
    if (!(value >= 0.0) || !std::isfinite(value)) {
      throw ConfigError(std::string("loss: ") + name + " must be finite and non-negative");
    }
  }
  if (quartets_per_step == 0) throw ConfigError("loss: quartets_per_step must be at least 1");
  if (!(quadruplet_alpha() >= 0.0) || !(quadruplet_beta() >= 0.0)) throw ConfigError("loss: margins must be non-negative");
}

double embedding_distance(const Eigen::MatrixXd& z, Eigen::Index i, Eigen::Index j, DistanceKind metric) {
  const double sq = (z.row(i) - z.row(j)).squaredNorm();
  return metric == DistanceKind::SquaredEuclidean ? sq : std::sqrt(sq);
}

void add_distance_gradient(const Eigen::MatrixXd& z, Eigen::Index i, Eigen::Index j, DistanceKind metric, double coeff,
                           Eigen::MatrixXd& dz) {
  if (coeff == 0.0 || i == j) return;
  Eigen::RowVectorXd diff = z.row(i) - z.row(j);
  if (metric == DistanceKind::SquaredEuclidean) {
    diff *= 2.0 * coeff;
  } else {
    const double norm = diff.norm();
    if (norm == 0.0) return;
    diff *= coeff / norm;
  }
  dz.row(i) += diff;
  dz.row(j) -= diff;
}

namespace {

constexpr std::array<QuartetTopology, 3> kPairings{QuartetTopology::AbCd, QuartetTopology::AcBd, QuartetTopology::AdBc};

void check_quartet(const Eigen::MatrixXd& z, const Quartet& q) {
  for (std::size_t k = 0; k < 4; ++k) {
    if (q[k] >= static_cast<std::uint64_t>(z.rows())) throw InvalidArgumentError("quartet leaf out of range");
    if (k > 0 && q[k] <= q[k - 1]) throw InvalidArgumentError("quartet leaves must be distinct and sorted");
  }
}

double pairing_sum(const Eigen::MatrixXd& z, const Quartet& q, QuartetTopology t, DistanceKind metric) {
  const auto pairs = sibling_positions(t);
  double s = 0.0;
  for (const auto& p : pairs) s += embedding_distance(z, q[p[0]], q[p[1]], metric);
  return s;
}

void add_pairing_gradient(const Eigen::MatrixXd& z, const Quartet& q, QuartetTopology t, DistanceKind metric,
                          double coeff, Eigen::MatrixXd& dz) {
  for (const auto& p : sibling_positions(t)) add_distance_gradient(z, q[p[0]], q[p[1]], metric, coeff, dz);
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

QuartetLossValue quartet_loss(const Eigen::MatrixXd& z, const Quartet& q, std::optional<QuartetTopology> expected,
                              const QuartetWeights& weights, DistanceKind metric, Eigen::MatrixXd* dz, double scale) {
  check_quartet(z, q);
  if (expected == QuartetTopology::Unresolved) throw InvalidArgumentError("quartet_loss: expected topology is unresolved");

  std::array<std::pair<double, QuartetTopology>, 3> sums;
  for (std::size_t k = 0; k < 3; ++k) sums[k] = {pairing_sum(z, q, kPairings[k], metric), kPairings[k]};
  // roles[0..2] hold S1, S2, S3.
  std::array<std::pair<double, QuartetTopology>, 3> roles;
  if (expected) {
    std::size_t at = 0;
    for (const auto& s : sums) {
      if (s.second == *expected) {
        roles[2] = s;
      } else {
        roles[at++] = s;
      }
    }
  } else {
    roles = sums;
    std::stable_sort(roles.begin(), roles.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  }
  const double s1 = roles[0].first;
  const double s2 = roles[1].first;
  const double s3 = roles[2].first;

  QuartetLossValue value;
  value.close = weights.w_close * std::abs(s1 - s2);
  const double hinge = s3 - 0.5 * (s1 + s2) + weights.m0;
  value.push = hinge > 0.0 ? weights.w_push * hinge : 0.0;

  if (dz) {
    double g1 = weights.w_close * sign(s1 - s2);
    double g2 = -g1;
    double g3 = 0.0;
    if (hinge > 0.0) {
      g1 -= 0.5 * weights.w_push;
      g2 -= 0.5 * weights.w_push;
      g3 += weights.w_push;
    }
    add_pairing_gradient(z, q, roles[0].second, metric, scale * g1, *dz);
    add_pairing_gradient(z, q, roles[1].second, metric, scale * g2, *dz);
    add_pairing_gradient(z, q, roles[2].second, metric, scale * g3, *dz);
  }
  return value;
}

double deviation_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, DistanceKind metric, Eigen::MatrixXd* dz,
                      Eigen::MatrixXd* dx, double scale) {
  if (x.rows() != z.rows()) throw InvalidArgumentError("deviation_loss: row counts differ");
  const Eigen::Index n = x.rows();
  if (n == 0) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = embedding_distance(z, i, j, metric) - embedding_distance(x, i, j, metric);
      // Both (i, j) and (j, i) contribute.
      total += 2.0 * r * r;
      const double coeff = scale * 4.0 * r * inv_n;
      if (dz) add_distance_gradient(z, i, j, metric, coeff, *dz);
      if (dx) add_distance_gradient(x, i, j, metric, -coeff, *dx);
    }
  }
  return total * inv_n;
}

double sparsity_penalty(const Eigen::VectorXd& gates, double lambda_spar) {
  if (gates.size() == 0) return 0.0;
  return lambda_spar * gates.sum() / static_cast<double>(gates.size());
}

TripletRoles triplet_roles(const Quartet& q, std::optional<QuartetTopology> expected,
                           const std::function<double(std::uint32_t, std::uint32_t)>& reference) {
  std::array<int, 2> pair{};
  if (expected && *expected != QuartetTopology::Unresolved) {
    const auto pairs = sibling_positions(*expected);
    const double d0 = reference(q[pairs[0][0]], q[pairs[0][1]]);
    const double d1 = reference(q[pairs[1][0]], q[pairs[1][1]]);
    pair = d1 < d0 ? pairs[1] : pairs[0];
  } else {
    double best = 0.0;
    bool first = true;
    for (int a = 0; a < 4; ++a) {
      for (int b = a + 1; b < 4; ++b) {
        const double d = reference(q[a], q[b]);
        if (first || d < best) {
          best = d;
          pair = {a, b};
          first = false;
        }
      }
    }
  }
  std::array<std::uint32_t, 2> rest{};
  std::size_t at = 0;
  for (int k = 0; k < 4; ++k) {
    if (k != pair[0] && k != pair[1]) rest[at++] = q[k];
  }
  TripletRoles roles;
  roles.anchor = q[pair[0]];
  roles.positive = q[pair[1]];
  const bool swap = reference(roles.anchor, rest[1]) > reference(roles.anchor, rest[0]);
  roles.negative = swap ? rest[1] : rest[0];
  roles.other = swap ? rest[0] : rest[1];
  return roles;
}

double triplet_loss(const Eigen::MatrixXd& z, const TripletRoles& roles, double margin, Eigen::MatrixXd* dz,
                    double scale) {
  constexpr auto sq = DistanceKind::SquaredEuclidean;
  const double h = embedding_distance(z, roles.anchor, roles.positive, sq) -
                   embedding_distance(z, roles.anchor, roles.negative, sq) + margin;
  if (h <= 0.0) return 0.0;
  if (dz) {
    add_distance_gradient(z, roles.anchor, roles.positive, sq, scale, *dz);
    add_distance_gradient(z, roles.anchor, roles.negative, sq, -scale, *dz);
  }
  return h;
}

double quadruplet_loss(const Eigen::MatrixXd& z, const TripletRoles& roles, double alpha, double beta,
                       Eigen::MatrixXd* dz, double scale) {
  constexpr auto sq = DistanceKind::SquaredEuclidean;
  const double ap = embedding_distance(z, roles.anchor, roles.positive, sq);
  const double h1 = ap - embedding_distance(z, roles.anchor, roles.negative, sq) + alpha;
  const double h2 = ap - embedding_distance(z, roles.other, roles.negative, sq) + beta;
  double value = 0.0;
  if (h1 > 0.0) {
    value += h1;
    if (dz) {
      add_distance_gradient(z, roles.anchor, roles.positive, sq, scale, *dz);
      add_distance_gradient(z, roles.anchor, roles.negative, sq, -scale, *dz);
    }
  }
  if (h2 > 0.0) {
    value += h2;
    if (dz) {
      add_distance_gradient(z, roles.anchor, roles.positive, sq, scale, *dz);
      add_distance_gradient(z, roles.other, roles.negative, sq, -scale, *dz);
    }
  }
  return value;
}

}  // namespace quartree
