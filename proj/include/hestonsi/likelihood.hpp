#pragma once

#include <cstddef>
#include <limits>

#include "hestonsi/heston.hpp"
#include "hestonsi/sir.hpp"

namespace hestonsi {

/// Result of a negative log-likelihood evaluation. Non-finite evaluations are
/// reported as +inf so an optimizer can treat them as rejected points.
struct NllValue {
  double value = std::numeric_limits<double>::infinity();
  std::size_t n_terms = 0;
  std::size_t clamped_terms = 0;
  bool finite = false;

  static NllValue infinite(std::size_t terms = 0) { return {std::numeric_limits<double>::infinity(), terms, 0, false}; }
};

/// Denominator floor for the variance in the transition density.
inline constexpr double kVarianceFloor = 1e-12;

/// Joint negative log-likelihood of all transitions of all paths under the
/// Euler transition: Q | v ~ N(1 + mu dt, v dt), v' | v ~ N(v + kappa (theta - v) dt,
/// sigma^2 v dt), correlation rho. Per-path sums are combined by a fixed
/// pairwise tree so the result does not depend on the thread count.
NllValue direct_nll(const HestonParams& params, const PathSet& paths, unsigned threads = 1);

/// Model-implied mean and covariance of a feature row, columns ordered
/// (Q, v, mu, kappa, theta, rho).
struct ReducedModel {
  Vector mu_X;
  Matrix Sigma_X;
  double delta = 0.0;
  double dt = 1.0;
};

ReducedModel build_reduced_model(const HestonParams& params, Eigen::Index d, double dt, double delta);

/// Gaussian negative log-likelihood of the projected rows. (mu_X, Sigma_X) are
/// pushed through the same affine map reduce() applied to the data.
NllValue reduced_nll(const HestonParams& params, const Matrix& X_reduced, const SirProjection& projection, double dt,
                     double delta, ProjectionSpace space = ProjectionSpace::Whitened);

/// Sum with a fixed pairwise (tree) association.
double pairwise_sum(const double* values, std::size_t count);

}  // namespace hestonsi
