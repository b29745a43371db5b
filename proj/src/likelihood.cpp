#include "hestonsi/likelihood.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "hestonsi/parallel.hpp"

namespace hestonsi {

double pairwise_sum(const double* values, std::size_t count) {
  if (count == 0) return 0.0;
  if (count <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) s += values[i];
    return s;
  }
  const std::size_t half = count / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, count - half);
}

NllValue direct_nll(const HestonParams& p, const PathSet& paths, unsigned threads) {
  const int n = paths.n_paths();
  const int steps = paths.n_steps();
  if (n < 1 || steps < 1) throw InvalidInput("direct_nll needs at least one path with one transition");
  if (paths.V.rows() != n || paths.V.cols() != steps + 1) throw InvalidInput("direct_nll: V shape does not match Q");
  if (!(paths.dt > 0.0)) throw InvalidInput("direct_nll: path step size must be positive");

  const std::size_t terms = static_cast<std::size_t>(n) * static_cast<std::size_t>(steps);
  const bool finite_params = std::isfinite(p.mu) && std::isfinite(p.kappa) && std::isfinite(p.theta) &&
                             std::isfinite(p.sigma) && std::isfinite(p.rho);
  if (!finite_params || !(p.sigma > 0.0) || !(std::abs(p.rho) < 1.0)) return NllValue::infinite(terms);

  const double dt = paths.dt;
  const double one_minus_rho2 = 1.0 - p.rho * p.rho;
  const double log_norm = std::log(2.0 * std::numbers::pi) + std::log(p.sigma) + std::log(dt) + 0.5 * std::log(one_minus_rho2);
  const double quad_scale = 1.0 / (2.0 * one_minus_rho2 * dt);
  const double mean_q = 1.0 + p.mu * dt;
  const double inv_sigma = 1.0 / p.sigma;

  std::vector<double> per_path(static_cast<std::size_t>(n));
  std::vector<std::size_t> clamps(static_cast<std::size_t>(n), 0);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t idx) {
    const auto i = static_cast<Eigen::Index>(idx);
    const double* q = paths.Q.row(i).data();
    const double* v = paths.V.row(i).data();
    double sum = 0.0;
    std::size_t clamped = 0;
    for (int t = 0; t < steps; ++t) {
      double vt = v[t];
      if (!(vt >= kVarianceFloor)) {
        vt = kVarianceFloor;
        ++clamped;
      }
      const double a = q[t] - mean_q;
      const double b = (v[t + 1] - vt - p.kappa * (p.theta - vt) * dt) * inv_sigma;
      sum += log_norm + std::log(vt) + (a * a - 2.0 * p.rho * a * b + b * b) * quad_scale / vt;
    }
    per_path[idx] = sum;
    clamps[idx] = clamped;
  });

  NllValue out;
  out.value = pairwise_sum(per_path.data(), per_path.size());
  out.n_terms = terms;
  for (auto c : clamps) out.clamped_terms += c;
  out.finite = std::isfinite(out.value);
  if (!out.finite) out.value = std::numeric_limits<double>::infinity();
  return out;
}

ReducedModel build_reduced_model(const HestonParams& p, Eigen::Index d, double dt, double delta) {
  if (d < 2) throw InvalidInput("reduced model needs d >= 2");
  if (!(delta > 0.0)) throw InvalidInput("delta must be positive");
  if (!(p.kappa > 0.0)) throw InvalidInput("reduced model needs kappa > 0");

  ReducedModel m;
  m.delta = delta;
  m.dt = dt;
  m.mu_X = Vector::Zero(d);
  m.mu_X(0) = 1.0 + p.mu * dt;
  m.mu_X(1) = p.theta;

  // The stationary variance of v is not rescaled by dt.
  const double var_v = p.sigma * p.sigma * p.theta / (2.0 * p.kappa);
  m.Sigma_X = Matrix::Zero(d, d);
  m.Sigma_X.diagonal().setConstant(delta);
  m.Sigma_X(0, 0) = p.theta * dt;
  m.Sigma_X(1, 1) = var_v;
  m.Sigma_X(0, 1) = p.rho * var_v;
  m.Sigma_X(1, 0) = p.rho * var_v;
  return m;
}

NllValue reduced_nll(const HestonParams& params, const Matrix& X_reduced, const SirProjection& projection, double dt,
                     double delta, ProjectionSpace space) {
  const Eigen::Index d = projection.W.rows();
  const Eigen::Index B = projection.W.cols();
  const Eigen::Index n = X_reduced.rows();
  if (n < 1) throw InvalidInput("reduced_nll needs at least one row");
  if (X_reduced.cols() != B)
    throw InvalidInput("reduced_nll: data has " + std::to_string(X_reduced.cols()) + " columns, projection has " +
                       std::to_string(B));
  if (space == ProjectionSpace::Whitened &&
      (projection.mean.size() != d || projection.whitener.rows() != d || projection.whitener.cols() != d))
    throw InvalidInput("reduced_nll: projection mean/whitener do not match W");

  const auto terms = static_cast<std::size_t>(n);
  const bool finite_params = std::isfinite(params.mu) && std::isfinite(params.kappa) &&
                             std::isfinite(params.theta) && std::isfinite(params.sigma) && std::isfinite(params.rho);
  if (!finite_params || !(params.kappa > 0.0)) return NllValue::infinite(terms);

  // Extended precision: whitened data far from the model mean can leave the
  // quadratic form sensitive to rounding in Sigma_R when delta is small.
  using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const ReducedModel model = build_reduced_model(params, d, dt, delta);
  MatrixL A;
  VectorL mu_R;
  if (space == ProjectionSpace::Whitened) {
    A = projection.whitener.cast<long double>() * projection.W.cast<long double>();
    mu_R = A.transpose() * (model.mu_X - projection.mean).cast<long double>();
  } else {
    A = projection.W.cast<long double>();
    mu_R = A.transpose() * model.mu_X.cast<long double>();
  }
  MatrixL Sigma_R = A.transpose() * model.Sigma_X.cast<long double>() * A;
  Sigma_R = (0.5L * (Sigma_R + Sigma_R.transpose())).eval();

  Eigen::LLT<MatrixL> llt(Sigma_R);
  if (llt.info() != Eigen::Success) return NllValue::infinite(terms);
  const MatrixL L = llt.matrixL();
  if (!(L.diagonal().array() > 0.0L).all()) return NllValue::infinite(terms);

  const auto log_det = static_cast<double>(2.0L * L.diagonal().array().log().sum());
  MatrixL residual = (X_reduced.cast<long double>().rowwise() - mu_R.transpose()).transpose();
  llt.matrixL().solveInPlace(residual);
  const auto mahalanobis = static_cast<double>(residual.squaredNorm());

  const double nd = static_cast<double>(n);
  NllValue out;
  out.value = 0.5 * nd * static_cast<double>(B) * std::log(2.0 * std::numbers::pi) + 0.5 * nd * log_det + 0.5 * mahalanobis;
  out.n_terms = terms;
  out.finite = std::isfinite(out.value);
  if (!out.finite) out.value = std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace hestonsi
