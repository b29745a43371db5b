#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hestonsi/likelihood.hpp"
#include "hestonsi/optimizer.hpp"
#include "oracles.hpp"

using namespace hestonsi;

namespace {

const HestonParams kTrue{0.03, 5.0, 0.05, 0.2, -0.5};

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

/// Uniform draw inside the estimation box, kappa restricted to a moderate
/// range so the quantities stay well scaled.
HestonParams random_params(std::mt19937_64& rng) {
  auto U = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  return {U(-0.05, 0.05), U(5.0, 50.0), U(0.01, 0.05), U(1e-3, 0.3), U(-0.9, 0.7)};
}

PathSet random_paths(int n, int steps, double dt, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> q(0.95, 1.05), v(0.001, 0.09);
  PathSet p;
  p.S = RowMatrix::Constant(n, steps + 1, 10.0);
  p.Q.resize(n, steps);
  p.V.resize(n, steps + 1);
  p.dt = dt;
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < steps; ++t) p.Q(i, t) = q(rng);
    for (int t = 0; t <= steps; ++t) p.V(i, t) = v(rng);
  }
  return p;
}

double oracle_direct(const HestonParams& p, const PathSet& paths) {
  double total = 0.0;
  for (int i = 0; i < paths.n_paths(); ++i)
    for (int t = 0; t < paths.n_steps(); ++t) {
      const double v = paths.V(i, t), dt = paths.dt;
      total += oracle::bivariate_normal_nll(paths.Q(i, t), paths.V(i, t + 1), 1.0 + p.mu * dt,
                                            v + p.kappa * (p.theta - v) * dt, std::sqrt(v * dt),
                                            p.sigma * std::sqrt(v * dt), p.rho);
    }
  return total;
}

oracle::Mat to_rows(const Matrix& m) {
  oracle::Mat r(m.rows(), std::vector<oracle::Real>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
  return r;
}

/// Reduced model written out from its definition.
void oracle_model(const HestonParams& p, int d, double dt, double delta, std::vector<oracle::Real>& mean,
                  oracle::Mat& cov) {
  mean.assign(d, 0.0);
  mean[0] = 1.0L + static_cast<oracle::Real>(p.mu) * dt;
  mean[1] = p.theta;
  cov.assign(d, std::vector<oracle::Real>(d, 0.0));
  for (int k = 0; k < d; ++k) cov[k][k] = delta;
  const oracle::Real V = static_cast<oracle::Real>(p.sigma) * p.sigma * p.theta / (2.0L * p.kappa);
  cov[0][0] = p.theta * dt;
  cov[1][1] = V;
  cov[0][1] = cov[1][0] = p.rho * V;
}

Matrix random_orthonormal(int d, int B, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  Matrix G(d, d);
  for (auto& g : G.reshaped()) g = N(rng);
  Eigen::HouseholderQR<Matrix> qr(G);
  return Matrix(qr.householderQ()).leftCols(B);
}

}  // namespace

TEST(DirectNll, ZeroResidualSingleTransition) {
  PathSet p;
  p.dt = 1.0;
  p.S = RowMatrix::Constant(1, 2, 10.0);
  p.Q.resize(1, 1);
  p.V.resize(1, 2);
  const HestonParams par{0.03, 5.0, 0.05, 0.2, 0.0};
  const double v1 = 0.02;
  p.V << v1, v1 + par.kappa * (par.theta - v1);
  p.Q << 1.0 + par.mu;
  const NllValue r = direct_nll(par, p);
  EXPECT_NEAR(r.value, std::log(2.0 * std::numbers::pi) + std::log(par.sigma) + std::log(v1), 1e-14);
  EXPECT_EQ(r.n_terms, 1u);
  EXPECT_TRUE(r.finite);
}

TEST(DirectNll, UncorrelatedCaseSplitsIntoUnivariateNormals) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    HestonParams par = random_params(rng);
    par.rho = 0.0;
    const PathSet p = random_paths(3, 7, 1.0 / 250.0, rng);
    double ref = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int t = 0; t < 7; ++t) {
        const double v = p.V(i, t), dt = p.dt;
        ref += oracle::normal_nll(p.Q(i, t), 1.0 + par.mu * dt, v * dt);
        ref += oracle::normal_nll(p.V(i, t + 1), v + par.kappa * (par.theta - v) * dt, par.sigma * par.sigma * v * dt);
      }
    EXPECT_LE(rel_err(direct_nll(par, p).value, ref), 1e-10);
  }
}

TEST(DirectNll, MatchesBivariateNormalOracle) {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 100; ++rep) {
    const HestonParams par = random_params(rng);
    const double dt = rep % 2 ? 1.0 : 1.0 / 250.0;
    const PathSet p = random_paths(2, 5, dt, rng);
    EXPECT_LE(rel_err(direct_nll(par, p).value, oracle_direct(par, p)), 1e-10) << "rep " << rep;
  }
}

TEST(DirectNll, InvalidParametersGiveInfinity) {
  std::mt19937_64 rng(3);
  const PathSet p = random_paths(1, 4, 0.004, rng);
  for (const HestonParams& bad : {HestonParams{0.0, 5.0, 0.05, 0.2, 1.0}, HestonParams{0.0, 5.0, 0.05, 0.2, -1.2},
                                  HestonParams{0.0, 5.0, 0.05, 0.0, 0.0}, HestonParams{0.0, 5.0, 0.05, -0.1, 0.0}}) {
    const NllValue r = direct_nll(bad, p);
    EXPECT_FALSE(r.finite);
    EXPECT_TRUE(std::isinf(r.value) && r.value > 0.0);
  }
}

TEST(DirectNll, ZeroVarianceIsClampedAndCounted) {
  std::mt19937_64 rng(4);
  PathSet p = random_paths(2, 6, 0.004, rng);
  p.V(0, 2) = 0.0;
  p.V(1, 0) = 0.0;
  p.V(1, 6) = 0.0;  // terminal value never sits in a denominator
  const NllValue r = direct_nll(kTrue, p);
  EXPECT_EQ(r.clamped_terms, 2u);
  EXPECT_TRUE(r.finite);
}

TEST(DirectNll, ThreadCountDoesNotChangeTheValue) {
  SimConfig c;
  c.n_paths = 57;
  c.seed = 3;
  const PathSet p = simulate_paths(kTrue, c);
  const double a = direct_nll(kTrue, p, 1).value;
  EXPECT_EQ(a, direct_nll(kTrue, p, 3).value);
  EXPECT_EQ(a, direct_nll(kTrue, p, 8).value);
}

TEST(DirectNll, QuadraticPartGrowsAsDriftMovesAway) {
  PathSet p;
  p.dt = 0.004;
  p.S = RowMatrix::Constant(1, 2, 10.0);
  p.Q.resize(1, 1);
  p.V.resize(1, 2);
  HestonParams par = kTrue;
  // Both residuals vanish at the start; moving mu only grows the price residual.
  p.Q << 1.0002;
  p.V << 0.04, 0.04 + par.kappa * (par.theta - 0.04) * p.dt;
  par.mu = 0.0002 / p.dt;
  double prev = direct_nll(par, p).value;
  for (int k = 1; k <= 20; ++k) {
    par.mu = 0.05 + (k % 2 ? 0.01 : -0.01) * k;
    const double cur = direct_nll(par, p).value;
    EXPECT_GE(cur, prev);
    prev = cur;
  }
}

TEST(ReducedModel, PrintedValuesAtUnitStep) {
  const ReducedModel m = build_reduced_model(kTrue, 6, 1.0, 1e-6);
  EXPECT_NEAR(m.mu_X(0), 1.03, 1e-15);
  EXPECT_EQ(m.mu_X(1), 0.05);
  for (int k = 2; k < 6; ++k) EXPECT_EQ(m.mu_X(k), 0.0);
  EXPECT_NEAR(m.Sigma_X(1, 1), 2.0e-4, 1e-18);
  EXPECT_NEAR(m.Sigma_X(0, 1), -1.0e-4, 1e-18);
  EXPECT_NEAR(m.Sigma_X(0, 0), 0.05, 1e-18);
  for (int k = 2; k < 6; ++k) EXPECT_EQ(m.Sigma_X(k, k), 1e-6);
  EXPECT_TRUE(m.Sigma_X == m.Sigma_X.transpose());
}

TEST(ReducedModel, ZeroCorrelationIsBlockDiagonal) {
  const ReducedModel m = build_reduced_model({0.03, 5.0, 0.05, 0.2, 0.0}, 6, 0.004, 1e-6);
  EXPECT_EQ(m.Sigma_X(0, 1), 0.0);
  EXPECT_EQ(m.Sigma_X(1, 0), 0.0);
  EXPECT_NEAR(m.Sigma_X(0, 0), 0.05 * 0.004, 1e-18);
}

TEST(ReducedModel, RejectsBadArguments) {
  EXPECT_THROW(build_reduced_model(kTrue, 1, 1.0, 1e-6), InvalidInput);
  EXPECT_THROW(build_reduced_model(kTrue, 6, 1.0, 0.0), InvalidInput);
  EXPECT_THROW(build_reduced_model({0.0, 0.0, 0.05, 0.2, 0.0}, 6, 1.0, 1e-6), InvalidInput);
}

// At unit step the (Q, v) block has determinant V (theta - rho^2 V) > 0 for any
// point of the box, and the remaining diagonal is exactly delta. The smallest
// eigenvalue is therefore positive but can sit far below delta, since V itself
// does for small sigma.
TEST(ReducedModel, PositiveDefiniteAcrossTheBox) {
  std::mt19937_64 rng(5);
  const ParamBounds box = ParamBounds::heston(1e3);
  for (int rep = 0; rep < 1000; ++rep) {
    ParamVector x;
    for (int k = 0; k < 5; ++k) x(k) = std::uniform_real_distribution<double>(box.lower(k), box.upper(k))(rng);
    const ReducedModel m = build_reduced_model(HestonParams::from_vector(x), 6, 1.0, 1e-6);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m.Sigma_X);
    EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
    Eigen::LLT<Matrix> llt(m.Sigma_X);
    EXPECT_EQ(llt.info(), Eigen::Success);
    const Matrix tail = m.Sigma_X.bottomRightCorner(4, 4);
    EXPECT_TRUE(tail == 1e-6 * Matrix::Identity(4, 4));
  }
}

TEST(ReducedNll, IdentityProjectionIsPlainGaussianNll) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> N(0.0, 0.01);
  for (int rep = 0; rep < 20; ++rep) {
    const HestonParams par = random_params(rng);
    Matrix X(4, 6);
    for (auto& x : X.reshaped()) x = N(rng);
    X.col(0).array() += 1.0;
    X.col(1).array() += 0.03;
    std::vector<oracle::Real> mean;
    oracle::Mat cov;
    oracle_model(par, 6, 1.0, 1e-6, mean, cov);
    const double ref = oracle::mvn_nll(to_rows(X), mean, cov);
    EXPECT_LE(rel_err(reduced_nll(par, X, SirProjection::identity(6), 1.0, 1e-6).value, ref), 1e-10);
  }
}

TEST(ReducedNll, SingleRowAtTheMean) {
  const SirProjection id = SirProjection::identity(6);
  const ReducedModel m = build_reduced_model(kTrue, 6, 1.0, 1e-6);
  const Matrix row = m.mu_X.transpose();
  const double logdet = std::log(m.Sigma_X.determinant());
  EXPECT_NEAR(reduced_nll(kTrue, row, id, 1.0, 1e-6).value, 3.0 * std::log(2.0 * std::numbers::pi) + 0.5 * logdet,
              1e-10);
}

TEST(ReducedNll, MatchesExplicitlyTransformedGaussianOracle) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const HestonParams par = random_params(rng);
    const int B = 1 + rep % 6;
    const double dt = rep % 3 == 0 ? 1.0 : 0.5;
    SirProjection proj;
    proj.W = random_orthonormal(6, B, rng);
    proj.mean = Vector(6);
    for (auto& m : proj.mean) m = 0.1 * N(rng);
    Matrix M(6, 6);
    for (auto& x : M.reshaped()) x = N(rng);
    proj.whitener = M * M.transpose() + 0.5 * Matrix::Identity(6, 6);
    Matrix Xr(3, B);
    for (auto& x : Xr.reshaped()) x = N(rng);

    std::vector<oracle::Real> mu_x;
    oracle::Mat cov_x;
    oracle_model(par, 6, dt, 1e-6, mu_x, cov_x);
    const oracle::Mat A = oracle::matmul(to_rows(proj.whitener), to_rows(proj.W));
    const oracle::Mat At = oracle::transpose(A);
    oracle::Mat centered(6, std::vector<oracle::Real>(1));
    for (int k = 0; k < 6; ++k) centered[k][0] = mu_x[k] - proj.mean(k);
    const oracle::Mat mu_r = oracle::matmul(At, centered);
    std::vector<oracle::Real> mean_r(B);
    for (int k = 0; k < B; ++k) mean_r[k] = mu_r[k][0];
    const oracle::Mat cov_r = oracle::matmul(oracle::matmul(At, cov_x), A);
    const double ref = oracle::mvn_nll(to_rows(Xr), mean_r, cov_r);

    const NllValue got = reduced_nll(par, Xr, proj, dt, 1e-6);
    ASSERT_TRUE(got.finite) << "rep " << rep;
    EXPECT_LE(rel_err(got.value, ref), 1e-10) << "rep " << rep;
  }
}

TEST(ReducedNll, RawSpaceIgnoresMeanAndWhitener) {
  std::mt19937_64 rng(8);
  SirProjection proj;
  proj.W = random_orthonormal(6, 6, rng);
  proj.mean = Vector::Constant(6, 3.0);
  proj.whitener = 7.0 * Matrix::Identity(6, 6);
  Matrix Xr = Matrix::Random(5, 6) * 0.01;
  std::vector<oracle::Real> mu_x;
  oracle::Mat cov_x;
  oracle_model(kTrue, 6, 1.0, 1e-6, mu_x, cov_x);
  const oracle::Mat W = to_rows(proj.W);
  const oracle::Mat Wt = oracle::transpose(W);
  oracle::Mat m(6, std::vector<oracle::Real>(1));
  for (int k = 0; k < 6; ++k) m[k][0] = mu_x[k];
  const oracle::Mat mu_r = oracle::matmul(Wt, m);
  std::vector<oracle::Real> mean_r(6);
  for (int k = 0; k < 6; ++k) mean_r[k] = mu_r[k][0];
  const double ref = oracle::mvn_nll(to_rows(Xr), mean_r, oracle::matmul(oracle::matmul(Wt, cov_x), W));
  EXPECT_LE(rel_err(reduced_nll(kTrue, Xr, proj, 1.0, 1e-6, ProjectionSpace::Raw).value, ref), 1e-10);
}

TEST(ReducedNll, NotPositiveDefiniteGivesInfinity) {
  // 2 kappa dt < rho^2 sigma^2 makes the (Q, v) block indefinite.
  const HestonParams par{0.0, 5.0, 0.05, 0.3, 0.69};
  const Matrix row = Matrix::Zero(1, 6);
  const NllValue r = reduced_nll(par, row, SirProjection::identity(6), 1.0 / 250.0, 1e-6);
  EXPECT_FALSE(r.finite);
  EXPECT_TRUE(std::isinf(r.value));
}

TEST(ReducedNll, DimensionMismatchIsRejected) {
  EXPECT_THROW(reduced_nll(kTrue, Matrix::Zero(2, 5), SirProjection::identity(6), 1.0, 1e-6), InvalidInput);
}

// Central-difference gradients along a segment inside the box have no jumps:
// no sign flip between neighbouring samples beyond the tolerance, and no
// neighbouring pair differs by more than a small fraction of the gradient.
TEST(Smoothness, FiniteDifferenceGradientsAreContinuousAlongASegment) {
  SimConfig c;
  c.n_paths = 5;
  c.seed = 9;
  const PathSet paths = simulate_paths(kTrue, c);
  std::mt19937_64 rng(10);
  Matrix X(40, 6);
  std::normal_distribution<double> N(0.0, 1.0);
  for (auto& x : X.reshaped()) x = N(rng);
  SirProjection proj;
  proj.W = random_orthonormal(6, 6, rng);
  proj.mean = Vector::Zero(6);
  proj.whitener = Matrix::Identity(6, 6);

  ParamVector a, b;
  a << -0.02, 6.0, 0.02, 0.1, -0.4;
  b << 0.03, 6.5, 0.04, 0.25, 0.2;
  const Vector lo = Vector::Constant(5, -1e9), hi = Vector::Constant(5, 1e9);
  const Objective direct = [&](const Vector& x) { return direct_nll(HestonParams::from_vector(x), paths).value; };
  const Objective reduced = [&](const Vector& x) {
    return reduced_nll(HestonParams::from_vector(x), X, proj, 1.0, 1e-6).value;
  };
  for (const Objective* f : {&direct, &reduced}) {
    std::vector<Vector> g;
    for (int k = 0; k <= 100; ++k) {
      g.push_back(fd_gradient(*f, a + (b - a) * (1e-4 * k), lo, hi, 1e-6));
      ASSERT_TRUE(g.back().allFinite());
    }
    for (int k = 1; k <= 100; ++k) {
      for (int j = 0; j < 5; ++j) {
        const double scale = std::max(1.0, std::abs(g[k](j)));
        if ((g[k](j) > 0.0) != (g[k - 1](j) > 0.0)) EXPECT_LE(std::abs(g[k](j) - g[k - 1](j)), 1e-3 * scale);
        EXPECT_LE(std::abs(g[k](j) - g[k - 1](j)), 1e-2 * scale) << "k " << k << " j " << j;
      }
    }
  }
}
