#pragma once

#include <cstdint>
#include <iosfwd>

#include "hestonsi/types.hpp"

namespace hestonsi {

using ParamVector = Eigen::Matrix<double, 5, 1>;

/// Heston parameters under the real-world measure, ordered (mu, kappa, theta,
/// sigma, rho) everywhere a flat vector is used.
struct HestonParams {
  double mu = 0.0;
  double kappa = 1.0;
  double theta = 0.0;
  double sigma = 0.0;
  double rho = 0.0;

  /// 2 kappa theta >= sigma^2.
  bool feller_ok() const { return 2.0 * kappa * theta >= sigma * sigma; }

  ParamVector to_vector() const;
  static HestonParams from_vector(const ParamVector& x);

  bool operator==(const HestonParams&) const = default;
};

struct SimConfig {
  double s0 = 10.0;
  double v0 = 0.01;
  int n_steps = 250;
  double dt = 1.0 / 250.0;
  int n_paths = 1;
  std::uint64_t seed = 0;
};

/// Standard-normal drivers, one row per path and one column per step. z1
/// drives the variance, z2 the idiosyncratic part of the price shock.
struct Noise {
  RowMatrix z1;
  RowMatrix z2;
};

struct PathSet {
  RowMatrix S;  ///< n_paths x (n_steps + 1)
  RowMatrix Q;  ///< n_paths x n_steps, Q(i, t) = S(i, t + 1) / S(i, t)
  RowMatrix V;  ///< n_paths x (n_steps + 1), floored at zero
  double dt = 0.0;
  std::uint64_t seed = 0;
  Noise noise;  ///< empty for paths read back from CSV

  int n_paths() const { return static_cast<int>(S.rows()); }
  int n_steps() const { return static_cast<int>(Q.cols()); }
  bool has_noise() const { return noise.z1.rows() == S.rows() && noise.z1.cols() == Q.cols() && S.rows() > 0; }
};

struct VarianceMoments {
  double mean = 0.0;
  double stationary_variance = 0.0;
};

void validate(const SimConfig& config);

/// Draws the (Z1, Z2) pairs for every path from per-path substreams.
Noise draw_noise(const SimConfig& config, unsigned threads = 1);

/// Euler-Maruyama with full truncation, driven by caller-supplied noise. The
/// path count and step count come from the noise shape.
PathSet simulate_with_noise(const HestonParams& params, double s0, double v0, double dt, Noise noise,
                            unsigned threads = 1);

PathSet simulate_paths(const HestonParams& params, const SimConfig& config, unsigned threads = 1);

/// E(v_t) = theta + (v0 - theta) exp(-kappa t) and the stationary variance
/// sigma^2 theta / (2 kappa) of the square-root process.
VarianceMoments variance_moments(const HestonParams& params, double v0, double t);

/// CSV with header `path,t,S,V,Q`, one row per (path, t) for t = 0..n_steps.
/// Q is empty on the terminal row of each path.
void write_paths_csv(std::ostream& out, const PathSet& paths);
PathSet read_paths_csv(std::istream& in, double dt);

}  // namespace hestonsi
