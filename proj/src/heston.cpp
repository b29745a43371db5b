#include "hestonsi/heston.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "hestonsi/csv.hpp"
#include "hestonsi/parallel.hpp"
#include "hestonsi/rng.hpp"

namespace hestonsi {

ParamVector HestonParams::to_vector() const {
  ParamVector x;
  x << mu, kappa, theta, sigma, rho;
  return x;
}

HestonParams HestonParams::from_vector(const ParamVector& x) { return {x(0), x(1), x(2), x(3), x(4)}; }

void validate(const SimConfig& c) {
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw InvalidInput("sim.dt must be positive and finite");
  if (!(c.s0 > 0.0) || !std::isfinite(c.s0)) throw InvalidInput("sim.s0 must be positive and finite");
  if (!(c.v0 >= 0.0) || !std::isfinite(c.v0)) throw InvalidInput("sim.v0 must be non-negative and finite");
  if (c.n_steps < 1) throw InvalidInput("sim.n_steps must be at least 1");
  if (c.n_paths < 1) throw InvalidInput("sim.n_paths must be at least 1");
}

namespace {

void validate_params(const HestonParams& p) {
  const bool finite = std::isfinite(p.mu) && std::isfinite(p.kappa) && std::isfinite(p.theta) &&
                      std::isfinite(p.sigma) && std::isfinite(p.rho);
  if (!finite) throw InvalidInput("Heston parameters must be finite");
  if (!(p.rho > -1.0 && p.rho < 1.0)) throw InvalidInput("rho must lie in (-1, 1)");
  if (p.kappa < 0.0 || p.theta < 0.0 || p.sigma < 0.0)
    throw InvalidInput("kappa, theta and sigma must be non-negative");
}

}  // namespace

Noise draw_noise(const SimConfig& config, unsigned threads) {
  validate(config);
  Noise noise{RowMatrix(config.n_paths, config.n_steps), RowMatrix(config.n_paths, config.n_steps)};
  parallel_for(static_cast<std::size_t>(config.n_paths), threads, [&](std::size_t i) {
    PathStream stream(config.seed, i);
    const auto row = static_cast<Eigen::Index>(i);
    for (int t = 0; t < config.n_steps; ++t) {
      const auto [z1, z2] = stream.normal_pair();
      noise.z1(row, t) = z1;
      noise.z2(row, t) = z2;
    }
  });
  return noise;
}

PathSet simulate_with_noise(const HestonParams& params, double s0, double v0, double dt, Noise noise,
                            unsigned threads) {
  validate_params(params);
  if (noise.z1.rows() != noise.z2.rows() || noise.z1.cols() != noise.z2.cols())
    throw InvalidInput("noise matrices must have equal shape");
  SimConfig shape{s0, v0, static_cast<int>(noise.z1.cols()), dt, static_cast<int>(noise.z1.rows()), 0};
  validate(shape);

  const int n = shape.n_paths;
  const int steps = shape.n_steps;
  PathSet out;
  out.S.resize(n, steps + 1);
  out.Q.resize(n, steps);
  out.V.resize(n, steps + 1);
  out.dt = dt;

  const double corr = params.rho;
  const double orth = std::sqrt(1.0 - params.rho * params.rho);
  const double drift = 1.0 + params.mu * dt;

  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t idx) {
    const auto i = static_cast<Eigen::Index>(idx);
    double s = s0;
    double v = v0;
    out.S(i, 0) = s;
    out.V(i, 0) = v;
    for (int t = 0; t < steps; ++t) {
      const double z1 = noise.z1(i, t);
      const double z2 = noise.z2(i, t);
      const double root = std::sqrt(v * dt);
      const double s_next = s * (drift + root * (corr * z1 + orth * z2));
      const double v_next = std::max(0.0, v + params.kappa * (params.theta - v) * dt + params.sigma * root * z1);
      out.S(i, t + 1) = s_next;
      out.Q(i, t) = s_next / s;
      out.V(i, t + 1) = v_next;
      s = s_next;
      v = v_next;
    }
  });
  out.noise = std::move(noise);
  return out;
}

PathSet simulate_paths(const HestonParams& params, const SimConfig& config, unsigned threads) {
  validate(config);
  validate_params(params);
  PathSet out = simulate_with_noise(params, config.s0, config.v0, config.dt, draw_noise(config, threads), threads);
  out.seed = config.seed;
  return out;
}

VarianceMoments variance_moments(const HestonParams& params, double v0, double t) {
  if (!(t >= 0.0)) throw InvalidInput("variance_moments requires t >= 0");
  if (!(params.kappa > 0.0)) throw InvalidInput("variance_moments requires kappa > 0");
  return {params.theta + (v0 - params.theta) * std::exp(-params.kappa * t),
          params.sigma * params.sigma * params.theta / (2.0 * params.kappa)};
}

void write_paths_csv(std::ostream& out, const PathSet& paths) {
  out << "path,t,S,V,Q\n";
  for (int i = 0; i < paths.n_paths(); ++i) {
    for (int t = 0; t <= paths.n_steps(); ++t) {
      out << i << ',' << t << ',' << format_double(paths.S(i, t)) << ',' << format_double(paths.V(i, t)) << ',';
      if (t < paths.n_steps()) out << format_double(paths.Q(i, t));
      out << '\n';
    }
  }
}

PathSet read_paths_csv(std::istream& in, double dt) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("paths CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "path,t,S,V,Q") throw InvalidInput("paths CSV header must be 'path,t,S,V,Q'");

  struct Point {
    double s, v, q;
    bool has_q;
  };
  std::map<int, std::map<int, Point>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 5) throw InvalidInput("paths CSV line " + std::to_string(line_no) + ": expected 5 fields");
    const int path = static_cast<int>(parse_double(fields[0]));
    const int t = static_cast<int>(parse_double(fields[1]));
    const bool has_q = !fields[4].empty();
    rows[path][t] = {parse_double(fields[2]), parse_double(fields[3]), has_q ? parse_double(fields[4]) : 0.0, has_q};
  }
  if (rows.empty()) throw InvalidInput("paths CSV has no data rows");

  const int n = static_cast<int>(rows.size());
  const int points = static_cast<int>(rows.begin()->second.size());
  if (points < 2) throw InvalidInput("paths CSV needs at least two time points per path");
  PathSet out;
  out.S.resize(n, points);
  out.V.resize(n, points);
  out.Q.resize(n, points - 1);
  out.dt = dt;
  int i = 0;
  for (const auto& [path, series] : rows) {
    if (path != i || static_cast<int>(series.size()) != points)
      throw InvalidInput("paths CSV must contain paths 0..n-1 with equal lengths");
    int t = 0;
    for (const auto& [step, p] : series) {
      if (step != t) throw InvalidInput("paths CSV time index gap in path " + std::to_string(path));
      out.S(i, t) = p.s;
      out.V(i, t) = p.v;
      if (t < points - 1) out.Q(i, t) = p.has_q ? p.q : 0.0;
      ++t;
    }
    for (int k = 0; k < points - 1; ++k)
      if (!series.at(k).has_q) out.Q(i, k) = out.S(i, k + 1) / out.S(i, k);
    ++i;
  }
  return out;
}

}  // namespace hestonsi
