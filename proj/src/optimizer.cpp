#include "hestonsi/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

namespace hestonsi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct CurvaturePair {
  Vector s;
  Vector y;
};

/// Dense BFGS matrix rebuilt from the stored pairs, starting at theta * I with
/// theta = y'y / s'y of the newest pair. Equivalent to the compact limited-memory
/// form; the problems here have a handful of variables.
Matrix bfgs_matrix(const std::deque<CurvaturePair>& pairs, Eigen::Index n) {
  double theta = 1.0;
  if (!pairs.empty()) theta = pairs.back().y.squaredNorm() / pairs.back().s.dot(pairs.back().y);
  Matrix B = theta * Matrix::Identity(n, n);
  for (const auto& [s, y] : pairs) {
    const Vector Bs = B * s;
    B += y * y.transpose() / y.dot(s) - Bs * Bs.transpose() / s.dot(Bs);
  }
  return 0.5 * (B + B.transpose());
}

/// Minimizer of the quadratic model along the projected path x(t) = P(x - t g).
Vector cauchy_point(const Vector& x, const Vector& g, const Matrix& B, const Vector& lo, const Vector& hi) {
  const Eigen::Index n = x.size();
  Vector breakpoint(n);
  Vector d = -g;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (g(i) < 0.0)
      breakpoint(i) = (x(i) - hi(i)) / g(i);
    else if (g(i) > 0.0)
      breakpoint(i) = (x(i) - lo(i)) / g(i);
    else
      breakpoint(i) = kInf;
    if (breakpoint(i) <= 0.0) d(i) = 0.0;
  }

  std::vector<double> times;
  for (Eigen::Index i = 0; i < n; ++i)
    if (breakpoint(i) > 0.0 && std::isfinite(breakpoint(i))) times.push_back(breakpoint(i));
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  Vector z = Vector::Zero(n);
  double t_prev = 0.0;
  std::size_t next = 0;
  while (d.squaredNorm() > 0.0) {
    const double slope = g.dot(d) + d.dot(B * z);
    if (slope >= 0.0) break;
    const double curvature = d.dot(B * d);
    const double t_next = next < times.size() ? times[next] : kInf;
    const double span = t_next - t_prev;
    const double step = curvature > 0.0 ? -slope / curvature : kInf;
    if (step < span) {
      z += step * d;
      break;
    }
    if (!std::isfinite(t_next)) break;
    z += span * d;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d(i) != 0.0 && breakpoint(i) <= t_next) {
        z(i) = (d(i) > 0.0 ? hi(i) : lo(i)) - x(i);
        d(i) = 0.0;
      }
    }
    t_prev = t_next;
    ++next;
  }
  return (x + z).cwiseMax(lo).cwiseMin(hi);
}

/// Newton step of the model over the variables that are free at the Cauchy
/// point, truncated to stay inside the box.
Vector subspace_step(const Vector& x, const Vector& xc, const Vector& g, const Matrix& B, const Vector& lo,
                     const Vector& hi) {
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < n; ++i)
    if (xc(i) > lo(i) && xc(i) < hi(i)) free.push_back(i);
  if (free.empty()) return xc;

  const Vector r = g + B * (xc - x);
  const auto nf = static_cast<Eigen::Index>(free.size());
  Matrix Bff(nf, nf);
  Vector rf(nf);
  for (Eigen::Index a = 0; a < nf; ++a) {
    rf(a) = r(free[a]);
    for (Eigen::Index b = 0; b < nf; ++b) Bff(a, b) = B(free[a], free[b]);
  }
  Eigen::LDLT<Matrix> ldlt(Bff);
  if (ldlt.info() != Eigen::Success) return xc;
  const Vector df = -ldlt.solve(rf);
  if (!df.allFinite()) return xc;

  double alpha = 1.0;
  for (Eigen::Index a = 0; a < nf; ++a) {
    const Eigen::Index i = free[a];
    if (df(a) > 0.0) alpha = std::min(alpha, (hi(i) - xc(i)) / df(a));
    if (df(a) < 0.0) alpha = std::min(alpha, (lo(i) - xc(i)) / df(a));
  }
  Vector out = xc;
  for (Eigen::Index a = 0; a < nf; ++a) out(free[a]) += alpha * df(a);
  return out.cwiseMax(lo).cwiseMin(hi);
}

double projected_gradient_norm(const Vector& x, const Vector& g, const Vector& lo, const Vector& hi) {
  return ((x - g).cwiseMax(lo).cwiseMin(hi) - x).lpNorm<Eigen::Infinity>();
}

}  // namespace

void ParamBounds::validate() const {
  if (lower.size() != upper.size() || lower.size() == 0) throw InvalidInput("bounds must be non-empty and equal length");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (std::isnan(lower(i)) || std::isnan(upper(i)) || !(lower(i) < upper(i)))
      throw InvalidInput("bounds require lower < upper in every coordinate");
  }
}

ParamBounds ParamBounds::heston(double kappa_cap) {
  ParamBounds b;
  b.lower.resize(5);
  b.upper.resize(5);
  b.lower << -0.05, 5.0, 0.01, 0.00001, -0.9 + 1e-8;
  b.upper << 0.05, kappa_cap, 0.05, 0.3, 0.7 - 1e-8;
  return b;
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::GradientTolerance: return "gradient-tolerance";
    case Termination::StepTolerance: return "step-tolerance";
    case Termination::MaxIterations: return "max-iterations";
    case Termination::NonFiniteObjective: return "non-finite-objective";
  }
  return "unknown";
}

Vector fd_gradient(const Objective& f, const Vector& x, const Vector& lower, const Vector& upper, double rel_step,
                   int* evaluations) {
  const Eigen::Index n = x.size();
  Vector g(n);
  Vector probe = x;
  int evals = 0;
  double f0 = std::numeric_limits<double>::quiet_NaN();
  auto value_at_x = [&] {
    if (std::isnan(f0)) {
      f0 = f(x);
      ++evals;
    }
    return f0;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = rel_step * std::max(std::abs(x(i)), 1.0);
    const bool up_ok = x(i) + h <= upper(i);
    const bool down_ok = x(i) - h >= lower(i);
    double f_up = kInf, f_down = kInf;
    if (up_ok) {
      probe(i) = x(i) + h;
      f_up = f(probe);
      ++evals;
    }
    if (down_ok) {
      probe(i) = x(i) - h;
      f_down = f(probe);
      ++evals;
    }
    probe(i) = x(i);
    if (std::isfinite(f_up) && std::isfinite(f_down))
      g(i) = (f_up - f_down) / (2.0 * h);
    else if (std::isfinite(f_up))
      g(i) = (f_up - value_at_x()) / h;
    else if (std::isfinite(f_down))
      g(i) = (value_at_x() - f_down) / h;
    else
      g(i) = 0.0;
    if (!std::isfinite(g(i))) g(i) = 0.0;
  }
  if (evaluations) *evaluations += evals;
  return g;
}

ParamBounds interior_box(const ParamBounds& bounds, double interior_eps) {
  ParamBounds box = bounds;
  for (Eigen::Index i = 0; i < bounds.size(); ++i) {
    const double width = bounds.upper(i) - bounds.lower(i);
    if (!std::isfinite(width)) continue;
    box.lower(i) = bounds.lower(i) + interior_eps * width;
    box.upper(i) = bounds.upper(i) - interior_eps * width;
  }
  return box;
}

OptimResult minimize(const Objective& objective, Vector x0, const ParamBounds& bounds, const OptimSettings& settings) {
  bounds.validate();
  if (x0.size() != bounds.size()) throw InvalidInput("x0 and bounds differ in length");
  if (settings.memory < 1 || settings.max_iters < 0) throw InvalidInput("optimizer memory must be >= 1");

  const ParamBounds box = interior_box(bounds, settings.interior_eps);
  const Vector& lo = box.lower;
  const Vector& hi = box.upper;
  const Eigen::Index n = x0.size();

  OptimResult result;
  auto eval = [&](const Vector& x) {
    ++result.n_evaluations;
    const double v = objective(x);
    return std::isfinite(v) ? v : kInf;
  };
  auto counted_objective = [&](const Vector& x) {
    const double v = objective(x);
    return std::isfinite(v) ? v : kInf;
  };
  auto gradient = [&](const Vector& x) {
    return fd_gradient(counted_objective, x, lo, hi, settings.fd_step_rel, &result.n_evaluations);
  };

  Vector x = x0.cwiseMax(lo).cwiseMin(hi);
  double f = eval(x);
  result.x = x;
  result.nll = f;
  if (!std::isfinite(f)) {
    result.termination_reason = Termination::NonFiniteObjective;
    return result;
  }
  if (settings.on_iterate) settings.on_iterate(x, f);
  Vector g = gradient(x);

  std::deque<CurvaturePair> pairs;
  while (true) {
    if (projected_gradient_norm(x, g, lo, hi) <= settings.grad_tol) {
      result.termination_reason = Termination::GradientTolerance;
      result.converged = true;
      break;
    }
    if (result.n_iterations >= settings.max_iters) {
      result.termination_reason = Termination::MaxIterations;
      break;
    }

    const Matrix B = bfgs_matrix(pairs, n);
    const Vector xc = cauchy_point(x, g, B, lo, hi);
    Vector direction = subspace_step(x, xc, g, B, lo, hi) - x;
    double slope = g.dot(direction);
    if (!(slope < 0.0)) {
      direction = xc - x;
      slope = g.dot(direction);
    }
    if (!(slope < 0.0)) {
      if (!pairs.empty()) {
        pairs.clear();
        continue;
      }
      result.termination_reason = Termination::StepTolerance;
      result.converged = true;
      break;
    }

    // Monotone backtracking; every trial point lies in the box because the box
    // is convex and x + direction is feasible.
    const double scale = std::max(x.lpNorm<Eigen::Infinity>(), 1.0);
    double alpha = 1.0;
    bool accepted = false;
    bool saw_finite = false;
    Vector x_new;
    double f_new = kInf;
    while (true) {
      x_new = (x + alpha * direction).cwiseMax(lo).cwiseMin(hi);
      f_new = eval(x_new);
      if (std::isfinite(f_new)) saw_finite = true;
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * alpha * slope && f_new < f) {
        accepted = true;
        break;
      }
      if (alpha * direction.lpNorm<Eigen::Infinity>() / scale <= settings.step_tol) break;
      alpha *= 0.5;
    }

    if (!accepted) {
      if (!pairs.empty()) {
        pairs.clear();
        continue;
      }
      result.termination_reason = saw_finite ? Termination::StepTolerance : Termination::NonFiniteObjective;
      result.converged = saw_finite;
      break;
    }

    const Vector s = x_new - x;
    const Vector g_new = gradient(x_new);
    const Vector y = g_new - g;
    ++result.n_iterations;
    x = x_new;
    f = f_new;
    g = g_new;
    if (settings.on_iterate) settings.on_iterate(x, f);
    if (s.dot(y) > std::numeric_limits<double>::epsilon() * y.squaredNorm()) {
      pairs.push_back({s, y});
      if (static_cast<int>(pairs.size()) > settings.memory) pairs.pop_front();
    }
    if (s.lpNorm<Eigen::Infinity>() / std::max(x.lpNorm<Eigen::Infinity>(), 1.0) <= settings.step_tol) {
      result.termination_reason = Termination::StepTolerance;
      result.converged = true;
      break;
    }
  }

  result.x = x;
  result.nll = f;
  return result;
}

}  // namespace hestonsi
