#pragma once

#include <functional>
#include <string_view>

#include "hestonsi/heston.hpp"

namespace hestonsi {

/// Componentwise box. Entries may be infinite.
struct ParamBounds {
  Vector lower;
  Vector upper;

  Eigen::Index size() const { return lower.size(); }
  void validate() const;

  /// mu in [-0.05, 0.05], kappa in [5, kappa_cap], theta in [0.01, 0.05],
  /// sigma in [1e-5, 0.3], rho in (-0.9, 0.7) with the open ends pulled in by
  /// 1e-8.
  static ParamBounds heston(double kappa_cap = 1e3);
};

enum class Termination { GradientTolerance, StepTolerance, MaxIterations, NonFiniteObjective };

std::string_view to_string(Termination t);

struct OptimSettings {
  int max_iters = 500;
  double grad_tol = 1e-6;    ///< projected-gradient infinity norm
  double step_tol = 1e-10;   ///< relative step infinity norm
  int memory = 10;
  double fd_step_rel = 1e-6;
  double kappa_cap = 1e3;
  double interior_eps = 1e-8;  ///< iterates stay this fraction of the box width inside
  /// Called with the starting point and every accepted iterate.
  std::function<void(const Vector&, double)> on_iterate;
};

struct OptimResult {
  Vector x;
  double nll = 0.0;
  int n_iterations = 0;
  int n_evaluations = 0;
  bool converged = false;
  Termination termination_reason = Termination::MaxIterations;

  HestonParams params() const { return HestonParams::from_vector(x.head<5>()); }
};

using Objective = std::function<double(const Vector&)>;

/// Central differences with step h_i = rel * max(|x_i|, 1); one-sided where the
/// central stencil would leave [lower, upper].
Vector fd_gradient(const Objective& f, const Vector& x, const Vector& lower, const Vector& upper, double rel_step,
                   int* evaluations = nullptr);

/// The box shrunk by interior_eps of its width on each finite side.
ParamBounds interior_box(const ParamBounds& bounds, double interior_eps);

/// Limited-memory BFGS with box constraints: generalized Cauchy point along the
/// projected steepest-descent path, subspace minimization over the free
/// variables, then a monotone backtracking line search. Gradients come from
/// fd_gradient.
OptimResult minimize(const Objective& objective, Vector x0, const ParamBounds& bounds,
                     const OptimSettings& settings = {});

}  // namespace hestonsi
