#include "hestonsi/estimators.hpp"

#include <sstream>

namespace hestonsi {

namespace {

void check_feller(const OptimResult& r, std::vector<std::string>& warnings) {
  const HestonParams p = r.params();
  if (!p.feller_ok()) {
    std::ostringstream msg;
    msg << "fitted parameters violate the Feller condition: 2*kappa*theta = " << 2.0 * p.kappa * p.theta
        << " < sigma^2 = " << p.sigma * p.sigma;
    warnings.push_back(msg.str());
  }
}

}  // namespace

ParamVector default_initial_guess() {
  ParamVector x0;
  x0 << 0.02, 5.2, 0.04, 0.1, -0.6;
  return x0;
}

DirectFit fit_direct(const PathSet& paths, const ParamVector& x0, const ParamBounds& bounds,
                     const OptimSettings& settings, unsigned threads) {
  if (bounds.size() != 5) throw InvalidInput("Heston bounds must have five entries");
  const Objective objective = [&](const Vector& x) {
    return direct_nll(HestonParams::from_vector(x.head<5>()), paths, threads).value;
  };
  DirectFit out;
  out.optim = minimize(objective, x0, bounds, settings);
  out.clamped_terms = direct_nll(out.optim.params(), paths, threads).clamped_terms;
  check_feller(out.optim, out.warnings);
  return out;
}

OptimResult fit_reduced(const Matrix& X_reduced, const SirProjection& projection, const ParamVector& x0,
                        const ParamBounds& bounds, double dt, double delta, const OptimSettings& settings,
                        ProjectionSpace space) {
  if (bounds.size() != 5) throw InvalidInput("Heston bounds must have five entries");
  if (X_reduced.cols() != projection.W.cols()) throw InvalidInput("reduced data and projection disagree on B");
  const Objective objective = [&](const Vector& x) {
    return reduced_nll(HestonParams::from_vector(x.head<5>()), X_reduced, projection, dt, delta, space).value;
  };
  return minimize(objective, x0, bounds, settings);
}

SlicedFit fit_sliced(const FeatureMatrix& features, const SirConfig& sir, const ParamVector& x0,
                     const ParamBounds& bounds, double dt, double delta, const OptimSettings& settings,
                     ProjectionSpace space) {
  SlicedFit out;
  out.projection = fit_sir(features, sir);
  if (sir.n_slices > features.rows()) {
    int occupied = 0;
    for (int c : out.projection.slice_counts) occupied += c > 0;
    out.warnings.push_back("slice count " + std::to_string(sir.n_slices) + " exceeds row count " +
                           std::to_string(features.rows()) + "; " + std::to_string(occupied) +
                           " slices are occupied");
  }
  if (out.projection.degenerate_slicing) out.warnings.push_back("all targets identical; single-slice fallback");
  const Matrix X_reduced = reduce(features.X, out.projection, space);
  out.optim = fit_reduced(X_reduced, out.projection, x0, bounds, dt, delta, settings, space);
  check_feller(out.optim, out.warnings);
  return out;
}

}  // namespace hestonsi
