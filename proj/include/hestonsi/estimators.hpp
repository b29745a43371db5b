#pragma once

#include <string>
#include <vector>

#include "hestonsi/likelihood.hpp"
#include "hestonsi/optimizer.hpp"
#include "hestonsi/sir.hpp"

namespace hestonsi {

/// (0.02, 5.2, 0.04, 0.1, -0.6)
ParamVector default_initial_guess();

struct DirectFit {
  OptimResult optim;
  std::size_t clamped_terms = 0;  ///< at the returned parameters
  std::vector<std::string> warnings;
};

struct SlicedFit {
  OptimResult optim;
  SirProjection projection;
  std::vector<std::string> warnings;
};

/// Joint maximum likelihood over every transition of every path.
DirectFit fit_direct(const PathSet& paths, const ParamVector& x0, const ParamBounds& bounds,
                     const OptimSettings& settings = {}, unsigned threads = 1);

/// SIR on the features, then maximum likelihood of the reduced rows.
SlicedFit fit_sliced(const FeatureMatrix& features, const SirConfig& sir, const ParamVector& x0,
                     const ParamBounds& bounds, double dt, double delta, const OptimSettings& settings = {},
                     ProjectionSpace space = ProjectionSpace::Whitened);

/// Maximum likelihood of already-reduced rows under a given projection.
OptimResult fit_reduced(const Matrix& X_reduced, const SirProjection& projection, const ParamVector& x0,
                        const ParamBounds& bounds, double dt, double delta, const OptimSettings& settings = {},
                        ProjectionSpace space = ProjectionSpace::Whitened);

}  // namespace hestonsi
