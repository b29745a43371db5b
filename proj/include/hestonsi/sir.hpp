#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hestonsi/types.hpp"

namespace hestonsi {

/// Predictor matrix (one observation per row) and its scalar target.
struct FeatureMatrix {
  Matrix X;
  Vector Y;
  std::vector<std::string> column_labels;

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }

  /// Throws InvalidInput on empty, mismatched or non-finite data.
  void validate() const;
};

enum class SlicingMode { EqualWidth, EqualCount };

struct SirConfig {
  int n_slices = 10;
  int n_directions = 6;
  /// Added to the sample covariance diagonal before the inverse square root so
  /// that constant columns whiten to zero instead of failing.
  double ridge = 1e-8;
  SlicingMode slicing = SlicingMode::EqualWidth;
};

/// Where the fitted directions are applied. Whitened projects the centered,
/// whitened data (the space the directions were estimated in); Raw multiplies
/// the raw predictors directly.
enum class ProjectionSpace { Whitened, Raw };

struct Standardized {
  Matrix Z;          ///< n x d, rows whitener * (x_i - mean)
  Vector mean;       ///< length d
  Matrix whitener;   ///< (cov + ridge I)^{-1/2}, symmetric d x d
};

struct Slicing {
  std::vector<int> assignment;  ///< slice index per observation
  std::vector<int> counts;      ///< n_m, length M
  std::vector<double> lower_edge;
  std::vector<double> upper_edge;
  bool degenerate = false;      ///< all targets identical; everything in slice 0

  int occupied() const;
};

struct SirProjection {
  Matrix W;                 ///< d x B, orthonormal columns
  Vector eigenvalues;       ///< length d, descending
  std::vector<int> slice_counts;
  std::vector<double> slice_lower;
  std::vector<double> slice_upper;
  Vector mean;
  Matrix whitener;
  bool degenerate_slicing = false;

  Eigen::Index dimension() const { return W.rows(); }
  Eigen::Index directions() const { return W.cols(); }

  /// W = I_d, zero mean and identity whitener: reduce() becomes the identity.
  static SirProjection identity(Eigen::Index d);
};

/// Sample mean and (n-1)-normalized covariance; throws SingularStandardization
/// when cov + ridge I is not positive definite. Labels name the columns in the
/// error and may be empty.
Standardized standardize(const Matrix& X, double ridge, std::span<const std::string> labels = {});

/// Equal-width bins are [e0, e1], (e1, e2], ..., (e_{M-1}, e_M] over the range of
/// Y. Equal-count bins split the sorted targets into M runs of (near) equal
/// length, keeping ties together.
Slicing slice(const Vector& Y, int n_slices, SlicingMode mode);

/// n^{-1} sum_m n_m zbar_m zbar_m^T over the occupied slices.
Matrix inverse_regression_cov(const Matrix& Z, std::span<const int> assignment, int n_slices);

/// Flips each column so its largest-magnitude entry (first on ties) is positive.
void canonicalize_signs(Matrix& vectors);

SirProjection fit_sir(const FeatureMatrix& features, const SirConfig& config);

Matrix reduce(const Matrix& X, const SirProjection& projection, ProjectionSpace space = ProjectionSpace::Whitened);

/// W.csv, eigenvalues.csv, slices.csv, whitener.csv and mean.csv under `dir`.
void write_projection_bundle(const std::filesystem::path& dir, const SirProjection& projection);
SirProjection read_projection_bundle(const std::filesystem::path& dir);

}  // namespace hestonsi
