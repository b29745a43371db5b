#include "hestonsi/sir.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "hestonsi/csv.hpp"

namespace hestonsi {

void FeatureMatrix::validate() const {
  if (X.rows() < 1 || X.cols() < 1) throw InvalidInput("feature matrix must have at least one row and column");
  if (Y.size() != X.rows()) throw InvalidInput("target length must equal the feature row count");
  if (!X.allFinite() || !Y.allFinite()) throw InvalidInput("feature matrix contains NaN or Inf");
  if (!column_labels.empty() && static_cast<Eigen::Index>(column_labels.size()) != X.cols())
    throw InvalidInput("column label count must equal the feature column count");
}

int Slicing::occupied() const {
  return static_cast<int>(std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }));
}

SirProjection SirProjection::identity(Eigen::Index d) {
  SirProjection p;
  p.W = Matrix::Identity(d, d);
  p.eigenvalues = Vector::Zero(d);
  p.mean = Vector::Zero(d);
  p.whitener = Matrix::Identity(d, d);
  return p;
}

Standardized standardize(const Matrix& X, double ridge, std::span<const std::string> labels) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  if (n < 1 || d < 1) throw InvalidInput("standardize needs a non-empty matrix");
  if (!(ridge >= 0.0)) throw InvalidInput("ridge must be non-negative");

  // Mean shifted by the first row: constant columns get their exact value back
  // and centering them yields exact zeros.
  Vector mean = X.row(0).transpose();
  mean += (X.rowwise() - X.row(0)).colwise().sum().transpose() / static_cast<double>(n);
  const Matrix centered = X.rowwise() - mean.transpose();

  Matrix cov = Matrix::Zero(d, d);
  if (n > 1) cov = centered.transpose() * centered / static_cast<double>(n - 1);
  cov.diagonal().array() += ridge;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw SingularStandardization("covariance eigendecomposition failed", {});
  const Vector& lambda = eig.eigenvalues();
  const double tol = static_cast<double>(d) * std::numeric_limits<double>::epsilon() * std::abs(lambda.maxCoeff());

  std::vector<std::string> offending;
  for (Eigen::Index k = 0; k < d; ++k) {
    if (lambda(k) > tol) continue;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (std::abs(eig.eigenvectors()(j, k)) < 1e-3) continue;
      std::string name = j < static_cast<Eigen::Index>(labels.size()) ? labels[j] : "column " + std::to_string(j);
      if (std::find(offending.begin(), offending.end(), name) == offending.end()) offending.push_back(name);
    }
  }
  if (!offending.empty()) {
    std::string list;
    for (const auto& name : offending) list += (list.empty() ? "" : ", ") + name;
    throw SingularStandardization("sample covariance is not positive definite; offending columns: " + list,
                                  std::move(offending));
  }

  Matrix whitener = eig.eigenvectors() * lambda.cwiseInverse().cwiseSqrt().asDiagonal() *
                    eig.eigenvectors().transpose();
  whitener = 0.5 * (whitener + whitener.transpose()).eval();
  Matrix Z = centered * whitener;
  return {std::move(Z), std::move(mean), std::move(whitener)};
}

Slicing slice(const Vector& Y, int n_slices, SlicingMode mode) {
  if (n_slices < 1) throw InvalidInput("slice count must be at least 1");
  const auto n = static_cast<std::size_t>(Y.size());
  if (n == 0) throw InvalidInput("cannot slice an empty target");
  if (!Y.allFinite()) throw InvalidInput("target contains NaN or Inf");

  Slicing out;
  const auto M = static_cast<std::size_t>(n_slices);
  out.assignment.assign(n, 0);
  out.counts.assign(M, 0);
  out.lower_edge.assign(M, std::numeric_limits<double>::quiet_NaN());
  out.upper_edge.assign(M, std::numeric_limits<double>::quiet_NaN());

  const double lo = Y.minCoeff();
  const double hi = Y.maxCoeff();
  if (lo == hi) {
    out.degenerate = true;
    out.counts[0] = static_cast<int>(n);
    out.lower_edge[0] = lo;
    out.upper_edge[0] = hi;
    return out;
  }

  if (mode == SlicingMode::EqualWidth) {
    std::vector<double> edges(M + 1);
    for (std::size_t k = 0; k <= M; ++k) edges[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(M);
    edges[M] = hi;
    for (std::size_t i = 0; i < n; ++i) {
      const auto it = std::lower_bound(edges.begin() + 1, edges.end(), Y(static_cast<Eigen::Index>(i)));
      const auto m = std::min<std::size_t>(static_cast<std::size_t>(it - edges.begin()) - 1, M - 1);
      out.assignment[i] = static_cast<int>(m);
      ++out.counts[m];
    }
    for (std::size_t m = 0; m < M; ++m) {
      out.lower_edge[m] = edges[m];
      out.upper_edge[m] = edges[m + 1];
    }
    return out;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return Y(static_cast<Eigen::Index>(a)) < Y(static_cast<Eigen::Index>(b)); });
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t m = r * M / n;
    if (r > 0 && Y(static_cast<Eigen::Index>(order[r])) == Y(static_cast<Eigen::Index>(order[r - 1])))
      m = static_cast<std::size_t>(out.assignment[order[r - 1]]);
    out.assignment[order[r]] = static_cast<int>(m);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto m = static_cast<std::size_t>(out.assignment[i]);
    const double y = Y(static_cast<Eigen::Index>(i));
    if (out.counts[m]++ == 0) {
      out.lower_edge[m] = y;
      out.upper_edge[m] = y;
    } else {
      out.lower_edge[m] = std::min(out.lower_edge[m], y);
      out.upper_edge[m] = std::max(out.upper_edge[m], y);
    }
  }
  return out;
}

Matrix inverse_regression_cov(const Matrix& Z, std::span<const int> assignment, int n_slices) {
  const Eigen::Index n = Z.rows();
  const Eigen::Index d = Z.cols();
  if (static_cast<Eigen::Index>(assignment.size()) != n) throw InvalidInput("one slice assignment per row required");
  if (n_slices < 1) throw InvalidInput("slice count must be at least 1");

  Matrix sums = Matrix::Zero(n_slices, d);
  std::vector<int> counts(static_cast<std::size_t>(n_slices), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int m = assignment[static_cast<std::size_t>(i)];
    if (m < 0 || m >= n_slices) throw InvalidInput("slice assignment out of range");
    sums.row(m) += Z.row(i);
    ++counts[static_cast<std::size_t>(m)];
  }

  Matrix V = Matrix::Zero(d, d);
  for (int m = 0; m < n_slices; ++m) {
    const int nm = counts[static_cast<std::size_t>(m)];
    if (nm == 0) continue;
    const Vector zbar = sums.row(m).transpose() / static_cast<double>(nm);
    V.noalias() += static_cast<double>(nm) * zbar * zbar.transpose();
  }
  V /= static_cast<double>(n);
  return V;
}

void canonicalize_signs(Matrix& vectors) {
  for (Eigen::Index k = 0; k < vectors.cols(); ++k) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < vectors.rows(); ++j)
      if (std::abs(vectors(j, k)) > std::abs(vectors(best, k))) best = j;
    if (vectors(best, k) < 0.0) vectors.col(k) *= -1.0;
  }
}

SirProjection fit_sir(const FeatureMatrix& features, const SirConfig& config) {
  features.validate();
  const Eigen::Index d = features.cols();
  if (config.n_slices < 1) throw InvalidInput("sir.n_slices must be at least 1");
  if (config.n_directions < 1 || config.n_directions > d)
    throw InvalidInput("sir.n_directions must lie in [1, d]");
  if (!(config.ridge >= 0.0)) throw InvalidInput("sir.ridge must be non-negative");

  Standardized std_data = standardize(features.X, config.ridge, features.column_labels);
  Slicing slicing = slice(features.Y, config.n_slices, config.slicing);
  const Matrix V = inverse_regression_cov(std_data.Z, slicing.assignment, config.n_slices);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(V);
  if (eig.info() != Eigen::Success) throw InvalidInput("eigendecomposition of the inverse-regression covariance failed");

  // Eigen returns ascending order.
  Matrix vectors = eig.eigenvectors().rowwise().reverse();
  canonicalize_signs(vectors);

  SirProjection out;
  out.eigenvalues = eig.eigenvalues().reverse();
  out.W = vectors.leftCols(config.n_directions);
  out.slice_counts = std::move(slicing.counts);
  out.slice_lower = std::move(slicing.lower_edge);
  out.slice_upper = std::move(slicing.upper_edge);
  out.degenerate_slicing = slicing.degenerate;
  out.mean = std::move(std_data.mean);
  out.whitener = std::move(std_data.whitener);
  return out;
}

Matrix reduce(const Matrix& X, const SirProjection& projection, ProjectionSpace space) {
  if (X.cols() != projection.W.rows())
    throw InvalidInput("reduce: feature columns (" + std::to_string(X.cols()) + ") do not match projection rows (" +
                       std::to_string(projection.W.rows()) + ")");
  if (space == ProjectionSpace::Raw) return X * projection.W;
  return ((X.rowwise() - projection.mean.transpose()) * projection.whitener) * projection.W;
}

namespace {

Matrix read_bundle_matrix(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw InvalidInput("cannot open '" + file.string() + "'");
  return read_matrix_csv(in);
}

}  // namespace

void write_projection_bundle(const std::filesystem::path& dir, const SirProjection& p) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "W.csv", [&](std::ostream& out) { write_matrix_csv(out, p.W); });
  write_file_atomic(dir / "eigenvalues.csv", [&](std::ostream& out) { write_matrix_csv(out, p.eigenvalues); });
  write_file_atomic(dir / "whitener.csv", [&](std::ostream& out) { write_matrix_csv(out, p.whitener); });
  write_file_atomic(dir / "mean.csv", [&](std::ostream& out) { write_matrix_csv(out, p.mean); });
  write_file_atomic(dir / "slices.csv", [&](std::ostream& out) {
    out << "m,n_m,lower_edge,upper_edge\n";
    for (std::size_t m = 0; m < p.slice_counts.size(); ++m)
      out << m << ',' << p.slice_counts[m] << ',' << format_double(p.slice_lower[m]) << ','
          << format_double(p.slice_upper[m]) << '\n';
  });
}

SirProjection read_projection_bundle(const std::filesystem::path& dir) {
  SirProjection p;
  p.W = read_bundle_matrix(dir / "W.csv");
  p.eigenvalues = read_bundle_matrix(dir / "eigenvalues.csv").col(0);
  p.whitener = read_bundle_matrix(dir / "whitener.csv");
  p.mean = read_bundle_matrix(dir / "mean.csv").col(0);

  std::ifstream in(dir / "slices.csv");
  if (!in) throw InvalidInput("cannot open '" + (dir / "slices.csv").string() + "'");
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 4) throw InvalidInput("slices.csv rows need 4 fields");
    p.slice_counts.push_back(static_cast<int>(parse_double(f[1])));
    p.slice_lower.push_back(parse_double(f[2]));
    p.slice_upper.push_back(parse_double(f[3]));
  }
  const Eigen::Index d = p.W.rows();
  if (p.whitener.rows() != d || p.whitener.cols() != d || p.mean.size() != d)
    throw InvalidInput("projection bundle dimensions are inconsistent");
  return p;
}

}  // namespace hestonsi
