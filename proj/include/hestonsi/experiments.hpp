#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hestonsi/estimators.hpp"

namespace hestonsi {

enum class FeatureMode { PerPath, PerTimestep };
enum class TargetMode { MeanQ, TerminalQ };
enum class VarianceFeature { MeanV, TerminalV };
/// Which parameter vector fills the five constant columns of the feature rows.
enum class ParamColumns { InitialGuess, TrueParams };
enum class Method { DI, SI };

std::string_view to_string(Method m);

struct ExperimentConfig {
  HestonParams true_params{0.03, 5.0, 0.05, 0.2, -0.5};
  SimConfig sim{10.0, 0.01, 250, 1.0 / 250.0, 1, 0};
  SirConfig sir{10, 6, 1e-8, SlicingMode::EqualWidth};
  ParamBounds bounds = ParamBounds::heston(1e3);
  ParamVector x0 = default_initial_guess();
  std::vector<std::uint64_t> seeds{7, 42, 101, 158, 233, 289, 347, 412, 503, 577, 641, 718, 806, 877, 953};
  /// Per-timestep rows for the single-path study; PerPath there gives the
  /// one-row variant.
  FeatureMode single_feature_mode = FeatureMode::PerTimestep;
  FeatureMode multi_feature_mode = FeatureMode::PerPath;
  TargetMode target = TargetMode::MeanQ;
  VarianceFeature variance_feature = VarianceFeature::MeanV;
  ParamColumns param_columns = ParamColumns::InitialGuess;
  double delta = 1e-6;
  ProjectionSpace projection = ProjectionSpace::Whitened;
  OptimSettings optim;
  std::vector<int> n_list{50, 100, 250};
  unsigned threads = 1;
  int acf_max_lag = 20;

  void validate() const;
};

struct RunRecord {
  std::string study;
  std::uint64_t seed = 0;
  int n_paths = 0;
  Method method = Method::DI;
  HestonParams fitted;
  double nll = 0.0;
  double mse = 0.0;
  double time_s = 0.0;
  bool converged = false;
  std::size_t clamped = 0;
  Termination termination = Termination::MaxIterations;
  int iterations = 0;
  int evaluations = 0;
  std::vector<std::string> warnings;
};

struct MethodSummary {
  double mean_mse = 0.0;
  double mean_time = 0.0;
  double median_mse = 0.0;
  double max_mse = 0.0;
  int outliers = 0;  ///< MSE above Q3 + 1.5 IQR within the method's runs
  int runs = 0;
};

/// Aggregates recomputed from records; `first` limits to the first k records
/// of the method in report order (0 = all).
MethodSummary summarize(const std::vector<RunRecord>& records, Method method, std::size_t first = 0);

struct Figure4 {
  Vector v_true;
  Vector v_di;
  Vector v_si;
  Vector acf_true;
  Vector acf_di;
  Vector acf_si;
};

struct ExperimentReport {
  std::string study;
  std::vector<RunRecord> records;
  MethodSummary di;
  MethodSummary si;
  Figure4 figure4;
};

/// Rows of (parameter columns, variance feature) with target Y. PerPath: one row
/// per path, variance feature and target per the modes. PerTimestep: one row per
/// step of path 0 with v_t and Y_t = Q_{t+1}.
FeatureMatrix build_features(const PathSet& paths, const ParamVector& param_columns, FeatureMode mode,
                             TargetMode target, VarianceFeature variance);

/// Re-simulates with the fitted parameters on the stored noise and averages
/// (S_est - S_true)^2 over paths and t = 1..T.
double mse_paths(const PathSet& true_paths, const HestonParams& fitted);

struct AcfResult {
  Vector values;  ///< lags 0..max_lag
  bool degenerate = false;
};

AcfResult acf(const Vector& series, int max_lag);

ExperimentReport run_single_path_study(const ExperimentConfig& config);
ExperimentReport run_multi_path_study(const ExperimentConfig& config, const std::vector<int>& n_list);

/// `study,seed,n_paths,method,mu,kappa,theta,sigma,rho,nll,mse,time_s,converged,clamped`
void write_report_csv(std::ostream& out, const ExperimentReport& report);
/// n_simulations,mse_DI,mse_SI for the first 10 and all seeds.
void write_table1_csv(std::ostream& out, const ExperimentReport& report);
/// n,method,time_s,mse
void write_table2_csv(std::ostream& out, const ExperimentReport& report);
void write_mse_box_csv(std::ostream& out, const ExperimentReport& report);
void write_figure4_vol_csv(std::ostream& out, const Figure4& figure);
void write_figure4_acf_csv(std::ostream& out, const Figure4& figure);

}  // namespace hestonsi
