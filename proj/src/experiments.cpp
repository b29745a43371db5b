#include "hestonsi/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "hestonsi/csv.hpp"
#include "hestonsi/parallel.hpp"

namespace hestonsi {

std::string_view to_string(Method m) { return m == Method::DI ? "DI" : "SI"; }

void ExperimentConfig::validate() const {
  hestonsi::validate(sim);
  bounds.validate();
  if (bounds.size() != 5) throw InvalidInput("bounds must have five entries");
  if (seeds.empty()) throw InvalidInput("at least one seed is required");
  if (!(delta > 0.0)) throw InvalidInput("model.delta must be positive");
  if (acf_max_lag < 0) throw InvalidInput("acf.max_lag must be non-negative");
  for (int n : n_list)
    if (n < 1) throw InvalidInput("study.n_list entries must be positive");
}

FeatureMatrix build_features(const PathSet& paths, const ParamVector& param_columns, FeatureMode mode,
                             TargetMode target, VarianceFeature variance) {
  if (paths.n_paths() < 1 || paths.n_steps() < 1) throw InvalidInput("build_features needs a non-empty path set");
  FeatureMatrix f;
  f.column_labels = {"mu", "kappa", "theta", "sigma", "rho", "v"};
  const int T = paths.n_steps();

  if (mode == FeatureMode::PerTimestep) {
    f.X.resize(T, 6);
    f.Y.resize(T);
    for (int t = 0; t < T; ++t) {
      f.X.row(t).head<5>() = param_columns.transpose();
      f.X(t, 5) = paths.V(0, t);
      f.Y(t) = paths.Q(0, t);
    }
    return f;
  }

  const int n = paths.n_paths();
  f.X.resize(n, 6);
  f.Y.resize(n);
  for (int i = 0; i < n; ++i) {
    f.X.row(i).head<5>() = param_columns.transpose();
    f.X(i, 5) = variance == VarianceFeature::MeanV ? paths.V.row(i).mean() : paths.V(i, T);
    f.Y(i) = target == TargetMode::MeanQ ? paths.Q.row(i).mean() : paths.Q(i, T - 1);
  }
  return f;
}

double mse_paths(const PathSet& true_paths, const HestonParams& fitted) {
  if (!true_paths.has_noise()) throw InvalidInput("mse_paths needs a path set that retains its noise draws");
  const PathSet est =
      simulate_with_noise(fitted, true_paths.S(0, 0), true_paths.V(0, 0), true_paths.dt, true_paths.noise);
  const int n = true_paths.n_paths();
  const int T = true_paths.n_steps();
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double path_sum = 0.0;
    for (int t = 1; t <= T; ++t) {
      const double diff = est.S(i, t) - true_paths.S(i, t);
      path_sum += diff * diff;
    }
    total += path_sum;
  }
  return total / (static_cast<double>(n) * static_cast<double>(T));
}

AcfResult acf(const Vector& series, int max_lag) {
  if (max_lag < 0) throw InvalidInput("max_lag must be non-negative");
  const Eigen::Index n = series.size();
  if (n <= max_lag) throw InvalidInput("series length must exceed max_lag");
  AcfResult out;
  out.values = Vector::Zero(max_lag + 1);
  const Vector centered = series.array() - series.mean();
  const double denom = centered.squaredNorm();
  if (!(denom > 0.0)) {
    out.degenerate = true;
    return out;
  }
  for (int k = 0; k <= max_lag; ++k)
    out.values(k) = centered.head(n - k).dot(centered.tail(n - k)) / denom;
  return out;
}

MethodSummary summarize(const std::vector<RunRecord>& records, Method method, std::size_t first) {
  std::vector<double> mse;
  MethodSummary s;
  double time = 0.0;
  for (const auto& r : records) {
    if (r.method != method) continue;
    if (first && mse.size() >= first) break;
    mse.push_back(r.mse);
    time += r.time_s;
  }
  s.runs = static_cast<int>(mse.size());
  if (mse.empty()) return s;
  double sum = 0.0;
  for (double m : mse) sum += m;
  s.mean_mse = sum / static_cast<double>(mse.size());
  s.mean_time = time / static_cast<double>(mse.size());

  std::vector<double> sorted = mse;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  s.median_mse = quantile(0.5);
  s.max_mse = sorted.back();
  const double fence = quantile(0.75) + 1.5 * (quantile(0.75) - quantile(0.25));
  s.outliers = static_cast<int>(std::count_if(mse.begin(), mse.end(), [&](double m) { return m > fence; }));
  return s;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

ParamVector column_params(const ExperimentConfig& cfg) {
  return cfg.param_columns == ParamColumns::TrueParams ? cfg.true_params.to_vector() : cfg.x0;
}

RunRecord run_direct(const ExperimentConfig& cfg, const PathSet& paths, const std::string& study) {
  RunRecord r;
  r.study = study;
  r.seed = paths.seed;
  r.n_paths = paths.n_paths();
  r.method = Method::DI;
  const auto start = Clock::now();
  DirectFit fit = fit_direct(paths, cfg.x0, cfg.bounds, cfg.optim);
  r.time_s = seconds_since(start);
  r.fitted = fit.optim.params();
  r.nll = fit.optim.nll;
  r.converged = fit.optim.converged;
  r.termination = fit.optim.termination_reason;
  r.iterations = fit.optim.n_iterations;
  r.evaluations = fit.optim.n_evaluations;
  r.clamped = fit.clamped_terms;
  r.warnings = std::move(fit.warnings);
  r.mse = mse_paths(paths, r.fitted);
  return r;
}

RunRecord run_sliced(const ExperimentConfig& cfg, const PathSet& paths, FeatureMode mode, const std::string& study) {
  RunRecord r;
  r.study = study;
  r.seed = paths.seed;
  r.n_paths = paths.n_paths();
  r.method = Method::SI;
  const FeatureMatrix features =
      build_features(paths, column_params(cfg), mode, cfg.target, cfg.variance_feature);
  const auto start = Clock::now();
  SlicedFit fit = fit_sliced(features, cfg.sir, cfg.x0, cfg.bounds, paths.dt, cfg.delta, cfg.optim, cfg.projection);
  r.time_s = seconds_since(start);
  r.fitted = fit.optim.params();
  r.nll = fit.optim.nll;
  r.converged = fit.optim.converged;
  r.termination = fit.optim.termination_reason;
  r.iterations = fit.optim.n_iterations;
  r.evaluations = fit.optim.n_evaluations;
  r.warnings = std::move(fit.warnings);
  r.mse = mse_paths(paths, r.fitted);
  return r;
}

Figure4 make_figure4(const PathSet& paths, const HestonParams& di, const HestonParams& si, int max_lag) {
  Figure4 fig;
  const PathSet est_di = simulate_with_noise(di, paths.S(0, 0), paths.V(0, 0), paths.dt, paths.noise);
  const PathSet est_si = simulate_with_noise(si, paths.S(0, 0), paths.V(0, 0), paths.dt, paths.noise);
  fig.v_true = paths.V.row(0).transpose();
  fig.v_di = est_di.V.row(0).transpose();
  fig.v_si = est_si.V.row(0).transpose();
  const int lag = std::min<int>(max_lag, static_cast<int>(fig.v_true.size()) - 1);
  fig.acf_true = acf(fig.v_true, lag).values;
  fig.acf_di = acf(fig.v_di, lag).values;
  fig.acf_si = acf(fig.v_si, lag).values;
  return fig;
}

}  // namespace

ExperimentReport run_single_path_study(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t n_seeds = cfg.seeds.size();
  std::vector<RunRecord> di(n_seeds), si(n_seeds);
  std::vector<PathSet> first_path(1);

  parallel_for(n_seeds, cfg.threads, [&](std::size_t k) {
    SimConfig sim = cfg.sim;
    sim.n_paths = 1;
    sim.seed = cfg.seeds[k];
    const PathSet paths = simulate_paths(cfg.true_params, sim);
    di[k] = run_direct(cfg, paths, "single");
    si[k] = run_sliced(cfg, paths, cfg.single_feature_mode, "single");
    if (k == 0) first_path[0] = paths;
  });

  ExperimentReport report;
  report.study = "single";
  // Sorted by seed, DI before SI.
  std::vector<std::size_t> order(n_seeds);
  for (std::size_t k = 0; k < n_seeds; ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cfg.seeds[a] < cfg.seeds[b]; });
  for (std::size_t k : order) {
    report.records.push_back(di[k]);
    report.records.push_back(si[k]);
  }
  report.di = summarize(report.records, Method::DI);
  report.si = summarize(report.records, Method::SI);
  report.figure4 = make_figure4(first_path[0], di[0].fitted, si[0].fitted, cfg.acf_max_lag);
  return report;
}

ExperimentReport run_multi_path_study(const ExperimentConfig& cfg, const std::vector<int>& n_list) {
  cfg.validate();
  if (n_list.empty()) throw InvalidInput("study-multi needs at least one path count");
  for (int n : n_list)
    if (n < 1) throw InvalidInput("path counts must be positive");

  const std::size_t count = n_list.size();
  std::vector<RunRecord> di(count), si(count);
  parallel_for(count, cfg.threads, [&](std::size_t k) {
    SimConfig sim = cfg.sim;
    sim.n_paths = n_list[k];
    sim.seed = cfg.seeds.front();
    const PathSet paths = simulate_paths(cfg.true_params, sim);
    di[k] = run_direct(cfg, paths, "multi");
    si[k] = run_sliced(cfg, paths, cfg.multi_feature_mode, "multi");
  });

  ExperimentReport report;
  report.study = "multi";
  for (std::size_t k = 0; k < count; ++k) {
    report.records.push_back(di[k]);
    report.records.push_back(si[k]);
  }
  report.di = summarize(report.records, Method::DI);
  report.si = summarize(report.records, Method::SI);
  return report;
}

void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  out << "study,seed,n_paths,method,mu,kappa,theta,sigma,rho,nll,mse,time_s,converged,clamped\n";
  for (const auto& r : report.records) {
    out << r.study << ',' << r.seed << ',' << r.n_paths << ',' << to_string(r.method) << ','
        << format_double(r.fitted.mu) << ',' << format_double(r.fitted.kappa) << ',' << format_double(r.fitted.theta)
        << ',' << format_double(r.fitted.sigma) << ',' << format_double(r.fitted.rho) << ',' << format_double(r.nll)
        << ',' << format_double(r.mse) << ',' << format_double(r.time_s) << ',' << (r.converged ? 1 : 0) << ','
        << r.clamped << '\n';
  }
}

void write_table1_csv(std::ostream& out, const ExperimentReport& report) {
  out << "n_simulations,mse_DI,mse_SI\n";
  const std::size_t runs = static_cast<std::size_t>(report.di.runs);
  std::vector<std::size_t> rows;
  if (runs > 10) rows.push_back(10);
  rows.push_back(runs);
  for (std::size_t k : rows) {
    out << k << ',' << format_double(summarize(report.records, Method::DI, k).mean_mse) << ','
        << format_double(summarize(report.records, Method::SI, k).mean_mse) << '\n';
  }
}

void write_table2_csv(std::ostream& out, const ExperimentReport& report) {
  out << "n,method,time_s,mse\n";
  for (const auto& r : report.records)
    out << r.n_paths << ',' << to_string(r.method) << ',' << format_double(r.time_s) << ',' << format_double(r.mse)
        << '\n';
}

void write_mse_box_csv(std::ostream& out, const ExperimentReport& report) {
  out << "seed,mse_DI,mse_SI\n";
  for (std::size_t k = 0; k + 1 < report.records.size(); k += 2) {
    const auto& a = report.records[k];
    const auto& b = report.records[k + 1];
    const auto& d = a.method == Method::DI ? a : b;
    const auto& s = a.method == Method::DI ? b : a;
    out << d.seed << ',' << format_double(d.mse) << ',' << format_double(s.mse) << '\n';
  }
}

void write_figure4_vol_csv(std::ostream& out, const Figure4& f) {
  out << "t,v_true,v_DI,v_SI\n";
  for (Eigen::Index t = 0; t < f.v_true.size(); ++t)
    out << t << ',' << format_double(f.v_true(t)) << ',' << format_double(f.v_di(t)) << ','
        << format_double(f.v_si(t)) << '\n';
}

void write_figure4_acf_csv(std::ostream& out, const Figure4& f) {
  out << "lag,acf_true,acf_DI,acf_SI\n";
  for (Eigen::Index k = 0; k < f.acf_true.size(); ++k)
    out << k << ',' << format_double(f.acf_true(k)) << ',' << format_double(f.acf_di(k)) << ','
        << format_double(f.acf_si(k)) << '\n';
}

}  // namespace hestonsi
