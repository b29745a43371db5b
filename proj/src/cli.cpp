#include "hestonsi/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "hestonsi/config.hpp"
#include "hestonsi/csv.hpp"

namespace hestonsi {

namespace {

namespace fs = std::filesystem;

/// Raised for problems with the invocation itself (exit code 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised for failures while running a stage (exit code 1).
struct StageError : std::runtime_error {
  StageError(std::string stage_name, const std::string& what) : std::runtime_error(what), stage(std::move(stage_name)) {}
  std::string stage;
};

/// Output files are staged in memory and only written once the command has
/// succeeded.
class Artifacts {
 public:
  void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

  template <typename Writer>
  void add_with(std::string name, Writer&& writer) {
    std::ostringstream os;
    writer(os);
    add(std::move(name), os.str());
  }

  void commit(const fs::path& dir) const {
    for (const auto& [name, content] : files_) {
      fs::create_directories((dir / name).parent_path());
      write_file_atomic(dir / name, [&](std::ostream& out) { out << content; });
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

struct Invocation {
  std::string subcommand;
  std::string config_path;
  std::string output_dir = ".";
  std::string n_list;
  std::vector<std::pair<std::string, std::string>> overrides;
};

void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

PathSet load_or_simulate(const ExperimentConfig& cfg, const FlatConfig& flat) {
  const std::string input = flat.resolved().get("input.paths");
  if (input.empty()) {
    SimConfig sim = cfg.sim;
    return simulate_paths(cfg.true_params, sim, cfg.threads);
  }
  std::ifstream in(input);
  if (!in) throw InvalidInput("cannot open paths file '" + input + "'");
  return read_paths_csv(in, cfg.sim.dt);
}

ExperimentReport single_fit_report(RunRecord record) {
  ExperimentReport report;
  report.study = "fit";
  report.records.push_back(std::move(record));
  return report;
}

void require_finite(const std::string& stage, double nll) {
  if (!std::isfinite(nll)) throw StageError(stage, "objective is not finite at the returned parameters");
}

int run(const Invocation& inv, std::ostream& out, std::ostream& err) {
  FlatConfig flat;
  if (!inv.config_path.empty()) {
    std::ifstream in(inv.config_path);
    if (!in) throw UsageError("cannot open config file '" + inv.config_path + "'");
    try {
      flat = FlatConfig::parse(in);
    } catch (const InvalidInput& e) {
      throw UsageError(e.what());
    }
  }
  for (const auto& [k, v] : inv.overrides) flat.set(k, v);
  if (!inv.n_list.empty()) flat.set("study.n_list", inv.n_list);
  flat = flat.resolved();

  ExperimentConfig cfg;
  try {
    cfg = to_experiment_config(flat);
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }

  const fs::path dir = inv.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw UsageError("output directory '" + dir.string() + "' cannot be created");

  Artifacts artifacts;
  const std::string& stage = inv.subcommand;

  if (stage == "simulate") {
    const PathSet paths = simulate_paths(cfg.true_params, cfg.sim, cfg.threads);
    artifacts.add_with("paths.csv", [&](std::ostream& os) { write_paths_csv(os, paths); });
  } else if (stage == "fit-direct") {
    const PathSet paths = load_or_simulate(cfg, flat);
    const auto start = std::chrono::steady_clock::now();
    DirectFit fit = fit_direct(paths, cfg.x0, cfg.bounds, cfg.optim, cfg.threads);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    require_finite(stage, fit.optim.nll);
    print_warnings(err, fit.warnings);
    RunRecord r;
    r.study = "fit";
    r.seed = paths.seed;
    r.n_paths = paths.n_paths();
    r.method = Method::DI;
    r.fitted = fit.optim.params();
    r.nll = fit.optim.nll;
    r.mse = paths.has_noise() ? mse_paths(paths, r.fitted) : std::numeric_limits<double>::quiet_NaN();
    r.time_s = elapsed;
    r.converged = fit.optim.converged;
    r.clamped = fit.clamped_terms;
    artifacts.add_with("fit.csv", [&](std::ostream& os) { write_report_csv(os, single_fit_report(r)); });
  } else if (stage == "fit-sliced") {
    const PathSet paths = load_or_simulate(cfg, flat);
    const FeatureMode mode = paths.n_paths() == 1 ? cfg.single_feature_mode : cfg.multi_feature_mode;
    const ParamVector columns = cfg.param_columns == ParamColumns::TrueParams ? cfg.true_params.to_vector() : cfg.x0;
    const FeatureMatrix features = build_features(paths, columns, mode, cfg.target, cfg.variance_feature);
    const auto start = std::chrono::steady_clock::now();
    SlicedFit fit = fit_sliced(features, cfg.sir, cfg.x0, cfg.bounds, paths.dt, cfg.delta, cfg.optim, cfg.projection);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    require_finite(stage, fit.optim.nll);
    print_warnings(err, fit.warnings);
    RunRecord r;
    r.study = "fit";
    r.seed = paths.seed;
    r.n_paths = paths.n_paths();
    r.method = Method::SI;
    r.fitted = fit.optim.params();
    r.nll = fit.optim.nll;
    r.mse = paths.has_noise() ? mse_paths(paths, r.fitted) : std::numeric_limits<double>::quiet_NaN();
    r.time_s = elapsed;
    r.converged = fit.optim.converged;
    artifacts.add_with("fit.csv", [&](std::ostream& os) { write_report_csv(os, single_fit_report(r)); });
    const SirProjection& p = fit.projection;
    artifacts.add_with("projection/W.csv", [&](std::ostream& os) { write_matrix_csv(os, p.W); });
    artifacts.add_with("projection/eigenvalues.csv", [&](std::ostream& os) { write_matrix_csv(os, p.eigenvalues); });
    artifacts.add_with("projection/whitener.csv", [&](std::ostream& os) { write_matrix_csv(os, p.whitener); });
    artifacts.add_with("projection/mean.csv", [&](std::ostream& os) { write_matrix_csv(os, p.mean); });
    artifacts.add_with("projection/slices.csv", [&](std::ostream& os) {
      os << "m,n_m,lower_edge,upper_edge\n";
      for (std::size_t m = 0; m < p.slice_counts.size(); ++m)
        os << m << ',' << p.slice_counts[m] << ',' << format_double(p.slice_lower[m]) << ','
           << format_double(p.slice_upper[m]) << '\n';
    });
  } else if (stage == "study-single") {
    const ExperimentReport report = run_single_path_study(cfg);
    for (const auto& r : report.records) {
      require_finite(stage + ":" + std::string(to_string(r.method)), r.nll);
      print_warnings(err, r.warnings);
    }
    artifacts.add_with("report.csv", [&](std::ostream& os) { write_report_csv(os, report); });
    artifacts.add_with("table1.csv", [&](std::ostream& os) { write_table1_csv(os, report); });
    artifacts.add_with("mse_box.csv", [&](std::ostream& os) { write_mse_box_csv(os, report); });
    artifacts.add_with("figure4_vol.csv", [&](std::ostream& os) { write_figure4_vol_csv(os, report.figure4); });
    artifacts.add_with("figure4_acf.csv", [&](std::ostream& os) { write_figure4_acf_csv(os, report.figure4); });
  } else if (stage == "study-multi") {
    const ExperimentReport report = run_multi_path_study(cfg, cfg.n_list);
    for (const auto& r : report.records) {
      require_finite(stage + ":" + std::string(to_string(r.method)), r.nll);
      print_warnings(err, r.warnings);
    }
    artifacts.add_with("report.csv", [&](std::ostream& os) { write_report_csv(os, report); });
    artifacts.add_with("table2.csv", [&](std::ostream& os) { write_table2_csv(os, report); });
  } else if (stage == "acf") {
    const PathSet paths = load_or_simulate(cfg, flat);
    const long long path = std::llround(parse_double(flat.get("acf.path")));
    if (path < 0 || path >= paths.n_paths()) throw UsageError("acf.path is out of range");
    const std::string series_name = flat.get("acf.series");
    Vector series;
    if (series_name == "V")
      series = paths.V.row(path).transpose();
    else if (series_name == "S")
      series = paths.S.row(path).transpose();
    else if (series_name == "Q")
      series = paths.Q.row(path).transpose();
    else
      throw UsageError("acf.series: expected one of V | S | Q");
    const AcfResult result = acf(series, cfg.acf_max_lag);
    if (result.degenerate) err << "warning: constant series; ACF undefined, reported as zeros\n";
    artifacts.add_with("acf.csv", [&](std::ostream& os) {
      os << "lag,acf,degenerate\n";
      for (Eigen::Index k = 0; k < result.values.size(); ++k)
        os << k << ',' << format_double(result.values(k)) << ',' << (result.degenerate ? 1 : 0) << '\n';
    });
  } else {
    throw UsageError("unknown subcommand '" + stage + "'");
  }

  artifacts.add_with("manifest.txt", [&](std::ostream& os) {
    write_manifest(os, flat);
    os << "# subcommand = " << stage << '\n';
  });
  artifacts.commit(dir);
  out << stage << ": wrote artifacts to " << dir.string() << '\n';
  return kExitOk;
}

void report_error(std::ostream& err, const std::string& kind, const std::string& stage, const std::string& message) {
  nlohmann::json j;
  j["error"] = kind;
  j["stage"] = stage;
  j["message"] = message;
  err << j.dump() << '\n';
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  static const std::vector<std::pair<std::string, std::string>> subcommands = {
      {"simulate", "simulate Heston paths and write paths.csv"},
      {"fit-direct", "direct maximum likelihood on simulated or loaded paths"},
      {"fit-sliced", "SIR projection followed by reduced maximum likelihood"},
      {"study-single", "single-path seed sweep: report, table1, mse_box and volatility figure data"},
      {"study-multi", "multi-path timing and MSE study: report and table2"},
      {"acf", "sample autocorrelation of one simulated or loaded series"},
  };

  CLI::App app{"Heston parameter estimation: direct and sliced inference", "hestonsi"};
  app.require_subcommand(1);
  Invocation inv;
  std::map<std::string, std::string> values;
  for (const auto& [name, help] : subcommands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->allow_extras();
    sub->add_option("--config", inv.config_path, "flat key = value config file");
    sub->add_option("--out", inv.output_dir, "output directory");
    if (name == "study-multi") sub->add_option("--n", inv.n_list, "comma-separated path counts");
    for (const auto& key : config_schema()) sub->add_option("--" + key.name, values[key.name], key.help);
    sub->callback([&inv, name = name] { inv.subcommand = name; });
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << "run 'hestonsi --help' for usage\n";
    return kExitUsageError;
  }

  for (CLI::App* sub : app.get_subcommands()) {
    for (const auto& extra : sub->remaining()) {
      if (extra.rfind("--", 0) == 0) {
        const std::string key = extra.substr(2, extra.find('=') == std::string::npos ? std::string::npos : extra.find('=') - 2);
        err << "usage error: unknown key '" << key << "'; nearest valid key is '" << nearest_config_key(key) << "'\n";
      } else {
        err << "usage error: unexpected argument '" << extra << "'\n";
      }
      return kExitUsageError;
    }
  }
  for (CLI::App* sub : app.get_subcommands())
    for (const auto& key : config_schema())
      if (sub->count("--" + key.name) > 0) inv.overrides.emplace_back(key.name, values[key.name]);

  try {
    return run(inv, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsageError;
  } catch (const StageError& e) {
    report_error(err, "domain", e.stage, e.what());
    return kExitDomainError;
  } catch (const SingularStandardization& e) {
    report_error(err, "singular-standardization", inv.subcommand, e.what());
    return kExitDomainError;
  } catch (const std::exception& e) {
    report_error(err, "domain", inv.subcommand, e.what());
    return kExitDomainError;
  }
}

}  // namespace hestonsi
