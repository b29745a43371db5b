#include "hestonsi/config.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "hestonsi/csv.hpp"

namespace hestonsi {

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      {"true.mu", "0.03", "drift of the generating model"},
      {"true.kappa", "5", "mean-reversion speed of the generating model"},
      {"true.theta", "0.05", "long-run variance of the generating model"},
      {"true.sigma", "0.2", "volatility of volatility of the generating model"},
      {"true.rho", "-0.5", "price/variance correlation of the generating model"},
      {"sim.s0", "10", "initial price"},
      {"sim.v0", "0.01", "initial variance"},
      {"sim.n_steps", "250", "steps per path"},
      {"sim.dt", "0.004", "step size in years"},
      {"sim.n_paths", "1", "paths for simulate / fit-*"},
      {"sim.seed", "42", "seed for simulate / fit-*"},
      {"sir.n_slices", "10", "number of slices"},
      {"sir.n_directions", "6", "retained directions B"},
      {"sir.ridge", "1e-8", "ridge added to the sample covariance diagonal"},
      {"sir.slicing_mode", "equal-width", "equal-width | equal-count"},
      {"bounds.lower", "-0.05,5,0.01,0.00001,-0.9", "lower bounds (mu,kappa,theta,sigma,rho)"},
      {"bounds.upper", "0.05,inf,0.05,0.3,0.7", "upper bounds; inf is replaced by optim.kappa_cap"},
      {"x0", "0.02,5.2,0.04,0.1,-0.6", "initial guess (mu,kappa,theta,sigma,rho)"},
      {"seeds", "7,42,101,158,233,289,347,412,503,577,641,718,806,877,953", "study seeds"},
      {"feature.single_mode", "per-timestep", "single-path study rows: per-timestep | per-path"},
      {"feature.multi_mode", "per-path", "multi-path study rows: per-path | per-timestep"},
      {"feature.target", "mean-Q", "per-path target: mean-Q | terminal-Q"},
      {"feature.variance", "mean-v", "per-path variance feature: mean-v | terminal-v"},
      {"feature.param_columns", "initial-guess", "constant columns: initial-guess | true"},
      {"model.delta", "1e-6", "diagonal filler of the reduced covariance"},
      {"model.projection", "whitened", "whitened | paper-literal"},
      {"optim.max_iters", "500", "iteration cap"},
      {"optim.grad_tol", "1e-6", "projected-gradient tolerance"},
      {"optim.step_tol", "1e-10", "relative step tolerance"},
      {"optim.memory", "10", "L-BFGS memory"},
      {"optim.fd_step_rel", "1e-6", "relative finite-difference step"},
      {"optim.kappa_cap", "1000", "finite stand-in for an infinite upper bound"},
      {"study.n_list", "50,100,250", "path counts for study-multi"},
      {"run.threads", "1", "worker threads for studies"},
      {"acf.max_lag", "20", "largest ACF lag"},
      {"acf.path", "0", "path index for the acf subcommand"},
      {"acf.series", "V", "series for the acf subcommand: V | S | Q"},
      {"input.paths", "", "paths CSV to fit instead of simulating"},
  };
  return schema;
}

bool is_config_key(const std::string& key) {
  const auto& s = config_schema();
  return std::any_of(s.begin(), s.end(), [&](const ConfigKey& k) { return k.name == key; });
}

namespace {

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double to_double(const FlatConfig& c, const std::string& key) {
  try {
    return parse_double(c.get(key));
  } catch (const InvalidInput&) {
    throw InvalidInput(key + ": expected a number, got '" + c.get(key) + "'");
  }
}

long long to_integer(const FlatConfig& c, const std::string& key) {
  const double v = to_double(c, key);
  if (std::floor(v) != v || std::abs(v) > 9.0e15) throw InvalidInput(key + ": expected an integer");
  return static_cast<long long>(v);
}

std::uint64_t parse_u64(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos)
    throw InvalidInput(key + ": expected a non-negative integer, got '" + t + "'");
  try {
    return std::stoull(t);
  } catch (const std::exception&) {
    throw InvalidInput(key + ": integer out of range");
  }
}

template <typename Enum>
Enum to_enum(const FlatConfig& c, const std::string& key, std::initializer_list<std::pair<const char*, Enum>> options) {
  const std::string value = trim(c.get(key));
  std::string valid;
  for (const auto& [name, e] : options) {
    if (value == name) return e;
    valid += (valid.empty() ? "" : " | ") + std::string(name);
  }
  throw InvalidInput(key + ": expected one of " + valid + ", got '" + value + "'");
}

Vector to_vector5(const FlatConfig& c, const std::string& key) {
  std::vector<double> v;
  try {
    v = parse_double_list(c.get(key));
  } catch (const InvalidInput&) {
    throw InvalidInput(key + ": expected a comma-separated list of numbers");
  }
  if (v.size() != 5) throw InvalidInput(key + ": expected five comma-separated values");
  return Eigen::Map<const Vector>(v.data(), 5);
}

}  // namespace

std::string nearest_config_key(const std::string& key) {
  std::string best;
  std::size_t best_distance = std::numeric_limits<std::size_t>::max();
  for (const auto& k : config_schema()) {
    const std::size_t d = edit_distance(key, k.name);
    if (d < best_distance) {
      best_distance = d;
      best = k.name;
    }
  }
  return best;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (const auto& field : split(text, ',')) out.push_back(parse_double(trim(field)));
  return out;
}

FlatConfig FlatConfig::parse(std::istream& in) {
  FlatConfig c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInput("config line " + std::to_string(line_no) + ": expected 'key = value'");
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

FlatConfig FlatConfig::defaults() {
  FlatConfig c;
  for (const auto& k : config_schema()) c.values_[k.name] = k.default_value;
  return c;
}

void FlatConfig::set(const std::string& key, const std::string& value) {
  if (!is_config_key(key))
    throw InvalidInput("unknown config key '" + key + "' (did you mean '" + nearest_config_key(key) + "'?)");
  values_[key] = value;
}

const std::string& FlatConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  for (const auto& k : config_schema())
    if (k.name == key) return k.default_value;
  throw InvalidInput("unknown config key '" + key + "'");
}

FlatConfig FlatConfig::resolved() const {
  FlatConfig out = defaults();
  for (const auto& [k, v] : values_) out.values_[k] = v;
  return out;
}

ExperimentConfig to_experiment_config(const FlatConfig& raw) {
  const FlatConfig c = raw.resolved();
  ExperimentConfig e;
  e.true_params = {to_double(c, "true.mu"), to_double(c, "true.kappa"), to_double(c, "true.theta"),
                   to_double(c, "true.sigma"), to_double(c, "true.rho")};
  e.sim.s0 = to_double(c, "sim.s0");
  e.sim.v0 = to_double(c, "sim.v0");
  e.sim.n_steps = static_cast<int>(to_integer(c, "sim.n_steps"));
  e.sim.dt = to_double(c, "sim.dt");
  e.sim.n_paths = static_cast<int>(to_integer(c, "sim.n_paths"));
  e.sim.seed = parse_u64(c.get("sim.seed"), "sim.seed");

  e.sir.n_slices = static_cast<int>(to_integer(c, "sir.n_slices"));
  e.sir.n_directions = static_cast<int>(to_integer(c, "sir.n_directions"));
  e.sir.ridge = to_double(c, "sir.ridge");
  e.sir.slicing = to_enum<SlicingMode>(c, "sir.slicing_mode",
                                       {{"equal-width", SlicingMode::EqualWidth}, {"equal-count", SlicingMode::EqualCount}});

  e.optim.max_iters = static_cast<int>(to_integer(c, "optim.max_iters"));
  e.optim.grad_tol = to_double(c, "optim.grad_tol");
  e.optim.step_tol = to_double(c, "optim.step_tol");
  e.optim.memory = static_cast<int>(to_integer(c, "optim.memory"));
  e.optim.fd_step_rel = to_double(c, "optim.fd_step_rel");
  e.optim.kappa_cap = to_double(c, "optim.kappa_cap");
  if (e.optim.memory < 1) throw InvalidInput("optim.memory must be at least 1");
  if (e.optim.max_iters < 0) throw InvalidInput("optim.max_iters must be non-negative");
  if (!(e.optim.fd_step_rel > 0.0)) throw InvalidInput("optim.fd_step_rel must be positive");
  if (!(e.optim.kappa_cap > 0.0) || !std::isfinite(e.optim.kappa_cap))
    throw InvalidInput("optim.kappa_cap must be positive and finite");

  e.bounds.lower = to_vector5(c, "bounds.lower");
  e.bounds.upper = to_vector5(c, "bounds.upper");
  for (Eigen::Index i = 0; i < 5; ++i) {
    if (std::isinf(e.bounds.upper(i)) && e.bounds.upper(i) > 0) e.bounds.upper(i) = e.optim.kappa_cap;
  }
  // rho's interval is open at both ends.
  e.bounds.lower(4) += 1e-8;
  e.bounds.upper(4) -= 1e-8;
  e.bounds.validate();
  e.x0 = to_vector5(c, "x0");

  e.seeds.clear();
  for (const auto& s : split(c.get("seeds"), ',')) e.seeds.push_back(parse_u64(s, "seeds"));

  const std::initializer_list<std::pair<const char*, FeatureMode>> modes = {{"per-path", FeatureMode::PerPath},
                                                                           {"per-timestep", FeatureMode::PerTimestep}};
  e.single_feature_mode = to_enum<FeatureMode>(c, "feature.single_mode", modes);
  e.multi_feature_mode = to_enum<FeatureMode>(c, "feature.multi_mode", modes);
  e.target = to_enum<TargetMode>(c, "feature.target", {{"mean-Q", TargetMode::MeanQ}, {"terminal-Q", TargetMode::TerminalQ}});
  e.variance_feature = to_enum<VarianceFeature>(
      c, "feature.variance", {{"mean-v", VarianceFeature::MeanV}, {"terminal-v", VarianceFeature::TerminalV}});
  e.param_columns = to_enum<ParamColumns>(
      c, "feature.param_columns", {{"initial-guess", ParamColumns::InitialGuess}, {"true", ParamColumns::TrueParams}});

  e.delta = to_double(c, "model.delta");
  e.projection = to_enum<ProjectionSpace>(
      c, "model.projection", {{"whitened", ProjectionSpace::Whitened}, {"paper-literal", ProjectionSpace::Raw}});

  e.n_list.clear();
  for (double n : parse_double_list(c.get("study.n_list"))) {
    if (std::floor(n) != n || n < 1) throw InvalidInput("study.n_list: expected positive integers");
    e.n_list.push_back(static_cast<int>(n));
  }
  const long long threads = to_integer(c, "run.threads");
  if (threads < 1) throw InvalidInput("run.threads must be at least 1");
  e.threads = static_cast<unsigned>(threads);
  e.acf_max_lag = static_cast<int>(to_integer(c, "acf.max_lag"));
  e.validate();
  return e;
}

void write_manifest(std::ostream& out, const FlatConfig& config) {
  const FlatConfig c = config.resolved();
  out << "# hestonsi manifest\n";
  out << "# tool_version = " << kToolVersion << '\n';
  for (const auto& k : config_schema()) out << k.name << " = " << c.get(k.name) << '\n';
}

}  // namespace hestonsi
