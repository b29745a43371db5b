#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hestonsi/experiments.hpp"

namespace hestonsi {

inline constexpr const char* kToolVersion = "1.0.0";

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every recognised flat key with its default, in manifest order.
const std::vector<ConfigKey>& config_schema();

bool is_config_key(const std::string& key);

/// Closest schema key by edit distance.
std::string nearest_config_key(const std::string& key);

/// `key = value` lines; `#` starts a comment; blank lines ignored. Unknown keys
/// are rejected.
class FlatConfig {
 public:
  static FlatConfig parse(std::istream& in);
  static FlatConfig defaults();

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  /// Every schema key, explicit values overriding defaults.
  FlatConfig resolved() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Typed view of a resolved config; throws InvalidInput on values that do not
/// parse or violate ExperimentConfig invariants.
ExperimentConfig to_experiment_config(const FlatConfig& config);

/// Resolved config as `key = value` lines in schema order, preceded by a
/// comment header naming the tool version.
void write_manifest(std::ostream& out, const FlatConfig& config);

std::vector<double> parse_double_list(const std::string& text);

}  // namespace hestonsi
