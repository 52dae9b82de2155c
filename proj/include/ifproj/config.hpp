#ifndef IFPROJ_CONFIG_HPP
#define IFPROJ_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

#include "ifproj/data.hpp"

namespace ifproj {

// Minimal TOML-style config: '#' comments, [section] headers flattened into
// dotted keys, scalar values (quoted string, number, true/false) and flat
// arrays of scalars. That is all the run/schema files need.
struct ConfigValue {
  enum class Kind { string, number, boolean, array };
  Kind kind = Kind::string;
  std::string str;
  double num = 0.0;
  bool flag = false;
  std::vector<ConfigValue> items;
};

class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_number(const std::string& key) const;
  double get_number(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_numbers(const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& key) const;
  const std::map<std::string, ConfigValue>& entries() const { return kv_; }

 private:
  std::map<std::string, ConfigValue> kv_;
};

// schema file: treatment = "t", outcome = "y", covariates = ["x1", ...]
Schema load_schema(const std::string& path);

}  // namespace ifproj

#endif
