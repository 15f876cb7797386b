#ifndef POPDYN_CONFIG_HPP
#define POPDYN_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace popdyn {

// Minimal TOML-style key/value file: `key = value` lines, [section]
// headers flattened to "section.key", # comments, values are numbers,
// "strings", booleans, and (nested) arrays.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config parse_file(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get_string(const std::string& key, const std::string& def = "") const;
  int64_t get_int(const std::string& key, int64_t def) const;
  double get_double(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<int64_t> get_int_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;
  // [[j, mass], [j, mass], ...]
  std::vector<std::pair<int64_t, double>> get_pair_list(const std::string& key) const;

  const std::map<std::string, std::string>& raw() const { return values_; }

 private:
  std::map<std::string, std::string> values_;  // key -> raw value text
};

}  // namespace popdyn

#endif
