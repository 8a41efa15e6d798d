#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nlbu {

/// Flat key = value configuration file: one pair per line, '#' comments,
/// blank lines ignored. Keys are case-sensitive.
class ConfigMap {
 public:
  ConfigMap() = default;
  explicit ConfigMap(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  static ConfigMap from_file(const std::string& path);
  static ConfigMap from_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;  // accepts on/off, true/false, 1/0

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Parses "a:b:step" or a comma list into a value grid (inclusive ends,
/// step tolerance 1e-9).
std::vector<double> parse_value_grid(const std::string& spec);

}  // namespace nlbu
