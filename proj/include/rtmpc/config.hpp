#pragma once

#include <map>
#include <string>
#include <vector>

#include "rtmpc/controller.hpp"
#include "rtmpc/types.hpp"

namespace rtmpc {

/// Key/value configuration with nested [section] scoping. Keys are stored
/// flattened as "section.key". Matrices are rows separated by ';' with
/// whitespace-separated entries.
class ConfigMap {
 public:
  static ConfigMap parse(const std::string& text);
  static ConfigMap parse_file(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  Vec get_vec(const std::string& key, const Vec& fallback) const;
  Vec require_vec(const std::string& key) const;
  Mat require_mat(const std::string& key) const;
  Mat get_mat(const std::string& key, const Mat& fallback) const;

  /// Overlays every entry of `other` on top of this map.
  void merge(const ConfigMap& other);

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Built-in scenario definitions. Physical servo parameters live here as
/// configuration (transcribed defaults, overridable from files and flags).
std::vector<std::string> preset_names();
std::string preset_config_text(const std::string& name);

/// Builds a runnable scenario from a configuration.
Scenario build_scenario(const ConfigMap& config);

}  // namespace rtmpc
