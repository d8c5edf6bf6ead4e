#pragma once

#include <string>
#include <vector>

namespace geocast {

/// Flat `key = value` config document. '#' starts a comment, blank lines are
/// skipped, repeated keys accumulate in order (used for cluster lists).
class KvConfig {
 public:
  void add(std::string key, std::string value);
  bool has(const std::string& key) const;
  /// First value for the key; throws std::runtime_error when absent.
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;  // on/off/true/false/1/0
  std::vector<std::string> get_all(const std::string& key) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Throws std::runtime_error with a line number on malformed lines.
KvConfig parse_kv_text(const std::string& text);
KvConfig parse_kv_file(const std::string& path);

}  // namespace geocast
