#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dtsg {

// Flat `key = value` configuration with dotted keys, '#' comments, optional
// double quotes around string values. Later assignments override earlier ones.
class FlatConfig {
 public:
  static FlatConfig parse(std::string_view text, std::string_view origin = "<string>");
  static FlatConfig load(const std::filesystem::path& path);

  // "key=value" as given on the command line.
  void apply_override(std::string_view assignment);
  void set(std::string key, std::string value);
  void merge(const FlatConfig& other);

  bool contains(std::string_view key) const;
  std::optional<std::string> raw(std::string_view key) const;

  std::string get_string(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key, double fallback) const;
  long long get_int(std::string_view key, long long fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  // Keys present in the file but never read by any getter.
  std::vector<std::string> unused_keys() const;

  // Canonical text form: sorted `key = value` lines.
  std::string dump() const;
  const std::map<std::string, std::string, std::less<>>& entries() const { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
  mutable std::set<std::string, std::less<>> read_;
};

std::uint64_t fnv1a64(std::string_view data);

}  // namespace dtsg
