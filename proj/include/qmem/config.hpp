#pragma once

// Flat `key = value` configuration with `#` comments.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace qmem {

class Config {
 public:
  static Config parse(std::string_view text, std::string_view origin = "<string>");
  static Config load(const std::filesystem::path& path);

  // Later assignments win; used for command-line overrides.
  void set(std::string key, std::string value);
  // Parses "key=value".
  void set_assignment(std::string_view assignment);
  void merge(const Config& other);

  bool contains(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;
  std::string get_string(std::string_view key, std::string_view fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::optional<double> find_double(std::string_view key) const;
  long long get_int(std::string_view key, long long fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  const std::map<std::string, std::string, std::less<>>& entries() const noexcept {
    return entries_;
  }

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

}  // namespace qmem
