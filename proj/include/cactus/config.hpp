#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace cactus {

inline constexpr const char* kToolVersion = "cactus 0.1.0";

// Flat key=value configuration. Lines starting with '#' and blank lines are ignored.
class RunConfig {
 public:
  RunConfig() = default;
  explicit RunConfig(std::map<std::string, std::string> defaults) : values_(std::move(defaults)) {}

  static RunConfig parse(std::istream& is);
  static RunConfig load(const std::filesystem::path& path);

  // Overlays `other`; every key must already exist here unless allow_new is set.
  void merge(const RunConfig& other, bool allow_new = false);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  // Each getter throws ConfigError on a missing key or an unparseable value.
  std::string str(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::size_t count(const std::string& key) const;  // nonnegative integer
  std::uint64_t u64(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;  // comma separated
  std::vector<std::size_t> counts(const std::string& key) const;
  // Nonempty path; relative paths are taken as given.
  std::filesystem::path path(const std::string& key) const;

  // "key=value" for every key, sorted, for embedding in artifacts.
  std::vector<std::string> lines(const std::string& prefix = "") const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Parses "--key=value" arguments into a config (no defaults); anything else is an error.
RunConfig parse_overrides(const std::vector<std::string>& args);

}  // namespace cactus
