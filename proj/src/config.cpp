#include "cactus/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>

#include "cactus/error.hpp"
#include "cactus/text.hpp"

namespace cactus {

RunConfig RunConfig::parse(std::istream& is) {
  RunConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value, got \"" + t + "\"");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (c.values_.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + key);
    c.values_[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  return parse(f);
}

void RunConfig::merge(const RunConfig& other, bool allow_new) {
  for (const auto& [k, v] : other.values_) {
    if (!allow_new && !values_.count(k)) throw ConfigError("unknown key \"" + k + "\"");
    values_[k] = v;
  }
}

std::string RunConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing key \"" + key + "\"");
  return it->second;
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("key \"" + key + "\": cannot parse \"" + s + "\"");
  return v;
}

}  // namespace

std::int64_t RunConfig::integer(const std::string& key) const { return parse_number<std::int64_t>(key, str(key)); }

std::size_t RunConfig::count(const std::string& key) const {
  const auto v = integer(key);
  if (v < 0) throw ConfigError("key \"" + key + "\" must be nonnegative");
  return static_cast<std::size_t>(v);
}

std::uint64_t RunConfig::u64(const std::string& key) const { return parse_number<std::uint64_t>(key, str(key)); }

double RunConfig::real(const std::string& key) const { return parse_number<double>(key, str(key)); }

bool RunConfig::flag(const std::string& key) const {
  const std::string v = str(key);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("key \"" + key + "\": expected a boolean, got \"" + v + "\"");
}

std::vector<double> RunConfig::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& tok : split_on(str(key), ',')) out.push_back(parse_number<double>(key, trim(tok)));
  return out;
}

std::vector<std::size_t> RunConfig::counts(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& tok : split_on(str(key), ',')) out.push_back(parse_number<std::size_t>(key, trim(tok)));
  return out;
}

std::filesystem::path RunConfig::path(const std::string& key) const {
  const std::string v = str(key);
  if (v.empty()) throw ConfigError("key \"" + key + "\" needs a path");
  return std::filesystem::path(v);
}

std::vector<std::string> RunConfig::lines(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(prefix + k + "=" + v);
  return out;
}

RunConfig parse_overrides(const std::vector<std::string>& args) {
  RunConfig c;
  for (const auto& a : args) {
    if (a.rfind("--", 0) != 0) throw ConfigError("unexpected argument \"" + a + "\"");
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 2) throw ConfigError("override \"" + a + "\" must look like --key=value");
    c.set(a.substr(2, eq - 2), a.substr(eq + 1));
  }
  return c;
}

}  // namespace cactus
