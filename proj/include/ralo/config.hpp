// Key-value config files: `key = value` lines, '#' comments. One schema
// family shared by the leg model, estimator parameters and synth scenarios.

#ifndef RALO_CONFIG_HPP_
#define RALO_CONFIG_HPP_

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ralo/geom.hpp"

namespace ralo {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str(), path);
  }

  static Config from_string(const std::string& text, const std::string& name = "<string>") {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
          throw ConfigError(name + ":" + std::to_string(lineno) +
                            ": expected 'key = value'");
        }
        continue;
      }
      cfg.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stod(it->second);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': not a number: " + it->second);
    }
  }

  int get_int(const std::string& key, int fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return std::stoi(it->second);
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': not an integer: " + it->second);
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config key '" + key + "': not a bool: " + it->second);
  }

  Vec3 get_vec3(const std::string& key, const Vec3& fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::istringstream in(it->second);
    Vec3 v;
    if (!(in >> v.x() >> v.y() >> v.z())) {
      throw ConfigError("config key '" + key + "': expected three numbers");
    }
    return v;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace ralo

#endif  // RALO_CONFIG_HPP_
