#pragma once

#include "dlid/core_model.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace dlid {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// `key = value` lines, `#` starts a comment
class KeyValueConfig {
public:
  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
      line = trim(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      std::string val = trim(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
      c.kv_[key] = val;
    }
    return c;
  }

  static KeyValueConfig from_string(const std::string& s) {
    std::istringstream in(s);
    return parse(in);
  }

  static KeyValueConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    return parse(in);
  }

  bool has(const std::string& k) const { return kv_.count(k) > 0; }

  void set(const std::string& k, const std::string& v) { kv_[k] = v; }

  std::string str(const std::string& k, const std::string& def) const {
    auto it = kv_.find(k);
    return it == kv_.end() ? def : it->second;
  }

  double num(const std::string& k, double def) const {
    auto it = kv_.find(k);
    if (it == kv_.end()) return def;
    return to_double(k, it->second);
  }

  long integer(const std::string& k, long def) const {
    double v = num(k, static_cast<double>(def));
    if (v != std::floor(v)) throw ConfigError(k + " must be an integer");
    return static_cast<long>(v);
  }

  std::vector<double> list(const std::string& k,
                           const std::vector<double>& def) const {
    auto it = kv_.find(k);
    if (it == kv_.end()) return def;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!trim(item).empty()) out.push_back(to_double(k, trim(item)));
    return out;
  }

  // canonical text, used for hashing
  std::string canonical() const {
    std::string s;
    for (auto& [k, v] : kv_) s += k + "=" + v + "\n";
    return s;
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

private:
  static std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

  static double to_double(const std::string& k, const std::string& v) {
    try {
      size_t used = 0;
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("bad numeric value for " + k + ": " + v);
    }
  }

  std::map<std::string, std::string> kv_;
};

// FNV-1a, printed as 16 hex digits
inline std::string config_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dlid
