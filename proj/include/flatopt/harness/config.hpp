#pragma once

// Flat `key = value` configuration with optional [section] headers.
// Keys are globally unique; a section header only groups them. `#` starts
// a comment. Values are kept as strings and converted on access, so a
// resolved config echoes back exactly what was read.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "flatopt/error.hpp"

namespace flatopt::harness {

struct KeySpec {
  std::string section;
  std::string key;
  std::string default_value;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

class Config {
 public:
  struct Entry {
    std::string section;
    std::string key;
    std::string value;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  static Config parse(std::istream& in) {
    Config c;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = detail::trim(line);
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw Error(ErrorKind::ConfigError, "line " + std::to_string(lineno) + ": bad section header");
        section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw Error(ErrorKind::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
      const std::string key = detail::trim(std::string_view(t).substr(0, eq));
      if (key.empty()) throw Error(ErrorKind::ConfigError, "line " + std::to_string(lineno) + ": empty key");
      if (c.find(key)) throw Error(ErrorKind::ConfigError, "duplicate key '" + key + "'");
      c.entries_.push_back({section, key, detail::trim(std::string_view(t).substr(eq + 1))});
    }
    return c;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open config '" + path + "'");
    return parse(in);
  }

  /// Checks keys against the schema and fills in defaults. The result lists
  /// every schema key, in schema order.
  Config resolve(const std::vector<KeySpec>& schema) const {
    for (const auto& e : entries_) {
      const auto it = std::find_if(schema.begin(), schema.end(), [&](const KeySpec& k) { return k.key == e.key; });
      if (it == schema.end()) throw Error(ErrorKind::ConfigError, "unknown key '" + e.key + "'");
      if (!e.section.empty() && e.section != it->section)
        throw Error(ErrorKind::ConfigError, "key '" + e.key + "' belongs in section [" + it->section + "]");
    }
    Config out;
    for (const auto& k : schema) {
      const Entry* e = find(k.key);
      out.entries_.push_back({k.section, k.key, e ? e->value : k.default_value});
    }
    return out;
  }

  void set(const std::string& key, std::string value) {
    for (auto& e : entries_)
      if (e.key == key) {
        e.value = std::move(value);
        return;
      }
    entries_.push_back({"", key, std::move(value)});
  }

  bool has(const std::string& key) const { return find(key) != nullptr; }

  const std::string& str(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) throw Error(ErrorKind::ConfigError, "missing key '" + key + "'");
    return e->value;
  }

  double real(const std::string& key) const {
    const std::string& s = str(key);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw Error(ErrorKind::ConfigError, "key '" + key + "': '" + s + "' is not a number");
    return v;
  }

  std::int64_t integer(const std::string& key) const {
    const std::string& s = str(key);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw Error(ErrorKind::ConfigError, "key '" + key + "': '" + s + "' is not an integer");
    return v;
  }

  std::int64_t positive_integer(const std::string& key) const {
    const auto v = integer(key);
    if (v <= 0) throw Error(ErrorKind::ConfigError, "key '" + key + "' must be positive");
    return v;
  }

  /// Value must be one of `choices`.
  const std::string& choice(const std::string& key, std::initializer_list<std::string_view> choices) const {
    const std::string& s = str(key);
    if (std::find(choices.begin(), choices.end(), s) == choices.end()) {
      std::string msg = "key '" + key + "': '" + s + "' is not one of";
      for (auto c : choices) msg += " " + std::string(c);
      throw Error(ErrorKind::ConfigError, msg);
    }
    return s;
  }

  const std::vector<Entry>& entries() const noexcept { return entries_; }

  std::string to_text() const {
    std::string out, section;
    bool first = true;
    for (const auto& e : entries_) {
      if (first || e.section != section) {
        if (!e.section.empty()) out += (first ? "" : "\n") + ("[" + e.section + "]\n");
        section = e.section;
      }
      first = false;
      out += e.key + " = " + e.value + "\n";
    }
    return out;
  }

  /// {"section": {"key": "value", ...}, ...} in entry order.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& e : entries_) j[e.section][e.key] = e.value;
    return j;
  }

  static Config from_json(const nlohmann::ordered_json& j) {
    Config c;
    for (const auto& [section, keys] : j.items()) {
      if (!keys.is_object()) throw Error(ErrorKind::ConfigError, "config section '" + section + "' is not an object");
      for (const auto& [key, value] : keys.items()) {
        if (!value.is_string()) throw Error(ErrorKind::ConfigError, "config key '" + key + "' is not a string");
        c.entries_.push_back({section, key, value.get<std::string>()});
      }
    }
    return c;
  }

  friend bool operator==(const Config&, const Config&) = default;

 private:
  const Entry* find(const std::string& key) const {
    for (const auto& e : entries_)
      if (e.key == key) return &e;
    return nullptr;
  }

  std::vector<Entry> entries_;
};

}  // namespace flatopt::harness
