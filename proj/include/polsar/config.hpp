#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polsar/error.hpp"

namespace polsar {

/**
 * Flat key/value configuration in a small TOML subset:
 *
 *     # comment
 *     seed = 7
 *     [scene]
 *     layout = "voronoi"     # becomes key "scene.layout"
 *
 * Values are kept as strings and converted on access.
 */
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, std::string_view origin = "<string>") {
    KeyValueConfig cfg;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t end = std::min(text.find('\n', pos), text.size());
      std::string_view line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      line = strip_comment(line);
      line = trim(line);
      if (line.empty()) continue;
      auto where = [&] { return std::string(origin) + ":" + std::to_string(line_no); };
      if (line.front() == '[') {
        if (line.back() != ']') throw ArgumentError(where() + ": unterminated section header");
        section = std::string(trim(line.substr(1, line.size() - 2)));
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) throw ArgumentError(where() + ": expected key = value");
      const std::string_view key = trim(line.substr(0, eq));
      std::string_view value = trim(line.substr(eq + 1));
      if (key.empty()) throw ArgumentError(where() + ": empty key");
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
        value = value.substr(1, value.size() - 2);
      }
      const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
      cfg.values_[full] = std::string(value);
    }
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text, path.string());
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  std::optional<std::string> get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<double> get_double(const std::string& key) const {
    const auto s = get_string(key);
    if (!s) return std::nullopt;
    return to_double(key, *s);
  }

  std::optional<std::uint64_t> get_uint(const std::string& key) const {
    const auto s = get_string(key);
    if (!s) return std::nullopt;
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
    if (ec != std::errc{} || ptr != s->data() + s->size()) {
      throw ArgumentError("config key '" + key + "': expected a non-negative integer, got '" + *s + "'");
    }
    return v;
  }

  std::optional<bool> get_bool(const std::string& key) const {
    const auto s = get_string(key);
    if (!s) return std::nullopt;
    if (*s == "true" || *s == "on" || *s == "1") return true;
    if (*s == "false" || *s == "off" || *s == "0") return false;
    throw ArgumentError("config key '" + key + "': expected true/false, got '" + *s + "'");
  }

  /// Comma-separated numbers, optionally in [brackets].
  std::optional<std::vector<double>> get_double_list(const std::string& key) const {
    auto s = get_string(key);
    if (!s) return std::nullopt;
    std::string_view v = trim(*s);
    if (!v.empty() && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
    std::vector<double> out;
    while (!v.empty()) {
      const std::size_t comma = std::min(v.find(','), v.size());
      const std::string_view item = trim(v.substr(0, comma));
      if (!item.empty()) out.push_back(to_double(key, std::string(item)));
      v = comma < v.size() ? v.substr(comma + 1) : std::string_view{};
    }
    return out;
  }

 private:
  static std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  }

  static std::string_view strip_comment(std::string_view s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  static double to_double(const std::string& key, const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ArgumentError("config key '" + key + "': expected a number, got '" + s + "'");
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace polsar
