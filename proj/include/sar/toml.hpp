#pragma once

#include <map>
#include <string>
#include <vector>

namespace sar {

// Minimal TOML subset: [section] headers, bare keys, strings with basic
// escapes, integers, floats, booleans, and single-line arrays of scalars.
// Enough for declarative experiment configs; unknown syntax is an error, not
// a guess.
struct TomlValue {
  enum class Kind { string, integer, real, boolean, array };
  Kind kind = Kind::string;
  std::string str;
  long long integer = 0;
  double real = 0.0;
  bool boolean = false;
  std::vector<TomlValue> array;
};

class TomlTable {
 public:
  static TomlTable parse(const std::string& text, const std::string& origin);
  static TomlTable parse_file(const std::string& path);

  bool has(const std::string& dotted_key) const;
  const TomlValue& at(const std::string& dotted_key) const;  // throws ParseError

  // Typed getters; marks the key consumed. Throws ConfigError on a type
  // mismatch.
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<std::string> get_string_array(const std::string& key,
                                            std::vector<std::string> fallback) const;

  long long require_int(const std::string& key) const;  // throws ConfigError when missing

  // Keys parsed but never consumed by a getter; anti-typo check.
  std::vector<std::string> unconsumed_keys() const;

 private:
  std::map<std::string, TomlValue> values_;
  mutable std::map<std::string, bool> consumed_;
  std::string origin_;
};

}  // namespace sar
