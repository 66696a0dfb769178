#include "sar/toml.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sar/errors.hpp"

namespace sar {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Strip a trailing comment, respecting quoted strings.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (c == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
      return false;
  return true;
}

struct Cursor {
  const std::string& text;
  size_t pos = 0;
  const std::string& where;

  void skip_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }
  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }
};

TomlValue parse_value(Cursor& cur);

TomlValue parse_string(Cursor& cur) {
  TomlValue v;
  v.kind = TomlValue::Kind::string;
  ++cur.pos;  // opening quote
  while (!cur.done() && cur.peek() != '"') {
    char c = cur.text[cur.pos++];
    if (c == '\\') {
      if (cur.done()) throw ParseError(cur.where + ": unterminated escape");
      char e = cur.text[cur.pos++];
      switch (e) {
        case 'n': v.str += '\n'; break;
        case 't': v.str += '\t'; break;
        case '"': v.str += '"'; break;
        case '\\': v.str += '\\'; break;
        default: throw ParseError(cur.where + ": unsupported escape '\\" + std::string(1, e) + "'");
      }
    } else {
      v.str += c;
    }
  }
  if (cur.done()) throw ParseError(cur.where + ": unterminated string");
  ++cur.pos;  // closing quote
  return v;
}

TomlValue parse_scalar(Cursor& cur) {
  size_t start = cur.pos;
  while (!cur.done() && cur.peek() != ',' && cur.peek() != ']') ++cur.pos;
  std::string raw = trim(cur.text.substr(start, cur.pos - start));
  if (raw.empty()) throw ParseError(cur.where + ": empty value");
  TomlValue v;
  if (raw == "true" || raw == "false") {
    v.kind = TomlValue::Kind::boolean;
    v.boolean = raw == "true";
    return v;
  }
  const bool looks_float = raw.find_first_of(".eE") != std::string::npos &&
                           raw.find_first_not_of("+-0123456789.eE") == std::string::npos;
  char* end = nullptr;
  if (!looks_float) {
    long long i = std::strtoll(raw.c_str(), &end, 10);
    if (end && *end == '\0') {
      v.kind = TomlValue::Kind::integer;
      v.integer = i;
      return v;
    }
  }
  double d = std::strtod(raw.c_str(), &end);
  if (end && *end == '\0') {
    v.kind = TomlValue::Kind::real;
    v.real = d;
    return v;
  }
  throw ParseError(cur.where + ": cannot parse value '" + raw + "'");
}

TomlValue parse_array(Cursor& cur) {
  TomlValue v;
  v.kind = TomlValue::Kind::array;
  ++cur.pos;  // '['
  cur.skip_ws();
  while (!cur.done() && cur.peek() != ']') {
    v.array.push_back(parse_value(cur));
    cur.skip_ws();
    if (!cur.done() && cur.peek() == ',') {
      ++cur.pos;
      cur.skip_ws();
    }
  }
  if (cur.done()) throw ParseError(cur.where + ": unterminated array");
  ++cur.pos;  // ']'
  return v;
}

TomlValue parse_value(Cursor& cur) {
  cur.skip_ws();
  if (cur.done()) throw ParseError(cur.where + ": missing value");
  if (cur.peek() == '"') return parse_string(cur);
  if (cur.peek() == '[') return parse_array(cur);
  return parse_scalar(cur);
}

}  // namespace

TomlTable TomlTable::parse(const std::string& text, const std::string& origin) {
  TomlTable table;
  table.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section)) throw ParseError(where + ": bad section name '" + section + "'");
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw ParseError(where + ": bad key '" + key + "'");
    std::string full = section.empty() ? key : section + "." + key;
    if (table.values_.count(full)) throw ParseError(where + ": duplicate key '" + full + "'");
    std::string rest = trim(line.substr(eq + 1));
    Cursor cur{rest, 0, where};
    TomlValue v = parse_value(cur);
    cur.skip_ws();
    if (!cur.done()) throw ParseError(where + ": trailing characters after value");
    table.values_.emplace(std::move(full), std::move(v));
  }
  return table;
}

TomlTable TomlTable::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

bool TomlTable::has(const std::string& key) const { return values_.count(key) > 0; }

const TomlValue& TomlTable::at(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ParseError(origin_ + ": missing key '" + key + "'");
  consumed_[key] = true;
  return it->second;
}

long long TomlTable::get_int(const std::string& key, long long fallback) const {
  if (!has(key)) return fallback;
  const TomlValue& v = at(key);
  if (v.kind != TomlValue::Kind::integer)
    throw ConfigError(origin_ + ": key '" + key + "' must be an integer");
  return v.integer;
}

double TomlTable::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const TomlValue& v = at(key);
  if (v.kind == TomlValue::Kind::integer) return static_cast<double>(v.integer);
  if (v.kind != TomlValue::Kind::real)
    throw ConfigError(origin_ + ": key '" + key + "' must be a number");
  return v.real;
}

bool TomlTable::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const TomlValue& v = at(key);
  if (v.kind != TomlValue::Kind::boolean)
    throw ConfigError(origin_ + ": key '" + key + "' must be a boolean");
  return v.boolean;
}

std::string TomlTable::get_string(const std::string& key, const std::string& fallback) const {
  if (!has(key)) return fallback;
  const TomlValue& v = at(key);
  if (v.kind != TomlValue::Kind::string)
    throw ConfigError(origin_ + ": key '" + key + "' must be a string");
  return v.str;
}

std::vector<std::string> TomlTable::get_string_array(const std::string& key,
                                                     std::vector<std::string> fallback) const {
  if (!has(key)) return fallback;
  const TomlValue& v = at(key);
  if (v.kind != TomlValue::Kind::array)
    throw ConfigError(origin_ + ": key '" + key + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : v.array) {
    if (e.kind != TomlValue::Kind::string)
      throw ConfigError(origin_ + ": key '" + key + "' must contain only strings");
    out.push_back(e.str);
  }
  return out;
}

long long TomlTable::require_int(const std::string& key) const {
  if (!has(key)) throw ConfigError(origin_ + ": missing required key '" + key + "'");
  return get_int(key, 0);
}

std::vector<std::string> TomlTable::unconsumed_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_)
    if (!consumed_.count(key)) out.push_back(key);
  return out;
}

}  // namespace sar
