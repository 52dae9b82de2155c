#include "ifproj/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "ifproj/errors.hpp"

namespace ifproj {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// strips a trailing comment that is not inside a quoted string
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

ConfigValue parse_scalar(const std::string& tok, int lineno) {
  ConfigValue v;
  if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
    v.kind = ConfigValue::Kind::string;
    v.str = tok.substr(1, tok.size() - 2);
    return v;
  }
  if (tok == "true" || tok == "false") {
    v.kind = ConfigValue::Kind::boolean;
    v.flag = (tok == "true");
    return v;
  }
  try {
    std::size_t pos = 0;
    v.num = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument("trailing");
    v.kind = ConfigValue::Kind::number;
    return v;
  } catch (const std::exception&) {
    throw ParseError("config line " + std::to_string(lineno) + ": cannot parse value '" + tok + "'");
  }
}

std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : s) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  const auto last = trim(cur);
  if (!last.empty()) out.push_back(last);
  return out;
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ParseError("config line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ParseError("config line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ParseError("config line " + std::to_string(lineno) + ": empty key or value");
    ConfigValue v;
    if (val.front() == '[') {
      if (val.back() != ']')
        throw ParseError("config line " + std::to_string(lineno) + ": unterminated array");
      v.kind = ConfigValue::Kind::array;
      for (const auto& tok : split_top_level(val.substr(1, val.size() - 2)))
        v.items.push_back(parse_scalar(tok, lineno));
    } else {
      v = parse_scalar(val, lineno);
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (!cfg.kv_.emplace(full, std::move(v)).second)
      throw ParseError("config line " + std::to_string(lineno) + ": duplicate key '" + full + "'");
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool Config::has(const std::string& key) const { return kv_.count(key) != 0; }

std::string Config::get_string(const std::string& key) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) throw SchemaError("config: missing key '" + key + "'");
  if (it->second.kind != ConfigValue::Kind::string)
    throw SchemaError("config: key '" + key + "' is not a string");
  return it->second.str;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

double Config::get_number(const std::string& key) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) throw SchemaError("config: missing key '" + key + "'");
  if (it->second.kind != ConfigValue::Kind::number)
    throw SchemaError("config: key '" + key + "' is not a number");
  return it->second.num;
}

double Config::get_number(const std::string& key, double fallback) const {
  return has(key) ? get_number(key) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (it->second.kind != ConfigValue::Kind::boolean)
    throw SchemaError("config: key '" + key + "' is not a boolean");
  return it->second.flag;
}

std::vector<double> Config::get_numbers(const std::string& key) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) throw SchemaError("config: missing key '" + key + "'");
  std::vector<double> out;
  if (it->second.kind == ConfigValue::Kind::number) {
    out.push_back(it->second.num);
    return out;
  }
  if (it->second.kind != ConfigValue::Kind::array)
    throw SchemaError("config: key '" + key + "' is not a number array");
  for (const auto& v : it->second.items) {
    if (v.kind != ConfigValue::Kind::number)
      throw SchemaError("config: key '" + key + "' mixes non-numbers into a number array");
    out.push_back(v.num);
  }
  return out;
}

std::vector<std::string> Config::get_strings(const std::string& key) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) throw SchemaError("config: missing key '" + key + "'");
  std::vector<std::string> out;
  if (it->second.kind == ConfigValue::Kind::string) {
    out.push_back(it->second.str);
    return out;
  }
  if (it->second.kind != ConfigValue::Kind::array)
    throw SchemaError("config: key '" + key + "' is not a string array");
  for (const auto& v : it->second.items) {
    if (v.kind != ConfigValue::Kind::string)
      throw SchemaError("config: key '" + key + "' mixes non-strings into a string array");
    out.push_back(v.str);
  }
  return out;
}

Schema load_schema(const std::string& path) {
  const Config cfg = Config::load(path);
  Schema s;
  s.treatment = cfg.get_string("treatment");
  s.outcome = cfg.get_string("outcome");
  if (cfg.has("covariates")) s.covariates = cfg.get_strings("covariates");
  return s;
}

}  // namespace ifproj
