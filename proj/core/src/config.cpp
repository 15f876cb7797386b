#include "popdyn/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "popdyn/errors.hpp"

namespace popdyn {

namespace {

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// split a bracketed array body at top-level commas
std::vector<std::string> split_array(const std::string& body) {
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char c : body) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == ',' && depth == 0) {
      parts.push_back(strip(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  std::string last = strip(cur);
  if (!last.empty()) parts.push_back(last);
  return parts;
}

double parse_number(const std::string& s, const std::string& key) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || strip(std::string(end)) != "")
    throw IoError("config: bad number for '" + key + "': " + s);
  return v;
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // strip comments outside quotes
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = strip(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = strip(line.substr(1, line.size() - 2));
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError("config: line " + std::to_string(lineno) + " has no '='");
    std::string key = strip(line.substr(0, eq));
    std::string val = strip(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw IoError("config: empty key or value at line " + std::to_string(lineno));
    if (!section.empty()) key = section + "." + key;
    cfg.values_[key] = val;
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("config: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse(buf.str());
}

std::string Config::get_string(const std::string& key, const std::string& def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  std::string v = it->second;
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

int64_t Config::get_int(const std::string& key, int64_t def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  return static_cast<int64_t>(parse_number(it->second, key));
}

double Config::get_double(const std::string& key, double def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  return parse_number(it->second, key);
}

bool Config::get_bool(const std::string& key, bool def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  if (it->second == "true") return true;
  if (it->second == "false") return false;
  throw IoError("config: bad boolean for '" + key + "'");
}

std::vector<int64_t> Config::get_int_list(const std::string& key) const {
  std::vector<int64_t> out;
  for (double v : get_double_list(key)) out.push_back(static_cast<int64_t>(v));
  return out;
}

std::vector<double> Config::get_double_list(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return {};
  std::string v = it->second;
  if (v.size() < 2 || v.front() != '[' || v.back() != ']')
    throw IoError("config: '" + key + "' is not an array");
  std::vector<double> out;
  for (const std::string& p : split_array(v.substr(1, v.size() - 2)))
    out.push_back(parse_number(p, key));
  return out;
}

std::vector<std::pair<int64_t, double>> Config::get_pair_list(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return {};
  std::string v = it->second;
  if (v.size() < 2 || v.front() != '[' || v.back() != ']')
    throw IoError("config: '" + key + "' is not an array");
  std::vector<std::pair<int64_t, double>> out;
  for (const std::string& p : split_array(v.substr(1, v.size() - 2))) {
    if (p.size() < 2 || p.front() != '[' || p.back() != ']')
      throw IoError("config: '" + key + "' entries must be [index, value] pairs");
    auto parts = split_array(p.substr(1, p.size() - 2));
    if (parts.size() != 2)
      throw IoError("config: '" + key + "' entries must be [index, value] pairs");
    out.push_back({static_cast<int64_t>(parse_number(parts[0], key)), parse_number(parts[1], key)});
  }
  return out;
}

}  // namespace popdyn
