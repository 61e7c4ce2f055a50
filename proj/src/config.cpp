#include "eltori/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace eltori {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError("key '" + key + "': not a number: '" + v + "'");
  return x;
}

}  // namespace

Config Config::parse(std::istream& is) {
  Config c;
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected 'key = value'");
    std::string k = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
    if (k.empty() || v.empty()) throw ConfigError("line " + std::to_string(n) + ": empty key or value");
    if (!c.kv_.emplace(k, v).second) throw ConfigError("line " + std::to_string(n) + ": duplicate key '" + k + "'");
  }
  return c;
}

Config Config::parse_string(const std::string& text) {
  std::istringstream is(text);
  return parse(is);
}

Config Config::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  return parse(is);
}

const std::string* Config::find(const std::string& key) const {
  used_.insert(key);
  auto it = kv_.find(key);
  return it == kv_.end() ? nullptr : &it->second;
}

double Config::get_double(const std::string& key, double def) const {
  const std::string* v = find(key);
  return v ? to_double(key, *v) : def;
}

int Config::get_int(const std::string& key, int def) const {
  const std::string* v = find(key);
  if (!v) return def;
  int x = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
  if (ec != std::errc() || p != v->data() + v->size()) throw ConfigError("key '" + key + "': not an integer: '" + *v + "'");
  return x;
}

std::string Config::get_string(const std::string& key, const std::string& def) const {
  const std::string* v = find(key);
  return v ? *v : def;
}

std::vector<double> Config::get_list(const std::string& key, const std::vector<double>& def) const {
  const std::string* v = find(key);
  if (!v) return def;
  std::vector<double> out;
  std::istringstream is(*v);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(to_double(key, trim(item)));
  return out;
}

void Config::check_unused() const {
  std::string bad;
  for (const auto& [k, _] : kv_)
    if (!used_.count(k)) bad += (bad.empty() ? "" : ", ") + k;
  if (!bad.empty()) throw ConfigError("unknown keys: " + bad);
}

std::string Config::canonical() const {
  std::string s;
  for (const auto& [k, v] : kv_) s += k + " = " + v + "\n";
  return s;
}

std::uint64_t Config::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace eltori
