#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace eltori {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Experiment configuration: one "key = value" per line, '#' starts a comment.
// Lists are comma separated. Every key must be consumed by the command that
// reads the file; leftovers are reported as unknown.
class Config {
 public:
  static Config parse(std::istream& is);
  static Config parse_string(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  double get_double(const std::string& key, double def) const;
  int get_int(const std::string& key, int def) const;
  std::string get_string(const std::string& key, const std::string& def) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& def) const;

  // Throws naming every key that no getter asked for.
  void check_unused() const;

  // Sorted "key = value" lines; the hash is FNV-1a 64 of this text.
  std::string canonical() const;
  std::uint64_t hash() const;

 private:
  const std::string* find(const std::string& key) const;
  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> used_;
};

}  // namespace eltori
