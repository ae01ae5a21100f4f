#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ttt {

// Plain-text key=value configuration. Lines starting with '#' and blank
// lines are ignored; whitespace around keys and values is trimmed.
class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;

  // Comma-separated integer list.
  std::vector<std::int64_t> get_int_list(const std::string& key,
                                         const std::vector<std::int64_t>& fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ttt
