#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace sls {

std::uint64_t fnv1a64(const std::string& bytes);

// Flat key=value configuration. '#' starts a comment; blank lines are
// ignored. Later assignments override earlier ones, so CLI flags can be
// layered on top of a file (flag > file > default).
class KvConfig {
 public:
  static KvConfig from_file(const std::string& path);
  static KvConfig from_string(const std::string& text, const std::string& origin = "<config>");

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_str(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Sorted key=value lines; the config hash is FNV-1a over this form.
  std::string canonical() const;
  std::uint64_t hash() const { return fnv1a64(canonical()); }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace sls
