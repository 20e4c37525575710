#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lirls/image.hpp"

namespace lirls {

enum class KeyType { kString, kReal, kInt, kBool, kList };

struct KeySpec {
  std::string name;
  KeyType type;
  std::string default_value;
  std::string help;
};

// Flat, namespaced key=value configuration. Values are validated against the
// key's type when set; unknown keys are rejected with ErrorCode::kConfig.
class RunConfig {
 public:
  RunConfig();

  static const std::vector<KeySpec>& keys();
  static const KeySpec* find_key(const std::string& name);

  // '#' starts a comment; blank lines are ignored. Later assignments win.
  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin = "<text>");
  void set(const std::string& key, const std::string& value);
  // "key=value" with optional whitespace around both parts.
  void assign(const std::string& assignment);

  bool is_set(const std::string& key) const;  // explicitly assigned
  const std::string& raw(const std::string& key) const;
  std::string str(const std::string& key) const { return raw(key); }
  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::size_t count(const std::string& key) const;  // non-negative integer
  bool flag(const std::string& key) const;
  Vec list(const std::string& key) const;

  // One "key = value" line per key, in registry order.
  std::string resolved() const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

}  // namespace lirls
