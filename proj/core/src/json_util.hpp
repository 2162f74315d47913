#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "ramtsf/errors.hpp"

namespace ramtsf::jsonutil {

using nlohmann::json;

// Strict object validation: every present key must be declared, every
// required key must be present.
inline void check_keys(const json& obj, const std::string& where,
                       std::initializer_list<const char*> required,
                       std::initializer_list<const char*> optional = {}) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : required) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      for (const char* k : optional) {
        if (it.key() == k) {
          known = true;
          break;
        }
      }
    }
    if (!known) throw ConfigError(where + ": unknown key \"" + it.key() + "\"");
  }
  for (const char* k : required) {
    if (!obj.contains(k)) throw ConfigError(where + ": missing key \"" + std::string(k) + "\"");
  }
}

inline int64_t get_i64(const json& obj, const std::string& where, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return v.get<int64_t>();
}

inline uint64_t get_u64(const json& obj, const std::string& where, const char* key) {
  const json& v = obj.at(key);
  if (v.is_number_unsigned()) return v.get<uint64_t>();
  if (v.is_number_integer() && v.get<int64_t>() >= 0) return static_cast<uint64_t>(v.get<int64_t>());
  throw ConfigError(where + "." + key + ": expected a non-negative integer");
}

inline double get_double(const json& obj, const std::string& where, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline bool get_bool(const json& obj, const std::string& where, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(where + "." + key + ": expected a boolean");
  return v.get<bool>();
}

inline std::string get_string(const json& obj, const std::string& where, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace ramtsf::jsonutil
