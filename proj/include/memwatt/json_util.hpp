// Strict-schema helpers on top of nlohmann::json: every document we accept
// rejects unknown fields, so config typos fail loudly instead of being
// silently ignored.
#pragma once

#include <json.hpp>

#include <cstdint>
#include <initializer_list>
#include <string>

#include "memwatt/errors.hpp"

namespace memwatt::detail {

using json = nlohmann::json;

inline json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw schema_error(what + ": not valid JSON");
  return j;
}

inline void expect_object(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw schema_error(ctx + ": expected an object");
}

// Rejects members outside `allowed` and requires the `required` subset.
inline void check_fields(const json& j, const std::string& ctx,
                         std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional) {
  expect_object(j, ctx);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : required)
      if (it.key() == k) known = true;
    for (const char* k : optional)
      if (it.key() == k) known = true;
    if (!known) throw schema_error(ctx + ": unknown field \"" + it.key() + "\"");
  }
  for (const char* k : required)
    if (!j.contains(k)) throw schema_error(ctx + ": missing field \"" + k + "\"");
}

inline int get_int(const json& j, const char* key, const std::string& ctx) {
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw schema_error(ctx + ": field \"" + key + "\" must be an integer");
  return v.get<int>();
}

inline std::uint64_t get_uint64(const json& j, const char* key, const std::string& ctx) {
  const json& v = j.at(key);
  bool ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  if (!ok) throw schema_error(ctx + ": field \"" + key + "\" must be a non-negative integer");
  return v.get<std::uint64_t>();
}

inline double get_number(const json& j, const char* key, const std::string& ctx) {
  const json& v = j.at(key);
  if (!v.is_number()) throw schema_error(ctx + ": field \"" + key + "\" must be a number");
  return v.get<double>();
}

inline std::string get_string(const json& j, const char* key, const std::string& ctx) {
  const json& v = j.at(key);
  if (!v.is_string()) throw schema_error(ctx + ": field \"" + key + "\" must be a string");
  return v.get<std::string>();
}

inline const json& get_array(const json& j, const char* key, const std::string& ctx) {
  const json& v = j.at(key);
  if (!v.is_array()) throw schema_error(ctx + ": field \"" + key + "\" must be an array");
  return v;
}

}  // namespace memwatt::detail
