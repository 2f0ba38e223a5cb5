#pragma once

#include <string>

#include "json.hpp"

#include "chw/errors.hpp"
#include "chw/rational.hpp"

namespace chw {

// Numbers are read exactly: "p/q" strings, integers, or the shortest
// round-trip decimal text of a JSON double.
inline Rational rational_from_json(const nlohmann::json& v) {
  if (v.is_string()) return parse_rational(v.get<std::string>());
  if (v.is_number_integer()) return Rational(v.get<long>());
  if (v.is_number()) return parse_rational(v.dump());
  throw ValidationError("expected a number or \"p/q\" string, got " + v.dump());
}

inline double double_from_json(const nlohmann::json& v) {
  if (v.is_number()) return v.get<double>();
  return rational_from_json(v).get_d();
}

// Required key with a uniform error message.
inline const nlohmann::json& require_key(const nlohmann::json& j, const std::string& key,
                                         const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw UsageError(where + ": missing required key '" + key + "'");
  return j.at(key);
}

}  // namespace chw
