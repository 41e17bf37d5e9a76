#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>

#include "armtune/errors.hpp"

namespace armtune {

// A sampled hyperparameter value: continuous, integer, or categorical label.
using ParamValue = std::variant<double, std::int64_t, std::string>;

// Name -> value; std::map keeps key order deterministic.
using ParamMap = std::map<std::string, ParamValue>;

inline double as_double(const ParamValue& v) {
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  if (std::holds_alternative<std::int64_t>(v)) return static_cast<double>(std::get<std::int64_t>(v));
  throw UsageError("hyperparameter is not numeric");
}

inline std::int64_t as_int(const ParamValue& v) {
  if (std::holds_alternative<std::int64_t>(v)) return std::get<std::int64_t>(v);
  throw UsageError("hyperparameter is not an integer");
}

inline bool as_bool(const ParamValue& v) {
  if (std::holds_alternative<std::string>(v)) {
    const std::string& s = std::get<std::string>(v);
    if (s == "true") return true;
    if (s == "false") return false;
  }
  throw UsageError("hyperparameter is not a true/false category");
}

inline double get_double(const ParamMap& m, const std::string& name, double fallback) {
  auto it = m.find(name);
  return it == m.end() ? fallback : as_double(it->second);
}

inline int get_int(const ParamMap& m, const std::string& name, int fallback) {
  auto it = m.find(name);
  return it == m.end() ? fallback : static_cast<int>(as_int(it->second));
}

inline bool get_bool(const ParamMap& m, const std::string& name, bool fallback) {
  auto it = m.find(name);
  return it == m.end() ? fallback : as_bool(it->second);
}

}  // namespace armtune
