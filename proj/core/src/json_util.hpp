#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "choiceleak/error.hpp"

namespace choiceleak::detail {

using ojson = nlohmann::ordered_json;

inline ojson parse_json(std::string_view text, std::string_view what) {
  try {
    return ojson::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ParseError, std::string(what) + ": " + e.what());
  }
}

inline const ojson& require(const ojson& obj, const char* key, std::string_view what) {
  if (!obj.is_object()) throw Error(Errc::ParseError, std::string(what) + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(Errc::ParseError, std::string(what) + ": missing field '" + key + "'");
  return *it;
}

inline std::string require_string(const ojson& obj, const char* key, std::string_view what) {
  const ojson& v = require(obj, key, what);
  if (!v.is_string()) throw Error(Errc::ParseError, std::string(what) + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

inline std::int64_t as_int(const ojson& v, const char* key, std::string_view what) {
  if (!v.is_number_integer())
    throw Error(Errc::ParseError, std::string(what) + ": field '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

inline std::int64_t require_int(const ojson& obj, const char* key, std::string_view what) {
  return as_int(require(obj, key, what), key, what);
}

inline double require_number(const ojson& obj, const char* key, std::string_view what) {
  const ojson& v = require(obj, key, what);
  if (!v.is_number()) throw Error(Errc::ParseError, std::string(what) + ": field '" + key + "' must be a number");
  return v.get<double>();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(Errc::Io, "short write to '" + path + "'");
}

}  // namespace choiceleak::detail
