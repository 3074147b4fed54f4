// Small serialization helpers shared by the module-level readers/writers.
#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gelflow/core.hpp"

namespace gelflow {

using Json = nlohmann::json;

// Binary payloads are little-endian float32 regardless of host order.
inline void append_f32_le(std::string& out, float v) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

inline float read_f32_le(const unsigned char* p) {
  const std::uint32_t bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                             (std::uint32_t(p[2]) << 16) |
                             (std::uint32_t(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{}) throw IoError("bad number: '" + std::string(s) + "'");
  for (const char* p = res.ptr; p != last; ++p)
    if (*p != ' ' && *p != '\t' && *p != '\r')
      throw IoError("trailing junk after number: '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("short write to " + path);
}

inline Json load_json_file(const std::string& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw IoError(path + ": " + e.what());
  }
}

inline Json json_vec(const Vec2d& v) { return Json::array({v.x(), v.y()}); }
inline Json json_vec(const Vec3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Json json_mat_row_major(const Mat3d& m) {
  Json out = Json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.push_back(m(r, c));
  return out;
}

inline Vec2d vec2_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) throw IoError(std::string(what) + ": expected 2 numbers");
  return Vec2d(j[0].get<double>(), j[1].get<double>());
}

inline Vec3d vec3_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw IoError(std::string(what) + ": expected 3 numbers");
  return Vec3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline Vec3i vec3i_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw IoError(std::string(what) + ": expected 3 integers");
  return Vec3i(j[0].get<int>(), j[1].get<int>(), j[2].get<int>());
}

inline Mat3d mat_row_major_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 9) throw IoError(std::string(what) + ": expected 9 numbers");
  Mat3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = j[3 * r + c].get<double>();
  return m;
}

}  // namespace gelflow
