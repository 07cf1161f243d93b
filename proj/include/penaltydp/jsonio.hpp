// Copyright 2026 The penaltydp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PENALTYDP_JSONIO_HPP_
#define PENALTYDP_JSONIO_HPP_

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

// Minimal JSON emission. Everything numeric goes out as decimal with 17
// significant digits so doubles round-trip exactly; parsing is delegated to
// a full JSON library elsewhere.

namespace penaltydp {

inline std::string fmt_double(double v) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument("cannot serialise non-finite number");
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", ch);
          out += buf;
        } else {
          out += ch;
        }
    }
  }
  return out;
}

inline std::string json_array(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += fmt_double(v[i]);
  }
  return s + "]";
}

// Order-preserving object builder.
class JsonObject {
 public:
  JsonObject& field(const std::string& k, double v) { return raw(k, fmt_double(v)); }
  JsonObject& field(const std::string& k, std::uint64_t v) {
    return raw(k, std::to_string(v));
  }
  JsonObject& field(const std::string& k, std::int64_t v) {
    return raw(k, std::to_string(v));
  }
  JsonObject& field(const std::string& k, int v) { return raw(k, std::to_string(v)); }
  JsonObject& field(const std::string& k, bool v) { return raw(k, v ? "true" : "false"); }
  JsonObject& field(const std::string& k, const std::string& v) {
    return raw(k, "\"" + json_escape(v) + "\"");
  }
  JsonObject& field(const std::string& k, const char* v) {
    return field(k, std::string(v));
  }
  JsonObject& field(const std::string& k, const std::vector<double>& v) {
    return raw(k, json_array(v));
  }
  JsonObject& field_null(const std::string& k) { return raw(k, "null"); }
  // Embeds a pre-rendered JSON value (nested object or array).
  JsonObject& raw(const std::string& k, const std::string& rendered) {
    if (!body_.empty()) body_ += ',';
    body_ += "\"" + json_escape(k) + "\":" + rendered;
    return *this;
  }
  std::string str() const { return "{" + body_ + "}"; }

 private:
  std::string body_;
};

}  // namespace penaltydp

#endif  // PENALTYDP_JSONIO_HPP_
