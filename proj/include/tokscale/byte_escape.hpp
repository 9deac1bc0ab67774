#pragma once

#include <string>
#include <string_view>

#include "tokscale/error.hpp"

namespace tokscale {

// Escape scheme shared by every text artifact: printable ASCII (0x20..0x7E)
// other than backslash is written literally, every other byte as \xNN with
// lowercase hex digits. Tab is not printable, so escaped output never
// contains a tab or newline.
inline std::string escape_bytes(std::string_view raw) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(raw.size());
  for (const char ch : raw) {
    const auto b = static_cast<unsigned char>(ch);
    if (b >= 0x20 && b <= 0x7E && b != '\\') {
      out.push_back(ch);
    } else {
      out += "\\x";
      out.push_back(kHex[b >> 4]);
      out.push_back(kHex[b & 0xF]);
    }
  }
  return out;
}

inline std::string unescape_bytes(std::string_view escaped) {
  auto hex = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw DataError("bad hex digit in escaped bytes: " + std::string(escaped));
  };
  std::string out;
  out.reserve(escaped.size());
  for (std::size_t i = 0; i < escaped.size(); ++i) {
    if (escaped[i] != '\\') {
      out.push_back(escaped[i]);
      continue;
    }
    if (i + 3 >= escaped.size()) {
      throw DataError("truncated escape in: " + std::string(escaped));
    }
    if (escaped[i + 1] != 'x') {
      throw DataError("unknown escape in: " + std::string(escaped));
    }
    out.push_back(static_cast<char>(hex(escaped[i + 2]) * 16 + hex(escaped[i + 3])));
    i += 3;
  }
  return out;
}

}  // namespace tokscale
