#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace tokscale::utf8 {

struct Decoded {
  char32_t code_point;
  std::uint8_t length;  // bytes consumed, 1..4
  bool valid;
};

inline constexpr char32_t kReplacement = 0xFFFD;

// Decodes the sequence starting at `pos`. Invalid or truncated sequences
// consume one byte and report valid = false.
inline Decoded decode(std::string_view s, std::size_t pos) noexcept {
  const auto* p = reinterpret_cast<const unsigned char*>(s.data()) + pos;
  const std::size_t left = s.size() - pos;
  const unsigned char b0 = p[0];
  if (b0 < 0x80) return {b0, 1, true};

  std::uint8_t len;
  char32_t cp;
  char32_t min;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2, cp = b0 & 0x1F, min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3, cp = b0 & 0x0F, min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4, cp = b0 & 0x07, min = 0x10000;
  } else {
    return {kReplacement, 1, false};
  }
  if (left < len) return {kReplacement, 1, false};
  for (std::uint8_t i = 1; i < len; ++i) {
    if ((p[i] & 0xC0) != 0x80) return {kReplacement, 1, false};
    cp = (cp << 6) | (p[i] & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    return {kReplacement, 1, false};
  }
  return {cp, len, true};
}

// Byte offset of the first invalid sequence, or nullopt for valid UTF-8.
inline std::optional<std::size_t> find_invalid(std::string_view s) noexcept {
  std::size_t pos = 0;
  while (pos < s.size()) {
    if (static_cast<unsigned char>(s[pos]) < 0x80) {
      ++pos;
      continue;
    }
    const Decoded d = decode(s, pos);
    if (!d.valid) return pos;
    pos += d.length;
  }
  return std::nullopt;
}

inline bool is_valid(std::string_view s) noexcept { return !find_invalid(s); }

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Length in bytes of the character starting at `pos` (1 for invalid bytes).
inline std::size_t char_length(std::string_view s, std::size_t pos) noexcept {
  return decode(s, pos).length;
}

}  // namespace tokscale::utf8
