#pragma once

#include <array>
#include <cstdint>

#include <unicode/uchar.h>

namespace tokscale {

// Character classes used by the pre-tokenizer. A code point is in at most one
// of Letter (\p{L}), Number (\p{N}) and Whitespace (White_Space); everything
// else is Other.
enum class CharClass : std::uint8_t { Letter, Number, Whitespace, Other };

namespace detail {

inline CharClass classify_slow(char32_t c) noexcept {
  if (u_isUWhiteSpace(static_cast<UChar32>(c))) return CharClass::Whitespace;
  switch (u_charType(static_cast<UChar32>(c))) {
    case U_UPPERCASE_LETTER:
    case U_LOWERCASE_LETTER:
    case U_TITLECASE_LETTER:
    case U_MODIFIER_LETTER:
    case U_OTHER_LETTER:
      return CharClass::Letter;
    case U_DECIMAL_DIGIT_NUMBER:
    case U_LETTER_NUMBER:
    case U_OTHER_NUMBER:
      return CharClass::Number;
    default:
      return CharClass::Other;
  }
}

inline const std::array<CharClass, 128>& ascii_classes() noexcept {
  static const std::array<CharClass, 128> table = [] {
    std::array<CharClass, 128> t{};
    for (char32_t c = 0; c < 128; ++c) t[c] = classify_slow(c);
    return t;
  }();
  return table;
}

}  // namespace detail

inline CharClass classify(char32_t c) noexcept {
  if (c < 128) return detail::ascii_classes()[c];
  return detail::classify_slow(c);
}

}  // namespace tokscale
