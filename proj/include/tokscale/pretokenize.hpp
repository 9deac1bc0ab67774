#pragma once

// Pre-tokenization: splits text into chunks with the GPT-4 (cl100k)
// pattern
//
//   '(?i:[sdmt]|ll|ve|re)|[^\r\n\p{L}\p{N}]?+\p{L}+|\p{N}{1,3}|
//    ?[^\s\p{L}\p{N}]++[\r\n]*|\s*[\r\n]|\s+(?!\S)|\s+
//
// implemented as a hand-written scanner with possessive-quantifier semantics.
// \s is Unicode White_Space, \p{L} and \p{N} are general categories.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "tokscale/unicode_class.hpp"
#include "tokscale/utf8.hpp"

namespace tokscale {

struct ChunkOptions {
  // When false the contraction branch loses its leading apostrophe, i.e.
  // (?i:[sdmt]|ll|ve|re) is tried at every position. Kept for ablations.
  bool contraction_apostrophe = true;
};

namespace detail {

class Scanner {
 public:
  explicit Scanner(std::string_view text) : s_(text) {}

  struct Char {
    char32_t cp;
    std::size_t len;  // 0 at end of input
    CharClass cls;
  };

  Char at(std::size_t pos) const noexcept {
    if (pos >= s_.size()) return {0, 0, CharClass::Other};
    const auto b = static_cast<unsigned char>(s_[pos]);
    if (b < 0x80) return {b, 1, classify(b)};
    const utf8::Decoded d = utf8::decode(s_, pos);
    return {d.code_point, d.length, classify(d.code_point)};
  }

  bool is(std::size_t pos, CharClass cls) const noexcept {
    if (pos >= s_.size()) return false;
    return at(pos).cls == cls;
  }

  // Case-insensitive match of [sdmt]|ll|ve|re starting at `pos`; returns the
  // matched byte length or 0.
  std::size_t contraction_suffix(std::size_t pos) const noexcept {
    const Char a = at(pos);
    if (a.len == 0) return 0;
    const char32_t fa = fold(a.cp);
    if (fa == 's' || fa == 'd' || fa == 'm' || fa == 't') return a.len;
    const Char b = at(pos + a.len);
    if (b.len == 0) return 0;
    const char32_t fb = fold(b.cp);
    if ((fa == 'l' && fb == 'l') || (fa == 'v' && fb == 'e') || (fa == 'r' && fb == 'e')) {
      return a.len + b.len;
    }
    return 0;
  }

  // End offset of the chunk starting at `i` (i < size).
  std::size_t chunk_end(std::size_t i, const ChunkOptions& opts) const noexcept {
    const Char c = at(i);

    // '(?i:[sdmt]|ll|ve|re)
    if (opts.contraction_apostrophe) {
      if (c.cp == '\'') {
        if (const std::size_t n = contraction_suffix(i + 1)) return i + 1 + n;
      }
    } else if (const std::size_t n = contraction_suffix(i)) {
      return i + n;
    }

    // [^\r\n\p{L}\p{N}]?+\p{L}+ ; the optional prefix is possessive.
    std::size_t j = i;
    if (c.cls != CharClass::Letter && c.cls != CharClass::Number && !is_newline(c.cp)) {
      j = i + c.len;
    }
    if (is(j, CharClass::Letter)) {
      do {
        j += at(j).len;
      } while (is(j, CharClass::Letter));
      return j;
    }

    // \p{N}{1,3}
    if (c.cls == CharClass::Number) {
      j = i + c.len;
      for (int k = 1; k < 3 && is(j, CharClass::Number); ++k) j += at(j).len;
      return j;
    }

    //  ?[^\s\p{L}\p{N}]++[\r\n]*
    j = (c.cp == ' ') ? i + 1 : i;
    if (is(j, CharClass::Other)) {
      do {
        j += at(j).len;
      } while (is(j, CharClass::Other));
      while (j < s_.size() && (s_[j] == '\r' || s_[j] == '\n')) ++j;
      return j;
    }

    // Only whitespace remains: \s*[\r\n] | \s+(?!\S) | \s+
    std::size_t end = i;
    std::size_t last_newline = std::string_view::npos;
    std::size_t last_start = i;
    while (is(end, CharClass::Whitespace)) {
      const Char w = at(end);
      if (is_newline(w.cp)) last_newline = end;
      last_start = end;
      end += w.len;
    }
    if (last_newline != std::string_view::npos) return last_newline + 1;
    if (end >= s_.size()) return end;
    if (last_start > i) return last_start;
    return end;
  }

 private:
  static bool is_newline(char32_t c) noexcept { return c == '\r' || c == '\n'; }

  static char32_t fold(char32_t c) noexcept {
    if (c >= 'A' && c <= 'Z') return c + 32;
    if (c == 0x17F) return 's';  // LATIN SMALL LETTER LONG S case-folds to s
    return c;
  }

  std::string_view s_;
};

}  // namespace detail

// Calls sink(std::string_view chunk) for each chunk, left to right. Total on
// any input; invalid UTF-8 bytes are treated as single "other" characters.
template <class Sink>
void for_each_chunk(std::string_view text, Sink&& sink, const ChunkOptions& opts = {}) {
  const detail::Scanner scanner(text);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = scanner.chunk_end(pos, opts);
    sink(text.substr(pos, end - pos));
    pos = end;
  }
}

inline std::vector<std::string_view> chunk(std::string_view text, const ChunkOptions& opts = {}) {
  std::vector<std::string_view> out;
  for_each_chunk(text, [&](std::string_view c) { out.push_back(c); }, opts);
  return out;
}

}  // namespace tokscale
