#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "tokscale/vocabulary.hpp"

namespace tokscale {

// Byte trie over token strings, used to enumerate every token that starts at
// a given position of a chunk.
class ByteTrie {
 public:
  static constexpr std::int64_t kNone = -1;

  ByteTrie() { values_.push_back(kNone); }

  void insert(std::string_view key, TokenId id) {
    std::uint32_t node = 0;
    for (const char ch : key) {
      const auto b = static_cast<unsigned char>(ch);
      const std::uint64_t edge = (std::uint64_t{node} << 8) | b;
      auto it = edges_.find(edge);
      if (it == edges_.end()) {
        const auto child = static_cast<std::uint32_t>(values_.size());
        values_.push_back(kNone);
        edges_.emplace(edge, child);
        node = child;
      } else {
        node = it->second;
      }
    }
    values_[node] = id;
    if (key.size() > max_length_) max_length_ = key.size();
  }

  // Calls f(end, id) for each key equal to text[from, end), shortest first.
  template <class F>
  void for_each_prefix(std::string_view text, std::size_t from, F&& f) const {
    std::uint32_t node = 0;
    const std::size_t limit = std::min(text.size(), from + max_length_);
    for (std::size_t i = from; i < limit; ++i) {
      auto it = edges_.find((std::uint64_t{node} << 8) | static_cast<unsigned char>(text[i]));
      if (it == edges_.end()) return;
      node = it->second;
      if (values_[node] != kNone) f(i + 1, static_cast<TokenId>(values_[node]));
    }
  }

  std::size_t max_length() const noexcept { return max_length_; }

 private:
  std::vector<std::int64_t> values_;
  absl::flat_hash_map<std::uint64_t, std::uint32_t> edges_;
  std::size_t max_length_ = 0;
};

}  // namespace tokscale
