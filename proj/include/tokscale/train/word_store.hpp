#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "tokscale/vocabulary.hpp"

namespace tokscale::train_detail {

inline std::uint64_t pair_key(TokenId left, TokenId right) noexcept {
  return (std::uint64_t{left} << 32) | right;
}
inline TokenId pair_left(std::uint64_t key) noexcept { return static_cast<TokenId>(key >> 32); }
inline TokenId pair_right(std::uint64_t key) noexcept { return static_cast<TokenId>(key); }

// Unique pre-tokens as symbol sequences in one flat buffer. Merges shrink a
// word in place.
class WordStore {
 public:
  void add(std::span<const TokenId> symbols, std::uint64_t count) {
    offsets_.push_back(symbols_.size());
    lengths_.push_back(static_cast<std::uint32_t>(symbols.size()));
    counts_.push_back(count);
    symbols_.insert(symbols_.end(), symbols.begin(), symbols.end());
  }

  std::size_t size() const noexcept { return counts_.size(); }
  std::uint64_t count(std::size_t w) const noexcept { return counts_[w]; }
  std::span<TokenId> word(std::size_t w) noexcept {
    return {symbols_.data() + offsets_[w], lengths_[w]};
  }
  std::span<const TokenId> word(std::size_t w) const noexcept {
    return {symbols_.data() + offsets_[w], lengths_[w]};
  }

  // Replaces non-overlapping (left, right) occurrences, left to right.
  // Returns the number of replacements.
  std::size_t merge(std::size_t w, TokenId left, TokenId right, TokenId merged) noexcept {
    std::span<TokenId> s = word(w);
    std::size_t out = 0;
    std::size_t replaced = 0;
    for (std::size_t i = 0; i < s.size();) {
      if (i + 1 < s.size() && s[i] == left && s[i + 1] == right) {
        s[out++] = merged;
        i += 2;
        ++replaced;
      } else {
        s[out++] = s[i++];
      }
    }
    lengths_[w] = static_cast<std::uint32_t>(out);
    return replaced;
  }

 private:
  std::vector<TokenId> symbols_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> lengths_;
  std::vector<std::uint64_t> counts_;
};

// Weighted counts of adjacent pairs plus, per pair, the words that may hold
// it. The word lists are append-only and may contain stale entries.
struct PairIndex {
  absl::flat_hash_map<std::uint64_t, std::int64_t> counts;
  absl::flat_hash_map<std::uint64_t, std::vector<std::uint32_t>> where;

  std::int64_t count(std::uint64_t key) const {
    auto it = counts.find(key);
    return it == counts.end() ? 0 : it->second;
  }

  void note(std::uint64_t key, std::uint32_t w) {
    auto& list = where[key];
    if (list.empty() || list.back() != w) list.push_back(w);
  }

  void build(const WordStore& words) {
    for (std::size_t w = 0; w < words.size(); ++w) {
      const auto s = words.word(w);
      const auto c = static_cast<std::int64_t>(words.count(w));
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const std::uint64_t key = pair_key(s[i], s[i + 1]);
        counts[key] += c;
        note(key, static_cast<std::uint32_t>(w));
      }
    }
  }

  // Words listed for `key`, deduplicated and sorted; the list is released.
  std::vector<std::uint32_t> take_words(std::uint64_t key) {
    std::vector<std::uint32_t> out;
    auto it = where.find(key);
    if (it == where.end()) return out;
    out = std::move(it->second);
    where.erase(it);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Applies a merge to word `w`, keeping pair counts exact. Pairs containing
  // `merged` are reported through on_new_pair(key) and indexed.
  template <class OnNewPair>
  std::size_t apply(WordStore& words, std::uint32_t w, TokenId left, TokenId right, TokenId merged,
                    OnNewPair&& on_new_pair) {
    auto s = words.word(w);
    bool present = false;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      if (s[i] == left && s[i + 1] == right) {
        present = true;
        break;
      }
    }
    if (!present) return 0;
    const auto c = static_cast<std::int64_t>(words.count(w));
    for (std::size_t i = 0; i + 1 < s.size(); ++i) counts[pair_key(s[i], s[i + 1])] -= c;
    const std::size_t replaced = words.merge(w, left, right, merged);
    s = words.word(w);
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const std::uint64_t key = pair_key(s[i], s[i + 1]);
      counts[key] += c;
      if (s[i] == merged || s[i + 1] == merged) {
        note(key, w);
        on_new_pair(key);
      }
    }
    return replaced;
  }
};

}  // namespace tokscale::train_detail
