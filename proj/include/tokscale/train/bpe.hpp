#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>
#include <absl/container/flat_hash_set.h>

#include "tokscale/string_map.hpp"
#include "tokscale/error.hpp"
#include "tokscale/pretoken_table.hpp"
#include "tokscale/train/trainer_config.hpp"
#include "tokscale/train/word_store.hpp"
#include "tokscale/vocabulary.hpp"

namespace tokscale {

inline constexpr std::size_t kByteAlphabetSize = 256;

namespace train_detail {

struct BpeCandidate {
  std::int64_t count;
  TokenId left;
  TokenId right;
};

// Max-heap order: higher count first, then smaller left id, then smaller
// right id.
struct BpeWorse {
  bool operator()(const BpeCandidate& a, const BpeCandidate& b) const noexcept {
    if (a.count != b.count) return a.count < b.count;
    if (a.left != b.left) return a.left > b.left;
    return a.right > b.right;
  }
};

}  // namespace train_detail

// Byte-level BPE trained from aggregated pre-token counts. Each step merges
// the adjacent pair with the highest weighted count (ties: smaller left id,
// then smaller right id). Pairs never span pre-tokens. A pair is skipped for
// good if its merged token would exceed max_token_bytes or already exists.
inline Vocabulary train_bpe(const PretokenTable& table, const TrainerConfig& cfg) {
  using namespace train_detail;
  if (table.empty()) throw InvalidArgument("cannot train on an empty pre-token table");
  if (cfg.vocab_size < kByteAlphabetSize) {
    throw InvalidArgument("BPE vocab_size " + std::to_string(cfg.vocab_size) +
                          " is below the 256-byte base alphabet");
  }

  Vocabulary vocab;
  vocab.algorithm = Algorithm::Bpe;
  StringSet known;
  for (std::size_t b = 0; b < kByteAlphabetSize; ++b) {
    vocab.tokens.emplace_back(1, static_cast<char>(b));
    known.insert(vocab.tokens.back());
  }

  WordStore words;
  std::vector<TokenId> buf;
  for (const auto& [chunk, count] : table.sorted_entries()) {
    buf.assign(chunk.size(), 0);
    for (std::size_t i = 0; i < chunk.size(); ++i) buf[i] = static_cast<unsigned char>(chunk[i]);
    words.add(buf, count);
  }

  PairIndex pairs;
  pairs.build(words);
  std::vector<BpeCandidate> heap;
  heap.reserve(pairs.counts.size());
  for (const auto& [key, count] : pairs.counts) {
    heap.push_back({count, pair_left(key), pair_right(key)});
  }
  std::make_heap(heap.begin(), heap.end(), BpeWorse{});

  absl::flat_hash_set<std::uint64_t> fresh;
  while (vocab.tokens.size() < cfg.vocab_size) {
    // Stored counts only ever overestimate (existing pairs only shrink), so
    // the first entry whose count is current is the true maximum.
    bool found = false;
    BpeCandidate best{};
    while (!heap.empty()) {
      std::pop_heap(heap.begin(), heap.end(), BpeWorse{});
      const BpeCandidate top = heap.back();
      heap.pop_back();
      const std::int64_t current = pairs.count(pair_key(top.left, top.right));
      if (current <= 0) continue;
      if (current != top.count) {
        heap.push_back({current, top.left, top.right});
        std::push_heap(heap.begin(), heap.end(), BpeWorse{});
        continue;
      }
      const std::size_t merged_len = vocab.tokens[top.left].size() + vocab.tokens[top.right].size();
      if (merged_len > cfg.max_token_bytes) continue;
      if (known.contains(vocab.tokens[top.left] + vocab.tokens[top.right])) continue;
      best = top;
      found = true;
      break;
    }
    if (!found) {
      throw TrainingError("BPE ran out of mergeable pairs at vocabulary size " +
                              std::to_string(vocab.tokens.size()) + " (requested " +
                              std::to_string(cfg.vocab_size) + ")",
                          vocab.tokens.size());
    }

    const auto merged = static_cast<TokenId>(vocab.tokens.size());
    vocab.tokens.push_back(vocab.tokens[best.left] + vocab.tokens[best.right]);
    known.insert(vocab.tokens.back());
    vocab.merges.emplace_back(best.left, best.right);

    const std::uint64_t key = pair_key(best.left, best.right);
    fresh.clear();
    for (const std::uint32_t w : pairs.take_words(key)) {
      pairs.apply(words, w, best.left, best.right, merged,
                  [&](std::uint64_t k) { fresh.insert(k); });
    }
    pairs.counts.erase(key);
    for (const std::uint64_t k : fresh) {
      const std::int64_t c = pairs.count(k);
      if (c <= 0) continue;
      heap.push_back({c, pair_left(k), pair_right(k)});
      std::push_heap(heap.begin(), heap.end(), BpeWorse{});
    }
  }
  return vocab;
}

}  // namespace tokscale
