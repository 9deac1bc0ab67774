#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>
#include <absl/container/flat_hash_set.h>

#include "tokscale/string_map.hpp"
#include "tokscale/error.hpp"
#include "tokscale/pretoken_table.hpp"
#include "tokscale/train/trainer_config.hpp"
#include "tokscale/train/word_store.hpp"
#include "tokscale/utf8.hpp"
#include "tokscale/vocabulary.hpp"

namespace tokscale {

namespace train_detail {

// Snapshot of the three counts a WordPiece score depends on.
struct WordPieceCandidate {
  std::int64_t pair_count;
  std::int64_t left_count;
  std::int64_t right_count;
  TokenId left;
  TokenId right;
};

// score = pair / (left * right), compared exactly by cross-multiplication.
// Exact for unit counts below 2^40.
inline int compare_scores(const WordPieceCandidate& a, const WordPieceCandidate& b) noexcept {
  using u128 = unsigned __int128;
  const u128 lhs = u128(a.pair_count) * (u128(b.left_count) * u128(b.right_count));
  const u128 rhs = u128(b.pair_count) * (u128(a.left_count) * u128(a.right_count));
  return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

struct WordPieceWorse {
  bool operator()(const WordPieceCandidate& a, const WordPieceCandidate& b) const noexcept {
    if (const int c = compare_scores(a, b); c != 0) return c < 0;
    if (a.left != b.left) return a.left > b.left;
    return a.right > b.right;
  }
};

// Splits a pre-token into its initial character and marked continuation
// characters: "word" -> "w", "##o", "##r", "##d".
inline std::vector<std::string> wordpiece_units(std::string_view chunk, std::string_view marker) {
  std::vector<std::string> units;
  for (std::size_t pos = 0; pos < chunk.size();) {
    const std::size_t len = utf8::char_length(chunk, pos);
    std::string u = pos == 0 ? std::string() : std::string(marker);
    u.append(chunk.substr(pos, len));
    units.push_back(std::move(u));
    pos += len;
  }
  return units;
}

}  // namespace train_detail

// Number of tokens before any merge: "[UNK]" plus every distinct unit.
inline std::size_t wordpiece_base_size(const PretokenTable& table,
                                       std::string_view marker = kDefaultContinuationMarker) {
  StringSet units;
  for (const auto& [chunk, count] : table.entries()) {
    for (auto& u : train_detail::wordpiece_units(chunk, marker)) units.insert(std::move(u));
  }
  return units.size() + 1;
}

// WordPiece trained from aggregated pre-token counts. Each step merges the
// pair maximising count(ab) / (count(a) * count(b)) among pairs seen at least
// wordpiece_min_pair_count times (ties: smaller left id, then smaller right
// id). Ids: 0 = "[UNK]", then the base units in byte order, then merges.
inline Vocabulary train_wordpiece(const PretokenTable& table, const TrainerConfig& cfg) {
  using namespace train_detail;
  if (table.empty()) throw InvalidArgument("cannot train on an empty pre-token table");
  const std::string marker(kDefaultContinuationMarker);

  Vocabulary vocab;
  vocab.algorithm = Algorithm::WordPiece;
  vocab.continuation_marker = marker;
  vocab.special = {std::string(kWordPieceUnknown)};

  const auto entries = table.sorted_entries();
  std::map<std::string, TokenId> alphabet;  // ordered: ids follow byte order
  for (const auto& [chunk, count] : entries) {
    for (auto& u : wordpiece_units(chunk, marker)) alphabet.emplace(std::move(u), 0);
  }
  vocab.tokens.emplace_back(kWordPieceUnknown);
  std::vector<bool> continuation{false};
  for (auto& [unit, id] : alphabet) {
    id = static_cast<TokenId>(vocab.tokens.size());
    vocab.tokens.push_back(unit);
    continuation.push_back(unit.size() > marker.size() && unit.compare(0, marker.size(), marker) == 0 &&
                           unit != marker);
  }
  if (cfg.vocab_size < vocab.tokens.size()) {
    throw InvalidArgument("WordPiece vocab_size " + std::to_string(cfg.vocab_size) +
                          " is below the base alphabet size " + std::to_string(vocab.tokens.size()));
  }
  StringSet known(vocab.tokens.begin(), vocab.tokens.end());

  // Content length excludes the marker.
  std::vector<std::size_t> content_len;
  for (std::size_t i = 0; i < vocab.tokens.size(); ++i) {
    content_len.push_back(vocab.tokens[i].size() - (continuation[i] ? marker.size() : 0));
  }

  WordStore words;
  std::vector<std::int64_t> unit_count(vocab.tokens.size(), 0);
  std::vector<TokenId> buf;
  for (const auto& [chunk, count] : entries) {
    buf.clear();
    for (const auto& u : wordpiece_units(chunk, marker)) {
      const TokenId id = alphabet.at(u);
      buf.push_back(id);
      unit_count[id] += static_cast<std::int64_t>(count);
    }
    words.add(buf, count);
  }
  alphabet.clear();

  PairIndex pairs;
  pairs.build(words);
  std::vector<std::vector<std::uint64_t>> by_token(vocab.tokens.size());
  for (const auto& [key, c] : pairs.counts) {
    by_token[pair_left(key)].push_back(key);
    if (pair_right(key) != pair_left(key)) by_token[pair_right(key)].push_back(key);
  }

  const auto min_count = static_cast<std::int64_t>(cfg.wordpiece_min_pair_count);
  std::vector<WordPieceCandidate> heap;
  auto push = [&](std::uint64_t key) {
    const std::int64_t pc = pairs.count(key);
    if (pc <= 0 || pc < min_count) return;
    const TokenId l = pair_left(key), r = pair_right(key);
    heap.push_back({pc, unit_count[l], unit_count[r], l, r});
    std::push_heap(heap.begin(), heap.end(), WordPieceWorse{});
  };
  for (const auto& [key, c] : pairs.counts) {
    if (c >= min_count && c > 0) {
      heap.push_back({c, unit_count[pair_left(key)], unit_count[pair_right(key)], pair_left(key),
                      pair_right(key)});
    }
  }
  std::make_heap(heap.begin(), heap.end(), WordPieceWorse{});

  absl::flat_hash_set<std::uint64_t> fresh;
  absl::flat_hash_set<std::uint64_t> rescore;
  while (vocab.tokens.size() < cfg.vocab_size) {
    // Any change to a pair's three counts pushes a new entry, so an entry that
    // no longer matches the live counts is simply dropped.
    bool found = false;
    WordPieceCandidate best{};
    while (!heap.empty()) {
      std::pop_heap(heap.begin(), heap.end(), WordPieceWorse{});
      const WordPieceCandidate top = heap.back();
      heap.pop_back();
      if (pairs.count(pair_key(top.left, top.right)) != top.pair_count ||
          unit_count[top.left] != top.left_count || unit_count[top.right] != top.right_count) {
        continue;
      }
      if (content_len[top.left] + content_len[top.right] > cfg.max_token_bytes) continue;
      const std::string merged =
          vocab.tokens[top.left] + vocab.tokens[top.right].substr(marker.size());
      if (known.contains(merged)) continue;
      best = top;
      found = true;
      break;
    }
    if (!found) {
      throw TrainingError("WordPiece ran out of qualifying pairs at vocabulary size " +
                              std::to_string(vocab.tokens.size()) + " (requested " +
                              std::to_string(cfg.vocab_size) + ")",
                          vocab.tokens.size());
    }

    const auto merged = static_cast<TokenId>(vocab.tokens.size());
    vocab.tokens.push_back(vocab.tokens[best.left] + vocab.tokens[best.right].substr(marker.size()));
    known.insert(vocab.tokens.back());
    continuation.push_back(continuation[best.left]);
    content_len.push_back(content_len[best.left] + content_len[best.right]);
    vocab.merges.emplace_back(best.left, best.right);
    unit_count.push_back(0);
    by_token.emplace_back();

    const std::uint64_t key = pair_key(best.left, best.right);
    fresh.clear();
    for (const std::uint32_t w : pairs.take_words(key)) {
      const std::size_t n = pairs.apply(words, w, best.left, best.right, merged,
                                        [&](std::uint64_t k) { fresh.insert(k); });
      const auto moved = static_cast<std::int64_t>(n * words.count(w));
      unit_count[best.left] -= moved;
      unit_count[best.right] -= moved;
      unit_count[merged] += moved;
    }
    pairs.counts.erase(key);
    for (const std::uint64_t k : fresh) {
      by_token[pair_left(k)].push_back(k);
      if (pair_right(k) != pair_left(k)) by_token[pair_right(k)].push_back(k);
    }

    // Every pair touching left, right or the new token has a changed score.
    rescore.clear();
    for (const TokenId t : {best.left, best.right}) {
      auto& list = by_token[t];
      std::size_t keep = 0;
      for (const std::uint64_t k : list) {
        if (pairs.count(k) <= 0) continue;
        list[keep++] = k;
        rescore.insert(k);
      }
      list.resize(keep);
    }
    for (const std::uint64_t k : fresh) rescore.insert(k);
    for (const std::uint64_t k : rescore) push(k);
  }
  return vocab;
}

}  // namespace tokscale
