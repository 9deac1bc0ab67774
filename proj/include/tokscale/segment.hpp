#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "tokscale/string_map.hpp"
#include "tokscale/byte_trie.hpp"
#include "tokscale/error.hpp"
#include "tokscale/pretoken_table.hpp"
#include "tokscale/pretokenize.hpp"
#include "tokscale/vocabulary.hpp"

namespace tokscale {

// Encoder/decoder for a trained vocabulary. Text is pre-tokenized and every
// chunk is encoded independently:
//   bpe:       merges applied in learned order (lowest rank first,
//              left to right among equal ranks)
//   unigram:   maximum log-probability segmentation; ties go to fewer tokens,
//              then to the smallest first token id
//   wordpiece: greedy longest prefix, "[UNK]" for the whole chunk on failure
// Immutable after construction; safe to share between threads.
class Tokenizer {
 public:
  explicit Tokenizer(Vocabulary vocab, ChunkOptions chunking = {})
      : vocab_(std::make_shared<const Vocabulary>(std::move(vocab))), chunking_(chunking) {
    const Vocabulary& v = *vocab_;
    digest_ = vocabulary_digest(v);
    switch (v.algorithm) {
      case Algorithm::Bpe: init_bpe(v); break;
      case Algorithm::Unigram: init_unigram(v); break;
      case Algorithm::WordPiece: init_wordpiece(v); break;
    }
  }

  const Vocabulary& vocabulary() const noexcept { return *vocab_; }
  const std::string& digest() const noexcept { return digest_; }

  std::vector<TokenId> encode(std::string_view text) const {
    std::vector<TokenId> out;
    for_each_chunk(text, [&](std::string_view c) { encode_chunk(c, out); }, chunking_);
    return out;
  }

  void encode_chunk(std::string_view chunk, std::vector<TokenId>& out) const {
    switch (vocab_->algorithm) {
      case Algorithm::Bpe: return encode_bpe(chunk, out);
      case Algorithm::Unigram: return encode_unigram(chunk, out);
      case Algorithm::WordPiece: return encode_wordpiece(chunk, out);
    }
  }

  std::vector<TokenId> encode_chunk(std::string_view chunk) const {
    std::vector<TokenId> out;
    encode_chunk(chunk, out);
    return out;
  }

  std::string decode(std::span<const TokenId> ids) const {
    const Vocabulary& v = *vocab_;
    std::string out;
    for (const TokenId id : ids) {
      if (id >= v.tokens.size()) {
        throw InvalidArgument("token id " + std::to_string(id) + " out of range for vocabulary of size " +
                              std::to_string(v.tokens.size()));
      }
      const std::string& t = v.tokens[id];
      if (v.algorithm == Algorithm::Unigram && id == unknown_id_) {
        out += "\xEF\xBF\xBD";
      } else if (v.algorithm == Algorithm::WordPiece && is_continuation(t)) {
        out.append(t, v.continuation_marker.size());
      } else {
        out += t;
      }
    }
    return out;
  }

  // Byte lengths of the pieces of a chunk, markers excluded.
  std::size_t surface_length(TokenId id) const {
    const std::string& t = vocab_->tokens.at(id);
    if (vocab_->algorithm == Algorithm::WordPiece && is_continuation(t)) {
      return t.size() - vocab_->continuation_marker.size();
    }
    return t.size();
  }

  bool is_unknown(TokenId id) const noexcept { return has_unknown_ && id == unknown_id_; }

  // Byte width of every emitted token, so boundaries can be placed in the
  // input. WordPiece's unknown stands for its whole chunk, UnigramLM's for a
  // single byte.
  std::vector<std::size_t> token_widths(std::string_view text) const {
    std::vector<std::size_t> widths;
    std::vector<TokenId> ids;
    for_each_chunk(text, [&](std::string_view c) {
      ids.clear();
      encode_chunk(c, ids);
      for (const TokenId id : ids) {
        if (is_unknown(id)) {
          widths.push_back(vocab_->algorithm == Algorithm::WordPiece ? c.size() : 1);
        } else {
          widths.push_back(surface_length(id));
        }
      }
    }, chunking_);
    return widths;
  }

 private:
  bool is_continuation(const std::string& t) const noexcept {
    const std::string& m = vocab_->continuation_marker;
    return !m.empty() && t.size() > m.size() && t.compare(0, m.size(), m) == 0;
  }

  void init_bpe(const Vocabulary& v) {
    if (v.tokens.size() < 256) throw InvalidArgument("BPE vocabulary lacks the byte alphabet");
    for (std::size_t b = 0; b < 256; ++b) {
      if (v.tokens[b].size() != 1 || static_cast<unsigned char>(v.tokens[b][0]) != b) {
        throw InvalidArgument("BPE vocabulary: token " + std::to_string(b) + " is not byte " + std::to_string(b));
      }
    }
    if (v.merges.size() + 256 != v.tokens.size()) {
      throw InvalidArgument("BPE vocabulary: merges do not account for every non-byte token");
    }
    for (std::size_t k = 0; k < v.merges.size(); ++k) {
      const auto [l, r] = v.merges[k];
      const auto produced = static_cast<TokenId>(256 + k);
      if (l >= produced || r >= produced) throw InvalidArgument("BPE vocabulary: merge references a later token");
      merge_rank_.emplace((std::uint64_t{l} << 32) | r, std::pair<std::uint32_t, TokenId>(k, produced));
    }
  }

  void init_unigram(const Vocabulary& v) {
    if (v.scores.size() != v.tokens.size()) throw InvalidArgument("UnigramLM vocabulary: scores/tokens mismatch");
    for (std::size_t i = 0; i < v.tokens.size(); ++i) {
      if (std::find(v.special.begin(), v.special.end(), v.tokens[i]) != v.special.end()) {
        if (v.tokens[i] == kUnigramUnknown) {
          unknown_id_ = static_cast<TokenId>(i);
          has_unknown_ = true;
        }
        continue;
      }
      trie_.insert(v.tokens[i], static_cast<TokenId>(i));
    }
  }

  void init_wordpiece(const Vocabulary& v) {
    for (std::size_t i = 0; i < v.tokens.size(); ++i) lookup_.emplace(v.tokens[i], static_cast<TokenId>(i));
    auto it = lookup_.find(kWordPieceUnknown);
    if (it == lookup_.end()) throw InvalidArgument("WordPiece vocabulary lacks [UNK]");
    unknown_id_ = it->second;
    has_unknown_ = true;
    for (const auto& t : v.tokens) {
      max_piece_bytes_ = std::max(max_piece_bytes_, is_continuation(t) ? t.size() - v.continuation_marker.size()
                                                                        : t.size());
    }
  }

  void encode_bpe(std::string_view chunk, std::vector<TokenId>& out) const {
    const std::size_t n = chunk.size();
    if (n == 0) return;
    if (n == 1) {
      out.push_back(static_cast<unsigned char>(chunk[0]));
      return;
    }
    // Doubly linked list over symbols; heap of (rank, position) candidates.
    std::vector<TokenId> sym(n);
    std::vector<std::int32_t> prev(n), next(n);
    for (std::size_t i = 0; i < n; ++i) {
      sym[i] = static_cast<unsigned char>(chunk[i]);
      prev[i] = static_cast<std::int32_t>(i) - 1;
      next[i] = i + 1 < n ? static_cast<std::int32_t>(i + 1) : -1;
    }
    struct Cand {
      std::uint32_t rank;
      std::int32_t pos;
      TokenId left, right;
      bool operator>(const Cand& o) const noexcept {
        return rank != o.rank ? rank > o.rank : pos > o.pos;
      }
    };
    std::priority_queue<Cand, std::vector<Cand>, std::greater<>> heap;
    auto consider = [&](std::int32_t pos) {
      if (pos < 0 || next[pos] < 0) return;
      auto it = merge_rank_.find((std::uint64_t{sym[pos]} << 32) | sym[next[pos]]);
      if (it != merge_rank_.end()) heap.push({it->second.first, pos, sym[pos], sym[next[pos]]});
    };
    for (std::int32_t i = 0; i + 1 < static_cast<std::int32_t>(n); ++i) consider(i);
    while (!heap.empty()) {
      const Cand c = heap.top();
      heap.pop();
      const std::int32_t nx = next[c.pos];
      if (sym[c.pos] != c.left || nx < 0 || sym[nx] != c.right) continue;  // stale
      if (prev[c.pos] == -2) continue;  // removed
      sym[c.pos] = merge_rank_.at((std::uint64_t{c.left} << 32) | c.right).second;
      next[c.pos] = next[nx];
      if (next[nx] >= 0) prev[next[nx]] = c.pos;
      prev[nx] = -2;
      sym[nx] = std::numeric_limits<TokenId>::max();
      consider(prev[c.pos]);
      consider(c.pos);
    }
    for (std::int32_t i = 0; i >= 0; i = next[i]) out.push_back(sym[i]);
  }

  // Suffix dynamic programme: best[i] describes the optimal segmentation of
  // chunk[i:]. Comparing (score, token count, first id) at each position
  // yields the lexicographic tie-break over whole id sequences.
  void encode_unigram(std::string_view chunk, std::vector<TokenId>& out) const {
    const std::size_t n = chunk.size();
    if (n == 0) return;
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    struct Best {
      double score = kNegInf;
      std::uint32_t tokens = 0;
      TokenId first = 0;
      std::uint32_t end = 0;
    };
    const auto& scores = vocab_->scores;
    std::vector<Best> best(n + 1);
    best[n].score = 0.0;
    auto offer = [&](std::size_t i, std::size_t end, TokenId id, double piece_score) {
      if (best[end].score == kNegInf) return;
      const double s = piece_score + best[end].score;
      const std::uint32_t cnt = best[end].tokens + 1;
      Best& b = best[i];
      if (s > b.score || (s == b.score && (cnt < b.tokens || (cnt == b.tokens && id < b.first)))) {
        b = {s, cnt, id, static_cast<std::uint32_t>(end)};
      }
    };
    for (std::size_t i = n; i-- > 0;) {
      bool any = false;
      trie_.for_each_prefix(chunk, i, [&](std::size_t end, TokenId id) {
        any = true;
        offer(i, end, id, scores[id]);
      });
      if (!any || (best[i].score == kNegInf)) {
        // Byte not covered by the vocabulary.
        if (!has_unknown_) throw InvalidArgument("UnigramLM vocabulary cannot segment input and has no <unk>");
        offer(i, i + 1, unknown_id_, scores[unknown_id_]);
      }
    }
    for (std::size_t pos = 0; pos < n; pos = best[pos].end) out.push_back(best[pos].first);
  }

  void encode_wordpiece(std::string_view chunk, std::vector<TokenId>& out) const {
    const std::size_t start = out.size();
    const std::string& marker = vocab_->continuation_marker;
    std::string key;
    for (std::size_t pos = 0; pos < chunk.size();) {
      const std::size_t longest = std::min(max_piece_bytes_, chunk.size() - pos);
      bool matched = false;
      for (std::size_t len = longest; len > 0; --len) {
        key.clear();
        if (pos > 0) key = marker;
        key.append(chunk.substr(pos, len));
        auto it = lookup_.find(key);
        if (it != lookup_.end() && it->second != unknown_id_) {
          out.push_back(it->second);
          pos += len;
          matched = true;
          break;
        }
      }
      if (!matched) {
        out.resize(start);
        out.push_back(unknown_id_);
        return;
      }
    }
  }

  std::shared_ptr<const Vocabulary> vocab_;
  ChunkOptions chunking_;
  std::string digest_;
  absl::flat_hash_map<std::uint64_t, std::pair<std::uint32_t, TokenId>> merge_rank_;
  ByteTrie trie_;
  StringMap<TokenId> lookup_;
  std::size_t max_piece_bytes_ = 0;
  TokenId unknown_id_ = 0;
  bool has_unknown_ = false;
};

inline std::vector<TokenId> encode(const Vocabulary& vocab, std::string_view text) {
  return Tokenizer(vocab).encode(text);
}

inline std::string decode(const Vocabulary& vocab, std::span<const TokenId> ids) {
  return Tokenizer(vocab).decode(ids);
}

// Per-token usage over an evaluation corpus.
struct TokenUsageStats {
  std::vector<std::uint64_t> counts;  // indexed by token id, size = |vocabulary|
  std::uint64_t total_tokens = 0;
  std::uint64_t total_bytes = 0;
  std::string vocab_ref;  // digest of the vocabulary

  std::size_t vocab_size() const noexcept { return counts.size(); }

  friend bool operator==(const TokenUsageStats&, const TokenUsageStats&) = default;
};

// Encodes each unique chunk once and scales its usage by the chunk count.
inline TokenUsageStats encode_table(const Tokenizer& tok, const PretokenTable& table, unsigned workers = 1) {
  TokenUsageStats stats;
  stats.vocab_ref = tok.digest();
  stats.total_bytes = table.total_bytes();
  const std::size_t v = tok.vocabulary().size();
  stats.counts.assign(v, 0);
  if (table.empty()) return stats;

  std::vector<std::pair<std::string_view, std::uint64_t>> entries(table.entries().begin(), table.entries().end());
  const std::size_t shards = std::max<std::size_t>(1, std::min<std::size_t>(workers, entries.size()));
  std::vector<std::vector<std::uint64_t>> partial(shards, std::vector<std::uint64_t>(v, 0));
  auto run = [&](std::size_t s) {
    std::vector<TokenId> ids;
    for (std::size_t i = entries.size() * s / shards; i < entries.size() * (s + 1) / shards; ++i) {
      ids.clear();
      tok.encode_chunk(entries[i].first, ids);
      for (const TokenId id : ids) partial[s][id] += entries[i].second;
    }
  };
  if (shards == 1) {
    run(0);
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t s = 0; s < shards; ++s) threads.emplace_back(run, s);
  }
  for (const auto& p : partial) {
    for (std::size_t i = 0; i < v; ++i) stats.counts[i] = checked_add(stats.counts[i], p[i]);
  }
  for (const std::uint64_t c : stats.counts) stats.total_tokens = checked_add(stats.total_tokens, c);
  return stats;
}

inline TokenUsageStats encode_table(const Vocabulary& vocab, const PretokenTable& table, unsigned workers = 1) {
  return encode_table(Tokenizer(vocab), table, workers);
}

// File format:
//   # total_tokens=<n> total_bytes=<m> vocab_size=<v> vocab_ref=<digest>
//   <token id>\t<count>      (non-zero counts, ascending id)
inline void write_stats(std::ostream& out, const TokenUsageStats& s) {
  out << "# total_tokens=" << s.total_tokens << " total_bytes=" << s.total_bytes
      << " vocab_size=" << s.counts.size() << " vocab_ref=" << s.vocab_ref << '\n';
  for (std::size_t i = 0; i < s.counts.size(); ++i) {
    if (s.counts[i] != 0) out << i << '\t' << s.counts[i] << '\n';
  }
}

inline TokenUsageStats read_stats(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw DataError("stats file: missing header line");
  TokenUsageStats s;
  const std::uint64_t total_tokens = detail::header_field(line, "total_tokens");
  s.total_bytes = detail::header_field(line, "total_bytes");
  s.counts.assign(detail::header_field(line, "vocab_size"), 0);
  const std::size_t ref = line.find("vocab_ref=");
  if (ref == std::string::npos) throw DataError("stats file: header missing 'vocab_ref'");
  s.vocab_ref = line.substr(ref + 10, line.find(' ', ref) - (ref + 10));
  while (std::getline(in, line)) {
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("stats file: malformed line '" + line + "'");
    const std::uint64_t id = detail::parse_u64(std::string_view(line).substr(0, tab), "token id");
    if (id >= s.counts.size()) throw DataError("stats file: token id " + std::to_string(id) + " out of range");
    s.counts[id] = detail::parse_u64(std::string_view(line).substr(tab + 1), "count");
    s.total_tokens = checked_add(s.total_tokens, s.counts[id]);
  }
  if (s.total_tokens != total_tokens) throw DataError("stats file: total_tokens does not match counts");
  return s;
}

}  // namespace tokscale
