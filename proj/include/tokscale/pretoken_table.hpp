#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "tokscale/string_map.hpp"
#include "tokscale/byte_escape.hpp"
#include "tokscale/corpus.hpp"
#include "tokscale/digest.hpp"
#include "tokscale/error.hpp"
#include "tokscale/pretokenize.hpp"

namespace tokscale {

// Aggregated pre-token counts over a corpus: the only input the trainers see.
class PretokenTable {
 public:
  using Map = StringMap<std::uint64_t>;
  using Entry = std::pair<std::string_view, std::uint64_t>;

  void add(std::string_view chunk, std::uint64_t count = 1) {
    if (count == 0) return;
    if (chunk.empty()) throw InvalidArgument("pre-tokens must be non-empty");
    const std::uint64_t bytes = checked_mul(count, chunk.size());
    auto it = counts_.find(chunk);
    if (it == counts_.end()) {
      counts_.emplace(std::string(chunk), count);
    } else {
      it->second = checked_add(it->second, count);
    }
    total_count_ = checked_add(total_count_, count);
    total_bytes_ = checked_add(total_bytes_, bytes);
  }

  // Pointwise addition.
  void merge(const PretokenTable& other) {
    counts_.reserve(counts_.size() + other.counts_.size() / 2);
    for (const auto& [chunk, count] : other.counts_) add(chunk, count);
  }

  std::uint64_t count(std::string_view chunk) const {
    auto it = counts_.find(chunk);
    return it == counts_.end() ? 0 : it->second;
  }

  bool empty() const noexcept { return counts_.empty(); }
  std::size_t size() const noexcept { return counts_.size(); }
  std::uint64_t total_count() const noexcept { return total_count_; }
  std::uint64_t total_bytes() const noexcept { return total_bytes_; }
  const Map& entries() const noexcept { return counts_; }

  // Entries in canonical order: lexicographic by raw bytes.
  std::vector<Entry> sorted_entries() const {
    std::vector<Entry> out(counts_.begin(), counts_.end());
    std::sort(out.begin(), out.end(),
              [](const Entry& a, const Entry& b) { return a.first < b.first; });
    return out;
  }

  friend bool operator==(const PretokenTable& a, const PretokenTable& b) {
    return a.total_count_ == b.total_count_ && a.total_bytes_ == b.total_bytes_ &&
           a.counts_ == b.counts_;
  }

 private:
  Map counts_;
  std::uint64_t total_count_ = 0;
  std::uint64_t total_bytes_ = 0;
};

inline PretokenTable merge_tables(const PretokenTable& a, const PretokenTable& b) {
  PretokenTable out = a.size() >= b.size() ? a : b;
  out.merge(a.size() >= b.size() ? b : a);
  return out;
}

inline void count_text(std::string_view text, PretokenTable& table,
                       const ChunkOptions& opts = {}) {
  for_each_chunk(text, [&](std::string_view c) { table.add(c); }, opts);
}

// Chunks and counts every document. Documents are sharded into contiguous
// ranges, one private table per worker, then merged; the result does not
// depend on `workers`.
inline PretokenTable count_corpus(std::span<const Document> docs, unsigned workers,
                                  const ChunkOptions& opts = {}) {
  if (workers == 0) throw InvalidArgument("workers must be >= 1");
  for (const Document& d : docs) {
    if (auto bad = utf8::find_invalid(d.text)) {
      throw DataError("document " + d.id + ": invalid UTF-8 at byte " + std::to_string(*bad));
    }
  }
  const std::size_t shards = std::min<std::size_t>(workers, std::max<std::size_t>(docs.size(), 1));
  std::vector<PretokenTable> partial(shards);
  auto run = [&](std::size_t shard) {
    const std::size_t begin = docs.size() * shard / shards;
    const std::size_t end = docs.size() * (shard + 1) / shards;
    for (std::size_t i = begin; i < end; ++i) count_text(docs[i].text, partial[shard], opts);
  };
  if (shards == 1) {
    run(0);
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(shards);
    for (std::size_t s = 0; s < shards; ++s) threads.emplace_back(run, s);
  }
  // Pairwise tree reduction.
  for (std::size_t step = 1; step < shards; step *= 2) {
    for (std::size_t i = 0; i + step < shards; i += 2 * step) {
      partial[i].merge(partial[i + step]);
      partial[i + step] = PretokenTable{};
    }
  }
  return std::move(partial[0]);
}

// File format:
//   # total_count=<n> total_bytes=<m> entries=<k>
//   <escaped chunk>\t<count>      (sorted by raw chunk bytes)
inline void write_table(std::ostream& out, const PretokenTable& table) {
  out << "# total_count=" << table.total_count() << " total_bytes=" << table.total_bytes()
      << " entries=" << table.size() << '\n';
  for (const auto& [chunk, count] : table.sorted_entries()) {
    out << escape_bytes(chunk) << '\t' << count << '\n';
  }
}

namespace detail {

inline std::uint64_t parse_u64(std::string_view s, std::string_view what) {
  if (s.empty() || s.size() > 20) throw DataError("bad " + std::string(what) + ": '" + std::string(s) + "'");
  std::uint64_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') throw DataError("bad " + std::string(what) + ": '" + std::string(s) + "'");
    v = checked_add(checked_mul(v, 10), static_cast<std::uint64_t>(c - '0'));
  }
  return v;
}

// Parses "key=value" fields from a header line.
inline std::uint64_t header_field(std::string_view line, std::string_view key) {
  const std::string needle = std::string(key) + "=";
  std::size_t pos = line.find(needle);
  while (pos != std::string_view::npos && pos > 0 && line[pos - 1] != ' ' && line[pos - 1] != '\t') {
    pos = line.find(needle, pos + 1);
  }
  if (pos == std::string_view::npos) throw DataError("header missing '" + std::string(key) + "'");
  pos += needle.size();
  std::size_t end = line.find_first_of(" \t", pos);
  if (end == std::string_view::npos) end = line.size();
  return parse_u64(line.substr(pos, end - pos), key);
}

}  // namespace detail

inline PretokenTable read_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw DataError("pre-token table: missing header line");
  }
  const std::uint64_t total_count = detail::header_field(line, "total_count");
  const std::uint64_t total_bytes = detail::header_field(line, "total_bytes");
  const std::uint64_t entries = detail::header_field(line, "entries");

  PretokenTable table;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw DataError("pre-token table line " + std::to_string(lineno) + ": missing tab");
    }
    const std::string chunk = unescape_bytes(std::string_view(line).substr(0, tab));
    if (table.count(chunk) != 0) {
      throw DataError("pre-token table line " + std::to_string(lineno) + ": duplicate chunk");
    }
    const std::uint64_t count = detail::parse_u64(std::string_view(line).substr(tab + 1), "count");
    if (count == 0) throw DataError("pre-token table line " + std::to_string(lineno) + ": zero count");
    table.add(chunk, count);
  }
  if (table.total_count() != total_count || table.total_bytes() != total_bytes ||
      table.size() != entries) {
    throw DataError("pre-token table: totals in header do not match entries");
  }
  return table;
}

// Digest of the canonical serialization.
inline std::string table_digest(const PretokenTable& table) {
  Sha256 h;
  h.update_u64(table.total_count()).update_u64(table.total_bytes());
  for (const auto& [chunk, count] : table.sorted_entries()) {
    h.update_u64(chunk.size()).update(chunk).update_u64(count);
  }
  return h.hex();
}

}  // namespace tokscale
