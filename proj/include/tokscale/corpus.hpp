#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tokscale/digest.hpp"
#include "tokscale/error.hpp"
#include "tokscale/utf8.hpp"

namespace tokscale {

struct Document {
  std::string id;
  std::string text;

  friend bool operator==(const Document&, const Document&) = default;
};

enum class InputFormat { PlainLines, JsonLines };

inline InputFormat parse_input_format(std::string_view name) {
  if (name == "plain" || name == "plain-lines") return InputFormat::PlainLines;
  if (name == "jsonl" || name == "json-lines") return InputFormat::JsonLines;
  throw InvalidArgument("unknown input format '" + std::string(name) + "' (plain|jsonl)");
}

inline std::uint64_t total_text_bytes(std::span<const Document> docs) {
  std::uint64_t n = 0;
  for (const auto& d : docs) n += d.text.size();
  return n;
}

namespace detail {

inline std::string read_all(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

inline std::string read_file(const std::filesystem::path& path) {
  if (path == "-") return read_all(std::cin);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  return read_all(in);
}

}  // namespace detail

// Parses one input's contents. Plain inputs hold one document per line
// (empty lines are skipped); JSON-lines inputs hold one object with a string
// "text" field per line. Document ids are "<file index>:<line number>".
// Documents whose SHA-256 is already in `seen` are dropped when it is given.
inline void ingest_buffer(std::string_view data, const std::string& source, std::size_t file_index,
                          InputFormat format, std::vector<Document>& docs,
                          std::unordered_set<std::string>* seen = nullptr) {
  if (auto bad = utf8::find_invalid(data)) {
    throw DataError(source + ": invalid UTF-8 at byte offset " + std::to_string(*bad));
  }
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::size_t record = 0;
  while (pos < data.size()) {
    std::size_t nl = data.find('\n', pos);
    if (nl == std::string_view::npos) nl = data.size();
    std::string_view line = data.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;

    std::string text;
    if (format == InputFormat::PlainLines) {
      text = std::string(line);
    } else {
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(source + ": record " + std::to_string(record) + " is not valid JSON: " + e.what());
      }
      if (!rec.is_object() || !rec.contains("text") || !rec["text"].is_string()) {
        throw DataError(source + ": record " + std::to_string(record) + " has no string field 'text'");
      }
      text = rec["text"].get<std::string>();
      if (auto bad = utf8::find_invalid(text)) {
        throw DataError(source + ": record " + std::to_string(record) + " text has invalid UTF-8 at byte offset " +
                        std::to_string(*bad));
      }
      ++record;
    }
    if (seen && !seen->insert(sha256_hex(text)).second) continue;
    docs.push_back({std::to_string(file_index) + ":" + std::to_string(line_no), std::move(text)});
  }
}

// Reads documents in file order; "-" is standard input. With `dedup`, a
// document identical to an earlier one is dropped.
inline std::vector<Document> ingest(std::span<const std::filesystem::path> paths, InputFormat format,
                                    bool dedup) {
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  for (std::size_t f = 0; f < paths.size(); ++f) {
    const std::string data = detail::read_file(paths[f]);
    ingest_buffer(data, paths[f].string(), f, format, docs, dedup ? &seen : nullptr);
  }
  return docs;
}

// Seeded permutation with a fully specified algorithm, so the same seed gives
// the same order on any platform: Fisher-Yates from the last index down,
// with std::mt19937_64 as the bit source (its output is fixed by the C++
// standard) and bounded draws by rejection: discard r < 2^64 mod n, return
// r mod n.
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t threshold = (0 - bound) % bound;
    std::uint64_t r;
    do {
      r = rng();
    } while (r < threshold);
    std::swap(order[i - 1], order[r % bound]);
  }
  return order;
}

struct Slice {
  std::string label;
  std::uint64_t target_bytes = 0;
  std::uint64_t achieved_bytes = 0;
  std::size_t doc_begin = 0;  // half-open range into SliceManifest::order
  std::size_t doc_end = 0;
  std::string content_hash;

  friend bool operator==(const Slice&, const Slice&) = default;
};

struct SliceManifest {
  std::uint64_t seed = 0;
  std::vector<std::size_t> order;  // shuffled document indices
  std::vector<Slice> slices;

  friend bool operator==(const SliceManifest&, const SliceManifest&) = default;
};

// "5MB", "1GB", "250B": decimal units, exact only.
inline std::string size_label(std::uint64_t bytes) {
  if (bytes != 0 && bytes % 1'000'000'000 == 0) return std::to_string(bytes / 1'000'000'000) + "GB";
  if (bytes != 0 && bytes % 1'000'000 == 0) return std::to_string(bytes / 1'000'000) + "MB";
  if (bytes != 0 && bytes % 1'000 == 0) return std::to_string(bytes / 1'000) + "kB";
  return std::to_string(bytes) + "B";
}

// Cumulative slices: slice k is the shortest prefix of the shuffled order
// whose text bytes reach schedule[k]. Slice boundaries never split documents.
inline SliceManifest build_slices(std::span<const Document> docs,
                                  std::span<const std::uint64_t> schedule, std::uint64_t seed,
                                  std::span<const std::string> labels = {}) {
  if (schedule.empty()) throw InvalidArgument("slice schedule is empty");
  for (std::size_t k = 1; k < schedule.size(); ++k) {
    if (schedule[k] <= schedule[k - 1]) throw InvalidArgument("slice schedule must be strictly increasing");
  }
  if (!labels.empty() && labels.size() != schedule.size()) {
    throw InvalidArgument("slice labels must match the schedule length");
  }
  const std::uint64_t total = total_text_bytes(docs);
  if (total < schedule.back()) {
    throw InvalidArgument("corpus has " + std::to_string(total) + " bytes, largest slice needs " +
                          std::to_string(schedule.back()));
  }

  SliceManifest m;
  m.seed = seed;
  m.order = seeded_permutation(docs.size(), seed);
  Sha256 running;
  std::uint64_t bytes = 0;
  std::size_t next = 0;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    while (bytes < schedule[k]) {
      const Document& d = docs[m.order[next++]];
      running.update_u64(d.text.size()).update(d.text);
      bytes += d.text.size();
    }
    Slice s;
    s.label = labels.empty() ? size_label(schedule[k]) : labels[k];
    s.target_bytes = schedule[k];
    s.achieved_bytes = bytes;
    s.doc_begin = 0;
    s.doc_end = next;
    s.content_hash = running.hex();
    m.slices.push_back(std::move(s));
  }
  return m;
}

// Documents of slice k, in shuffled order.
inline std::vector<Document> slice_documents(std::span<const Document> docs, const SliceManifest& m,
                                             std::size_t k) {
  std::vector<Document> out;
  const Slice& s = m.slices.at(k);
  out.reserve(s.doc_end - s.doc_begin);
  for (std::size_t i = s.doc_begin; i < s.doc_end; ++i) out.push_back(docs[m.order[i]]);
  return out;
}

struct HoldoutSplit {
  std::vector<Document> train;
  std::vector<Document> holdout;
};

// Draws documents in seeded-permutation order until the holdout reaches
// `holdout_bytes`. Both sides keep the original relative document order.
inline HoldoutSplit holdout_split(std::span<const Document> docs, std::uint64_t holdout_bytes,
                                  std::uint64_t seed) {
  const std::uint64_t total = total_text_bytes(docs);
  if (holdout_bytes > 0 && total <= holdout_bytes) {
    throw InvalidArgument("corpus has " + std::to_string(total) + " bytes, cannot hold out " +
                          std::to_string(holdout_bytes));
  }
  std::vector<bool> held(docs.size(), false);
  std::uint64_t bytes = 0;
  const auto order = seeded_permutation(docs.size(), seed);
  for (std::size_t i = 0; i < order.size() && bytes < holdout_bytes; ++i) {
    held[order[i]] = true;
    bytes += docs[order[i]].text.size();
  }
  HoldoutSplit out;
  for (std::size_t i = 0; i < docs.size(); ++i) (held[i] ? out.holdout : out.train).push_back(docs[i]);
  return out;
}

inline nlohmann::ordered_json manifest_to_json(const SliceManifest& m) {
  nlohmann::ordered_json j;
  j["seed"] = m.seed;
  j["document_count"] = m.order.size();
  j["slices"] = nlohmann::ordered_json::array();
  for (const Slice& s : m.slices) {
    j["slices"].push_back({{"label", s.label},
                           {"target_bytes", s.target_bytes},
                           {"achieved_bytes", s.achieved_bytes},
                           {"doc_range", {s.doc_begin, s.doc_end}},
                           {"content_hash", s.content_hash}});
  }
  j["order"] = m.order;
  return j;
}

inline SliceManifest manifest_from_json(const nlohmann::ordered_json& j) {
  try {
    SliceManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.order = j.at("order").get<std::vector<std::size_t>>();
    for (const auto& js : j.at("slices")) {
      Slice s;
      s.label = js.at("label").get<std::string>();
      s.target_bytes = js.at("target_bytes").get<std::uint64_t>();
      s.achieved_bytes = js.at("achieved_bytes").get<std::uint64_t>();
      s.doc_begin = js.at("doc_range").at(0).get<std::size_t>();
      s.doc_end = js.at("doc_range").at(1).get<std::size_t>();
      s.content_hash = js.at("content_hash").get<std::string>();
      m.slices.push_back(std::move(s));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed slice manifest: ") + e.what());
  }
}

}  // namespace tokscale
