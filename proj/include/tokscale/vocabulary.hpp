#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tokscale/byte_escape.hpp"
#include "tokscale/digest.hpp"
#include "tokscale/error.hpp"

namespace tokscale {

enum class Algorithm { Bpe, Unigram, WordPiece };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Bpe: return "bpe";
    case Algorithm::Unigram: return "unigram";
    case Algorithm::WordPiece: return "wordpiece";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view name) {
  if (name == "bpe") return Algorithm::Bpe;
  if (name == "unigram") return Algorithm::Unigram;
  if (name == "wordpiece") return Algorithm::WordPiece;
  throw InvalidArgument("unknown algorithm '" + std::string(name) + "' (bpe|unigram|wordpiece)");
}

using TokenId = std::uint32_t;

inline constexpr std::string_view kWordPieceUnknown = "[UNK]";
inline constexpr std::string_view kUnigramUnknown = "<unk>";
inline constexpr std::string_view kDefaultContinuationMarker = "##";

// A trained token inventory. Token ids are indices into `tokens`.
//   bpe:       tokens[0..255] are the single bytes; merges[k] produced token 256 + k.
//   unigram:   scores[i] = log p(tokens[i]); special = {"<unk>"} at id 0.
//   wordpiece: word-internal units start with continuation_marker;
//              special = {"[UNK]"} at id 0.
struct Vocabulary {
  Algorithm algorithm = Algorithm::Bpe;
  std::vector<std::string> tokens;
  std::vector<std::pair<TokenId, TokenId>> merges;
  std::vector<double> scores;
  std::string continuation_marker;
  std::vector<std::string> special;

  std::size_t size() const noexcept { return tokens.size(); }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;
};

inline std::string serialize_vocabulary(const Vocabulary& v) {
  nlohmann::ordered_json j;
  j["algorithm"] = to_string(v.algorithm);
  auto& tokens = j["tokens"] = nlohmann::ordered_json::array();
  for (const auto& t : v.tokens) tokens.push_back(escape_bytes(t));
  auto& merges = j["merges"] = nlohmann::ordered_json::array();
  for (const auto& [l, r] : v.merges) merges.push_back({l, r});
  j["scores"] = v.scores;
  j["continuation_marker"] = escape_bytes(v.continuation_marker);
  auto& special = j["special"] = nlohmann::ordered_json::array();
  for (const auto& s : v.special) special.push_back(escape_bytes(s));
  return j.dump(1) + "\n";
}

inline Vocabulary parse_vocabulary(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Vocabulary v;
    v.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    for (const auto& t : j.at("tokens")) v.tokens.push_back(unescape_bytes(t.get<std::string>()));
    for (const auto& m : j.at("merges")) {
      v.merges.emplace_back(m.at(0).get<TokenId>(), m.at(1).get<TokenId>());
    }
    v.scores = j.at("scores").get<std::vector<double>>();
    v.continuation_marker = unescape_bytes(j.at("continuation_marker").get<std::string>());
    for (const auto& s : j.at("special")) v.special.push_back(unescape_bytes(s.get<std::string>()));
    return v;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed vocabulary file: ") + e.what());
  }
}

inline void save_vocabulary(const std::string& path, const Vocabulary& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << serialize_vocabulary(v);
}

inline Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_vocabulary(ss.str());
}

inline std::string vocabulary_digest(const Vocabulary& v) {
  return sha256_hex(serialize_vocabulary(v));
}

}  // namespace tokscale
