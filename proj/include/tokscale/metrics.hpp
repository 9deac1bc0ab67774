#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tokscale/error.hpp"
#include "tokscale/pretoken_table.hpp"
#include "tokscale/segment.hpp"
#include "tokscale/string_map.hpp"
#include "tokscale/utf8.hpp"
#include "tokscale/vocabulary.hpp"

namespace tokscale {

// Shared vocabulary: |tokens(v) ∩ tokens(ref)| / |tokens|.
inline double vocab_overlap(const Vocabulary& v, const Vocabulary& ref) {
  if (v.tokens.size() != ref.tokens.size()) {
    throw InvalidArgument("vocab_overlap: size mismatch (" + std::to_string(v.tokens.size()) + " vs " +
                          std::to_string(ref.tokens.size()) + ")");
  }
  if (v.tokens.empty()) throw InvalidArgument("vocab_overlap: empty vocabularies");
  const StringSet mine(v.tokens.begin(), v.tokens.end());
  std::size_t shared = 0;
  for (const auto& t : StringSet(ref.tokens.begin(), ref.tokens.end())) shared += mine.contains(t);
  return static_cast<double>(shared) / static_cast<double>(v.tokens.size());
}

inline std::vector<std::vector<double>> overlap_matrix(std::span<const Vocabulary> vocabs) {
  const std::size_t n = vocabs.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) m[i][j] = m[j][i] = vocab_overlap(vocabs[i], vocabs[j]);
  }
  return m;
}

// Usage keyed by token bytes (ids are not comparable across vocabularies),
// sorted by token, zero counts dropped.
using TokenUsage = std::vector<std::pair<std::string, std::uint64_t>>;

inline TokenUsage usage_by_token(const Vocabulary& vocab, const TokenUsageStats& stats) {
  if (stats.counts.size() != vocab.tokens.size()) {
    throw InvalidArgument("usage stats do not belong to this vocabulary (size " + std::to_string(stats.counts.size()) +
                          " vs " + std::to_string(vocab.tokens.size()) + ")");
  }
  TokenUsage out;
  for (std::size_t id = 0; id < stats.counts.size(); ++id) {
    if (stats.counts[id] != 0) out.emplace_back(vocab.tokens[id], stats.counts[id]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct JaccardResult {
  double plain = 0.0;
  double weighted = 0.0;
};

// Plain: |U ∩ V| / |U ∪ V| over used tokens. Weighted: Σ min(w_U, w_V) /
// Σ max(w_U, w_V) with w the usage normalised to sum to one per side.
inline JaccardResult jaccard(const TokenUsage& u, const TokenUsage& v) {
  const double tu = std::accumulate(u.begin(), u.end(), 0.0, [](double s, const auto& e) { return s + e.second; });
  const double tv = std::accumulate(v.begin(), v.end(), 0.0, [](double s, const auto& e) { return s + e.second; });
  if (u.empty() && v.empty()) throw InvalidArgument("jaccard: both usage sets are empty");
  std::size_t inter = 0, uni = 0;
  double lo = 0.0, hi = 0.0;
  auto i = u.begin();
  auto j = v.begin();
  while (i != u.end() || j != v.end()) {
    double wu = 0.0, wv = 0.0;
    if (j == v.end() || (i != u.end() && i->first < j->first)) {
      wu = i++->second / tu;
    } else if (i == u.end() || j->first < i->first) {
      wv = j++->second / tv;
    } else {
      wu = i++->second / tu;
      wv = j++->second / tv;
      ++inter;
    }
    ++uni;
    lo += std::min(wu, wv);
    hi += std::max(wu, wv);
  }
  return {static_cast<double>(inter) / static_cast<double>(uni), lo / hi};
}

inline JaccardResult jaccard(const Vocabulary& va, const TokenUsageStats& a, const Vocabulary& vb,
                             const TokenUsageStats& b) {
  return jaccard(usage_by_token(va, a), usage_by_token(vb, b));
}

struct RenyiParams {
  double alpha = 2.5;
};

// H_α(p) / ln|V| with p the usage distribution over the whole vocabulary.
inline double renyi_efficiency(const TokenUsageStats& stats, RenyiParams params = {}) {
  const double a = params.alpha;
  if (!(a > 0.0) || !std::isfinite(a)) throw InvalidArgument("renyi_efficiency: alpha must be positive");
  if (a == 1.0) throw InvalidArgument("renyi_efficiency: alpha = 1 is the Shannon limit; use shannon_efficiency");
  if (stats.total_tokens == 0) throw InvalidArgument("renyi_efficiency: no token usage");
  if (stats.counts.size() < 2) throw InvalidArgument("renyi_efficiency: vocabulary needs at least two tokens");
  const double total = static_cast<double>(stats.total_tokens);
  double sum = 0.0;
  for (const std::uint64_t c : stats.counts) {
    if (c != 0) sum += std::pow(static_cast<double>(c) / total, a);
  }
  const double h = std::log(sum) / (1.0 - a);
  return std::clamp(h / std::log(static_cast<double>(stats.counts.size())), 0.0, 1.0);
}

inline double shannon_efficiency(const TokenUsageStats& stats) {
  if (stats.total_tokens == 0) throw InvalidArgument("shannon_efficiency: no token usage");
  if (stats.counts.size() < 2) throw InvalidArgument("shannon_efficiency: vocabulary needs at least two tokens");
  const double total = static_cast<double>(stats.total_tokens);
  double h = 0.0;
  for (const std::uint64_t c : stats.counts) {
    if (c != 0) {
      const double p = static_cast<double>(c) / total;
      h -= p * std::log(p);
    }
  }
  return std::clamp(h / std::log(static_cast<double>(stats.counts.size())), 0.0, 1.0);
}

struct Coverage {
  double type_weighted = 0.0;
  double count_weighted = 0.0;
};

// Tokens that can stand for a whole pre-token: specials and WordPiece
// continuation pieces cannot.
inline StringSet whole_chunk_tokens(const Vocabulary& vocab) {
  StringSet out;
  const std::string& marker = vocab.continuation_marker;
  for (const auto& t : vocab.tokens) {
    if (std::find(vocab.special.begin(), vocab.special.end(), t) != vocab.special.end()) continue;
    if (vocab.algorithm == Algorithm::WordPiece && !marker.empty() && t.size() > marker.size() &&
        t.compare(0, marker.size(), marker) == 0) {
      continue;
    }
    out.insert(t);
  }
  return out;
}

// Share of pre-tokens that are a single vocabulary token.
inline Coverage pretoken_coverage(const Vocabulary& vocab, const PretokenTable& table) {
  if (table.empty()) return {};
  const StringSet whole = whole_chunk_tokens(vocab);
  std::size_t types = 0;
  std::uint64_t counted = 0;
  for (const auto& [chunk, count] : table.entries()) {
    if (whole.contains(chunk)) {
      ++types;
      counted += count;
    }
  }
  return {static_cast<double>(types) / static_cast<double>(table.size()),
          static_cast<double>(counted) / static_cast<double>(table.total_count())};
}

// Share of all token occurrences produced by the ⌈fraction·|V|⌉ most used
// tokens.
inline double frequency_coverage(const TokenUsageStats& stats, double vocab_fraction) {
  if (!(vocab_fraction > 0.0 && vocab_fraction <= 1.0)) {
    throw InvalidArgument("frequency_coverage: vocab_fraction must lie in (0, 1]");
  }
  if (stats.total_tokens == 0) throw InvalidArgument("frequency_coverage: no token usage");
  std::vector<std::uint64_t> sorted = stats.counts;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  // Shave off rounding noise so that e.g. 0.2 × 8000 gives 1600, not 1601.
  const double raw = vocab_fraction * static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  std::uint64_t covered = 0;
  for (std::size_t i = 0; i < k; ++i) covered += sorted[i];
  return static_cast<double>(covered) / static_cast<double>(stats.total_tokens);
}

// word -> morphs, in file order.
struct GoldSegmentation {
  std::vector<std::pair<std::string, std::vector<std::string>>> entries;
};

// word -> human measure.
struct CognitiveLexicon {
  std::vector<std::pair<std::string, double>> entries;
};

// Format: word\tmorph|morph|...
inline GoldSegmentation read_gold(std::istream& in) {
  GoldSegmentation gold;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("gold segmentation line " + std::to_string(lineno) + ": missing tab");
    std::string word = line.substr(0, tab);
    if (!utf8::is_valid(line)) throw DataError("gold segmentation line " + std::to_string(lineno) + ": invalid UTF-8");
    std::vector<std::string> morphs;
    std::string joined;
    std::string_view rest = std::string_view(line).substr(tab + 1);
    while (true) {
      const std::size_t bar = rest.find('|');
      morphs.emplace_back(rest.substr(0, bar));
      joined += morphs.back();
      if (morphs.back().empty()) throw DataError("gold segmentation line " + std::to_string(lineno) + ": empty morph");
      if (bar == std::string_view::npos) break;
      rest.remove_prefix(bar + 1);
    }
    if (joined != word) {
      throw DataError("gold segmentation line " + std::to_string(lineno) + ": morphs do not concatenate to '" + word +
                      "'");
    }
    gold.entries.emplace_back(std::move(word), std::move(morphs));
  }
  return gold;
}

// Format: word\tvalue
inline CognitiveLexicon read_lexicon(std::istream& in) {
  CognitiveLexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("lexicon line " + std::to_string(lineno) + ": missing tab");
    if (!utf8::is_valid(line)) throw DataError("lexicon line " + std::to_string(lineno) + ": invalid UTF-8");
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError("lexicon line " + std::to_string(lineno) + ": bad value");
    }
    if (!std::isfinite(value)) throw DataError("lexicon line " + std::to_string(lineno) + ": value not finite");
    lex.entries.emplace_back(line.substr(0, tab), value);
  }
  return lex;
}

struct Alignment {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Micro-averaged boundary precision/recall over internal boundary byte
// offsets. No predicted boundaries at all counts as precision 1, no gold
// boundaries as recall 1.
inline Alignment morph_alignment(const Tokenizer& tok, const GoldSegmentation& gold) {
  if (gold.entries.empty()) throw InvalidArgument("morph_alignment: empty gold segmentation");
  std::uint64_t hit = 0, predicted = 0, expected = 0;
  std::vector<std::size_t> want;
  for (const auto& [word, morphs] : gold.entries) {
    std::string joined;
    want.clear();
    for (const auto& m : morphs) {
      if (!joined.empty()) want.push_back(joined.size());
      joined += m;
    }
    if (joined != word) throw InvalidArgument("morph_alignment: morphs do not concatenate to '" + word + "'");
    std::size_t pos = 0;
    const auto widths = tok.token_widths(word);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      pos += widths[i];
      ++predicted;
      hit += std::binary_search(want.begin(), want.end(), pos);
    }
    expected += want.size();
  }
  Alignment a;
  a.precision = predicted == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(predicted);
  a.recall = expected == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(expected);
  a.f1 = a.precision + a.recall == 0.0 ? 0.0 : 2.0 * a.precision * a.recall / (a.precision + a.recall);
  return a;
}

inline Alignment morph_alignment(const Vocabulary& vocab, const GoldSegmentation& gold) {
  return morph_alignment(Tokenizer(vocab), gold);
}

// Ranks starting at 1; ties share their average rank.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw InvalidArgument("correlation undefined for a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("spearman: length mismatch");
  if (x.size() < 3) throw InvalidArgument("spearman: need at least three points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

// Signed Spearman correlation between tokens per word and the human measure.
inline double cognitive_correlation(const Tokenizer& tok, const CognitiveLexicon& lexicon) {
  if (lexicon.entries.size() < 3) throw InvalidArgument("cognitive_correlation: need at least three lexicon entries");
  std::vector<double> tokens, measure;
  for (const auto& [word, value] : lexicon.entries) {
    tokens.push_back(static_cast<double>(tok.encode(word).size()));
    measure.push_back(value);
  }
  return spearman(tokens, measure);
}

inline double cognitive_correlation(const Vocabulary& vocab, const CognitiveLexicon& lexicon) {
  return cognitive_correlation(Tokenizer(vocab), lexicon);
}

struct DomainScoreParams {
  double theta = 10.0;
  double epsilon = 1e-9;
  std::uint64_t min_count = 5;
};

enum class TermLabel { DomainSpecific, General, Neutral };

inline std::string_view to_string(TermLabel l) {
  switch (l) {
    case TermLabel::DomainSpecific: return "domain-specific";
    case TermLabel::General: return "general";
    case TermLabel::Neutral: return "neutral";
  }
  return "?";
}

struct TermScore {
  std::string term;
  double score = 0.0;
  TermLabel label = TermLabel::Neutral;
  bool numeric = false;  // all ASCII digits
};

struct DomainSummary {
  std::vector<TermScore> terms;  // sorted by term
  double domain_share = 0.0;     // non-numeric domain-specific terms
  double general_share = 0.0;    // non-numeric general and neutral terms
  double numeric_share = 0.0;
};

inline TermLabel classify_score(double score, const DomainScoreParams& p) {
  if (score >= p.theta) return TermLabel::DomainSpecific;
  if (score <= 1.0 / p.theta) return TermLabel::General;
  return TermLabel::Neutral;
}

inline bool is_numeric_term(std::string_view t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// score(w) = TF_D(w) / (TF_G(w) + ε); terms seen fewer than min_count times
// across both corpora are dropped. Shares are over the retained term types.
inline DomainSummary domain_term_classify(const std::map<std::string, std::uint64_t>& tf_domain,
                                          const std::map<std::string, std::uint64_t>& tf_general,
                                          const DomainScoreParams& params = {}) {
  if (!(params.theta > 1.0)) throw InvalidArgument("domain_term_classify: theta must exceed 1");
  if (!(params.epsilon > 0.0)) throw InvalidArgument("domain_term_classify: epsilon must be positive");
  std::uint64_t total_d = 0, total_g = 0;
  for (const auto& [t, c] : tf_domain) total_d = checked_add(total_d, c);
  for (const auto& [t, c] : tf_general) total_g = checked_add(total_g, c);
  if (total_d == 0 || total_g == 0) throw InvalidArgument("domain_term_classify: both corpora need term counts");

  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> joint;
  for (const auto& [t, c] : tf_domain) joint[t].first = c;
  for (const auto& [t, c] : tf_general) joint[t].second = c;
  DomainSummary out;
  std::size_t domain = 0, general = 0, numeric = 0;
  for (const auto& [term, counts] : joint) {
    if (counts.first + counts.second < params.min_count) continue;
    const double pd = static_cast<double>(counts.first) / static_cast<double>(total_d);
    const double pg = static_cast<double>(counts.second) / static_cast<double>(total_g);
    TermScore s{term, pd / (pg + params.epsilon), TermLabel::Neutral, is_numeric_term(term)};
    s.label = classify_score(s.score, params);
    if (s.numeric) {
      ++numeric;
    } else if (s.label == TermLabel::DomainSpecific) {
      ++domain;
    } else {
      ++general;
    }
    out.terms.push_back(std::move(s));
  }
  if (!out.terms.empty()) {
    const double n = static_cast<double>(out.terms.size());
    out.domain_share = static_cast<double>(domain) / n;
    out.general_share = static_cast<double>(general) / n;
    out.numeric_share = static_cast<double>(numeric) / n;
  }
  return out;
}

// Whitespace-separated term counts of a text, for the domain score.
inline std::map<std::string, std::uint64_t> term_counts(std::string_view text) {
  std::map<std::string, std::uint64_t> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) ++out[std::string(text.substr(i, j - i))];
    i = j;
  }
  return out;
}

}  // namespace tokscale
