#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "tokscale/string_map.hpp"
#include "tokscale/byte_trie.hpp"
#include "tokscale/error.hpp"
#include "tokscale/pretoken_table.hpp"
#include "tokscale/train/trainer_config.hpp"
#include "tokscale/utf8.hpp"
#include "tokscale/vocabulary.hpp"

namespace tokscale {

namespace train_detail {

inline double log_add(double a, double b) noexcept {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

struct UnigramPiece {
  std::string text;
  double log_prob;
  bool single_byte;
};

// Working model for one EM / prune round.
class UnigramModel {
 public:
  explicit UnigramModel(std::vector<UnigramPiece> pieces) : pieces_(std::move(pieces)) {
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      trie_.insert(pieces_[i].text, static_cast<TokenId>(i));
    }
  }

  const std::vector<UnigramPiece>& pieces() const noexcept { return pieces_; }
  std::vector<UnigramPiece>& pieces() noexcept { return pieces_; }

  // Forward-backward expected piece counts, weighted by chunk counts.
  // Returns the total log-likelihood.
  double expected_counts(const std::vector<PretokenTable::Entry>& chunks,
                         std::vector<double>& expected) const {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    expected.assign(pieces_.size(), 0.0);
    std::vector<double> alpha, beta;
    struct Edge {
      std::uint32_t from, to;
      TokenId id;
    };
    std::vector<Edge> edges;
    double loglik = 0.0;
    for (const auto& [chunk, count] : chunks) {
      const std::size_t n = chunk.size();
      edges.clear();
      for (std::size_t i = 0; i < n; ++i) {
        trie_.for_each_prefix(chunk, i, [&](std::size_t end, TokenId id) {
          edges.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(end), id});
        });
      }
      alpha.assign(n + 1, kNegInf);
      beta.assign(n + 1, kNegInf);
      alpha[0] = 0.0;
      for (const Edge& e : edges) {  // edges are ordered by start position
        alpha[e.to] = log_add(alpha[e.to], alpha[e.from] + pieces_[e.id].log_prob);
      }
      beta[n] = 0.0;
      for (auto it = edges.rbegin(); it != edges.rend(); ++it) {
        beta[it->from] = log_add(beta[it->from], pieces_[it->id].log_prob + beta[it->to]);
      }
      const double z = alpha[n];
      const auto c = static_cast<double>(count);
      for (const Edge& e : edges) {
        const double post = alpha[e.from] + pieces_[e.id].log_prob + beta[e.to] - z;
        if (post > -60.0) expected[e.id] += c * std::exp(post);
      }
      loglik += c * z;
    }
    return loglik;
  }

  // Most probable segmentation of `text`, never using piece `excluded`.
  std::vector<TokenId> viterbi(std::string_view text,
                               TokenId excluded = std::numeric_limits<TokenId>::max()) const {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    const std::size_t n = text.size();
    std::vector<double> best(n + 1, kNegInf);
    std::vector<std::pair<std::uint32_t, TokenId>> back(n + 1, {0, 0});
    best[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (best[i] == kNegInf) continue;
      trie_.for_each_prefix(text, i, [&](std::size_t end, TokenId id) {
        if (id == excluded) return;
        const double s = best[i] + pieces_[id].log_prob;
        if (s > best[end]) {
          best[end] = s;
          back[end] = {static_cast<std::uint32_t>(i), id};
        }
      });
    }
    std::vector<TokenId> out;
    if (best[n] == kNegInf) return out;
    for (std::size_t pos = n; pos > 0; pos = back[pos].first) out.push_back(back[pos].second);
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  std::vector<UnigramPiece> pieces_;
  ByteTrie trie_;
};

// Counts every substring of length 2..max_bytes that starts and ends on a
// character boundary, weighted by chunk counts.
inline StringViewMap<std::uint64_t> substring_counts(
    const std::vector<PretokenTable::Entry>& chunks, std::size_t max_bytes) {
  StringViewMap<std::uint64_t> freq;
  std::vector<std::size_t> bounds;
  for (const auto& [chunk, count] : chunks) {
    bounds.clear();
    for (std::size_t pos = 0; pos < chunk.size(); pos += utf8::char_length(chunk, pos)) {
      bounds.push_back(pos);
    }
    bounds.push_back(chunk.size());
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
      for (std::size_t j = i + 1; j < bounds.size(); ++j) {
        const std::size_t len = bounds[j] - bounds[i];
        if (len > max_bytes) break;
        if (len < 2) continue;
        freq[chunk.substr(bounds[i], len)] += count;
      }
    }
  }
  return freq;
}

}  // namespace train_detail

// UnigramLM trained from aggregated pre-token counts.
//
// Seeds: the effective_seed_size() most frequent substrings (2..max_token_bytes
// bytes, character-aligned) plus every byte that occurs in the table. Each
// round runs unigram_em_iterations_per_round EM iterations, then keeps the
// pieces whose removal would cost the most likelihood (a fraction
// unigram_prune_keep_fraction per round, never below the target). Single
// bytes are never pruned. Output: "<unk>" at id 0, then pieces by descending
// log-probability; exp(scores) sums to 1.
inline Vocabulary train_unigram(const PretokenTable& table, const TrainerConfig& cfg) {
  using namespace train_detail;
  if (table.empty()) throw InvalidArgument("cannot train on an empty pre-token table");
  cfg.validate();
  const auto chunks = table.sorted_entries();
  const std::size_t target_pieces = cfg.vocab_size - 1;  // minus "<unk>"

  std::vector<std::uint64_t> byte_freq(256, 0);
  for (const auto& [chunk, count] : chunks) {
    for (const char ch : chunk) byte_freq[static_cast<unsigned char>(ch)] += count;
  }
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
  for (std::size_t b = 0; b < 256; ++b) {
    if (byte_freq[b] > 0) seeds.emplace_back(std::string(1, static_cast<char>(b)), byte_freq[b]);
  }
  const std::size_t n_bytes = seeds.size();
  if (n_bytes > target_pieces) {
    throw InvalidArgument("UnigramLM vocab_size " + std::to_string(cfg.vocab_size) + " cannot hold the " +
                          std::to_string(n_bytes) + " distinct bytes of the table plus <unk>");
  }
  {
    auto freq = substring_counts(chunks, cfg.max_token_bytes);
    std::vector<std::pair<std::string_view, std::uint64_t>> ranked(freq.begin(), freq.end());
    freq = {};
    const std::size_t take = std::min(ranked.size(), cfg.effective_seed_size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(take), ranked.end(),
                      [](const auto& a, const auto& b) {
                        return a.second != b.second ? a.second > b.second : a.first < b.first;
                      });
    for (std::size_t i = 0; i < take; ++i) {
      if (ranked[i].first == kUnigramUnknown) continue;
      seeds.emplace_back(std::string(ranked[i].first), ranked[i].second);
    }
  }
  if (seeds.size() < target_pieces) {
    throw TrainingError("UnigramLM seed has only " + std::to_string(seeds.size() + 1) +
                            " pieces, fewer than vocab_size " + std::to_string(cfg.vocab_size),
                        seeds.size() + 1);
  }

  double seed_total = 0.0;
  for (const auto& s : seeds) seed_total += static_cast<double>(s.second);
  std::vector<UnigramPiece> pieces;
  pieces.reserve(seeds.size());
  for (auto& [text, f] : seeds) {
    const bool single = text.size() == 1;
    pieces.push_back({std::move(text), std::log(static_cast<double>(f) / seed_total), single});
  }
  seeds = {};

  std::vector<double> expected;
  auto run_em = [&](UnigramModel& model) {
    for (int it = 0; it < cfg.unigram_em_iterations_per_round; ++it) {
      model.expected_counts(chunks, expected);
      double sum = 0.0;
      double min_positive = std::numeric_limits<double>::infinity();
      for (const double e : expected) {
        sum += e;
        if (e > 0.0) min_positive = std::min(min_positive, e);
      }
      const double floor = std::log(min_positive / sum) - 10.0;
      auto& ps = model.pieces();
      for (std::size_t i = 0; i < ps.size(); ++i) {
        ps[i].log_prob = expected[i] > 0.0 ? std::log(expected[i] / sum) : floor;
      }
    }
  };

  while (true) {
    UnigramModel model(std::move(pieces));
    run_em(model);
    pieces = std::move(model.pieces());
    if (pieces.size() <= target_pieces) break;

    // Usage under the most probable segmentation.
    const UnigramModel current(pieces);
    std::vector<double> usage(pieces.size(), 0.0);
    for (const auto& [chunk, count] : chunks) {
      for (const TokenId id : current.viterbi(chunk)) usage[id] += static_cast<double>(count);
    }
    const double usage_sum = std::accumulate(usage.begin(), usage.end(), 0.0);

    // Likelihood lost when a piece is replaced by its best alternative
    // segmentation, under renormalised usage counts.
    std::vector<std::pair<double, std::size_t>> loss;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (pieces[i].single_byte) continue;
      double l = -1.0;
      if (usage[i] > 0.0) {
        const auto alt = current.viterbi(pieces[i].text, static_cast<TokenId>(i));
        const double new_sum = usage_sum + usage[i] * (static_cast<double>(alt.size()) - 1.0);
        double alt_logprob = 0.0;
        for (const TokenId a : alt) alt_logprob += std::log(usage[a] + usage[i]) - std::log(new_sum);
        const double own = std::log(usage[i]) - std::log(usage_sum);
        l = usage[i] * (own - alt_logprob);
      }
      loss.emplace_back(l, i);
    }
    std::sort(loss.begin(), loss.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return pieces[a.second].text < pieces[b.second].text;
    });

    const auto shrunk = static_cast<std::size_t>(static_cast<double>(pieces.size()) *
                                                 cfg.unigram_prune_keep_fraction);
    const std::size_t keep_total = std::min(pieces.size() - 1, std::max(target_pieces, shrunk));
    std::vector<bool> keep(pieces.size(), false);
    for (std::size_t i = 0; i < pieces.size(); ++i) keep[i] = pieces[i].single_byte;
    for (std::size_t k = 0; k < keep_total - n_bytes; ++k) keep[loss[k].second] = true;
    std::vector<UnigramPiece> kept;
    kept.reserve(keep_total);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      if (keep[i]) kept.push_back(std::move(pieces[i]));
    }
    pieces = std::move(kept);
  }

  // "<unk>" gets the smallest piece probability divided by e^10, then all
  // probabilities are renormalised.
  double min_lp = std::numeric_limits<double>::infinity();
  for (const auto& p : pieces) min_lp = std::min(min_lp, p.log_prob);
  const double unk_lp = min_lp - 10.0;
  double z = std::exp(unk_lp);
  for (const auto& p : pieces) z += std::exp(p.log_prob);
  const double log_z = std::log(z);

  std::sort(pieces.begin(), pieces.end(), [](const UnigramPiece& a, const UnigramPiece& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.text < b.text;
  });
  Vocabulary vocab;
  vocab.algorithm = Algorithm::Unigram;
  vocab.special = {std::string(kUnigramUnknown)};
  vocab.tokens.emplace_back(kUnigramUnknown);
  vocab.scores.push_back(unk_lp - log_z);
  for (auto& p : pieces) {
    vocab.tokens.push_back(std::move(p.text));
    vocab.scores.push_back(p.log_prob - log_z);
  }
  return vocab;
}

}  // namespace tokscale
