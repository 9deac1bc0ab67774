#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "tokscale/metrics.hpp"

using tokscale::Algorithm;
using tokscale::TokenUsageStats;
using tokscale::Vocabulary;

namespace {

Vocabulary set_vocab(std::vector<std::string> tokens, Algorithm alg = Algorithm::Bpe) {
  Vocabulary v;
  v.algorithm = alg;
  v.tokens = std::move(tokens);
  return v;
}

TokenUsageStats usage(std::vector<std::uint64_t> counts) {
  TokenUsageStats s;
  s.counts = std::move(counts);
  for (const auto c : s.counts) s.total_tokens += c;
  return s;
}

// Independent evaluation of H_α / ln|V| in long double.
long double renyi_direct(const std::vector<long double>& p, long double alpha) {
  long double sum = 0;
  for (const auto x : p) sum += std::pow(x, alpha);
  return std::log(sum) / (1 - alpha) / std::log(static_cast<long double>(p.size()));
}

TEST(VocabOverlap, HandSets) {
  EXPECT_DOUBLE_EQ(tokscale::vocab_overlap(set_vocab({"a", "b", "c", "d"}), set_vocab({"c", "d", "e", "f"})), 0.5);
  const auto v = set_vocab({"x", "y"});
  EXPECT_DOUBLE_EQ(tokscale::vocab_overlap(v, v), 1.0);
  EXPECT_DOUBLE_EQ(tokscale::vocab_overlap(v, set_vocab({"p", "q"})), 0.0);
  EXPECT_THROW(tokscale::vocab_overlap(v, set_vocab({"x"})), tokscale::InvalidArgument);
}

TEST(OverlapMatrix, SymmetricUnitDiagonal) {
  std::mt19937_64 rng(5);
  std::vector<Vocabulary> vs;
  for (int i = 0; i < 6; ++i) {
    std::vector<std::string> toks;
    while (toks.size() < 10) {
      std::string t(1, static_cast<char>('a' + rng() % 20));
      if (std::find(toks.begin(), toks.end(), t) == toks.end()) toks.push_back(t);
    }
    vs.push_back(set_vocab(toks));
  }
  const auto m = tokscale::overlap_matrix(vs);
  for (std::size_t i = 0; i < vs.size(); ++i) {
    EXPECT_EQ(m[i][i], 1.0);
    for (std::size_t j = 0; j < vs.size(); ++j) {
      EXPECT_EQ(m[i][j], m[j][i]);
      EXPECT_EQ(m[i][j], tokscale::vocab_overlap(vs[i], vs[j]));
    }
  }
  const std::vector<Vocabulary> same{vs[0], vs[0]};
  EXPECT_EQ(tokscale::overlap_matrix(same), (std::vector<std::vector<double>>{{1, 1}, {1, 1}}));
}

TEST(Jaccard, PlainHandExample) {
  const auto va = set_vocab({"a", "b", "c", "d"});
  const auto r = tokscale::jaccard(va, usage({1, 1, 1, 0}), va, usage({0, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(r.plain, 0.5);
}

TEST(Jaccard, WeightedHandExample) {
  const auto v = set_vocab({"a", "b"});
  const auto r = tokscale::jaccard(v, usage({2, 2}), v, usage({1, 3}));
  EXPECT_NEAR(r.weighted, 0.6, 1e-15);
  EXPECT_DOUBLE_EQ(r.plain, 1.0);
}

TEST(Jaccard, IdentityAndTokenIdentityByBytes) {
  const auto v = set_vocab({"a", "b", "c"});
  const auto s = usage({5, 0, 2});
  const auto r = tokscale::jaccard(v, s, v, s);
  EXPECT_EQ(r.plain, 1.0);
  EXPECT_EQ(r.weighted, 1.0);
  // Same token strings under different ids compare equal.
  const auto w = set_vocab({"c", "b", "a"});
  const auto r2 = tokscale::jaccard(v, s, w, usage({2, 0, 5}));
  EXPECT_EQ(r2.plain, 1.0);
  EXPECT_EQ(r2.weighted, 1.0);
  EXPECT_THROW(tokscale::jaccard(v, usage({0, 0, 0}), v, usage({0, 0, 0})), tokscale::InvalidArgument);
}

TEST(Jaccard, WeightedAtLeastPlainOnRandomUsage) {
  std::mt19937_64 rng(12);
  const auto v = set_vocab({"a", "b", "c", "d", "e", "f"});
  for (int i = 0; i < 500; ++i) {
    std::vector<std::uint64_t> a(6), b(6);
    for (auto& x : a) x = rng() % 4 == 0 ? 0 : rng() % 50;
    for (auto& x : b) x = rng() % 4 == 0 ? 0 : rng() % 50;
    a[0] += 1;
    b[0] += 1;
    const auto r = tokscale::jaccard(v, usage(a), v, usage(b));
    EXPECT_GE(r.plain, 0.0);
    EXPECT_LE(r.plain, 1.0);
    EXPECT_GE(r.weighted, 0.0);
    EXPECT_LE(r.weighted, 1.0);
  }
}

TEST(Renyi, HandValues) {
  EXPECT_NEAR(tokscale::renyi_efficiency(usage({5, 5, 5, 5})), 1.0, 1e-12);
  const double got = tokscale::renyi_efficiency(usage({70, 10, 10, 10}), {2.5});
  EXPECT_NEAR(got, 0.418, 1e-3);
  EXPECT_NEAR(got, static_cast<double>(renyi_direct({0.7L, 0.1L, 0.1L, 0.1L}, 2.5L)), 1e-12);
  EXPECT_EQ(tokscale::renyi_efficiency(usage({9, 0, 0, 0})), 0.0);
  EXPECT_THROW(tokscale::renyi_efficiency(usage({1, 1}), {1.0}), tokscale::InvalidArgument);
  EXPECT_THROW(tokscale::renyi_efficiency(usage({0, 0}), {2.5}), tokscale::InvalidArgument);
}

TEST(Renyi, PermutationInvariantAndUniformOnlyAtOne) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::uint64_t> c(8);
    for (auto& x : c) x = rng() % 20;
    c[rng() % 8] += 1;
    const double e = tokscale::renyi_efficiency(usage(c));
    auto d = c;
    std::shuffle(d.begin(), d.end(), rng);
    EXPECT_NEAR(tokscale::renyi_efficiency(usage(d)), e, 1e-12);
    const bool uniform = std::all_of(c.begin(), c.end(), [&](auto x) { return x == c[0]; });
    if (!uniform) {
      EXPECT_LT(e, 1.0);
    }
  }
}

TEST(Renyi, BracketsShannonNearAlphaOne) {
  const auto s = usage({50, 20, 10, 10, 5, 3, 1, 1});
  const double h = tokscale::shannon_efficiency(s);
  const double lo = tokscale::renyi_efficiency(s, {1.01});
  const double hi = tokscale::renyi_efficiency(s, {0.99});
  EXPECT_LE(lo, h);
  EXPECT_GE(hi, h);
  EXPECT_NEAR(lo, h, 0.01 * h);
  EXPECT_NEAR(hi, h, 0.01 * h);
}

TEST(PretokenCoverage, HandExample) {
  tokscale::PretokenTable t;
  t.add("the", 100);
  t.add(" the", 50);
  const auto c = tokscale::pretoken_coverage(set_vocab({"the", "a"}), t);
  EXPECT_DOUBLE_EQ(c.type_weighted, 0.5);
  EXPECT_NEAR(c.count_weighted, 100.0 / 150.0, 1e-15);
  const auto all = tokscale::pretoken_coverage(set_vocab({"the", " the"}), t);
  EXPECT_EQ(all.type_weighted, 1.0);
  EXPECT_EQ(all.count_weighted, 1.0);
  const auto none = tokscale::pretoken_coverage(set_vocab({"x"}), t);
  EXPECT_EQ(none.type_weighted, 0.0);
  EXPECT_EQ(none.count_weighted, 0.0);
}

TEST(PretokenCoverage, WordPieceNeedsWholeWordToken) {
  tokscale::PretokenTable t;
  t.add("able", 3);
  t.add("un", 1);
  auto v = set_vocab({"[UNK]", "##able", "un"}, Algorithm::WordPiece);
  v.continuation_marker = "##";
  v.special = {"[UNK]"};
  const auto c = tokscale::pretoken_coverage(v, t);
  EXPECT_DOUBLE_EQ(c.type_weighted, 0.5);
  EXPECT_DOUBLE_EQ(c.count_weighted, 0.25);
}

TEST(FrequencyCoverage, HandValues) {
  EXPECT_DOUBLE_EQ(tokscale::frequency_coverage(usage({5, 5, 5, 5}), 0.5), 0.5);
  EXPECT_DOUBLE_EQ(tokscale::frequency_coverage(usage({2, 90, 3, 5}), 0.25), 0.9);
  EXPECT_DOUBLE_EQ(tokscale::frequency_coverage(usage({2, 90, 3, 5}), 1.0), 1.0);
  // 0.2 x 10 must select exactly two tokens despite rounding.
  EXPECT_DOUBLE_EQ(tokscale::frequency_coverage(usage({10, 10, 10, 10, 10, 10, 10, 10, 10, 10}), 0.2), 0.2);
  EXPECT_THROW(tokscale::frequency_coverage(usage({1}), 0.0), tokscale::InvalidArgument);
}

TEST(FrequencyCoverage, MonotoneInFraction) {
  std::mt19937_64 rng(8);
  std::vector<std::uint64_t> c(50);
  for (auto& x : c) x = rng() % 100;
  c[0] = 1;
  double prev = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double f = tokscale::frequency_coverage(usage(c), k / 100.0);
    EXPECT_GE(f, prev);
    prev = f;
  }
}

Vocabulary wp(std::vector<std::string> tokens) {
  auto v = set_vocab(std::move(tokens), Algorithm::WordPiece);
  v.tokens.insert(v.tokens.begin(), "[UNK]");
  v.special = {"[UNK]"};
  v.continuation_marker = "##";
  return v;
}

TEST(MorphAlignment, HandExample) {
  tokscale::GoldSegmentation gold;
  gold.entries.push_back({"unhappiness", {"un", "happi", "ness"}});
  const auto a = tokscale::morph_alignment(wp({"un", "##happiness"}), gold);
  EXPECT_DOUBLE_EQ(a.precision, 1.0);
  EXPECT_DOUBLE_EQ(a.recall, 0.5);
  EXPECT_NEAR(a.f1, 2.0 / 3.0, 1e-9);
}

TEST(MorphAlignment, PerfectAndSingleToken) {
  tokscale::GoldSegmentation gold;
  gold.entries.push_back({"unhappiness", {"un", "happi", "ness"}});
  gold.entries.push_back({"cats", {"cat", "s"}});
  const auto perfect = tokscale::morph_alignment(wp({"un", "##happi", "##ness", "cat", "##s"}), gold);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
  const auto whole = tokscale::morph_alignment(wp({"unhappiness", "cats"}), gold);
  EXPECT_EQ(whole.recall, 0.0);
  tokscale::GoldSegmentation bad;
  bad.entries.push_back({"cats", {"ca", "s"}});
  EXPECT_THROW(tokscale::morph_alignment(wp({"cats"}), bad), tokscale::InvalidArgument);
}

TEST(GoldFile, ParsesAndValidates) {
  std::istringstream ok("unhappiness\tun|happi|ness\ncats\tcat|s\n");
  const auto g = tokscale::read_gold(ok);
  ASSERT_EQ(g.entries.size(), 2u);
  EXPECT_EQ(g.entries[0].second, (std::vector<std::string>{"un", "happi", "ness"}));
  std::istringstream bad("cats\tca|t\n");
  EXPECT_THROW(tokscale::read_gold(bad), tokscale::DataError);
}

TEST(Cognitive, RankCorrelation) {
  // Token counts 1, 2, 3 for the three words.
  const auto v = wp({"a", "b", "##b", "c", "##c"});
  tokscale::CognitiveLexicon lex;
  lex.entries = {{"a", 300}, {"bb", 400}, {"ccc", 500}};
  EXPECT_NEAR(tokscale::cognitive_correlation(v, lex), 1.0, 1e-12);
  lex.entries = {{"a", 500}, {"bb", 400}, {"ccc", 300}};
  EXPECT_NEAR(tokscale::cognitive_correlation(v, lex), -1.0, 1e-12);
  auto shuffled = lex;
  std::reverse(shuffled.entries.begin(), shuffled.entries.end());
  EXPECT_EQ(tokscale::cognitive_correlation(v, shuffled), tokscale::cognitive_correlation(v, lex));
  lex.entries = {{"a", 1}, {"b", 2}, {"c", 3}};
  EXPECT_THROW(tokscale::cognitive_correlation(v, lex), tokscale::InvalidArgument);
}

TEST(Cognitive, AverageRanksForTies) {
  const std::vector<double> x{10, 20, 20, 30};
  EXPECT_EQ(tokscale::average_ranks(x), (std::vector<double>{1, 2.5, 2.5, 4}));
}

TEST(DomainTerms, HandScore) {
  // TF_D = 0.02, TF_G = 0.001.
  std::map<std::string, std::uint64_t> d{{"enzyme", 20}, {"other", 980}};
  std::map<std::string, std::uint64_t> g{{"enzyme", 1}, {"other", 999}};
  const auto s = tokscale::domain_term_classify(d, g);
  const auto it = std::find_if(s.terms.begin(), s.terms.end(), [](const auto& t) { return t.term == "enzyme"; });
  ASSERT_NE(it, s.terms.end());
  EXPECT_NEAR(it->score, 0.02 / (0.001 + 1e-9), 1e-12);
  EXPECT_NEAR(it->score, 20.0, 1e-4);
  EXPECT_EQ(it->label, tokscale::TermLabel::DomainSpecific);
}

TEST(DomainTerms, NeutralGeneralFilterAndNumeric) {
  std::map<std::string, std::uint64_t> d{{"same", 10}, {"rare", 4}, {"common", 1}, {"2024", 50}, {"pad", 935}};
  std::map<std::string, std::uint64_t> g{{"same", 10}, {"common", 500}, {"2024", 1}, {"pad", 489}};
  const auto s = tokscale::domain_term_classify(d, g);
  std::map<std::string, tokscale::TermScore> by;
  for (const auto& t : s.terms) by[t.term] = t;
  EXPECT_FALSE(by.count("rare"));
  EXPECT_NEAR(by["same"].score, 1.0, 1e-6);
  EXPECT_EQ(by["same"].label, tokscale::TermLabel::Neutral);
  EXPECT_EQ(by["common"].label, tokscale::TermLabel::General);
  EXPECT_TRUE(by["2024"].numeric);
  EXPECT_NEAR(s.domain_share + s.general_share + s.numeric_share, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(s.numeric_share, 0.25);
}

}  // namespace
