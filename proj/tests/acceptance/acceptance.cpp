// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// when any fails. Corpora are produced by tools/make_corpus.py (see the ctest
// fixture in tests/CMakeLists.txt).

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "reference_trainers.hpp"
#include "regex_oracle.hpp"
#include "segmentation_oracle.hpp"
#include "text_gen.hpp"
#include "tokscale/tokscale.hpp"

namespace fs = std::filesystem;
using namespace tokscale;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Gate {
  int failures = 0;
  std::vector<std::string> only;

  bool wanted(const std::string& id) const {
    return only.empty() || std::find(only.begin(), only.end(), id) != only.end();
  }

  void run(const std::string& id, const std::string& name, const std::function<Outcome()>& body) {
    if (!wanted(id)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << "  (" << std::fixed
         << std::setprecision(1) << secs << "s)  " << o.detail;
    std::cout << line.str() << std::endl;
    if (!o.pass) ++failures;
  }
};

// The 1MB fixture: raw documents and the pre-token stream in document order.
struct Fixture {
  std::vector<Document> docs;
  PretokenTable table;
  std::vector<std::string_view> stream;
};

const Fixture& fixture(const fs::path& data) {
  static const Fixture f = [&] {
    Fixture x;
    const std::vector<fs::path> paths{data / "fixture_1mb.jsonl"};
    x.docs = ingest(paths, InputFormat::JsonLines, false);
    x.table = count_corpus(x.docs, 1);
    for (const auto& d : x.docs) {
      for (const auto c : chunk(d.text)) x.stream.push_back(c);
    }
    return x;
  }();
  return f;
}

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(6) << x;
  return s.str();
}

Outcome pretokenizer_fuzz() {
  testing::RegexChunker canonical(testing::kCl100kPattern);
  testing::RegexChunker listing(testing::kListingPattern);
  testing::FuzzStrings fuzz(20241016);
  testing::SyntheticCorpus prose(7, 5000);
  ChunkOptions listing_opts;
  listing_opts.contraction_apostrophe = false;
  constexpr int kStrings = 12000;
  int agree = 0, listing_agree = 0, roundtrip = 0;
  std::string first_mismatch;
  for (int i = 0; i < kStrings; ++i) {
    const std::string s = i % 4 == 3 ? prose.document(200) : fuzz.next();
    const auto got = chunk(s);
    if (got == canonical.chunk(s)) {
      ++agree;
    } else if (first_mismatch.empty()) {
      first_mismatch = escape_bytes(s);
    }
    const auto lg = chunk(s, listing_opts);
    if (lg == listing.chunk(s)) ++listing_agree;
    std::string joined;
    for (const auto c : got) joined += c;
    if (joined == s) ++roundtrip;
  }
  Outcome o;
  o.pass = agree == kStrings && listing_agree == kStrings && roundtrip == kStrings;
  o.detail = std::to_string(agree) + "/" + std::to_string(kStrings) + " agree with the regex oracle, " +
             std::to_string(listing_agree) + "/" + std::to_string(kStrings) + " for the listing variant, " +
             std::to_string(roundtrip) + " round-trip";
  if (!first_mismatch.empty()) o.detail += "; first mismatch: " + first_mismatch;
  return o;
}

Outcome training_equivalence(const fs::path& data) {
  const auto& f = fixture(data);
  TrainerConfig c;
  c.vocab_size = 1000;
  const auto bpe = train_bpe(f.table, c);
  const auto ref_bpe = testing::reference_bpe(f.stream, c.vocab_size, c.max_token_bytes);
  c.vocab_size = wordpiece_base_size(f.table) + 500;
  const auto wp = train_wordpiece(f.table, c);
  const auto ref_wp =
      testing::reference_wordpiece(f.stream, c.vocab_size, c.max_token_bytes, c.wordpiece_min_pair_count);
  const bool bpe_ok = bpe.merges == ref_bpe.merges && bpe.tokens == ref_bpe.tokens;
  const bool wp_ok = wp.merges == ref_wp.merges && wp.tokens == ref_wp.tokens;
  return {bpe_ok && wp_ok && !bpe.merges.empty() && !wp.merges.empty(),
          std::to_string(f.stream.size()) + " raw pre-tokens; bpe " + std::to_string(bpe.merges.size()) +
              " merges " + (bpe_ok ? "identical" : "DIFFER") + ", wordpiece " + std::to_string(wp.merges.size()) +
              " merges " + (wp_ok ? "identical" : "DIFFER")};
}

Outcome viterbi_optimality(const fs::path& data) {
  const auto& f = fixture(data);
  TrainerConfig c;
  c.vocab_size = 200;
  const Tokenizer tok(train_unigram(f.table, c));
  std::size_t checked = 0, agree = 0, no_path = 0;
  std::string first;
  for (const auto& [piece, count] : f.table.sorted_entries()) {
    if (piece.size() > 12) continue;
    ++checked;
    const auto best = testing::exhaustive_best(tok.vocabulary(), piece);
    const auto ids = tok.encode_chunk(piece);
    if (!best) {
      // No in-vocabulary path: the encoder must fall back to <unk>.
      ++no_path;
      bool unk = false;
      for (const auto id : ids) unk |= tok.is_unknown(id);
      if (unk) ++agree;
      continue;
    }
    if (ids == best->ids) {
      ++agree;
    } else if (first.empty()) {
      first = escape_bytes(piece);
    }
  }
  Outcome o;
  o.pass = checked > 0 && agree == checked;
  o.detail = std::to_string(agree) + "/" + std::to_string(checked) + " chunks of <= 12 bytes match exhaustive search (" +
             std::to_string(no_path) + " need <unk>)";
  if (!first.empty()) o.detail += "; first mismatch: " + first;
  return o;
}

Vocabulary plain(std::vector<std::string> tokens, Algorithm alg = Algorithm::Bpe) {
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

Outcome metric_hand_values() {
  const double overlap = vocab_overlap(plain({"a", "b", "c", "d"}), plain({"c", "d", "e", "f"}));
  const auto j = jaccard(plain({"a", "b"}), usage({2, 2}), plain({"a", "b"}), usage({1, 3}));
  const double renyi = renyi_efficiency(usage({70, 10, 10, 10}), {2.5});
  std::map<std::string, std::uint64_t> d{{"enzyme", 20}, {"other", 980}};
  std::map<std::string, std::uint64_t> g{{"enzyme", 1}, {"other", 999}};
  const auto dom = domain_term_classify(d, g);
  const auto enzyme = std::find_if(dom.terms.begin(), dom.terms.end(), [](auto& t) { return t.term == "enzyme"; });
  auto wp = plain({"[UNK]", "un", "##happiness"}, Algorithm::WordPiece);
  wp.special = {"[UNK]"};
  wp.continuation_marker = "##";
  GoldSegmentation gold;
  gold.entries.push_back({"unhappiness", {"un", "happi", "ness"}});
  const double f1 = morph_alignment(wp, gold).f1;

  const bool ok_overlap = overlap == 0.5;
  const bool ok_jaccard = std::abs(j.weighted - 0.6) < 1e-12;
  const bool ok_renyi = std::abs(renyi - 0.418) <= 1e-3;
  const bool ok_domain = enzyme != dom.terms.end() && enzyme->label == TermLabel::DomainSpecific;
  const bool ok_f1 = std::abs(f1 - 2.0 / 3.0) <= 1e-9;
  return {ok_overlap && ok_jaccard && ok_renyi && ok_domain && ok_f1,
          "overlap=" + fmt(overlap) + " weighted_jaccard=" + fmt(j.weighted) + " renyi=" + fmt(renyi) +
              " domain_score=" + fmt(enzyme != dom.terms.end() ? enzyme->score : 0.0) + " (" +
              (enzyme != dom.terms.end() ? std::string(to_string(enzyme->label)) : "missing") + ") f1=" + fmt(f1)};
}

ExperimentConfig study_config(const fs::path& corpus, const fs::path& out, std::vector<std::uint64_t> slices,
                              std::vector<std::size_t> sizes, std::uint64_t holdout, std::uint64_t seed) {
  ExperimentConfig c;
  c.corpus = {corpus};
  c.slices = std::move(slices);
  c.holdout_bytes = holdout;
  c.algorithms = {Algorithm::Bpe, Algorithm::Unigram, Algorithm::WordPiece};
  c.vocab_sizes = std::move(sizes);
  c.seed = seed;
  c.output_dir = out;
  return c;
}

constexpr std::uint64_t MB = 1'000'000;

Outcome determinism(const fs::path& data, const fs::path& work) {
  std::string csv[2];
  const unsigned workers[2] = {1, 8};
  for (int i = 0; i < 2; ++i) {
    const fs::path out = work / ("determinism_w" + std::to_string(workers[i]));
    fs::remove_all(out);
    auto cfg = study_config(data / "en_50mb.jsonl", out, {5 * MB, 10 * MB, 20 * MB, 45 * MB}, {8000}, 2 * MB, 11);
    cfg.workers = workers[i];
    run_scaling_study(cfg);
    csv[i] = read_text_file(out / "metrics.csv");
  }
  const auto rows = std::count(csv[0].begin(), csv[0].end(), '\n') - 1;
  return {csv[0] == csv[1] && rows == 12,
          std::to_string(rows) + " rows; metrics.csv with 1 and 8 workers " +
              (csv[0] == csv[1] ? "byte-identical (sha256 " + sha256_hex(csv[0]).substr(0, 16) + ")" : "DIFFER")};
}

struct Group {
  std::vector<const MetricsRow*> rows;  // ordered by slice bytes
};

std::map<std::pair<std::string, std::size_t>, Group> by_group(const std::vector<MetricsRow>& rows) {
  std::map<std::pair<std::string, std::size_t>, Group> g;
  for (const auto& r : rows) g[{r.algorithm, r.vocab_size}].rows.push_back(&r);
  for (auto& [k, v] : g) {
    std::sort(v.rows.begin(), v.rows.end(), [](auto* a, auto* b) { return a->slice_bytes < b->slice_bytes; });
  }
  return g;
}

void trend_criteria(Gate& gate, const fs::path& data, const fs::path& work) {
  std::optional<MetricsReport> report;
  std::string setup_error;
  auto study = [&]() -> const MetricsReport& {
    if (!report && setup_error.empty()) {
      try {
        const fs::path out = work / "trends_en";
        fs::remove_all(out);
        auto cfg = study_config(data / "en_210mb.jsonl", out, {5 * MB, 10 * MB, 20 * MB, 50 * MB, 100 * MB, 200 * MB},
                                {8000, 16000}, 5 * MB, 2024);
        cfg.workers = std::max(1u, std::thread::hardware_concurrency());
        const auto t0 = std::chrono::steady_clock::now();
        report = run_scaling_study(cfg);
        std::cout << "      trend study: " << report->rows.size() << " cells in " << std::fixed << std::setprecision(0)
                  << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << "s on "
                  << cfg.workers << " worker(s)" << std::endl;
      } catch (const std::exception& e) {
        setup_error = e.what();
      }
    }
    if (!report) throw Error("trend study failed: " + setup_error);
    return *report;
  };
  auto complete = [&](const MetricsReport& r) {
    if (!r.failures.empty()) throw Error(std::to_string(r.failures.size()) + " cells failed: " + r.failures[0].message);
    if (r.rows.size() != 36) throw Error("expected 36 cells, got " + std::to_string(r.rows.size()));
  };

  gate.run("6a", "trend: vocab overlap grows with data", [&]() -> Outcome {
    const auto& r = study();
    complete(r);
    bool ok = true;
    std::string detail;
    for (const auto& [key, g] : by_group(r.rows)) {
      int inversions = 0;
      double worst = 0.0;
      for (std::size_t i = 1; i < g.rows.size(); ++i) {
        const double drop = *g.rows[i - 1]->vocab_overlap - *g.rows[i]->vocab_overlap;
        if (drop > 0) {
          ++inversions;
          worst = std::max(worst, drop);
        }
      }
      ok &= inversions == 0 || (inversions == 1 && worst <= 0.02);
      detail += key.first + "/" + std::to_string(key.second) + " " + fmt(*g.rows.front()->vocab_overlap) + "->" +
                fmt(*g.rows[g.rows.size() - 2]->vocab_overlap) + " inv=" + std::to_string(inversions) + "; ";
    }
    return {ok, detail};
  });

  gate.run("6b", "trend: weighted Jaccard >= plain Jaccard", [&]() -> Outcome {
    const auto& r = study();
    complete(r);
    int bad = 0;
    double min_gap = 1.0;
    for (const auto& row : r.rows) {
      const double gap = *row.jaccard_weighted_avg - *row.jaccard_plain_avg;
      min_gap = std::min(min_gap, gap);
      if (gap < 0) ++bad;
    }
    return {bad == 0, std::to_string(r.rows.size() - bad) + "/" + std::to_string(r.rows.size()) +
                          " cells hold; smallest weighted-plain gap " + fmt(min_gap)};
  });

  gate.run("6c", "trend: pretoken coverage grows with vocabulary size", [&]() -> Outcome {
    const auto& r = study();
    complete(r);
    std::map<std::pair<std::string, std::uint64_t>, std::map<std::size_t, double>> cov;
    for (const auto& row : r.rows) cov[{row.algorithm, row.slice_bytes}][row.vocab_size] = *row.pretoken_cov_count;
    int ok = 0, total = 0;
    double min_gain = 1.0;
    for (const auto& [key, m] : cov) {
      ++total;
      const double gain = m.at(16000) - m.at(8000);
      min_gain = std::min(min_gain, gain);
      if (gain > 0) ++ok;
    }
    return {ok == total, std::to_string(ok) + "/" + std::to_string(total) +
                             " (algorithm, slice) pairs increase; smallest gain " + fmt(min_gain)};
  });

  gate.run("6d", "trend: 20% of vocabulary covers >= 75% of held-out tokens", [&]() -> Outcome {
    const auto& r = study();
    complete(r);
    bool ok = true;
    std::string detail;
    for (const auto& [key, g] : by_group(r.rows)) {
      const double v = *g.rows.back()->freq_cov_20;
      ok &= v >= 0.75;
      detail += key.first + "/" + std::to_string(key.second) + "=" + fmt(v) + " ";
    }
    return {ok, detail};
  });

  gate.run("6e", "trend: Renyi efficiency plateau detected", [&]() -> Outcome {
    const auto& r = study();
    complete(r);
    int fired = 0;
    std::string detail;
    for (const auto& p : r.plateaus) {
      if (p.metric != "renyi_efficiency") continue;
      if (p.slice_label) ++fired;
      detail += p.algorithm + "/" + std::to_string(p.vocab_size) + "=" + p.slice_label.value_or("none") + " ";
    }
    return {fired >= 1, std::to_string(fired) + " groups plateau: " + detail};
  });
}

Outcome cyrillic(const fs::path& data, const fs::path& work) {
  const fs::path corpus = data / "ru_22mb.jsonl";
  const std::vector<fs::path> paths{corpus};
  const auto docs = ingest(paths, InputFormat::JsonLines, false);
  std::size_t roundtrip = 0;
  for (const auto& d : docs) {
    std::string joined;
    for (const auto c : chunk(d.text)) joined += c;
    roundtrip += joined == d.text;
  }
  const fs::path out = work / "cyrillic";
  fs::remove_all(out);
  auto cfg = study_config(corpus, out, {5 * MB, 10 * MB, 20 * MB}, {8000}, 1 * MB, 5);
  cfg.workers = std::max(1u, std::thread::hardware_concurrency());
  const auto r = run_scaling_study(cfg);
  std::size_t finite = 0;
  for (const auto& row : r.rows) {
    bool ok = true;
    for (const auto& m : {row.vocab_overlap, row.jaccard_plain_avg, row.jaccard_weighted_avg, row.renyi_efficiency,
                          row.pretoken_cov_type, row.pretoken_cov_count, row.freq_cov_20, row.bytes_per_token}) {
      ok &= m.has_value() && std::isfinite(*m);
    }
    finite += ok;
  }
  // Decoding the held-out text must restore it exactly with a trained vocabulary.
  const Tokenizer tok(parse_vocabulary(read_text_file(out / "artifacts" / "vocab" / "bpe_8000_20MB.json")));
  std::size_t decoded = 0, sample = std::min<std::size_t>(docs.size(), 200);
  for (std::size_t i = 0; i < sample; ++i) decoded += tok.decode(tok.encode(docs[i].text)) == docs[i].text;
  const bool pass = roundtrip == docs.size() && r.failures.empty() && r.rows.size() == 9 && finite == 9 &&
                    decoded == sample;
  return {pass, std::to_string(total_text_bytes(docs) / MB) + "MB, " + std::to_string(roundtrip) + "/" +
                    std::to_string(docs.size()) + " documents chunk round-trip, " + std::to_string(finite) + "/" +
                    std::to_string(r.rows.size()) + " cells with finite metrics, " + std::to_string(r.failures.size()) +
                    " failures, bpe decode(encode) " + std::to_string(decoded) + "/" + std::to_string(sample)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tokscale acceptance gate"};
  fs::path data, work;
  Gate gate;
  app.add_option("--data", data, "Directory with the generated corpora")->required();
  app.add_option("--work", work, "Scratch directory for study outputs")->required();
  app.add_option("--only", gate.only, "Run only these criterion ids");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  gate.run("1", "pre-tokenizer matches regex oracle on fuzz strings", pretokenizer_fuzz);
  gate.run("2", "count-based BPE/WordPiece training equals naive stream training",
           [&] { return training_equivalence(data); });
  gate.run("3", "Unigram Viterbi equals exhaustive segmentation", [&] { return viterbi_optimality(data); });
  gate.run("4", "metric hand values", metric_hand_values);
  gate.run("5", "study output independent of worker count", [&] { return determinism(data, work); });
  trend_criteria(gate, data, work);
  gate.run("7", "Cyrillic corpus end to end", [&] { return cyrillic(data, work); });

  std::cout << (gate.failures == 0 ? "ALL PASS" : std::to_string(gate.failures) + " FAILED") << std::endl;
  return gate.failures == 0 ? 0 : 1;
}
