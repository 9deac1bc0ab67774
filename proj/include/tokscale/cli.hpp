#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tokscale/experiment.hpp"
#include "tokscale/metrics.hpp"
#include "tokscale/pretoken_table.hpp"
#include "tokscale/pretokenize.hpp"
#include "tokscale/segment.hpp"
#include "tokscale/train/train.hpp"

namespace tokscale {

// Bad invocation: exit code 2. Every other tokscale::Error exits with 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

namespace cli_detail {

inline std::string read_input(const std::string& path, std::istream& in) {
  if (path == "-") return detail::read_all(in);
  return read_text_file(path);
}

inline void write_output(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
  } else {
    write_file_atomic(path, content);
  }
}

inline PretokenTable load_table(const std::string& path, std::istream& in) {
  std::istringstream ss(read_input(path, in));
  return read_table(ss);
}

inline TokenUsageStats load_stats(const std::string& path, std::istream& in) {
  std::istringstream ss(read_input(path, in));
  return read_stats(ss);
}

inline Vocabulary load_vocab(const std::string& path, std::istream& in) {
  return parse_vocabulary(read_input(path, in));
}

// Stats for a vocabulary either read from a file or computed from a table;
// a stats file must belong to the vocabulary.
inline TokenUsageStats stats_for(const Tokenizer& tok, const std::string& stats_path, const std::string& table_path,
                                 unsigned workers, std::istream& in) {
  if (!stats_path.empty()) {
    TokenUsageStats s = load_stats(stats_path, in);
    if (s.vocab_ref != tok.digest() || s.counts.size() != tok.vocabulary().size()) {
      throw DataError("stats file '" + stats_path + "' was not produced by this vocabulary");
    }
    return s;
  }
  if (!table_path.empty()) return encode_table(tok, load_table(table_path, in), workers);
  throw UsageError("need --stats or --table");
}

inline std::string version_text() {
  nlohmann::ordered_json j;
  j["version"] = TOKSCALE_VERSION;
  j["trainer_defaults"] = trainer_defaults_json();
  j["renyi_alpha"] = RenyiParams{}.alpha;
  j["domain_score"] = {{"theta", DomainScoreParams{}.theta},
                       {"epsilon", DomainScoreParams{}.epsilon},
                       {"min_count", DomainScoreParams{}.min_count}};
  j["plateau"] = {{"rel_threshold", 0.005}, {"window", 2}};
  return "tokscale " TOKSCALE_VERSION "\n" + j.dump(1) + "\n";
}

inline std::string number_line(const std::string& name, double v) { return name + "\t" + format_number(v) + "\n"; }

}  // namespace cli_detail

// Entry point shared by the executable and the tests. `args` excludes the
// program name.
inline int run_cli(std::vector<std::string> args, std::istream& in, std::ostream& out, std::ostream& err) {
  using namespace cli_detail;
  CLI::App app{"Tokenizer training-data scaling toolkit"};
  app.require_subcommand(0, 1);
  bool version = false;
  unsigned workers = 1;
  app.add_flag("--version", version, "Print version and trainer defaults");
  app.add_option("--workers", workers, "Parallelism; never changes results")->check(CLI::Range(1u, 1024u));
  app.fallthrough();

  // pretok
  auto* pretok = app.add_subcommand("pretok", "Split text into pre-tokens or count a corpus into a table");
  std::string pt_text, pt_out, pt_format = "plain";
  std::vector<std::string> pt_inputs;
  bool pt_dedup = false;
  auto* pt_text_opt = pretok->add_option("--text", pt_text, "Text to split; one escaped chunk per line");
  pretok->add_option("--input", pt_inputs, "Corpus files ('-' = stdin)")->excludes(pt_text_opt);
  pretok->add_option("--format", pt_format, "plain | jsonl")->check(CLI::IsMember({"plain", "jsonl"}));
  pretok->add_flag("--dedup", pt_dedup, "Drop exact duplicate documents");
  pretok->add_option("--out", pt_out, "Table output path (default stdout)");

  // train
  auto* trn = app.add_subcommand("train", "Train a vocabulary from a pre-token table");
  std::string tr_table, tr_alg, tr_out;
  TrainerConfig tr_cfg;
  trn->add_option("--table", tr_table, "Pre-token table ('-' = stdin)")->required();
  trn->add_option("--algorithm", tr_alg, "bpe | unigram | wordpiece")
      ->required()
      ->check(CLI::IsMember({"bpe", "unigram", "wordpiece"}));
  trn->add_option("--vocab-size", tr_cfg.vocab_size, "Target vocabulary size")->required();
  trn->add_option("--max-token-bytes", tr_cfg.max_token_bytes)->capture_default_str();
  trn->add_option("--unigram-seed-size", tr_cfg.unigram_seed_size, "0 = 4 x vocab size")->capture_default_str();
  trn->add_option("--unigram-keep-fraction", tr_cfg.unigram_prune_keep_fraction)->capture_default_str();
  trn->add_option("--unigram-em-iterations", tr_cfg.unigram_em_iterations_per_round)->capture_default_str();
  trn->add_option("--wordpiece-min-pair-count", tr_cfg.wordpiece_min_pair_count)->capture_default_str();
  trn->add_option("--out", tr_out, "Vocabulary output path (default stdout)");

  // encode
  auto* enc = app.add_subcommand("encode", "Encode text, decode ids, or compute usage stats of a table");
  std::string en_vocab, en_text, en_input, en_table, en_out;
  bool en_decode = false;
  enc->add_option("--vocab", en_vocab, "Vocabulary file")->required();
  auto* en_text_opt = enc->add_option("--text", en_text, "Text to encode");
  auto* en_input_opt = enc->add_option("--input", en_input, "File to encode ('-' = stdin)")->excludes(en_text_opt);
  enc->add_option("--table", en_table, "Pre-token table; writes usage stats")
      ->excludes(en_text_opt)
      ->excludes(en_input_opt);
  enc->add_flag("--decode", en_decode, "Input holds whitespace-separated ids; print the decoded text");
  enc->add_option("--out", en_out, "Output path (default stdout)");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a vocabulary");
  std::string ev_vocab, ev_stats, ev_table, ev_gold, ev_lex;
  std::optional<double> ev_alpha, ev_freq;
  bool ev_shannon = false, ev_cov = false;
  ev->add_option("--vocab", ev_vocab, "Vocabulary file")->required();
  ev->add_option("--stats", ev_stats, "Usage stats of this vocabulary");
  ev->add_option("--table", ev_table, "Evaluation pre-token table");
  ev->add_option("--renyi", ev_alpha, "Renyi efficiency at this alpha");
  ev->add_flag("--shannon", ev_shannon, "Shannon efficiency");
  ev->add_option("--freq-coverage", ev_freq, "Token share covered by this vocabulary fraction");
  ev->add_flag("--pretoken-coverage", ev_cov, "Single-token pre-token coverage (needs --table)");
  ev->add_option("--morph", ev_gold, "Gold segmentation file");
  ev->add_option("--cognitive", ev_lex, "Lexicon file");

  // compare
  auto* cmp = app.add_subcommand("compare", "Vocabulary overlap and usage Jaccard between two tokenizers");
  std::string cm_a, cm_b, cm_sa, cm_sb, cm_table;
  cmp->add_option("--vocab-a", cm_a)->required();
  cmp->add_option("--vocab-b", cm_b)->required();
  cmp->add_option("--stats-a", cm_sa);
  cmp->add_option("--stats-b", cm_sb);
  cmp->add_option("--table", cm_table, "Evaluation table used for both sides when stats are absent");

  // study
  auto* st = app.add_subcommand("study", "Run the full scaling study");
  std::string st_config, st_outdir;
  std::optional<std::uint64_t> st_seed;
  st->add_option("--config", st_config, "Experiment config (JSON)")->required();
  st->add_option("--seed", st_seed, "Seed for every random choice")->required();
  st->add_option("--output-dir", st_outdir, "Override the config's output directory");
  bool st_quiet = false;
  st->add_flag("--quiet", st_quiet, "No progress on stderr");

  // plateau
  auto* pl = app.add_subcommand("plateau", "Saturation point of a metrics.csv column");
  std::string pl_csv, pl_col;
  double pl_thr = 0.005;
  std::size_t pl_window = 2;
  pl->add_option("--csv", pl_csv, "metrics.csv ('-' = stdin)")->required();
  pl->add_option("--column", pl_col, "Metric column")->required();
  pl->add_option("--threshold", pl_thr)->capture_default_str();
  pl->add_option("--window", pl_window)->capture_default_str();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (version) {
      out << version_text();
      return 0;
    }
    if (app.get_subcommands().empty()) throw UsageError("a subcommand is required (see --help)");

    if (*pretok) {
      if (pretok->count("--text")) {
        std::string text;
        for (const auto c : chunk(pt_text)) text += escape_bytes(c) + "\n";
        out << text;
        return 0;
      }
      if (pt_inputs.empty()) throw UsageError("pretok needs --text or --input");
      std::vector<Document> docs;
      std::unordered_set<std::string> seen;
      const auto format = parse_input_format(pt_format);
      for (std::size_t f = 0; f < pt_inputs.size(); ++f) {
        ingest_buffer(read_input(pt_inputs[f], in), pt_inputs[f], f, format, docs, pt_dedup ? &seen : nullptr);
      }
      write_output(pt_out, detail::table_text(count_corpus(docs, workers)), out);
      return 0;
    }

    if (*trn) {
      const Algorithm alg = parse_algorithm(tr_alg);
      if (tr_cfg.vocab_size <= kByteAlphabetSize) {
        throw DataError("vocabulary size " + std::to_string(tr_cfg.vocab_size) + " must exceed the " +
                        std::to_string(kByteAlphabetSize) + "-token byte alphabet");
      }
      tr_cfg.validate();
      const Vocabulary v = train(alg, load_table(tr_table, in), tr_cfg);
      write_output(tr_out, serialize_vocabulary(v), out);
      return 0;
    }

    if (*enc) {
      const Tokenizer tok(load_vocab(en_vocab, in));
      if (!en_table.empty()) {
        write_output(en_out, detail::stats_text(encode_table(tok, load_table(en_table, in), workers)), out);
        return 0;
      }
      std::string text;
      if (enc->count("--text")) {
        text = en_text;
      } else if (!en_input.empty()) {
        text = read_input(en_input, in);
      } else {
        throw UsageError("encode needs --text, --input or --table");
      }
      if (en_decode) {
        std::vector<TokenId> ids;
        std::istringstream ss(text);
        std::string word;
        while (ss >> word) ids.push_back(static_cast<TokenId>(detail::parse_u64(word, "token id")));
        write_output(en_out, tok.decode(ids), out);
        return 0;
      }
      if (!utf8::is_valid(text)) throw DataError("input is not valid UTF-8");
      std::string line;
      for (const TokenId id : tok.encode(text)) line += (line.empty() ? "" : " ") + std::to_string(id);
      write_output(en_out, line + "\n", out);
      return 0;
    }

    if (*ev) {
      const Tokenizer tok(load_vocab(ev_vocab, in));
      const bool any = ev_alpha || ev_shannon || ev_freq || ev_cov || !ev_gold.empty() || !ev_lex.empty();
      const bool have_usage = !ev_stats.empty() || !ev_table.empty();
      std::string result;
      std::optional<TokenUsageStats> stats;
      auto usage = [&]() -> const TokenUsageStats& {
        if (!stats) stats = stats_for(tok, ev_stats, ev_table, workers, in);
        return *stats;
      };
      if (ev_alpha || (!any && have_usage)) {
        result += number_line("renyi_efficiency", renyi_efficiency(usage(), {ev_alpha.value_or(2.5)}));
      }
      if (ev_shannon) result += number_line("shannon_efficiency", shannon_efficiency(usage()));
      if (ev_freq || (!any && have_usage)) {
        result += number_line("freq_coverage", frequency_coverage(usage(), ev_freq.value_or(0.2)));
      }
      if (ev_cov || (!any && !ev_table.empty())) {
        if (ev_table.empty()) throw UsageError("--pretoken-coverage needs --table");
        const Coverage c = pretoken_coverage(tok.vocabulary(), load_table(ev_table, in));
        result += number_line("pretoken_cov_type", c.type_weighted);
        result += number_line("pretoken_cov_count", c.count_weighted);
      }
      if (have_usage && !any) {
        const auto& s = usage();
        if (s.total_tokens > 0) {
          result += number_line("bytes_per_token",
                                static_cast<double>(s.total_bytes) / static_cast<double>(s.total_tokens));
        }
      }
      if (!ev_gold.empty()) {
        std::istringstream ss(read_input(ev_gold, in));
        const Alignment a = morph_alignment(tok, read_gold(ss));
        result += number_line("morph_precision", a.precision);
        result += number_line("morph_recall", a.recall);
        result += number_line("morph_f1", a.f1);
      }
      if (!ev_lex.empty()) {
        std::istringstream ss(read_input(ev_lex, in));
        result += number_line("cognitive_corr", cognitive_correlation(tok, read_lexicon(ss)));
      }
      if (result.empty()) throw UsageError("eval: nothing to compute; pass --stats/--table or a metric flag");
      out << result;
      return 0;
    }

    if (*cmp) {
      const Tokenizer a(load_vocab(cm_a, in));
      const Tokenizer b(load_vocab(cm_b, in));
      std::string result;
      if (a.vocabulary().size() == b.vocabulary().size()) {
        result += number_line("vocab_overlap", vocab_overlap(a.vocabulary(), b.vocabulary()));
      }
      if ((!cm_sa.empty() && !cm_sb.empty()) || !cm_table.empty()) {
        const auto sa = stats_for(a, cm_sa, cm_table, workers, in);
        const auto sb = stats_for(b, cm_sb, cm_table, workers, in);
        const auto j = jaccard(a.vocabulary(), sa, b.vocabulary(), sb);
        result += number_line("jaccard_plain", j.plain);
        result += number_line("jaccard_weighted", j.weighted);
      }
      if (result.empty()) throw DataError("vocabularies differ in size and no usage data was given");
      out << result;
      return 0;
    }

    if (*st) {
      if (!fs::exists(st_config)) throw UsageError("config file '" + st_config + "' does not exist");
      ExperimentConfig cfg;
      try {
        cfg = load_experiment_config(st_config, st_seed);
      } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
      }
      if (!st_outdir.empty()) cfg.output_dir = st_outdir;
      cfg.workers = workers;
      run_scaling_study(cfg, st_quiet ? nullptr : &err);
      return 0;
    }

    if (*pl) {
      const CsvTable t = parse_csv(read_input(pl_csv, in));
      std::string result;
      for (const auto& p : plateaus_from_csv(t, pl_col, pl_thr, pl_window)) {
        result += p.algorithm + "," + std::to_string(p.vocab_size) + "," + p.slice_label.value_or("none") + "\n";
      }
      out << result;
      return 0;
    }
  } catch (const UsageError& e) {
    err << "tokscale: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "tokscale: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace tokscale
