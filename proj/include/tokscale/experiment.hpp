#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tokscale/corpus.hpp"
#include "tokscale/digest.hpp"
#include "tokscale/error.hpp"
#include "tokscale/metrics.hpp"
#include "tokscale/pretoken_table.hpp"
#include "tokscale/segment.hpp"
#include "tokscale/train/train.hpp"
#include "tokscale/vocabulary.hpp"

namespace tokscale {

namespace fs = std::filesystem;

struct ExperimentConfig {
  std::vector<fs::path> corpus;
  InputFormat format = InputFormat::JsonLines;
  bool dedup = false;
  std::vector<std::uint64_t> slices;       // cumulative target sizes in bytes
  std::vector<std::string> slice_labels;   // optional, defaults to size_label()
  std::uint64_t holdout_bytes = 0;
  std::vector<Algorithm> algorithms;
  std::vector<std::size_t> vocab_sizes;
  TrainerConfig trainer;                   // vocab_size is overridden per cell
  double renyi_alpha = 2.5;
  std::map<std::string, fs::path> domains;  // extra evaluation corpora
  std::optional<fs::path> gold;
  std::optional<fs::path> cognitive;
  std::uint64_t seed = 0;
  fs::path output_dir;
  std::optional<std::string> reference_slice;  // label; default is the largest slice
  double plateau_threshold = 0.005;
  std::size_t plateau_window = 2;
  unsigned workers = 1;  // runtime only, never affects outputs

  void validate() const {
    if (corpus.empty()) throw InvalidArgument("config: no corpus paths");
    if (slices.empty()) throw InvalidArgument("config: empty slice schedule");
    for (std::size_t k = 1; k < slices.size(); ++k) {
      if (slices[k] <= slices[k - 1]) throw InvalidArgument("config: slice schedule must be strictly increasing");
    }
    if (!slice_labels.empty() && slice_labels.size() != slices.size()) {
      throw InvalidArgument("config: slice_labels must match slices");
    }
    if (algorithms.empty()) throw InvalidArgument("config: no algorithms");
    if (vocab_sizes.empty()) throw InvalidArgument("config: no vocabulary sizes");
    for (const std::size_t v : vocab_sizes) {
      if (v <= kByteAlphabetSize) {
        throw InvalidArgument("config: vocabulary size " + std::to_string(v) + " must exceed " +
                              std::to_string(kByteAlphabetSize));
      }
    }
    if (!(renyi_alpha > 0.0) || renyi_alpha == 1.0) throw InvalidArgument("config: renyi_alpha must be positive, != 1");
    if (!(plateau_threshold > 0.0)) throw InvalidArgument("config: plateau threshold must be positive");
    if (plateau_window < 1) throw InvalidArgument("config: plateau window must be >= 1");
    if (output_dir.empty()) throw InvalidArgument("config: output_dir missing");
    for (const auto& label : labels()) {
      if (label.find_first_of(",\n\"/\\") != std::string::npos) {
        throw InvalidArgument("config: slice label '" + label + "' contains a reserved character");
      }
    }
    for (const auto& [label, path] : domains) {
      if (label.empty() || label == "holdout" || label.find_first_of(",\n\"/\\") != std::string::npos) {
        throw InvalidArgument("config: bad domain label '" + label + "'");
      }
    }
    if (reference_slice) {
      const auto ls = labels();
      if (std::find(ls.begin(), ls.end(), *reference_slice) == ls.end()) {
        throw InvalidArgument("config: reference_slice '" + *reference_slice + "' is not a slice label");
      }
    }
    TrainerConfig t = trainer;
    for (const std::size_t v : vocab_sizes) {
      t.vocab_size = v;
      t.validate();
    }
  }

  std::vector<std::string> labels() const {
    if (!slice_labels.empty()) return slice_labels;
    std::vector<std::string> out;
    for (const auto b : slices) out.push_back(size_label(b));
    return out;
  }
};

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["corpus"] = nlohmann::ordered_json::array();
  for (const auto& p : c.corpus) j["corpus"].push_back(p.string());
  j["format"] = c.format == InputFormat::JsonLines ? "jsonl" : "plain";
  j["dedup"] = c.dedup;
  j["slices"] = c.slices;
  j["slice_labels"] = c.labels();
  j["holdout_bytes"] = c.holdout_bytes;
  j["algorithms"] = nlohmann::ordered_json::array();
  for (const auto a : c.algorithms) j["algorithms"].push_back(to_string(a));
  j["vocab_sizes"] = c.vocab_sizes;
  auto trainer = to_json(c.trainer);
  trainer.erase("vocab_size");
  j["trainer"] = trainer;
  j["renyi_alpha"] = c.renyi_alpha;
  j["domains"] = nlohmann::ordered_json::object();
  for (const auto& [label, path] : c.domains) j["domains"][label] = path.string();
  j["gold"] = c.gold ? nlohmann::ordered_json(c.gold->string()) : nlohmann::ordered_json();
  j["cognitive"] = c.cognitive ? nlohmann::ordered_json(c.cognitive->string()) : nlohmann::ordered_json();
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  j["reference_slice"] = c.reference_slice ? nlohmann::ordered_json(*c.reference_slice) : nlohmann::ordered_json();
  j["plateau"] = {{"rel_threshold", c.plateau_threshold}, {"window", c.plateau_window}};
  return j;
}

// Relative paths are resolved against `base` (the config file's directory).
// A seed must come from the config or from `seed`, which takes precedence.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const fs::path& base = {},
                                                    std::optional<std::uint64_t> seed = std::nullopt) {
  static const std::vector<std::string> kKnown = {
      "corpus", "format", "dedup", "slices", "slice_labels", "holdout_bytes", "algorithms", "vocab_sizes",
      "trainer", "renyi_alpha", "domains", "gold", "cognitive", "seed", "output_dir", "reference_slice",
      "plateau", "workers"};
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() || base.empty() ? fs::path(p) : base / p; };
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw InvalidArgument("config: top level must be an object");
    for (const auto& [key, value] : j.items()) {
      if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end()) {
        throw InvalidArgument("config: unknown key '" + key + "'");
      }
    }
    const auto& corpus = j.at("corpus");
    if (corpus.is_string()) {
      c.corpus.push_back(resolve(corpus.get<std::string>()));
    } else {
      for (const auto& p : corpus) c.corpus.push_back(resolve(p.get<std::string>()));
    }
    if (j.contains("format")) c.format = parse_input_format(j.at("format").get<std::string>());
    if (j.contains("dedup")) c.dedup = j.at("dedup").get<bool>();
    c.slices = j.at("slices").get<std::vector<std::uint64_t>>();
    if (j.contains("slice_labels")) c.slice_labels = j.at("slice_labels").get<std::vector<std::string>>();
    if (j.contains("holdout_bytes")) c.holdout_bytes = j.at("holdout_bytes").get<std::uint64_t>();
    for (const auto& a : j.at("algorithms")) c.algorithms.push_back(parse_algorithm(a.get<std::string>()));
    c.vocab_sizes = j.at("vocab_sizes").get<std::vector<std::size_t>>();
    if (j.contains("trainer")) {
      if (j.at("trainer").contains("vocab_size")) {
        throw InvalidArgument("config: trainer.vocab_size is set by vocab_sizes");
      }
      c.trainer = trainer_config_from_json(j.at("trainer"));
    }
    if (j.contains("renyi_alpha")) c.renyi_alpha = j.at("renyi_alpha").get<double>();
    if (j.contains("domains")) {
      for (const auto& [label, path] : j.at("domains").items()) c.domains[label] = resolve(path.get<std::string>());
    }
    if (j.contains("gold") && !j.at("gold").is_null()) c.gold = resolve(j.at("gold").get<std::string>());
    if (j.contains("cognitive") && !j.at("cognitive").is_null()) {
      c.cognitive = resolve(j.at("cognitive").get<std::string>());
    }
    if (seed) {
      c.seed = *seed;
    } else if (j.contains("seed")) {
      c.seed = j.at("seed").get<std::uint64_t>();
    } else {
      throw InvalidArgument("config: a seed is required");
    }
    c.output_dir = resolve(j.at("output_dir").get<std::string>());
    if (j.contains("reference_slice") && !j.at("reference_slice").is_null()) {
      c.reference_slice = j.at("reference_slice").get<std::string>();
    }
    if (j.contains("plateau")) {
      const auto& p = j.at("plateau");
      if (p.contains("rel_threshold")) c.plateau_threshold = p.at("rel_threshold").get<double>();
      if (p.contains("window")) c.plateau_window = p.at("window").get<std::size_t>();
    }
    if (j.contains("workers")) c.workers = j.at("workers").get<unsigned>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const fs::path& path,
                                               std::optional<std::uint64_t> seed = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config '" + path.string() + "': " + e.what());
  }
  return experiment_config_from_json(j, path.parent_path(), seed);
}

// One grid cell of metrics.csv. Empty optionals are written as empty cells.
struct MetricsRow {
  std::string algorithm;
  std::size_t vocab_size = 0;
  std::string slice_label;
  std::uint64_t slice_bytes = 0;
  std::optional<double> vocab_overlap;
  std::optional<double> jaccard_plain_avg;
  std::optional<double> jaccard_weighted_avg;
  std::optional<double> renyi_efficiency;
  std::optional<double> pretoken_cov_type;
  std::optional<double> pretoken_cov_count;
  std::optional<double> freq_cov_20;
  std::optional<double> morph_f1;
  std::optional<double> cognitive_corr;
  std::optional<double> bytes_per_token;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "algorithm",         "vocab_size",       "slice_label",       "slice_bytes", "vocab_overlap",
      "jaccard_plain_avg", "jaccard_weighted_avg", "renyi_efficiency", "pretoken_cov_type",
      "pretoken_cov_count", "freq_cov_20",     "morph_f1",          "cognitive_corr", "bytes_per_token"};
  return cols;
}

struct CellFailure {
  std::string algorithm;
  std::size_t vocab_size = 0;
  std::string slice_label;
  std::string stage;
  std::string message;
};

struct DomainJaccard {
  std::string algorithm;
  std::size_t vocab_size = 0;
  std::string slice_label;
  std::string domain;
  double plain = 0.0;
  double weighted = 0.0;
};

struct OverlapMatrix {
  std::string algorithm;
  std::size_t vocab_size = 0;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;
};

struct PlateauResult {
  std::string algorithm;
  std::size_t vocab_size = 0;
  std::string metric;
  std::optional<std::string> slice_label;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::vector<CellFailure> failures;
  std::vector<DomainJaccard> domain_jaccard;
  std::vector<OverlapMatrix> matrices;
  std::vector<PlateauResult> plateaus;
  nlohmann::ordered_json manifest;  // config echo, slices, artifact digests
};

struct SeriesPoint {
  std::string label;
  std::uint64_t bytes = 0;
  double value = 0.0;
};

// Earliest index i such that the relative change |v[j+1] - v[j]| / |v[j]|
// stays below rel_threshold for j = i .. i + window - 1.
inline std::optional<std::size_t> detect_plateau_index(std::span<const double> values, double rel_threshold,
                                                       std::size_t window) {
  if (window < 1) throw InvalidArgument("detect_plateau: window must be >= 1");
  if (!(rel_threshold > 0.0)) throw InvalidArgument("detect_plateau: threshold must be positive");
  if (values.size() < window + 1) {
    throw InvalidArgument("detect_plateau: need at least " + std::to_string(window + 1) + " points, got " +
                          std::to_string(values.size()));
  }
  if (std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; })) {
    throw InvalidArgument("detect_plateau: degenerate all-zero series");
  }
  auto flat = [&](std::size_t j) {
    const double d = std::abs(values[j + 1] - values[j]);
    if (d == 0.0) return true;
    return values[j] != 0.0 && d / std::abs(values[j]) < rel_threshold;
  };
  for (std::size_t i = 0; i + window < values.size(); ++i) {
    bool ok = true;
    for (std::size_t j = i; j < i + window && ok; ++j) ok = flat(j);
    if (ok) return i;
  }
  return std::nullopt;
}

inline std::optional<std::string> detect_plateau(std::span<const SeriesPoint> series, double rel_threshold = 0.005,
                                                 std::size_t window = 2) {
  std::vector<SeriesPoint> sorted(series.begin(), series.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const SeriesPoint& a, const SeriesPoint& b) { return a.bytes < b.bytes; });
  std::vector<double> values;
  for (const auto& p : sorted) values.push_back(p.value);
  const auto i = detect_plateau_index(values, rel_threshold, window);
  if (!i) return std::nullopt;
  return sorted[*i].label;
}

// Shortest decimal form that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::string out;
  const auto& cols = metrics_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  auto opt = [&](const std::optional<double>& v) {
    out += ',';
    if (v) out += format_number(*v);
  };
  for (const auto& r : rows) {
    out += r.algorithm + ',' + std::to_string(r.vocab_size) + ',' + r.slice_label + ',' + std::to_string(r.slice_bytes);
    opt(r.vocab_overlap);
    opt(r.jaccard_plain_avg);
    opt(r.jaccard_weighted_avg);
    opt(r.renyi_efficiency);
    opt(r.pretoken_cov_type);
    opt(r.pretoken_cov_count);
    opt(r.freq_cov_20);
    opt(r.morph_f1);
    opt(r.cognitive_corr);
    opt(r.bytes_per_token);
    out += '\n';
  }
  return out;
}

// Header plus rows of comma-separated cells; no quoting (the writers never
// need it).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("csv: no column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline CsvTable parse_csv(std::string_view text) {
  CsvTable t;
  auto split = [](std::string_view line) {
    std::vector<std::string> cells;
    while (true) {
      const std::size_t c = line.find(',');
      cells.emplace_back(line.substr(0, c));
      if (c == std::string_view::npos) break;
      line.remove_prefix(c + 1);
    }
    return cells;
  };
  std::size_t lineno = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else {
      if (cells.size() != t.header.size()) {
        throw DataError("csv line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " cells, got " + std::to_string(cells.size()));
      }
      t.rows.push_back(std::move(cells));
    }
  }
  if (t.header.empty()) throw DataError("csv: missing header");
  return t;
}

inline std::optional<double> parse_optional_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (r.ec != std::errc() || r.ptr != cell.data() + cell.size()) throw DataError("csv: bad number '" + cell + "'");
  return v;
}

inline std::vector<MetricsRow> parse_metrics_csv(std::string_view text) {
  const CsvTable t = parse_csv(text);
  if (t.header != metrics_columns()) throw DataError("metrics.csv: unexpected header");
  std::vector<MetricsRow> rows;
  for (const auto& c : t.rows) {
    MetricsRow r;
    r.algorithm = c[0];
    r.vocab_size = static_cast<std::size_t>(detail::parse_u64(c[1], "vocab_size"));
    r.slice_label = c[2];
    r.slice_bytes = detail::parse_u64(c[3], "slice_bytes");
    r.vocab_overlap = parse_optional_number(c[4]);
    r.jaccard_plain_avg = parse_optional_number(c[5]);
    r.jaccard_weighted_avg = parse_optional_number(c[6]);
    r.renyi_efficiency = parse_optional_number(c[7]);
    r.pretoken_cov_type = parse_optional_number(c[8]);
    r.pretoken_cov_count = parse_optional_number(c[9]);
    r.freq_cov_20 = parse_optional_number(c[10]);
    r.morph_f1 = parse_optional_number(c[11]);
    r.cognitive_corr = parse_optional_number(c[12]);
    r.bytes_per_token = parse_optional_number(c[13]);
    rows.push_back(std::move(r));
  }
  return rows;
}

// Plateau of `column` for every (algorithm, vocab_size) group of a metrics
// table, series ordered by slice_bytes. Groups are reported in first-seen
// order; rows with an empty cell are skipped.
inline std::vector<PlateauResult> plateaus_from_csv(const CsvTable& t, std::string_view column, double rel_threshold,
                                                    std::size_t window) {
  const std::size_t ca = t.column("algorithm"), cv = t.column("vocab_size"), cl = t.column("slice_label"),
                    cb = t.column("slice_bytes"), cx = t.column(column);
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::vector<SeriesPoint>> groups;
  for (const auto& r : t.rows) {
    const auto key = std::make_pair(r[ca], r[cv]);
    if (!groups.contains(key)) keys.push_back(key);
    auto& g = groups[key];
    const auto v = parse_optional_number(r[cx]);
    if (v) g.push_back({r[cl], detail::parse_u64(r[cb], "slice_bytes"), *v});
  }
  std::vector<PlateauResult> out;
  for (const auto& key : keys) {
    PlateauResult p;
    p.algorithm = key.first;
    p.vocab_size = static_cast<std::size_t>(detail::parse_u64(key.second, "vocab_size"));
    p.metric = std::string(column);
    const auto& g = groups[key];
    if (g.size() >= window + 1) p.slice_label = detect_plateau(g, rel_threshold, window);
    out.push_back(std::move(p));
  }
  return out;
}

inline void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

// Runs f(0..n-1) on up to `workers` threads. The first exception is rethrown.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& f) {
  const std::size_t threads = std::min<std::size_t>(std::max(1u, workers), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
          try {
            f(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

inline std::string matrix_csv(const OverlapMatrix& m) {
  std::string out = "slice_label";
  for (const auto& l : m.labels) out += ',' + l;
  out += '\n';
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    out += m.labels[i];
    for (const double v : m.values[i]) out += ',' + format_number(v);
    out += '\n';
  }
  return out;
}

inline std::string stats_text(const TokenUsageStats& s) {
  std::ostringstream ss;
  write_stats(ss, s);
  return ss.str();
}

inline std::string table_text(const PretokenTable& t) {
  std::ostringstream ss;
  write_table(ss, t);
  return ss.str();
}

}  // namespace detail

// Writes metrics.csv, jaccard_domains.csv, plateaus.csv, one
// overlap_matrix_<alg>_<size>.csv per (algorithm, size) and manifest.json.
// Returns the paths written.
inline std::vector<fs::path> emit_report(const MetricsReport& report, const fs::path& out_dir) {
  std::vector<fs::path> written;
  nlohmann::ordered_json manifest = report.manifest;
  auto& outputs = manifest["outputs"] = nlohmann::ordered_json::object();
  auto put = [&](const std::string& name, const std::string& content) {
    write_file_atomic(out_dir / name, content);
    outputs[name] = sha256_hex(content);
    written.push_back(out_dir / name);
  };
  put("metrics.csv", metrics_csv(report.rows));

  std::string dj = "algorithm,vocab_size,slice_label,domain,jaccard_plain,jaccard_weighted\n";
  for (const auto& d : report.domain_jaccard) {
    dj += d.algorithm + ',' + std::to_string(d.vocab_size) + ',' + d.slice_label + ',' + d.domain + ',' +
          format_number(d.plain) + ',' + format_number(d.weighted) + '\n';
  }
  put("jaccard_domains.csv", dj);

  std::string pl = "algorithm,vocab_size,metric,slice_label\n";
  for (const auto& p : report.plateaus) {
    pl += p.algorithm + ',' + std::to_string(p.vocab_size) + ',' + p.metric + ',' + p.slice_label.value_or("") + '\n';
  }
  put("plateaus.csv", pl);

  for (const auto& m : report.matrices) {
    put("overlap_matrix_" + m.algorithm + "_" + std::to_string(m.vocab_size) + ".csv", detail::matrix_csv(m));
  }

  auto& failures = manifest["failures"] = nlohmann::ordered_json::array();
  for (const auto& f : report.failures) {
    failures.push_back({{"algorithm", f.algorithm},
                        {"vocab_size", f.vocab_size},
                        {"slice_label", f.slice_label},
                        {"stage", f.stage},
                        {"message", f.message}});
  }
  write_file_atomic(out_dir / "manifest.json", manifest.dump(1) + "\n");
  written.push_back(out_dir / "manifest.json");
  return written;
}

inline nlohmann::ordered_json trainer_defaults_json() {
  auto j = to_json(TrainerConfig{});
  j["pretokenizer"] = "cl100k";
  return j;
}

// Full grid: cumulative slices × algorithms × vocabulary sizes, every cell
// evaluated against the reference slice of the same (algorithm, size) and
// on the held-out documents. Writes all artifacts under cfg.output_dir.
inline MetricsReport run_scaling_study(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  auto note = [&](const std::string& msg) {
    if (log) *log << msg << std::endl;
  };
  const fs::path out = cfg.output_dir;
  const fs::path art = out / "artifacts";
  const fs::path cache = out / "cache";
  fs::create_directories(art);
  fs::create_directories(cache);

  MetricsReport report;
  auto& manifest = report.manifest;
  manifest["tool"] = {{"name", "tokscale"}, {"version", TOKSCALE_VERSION}};
  manifest["trainer_defaults"] = trainer_defaults_json();
  manifest["config"] = to_json(cfg);
  // Sorted so the manifest does not depend on thread timing.
  std::map<std::string, std::string> artifacts;
  auto save = [&](const fs::path& path, const std::string& content) {
    write_file_atomic(path, content);
    artifacts[fs::relative(path, out).generic_string()] = sha256_hex(content);
  };

  note("ingesting corpus");
  const auto docs = ingest(cfg.corpus, cfg.format, cfg.dedup);
  manifest["corpus"] = {{"documents", docs.size()}, {"bytes", total_text_bytes(docs)}};
  const auto split = holdout_split(docs, cfg.holdout_bytes, cfg.seed);
  const SliceManifest slices = build_slices(split.train, cfg.slices, cfg.seed + 1, cfg.slice_labels);
  manifest["holdout"] = {{"documents", split.holdout.size()}, {"bytes", total_text_bytes(split.holdout)}};
  manifest["slices"] = manifest_to_json(slices);
  manifest["slices"].erase("order");

  // Evaluation sets: the holdout first, then configured domains by label.
  std::vector<std::pair<std::string, PretokenTable>> eval_sets;
  if (!split.holdout.empty()) {
    eval_sets.emplace_back("holdout", count_corpus(split.holdout, cfg.workers));
  }
  for (const auto& [label, path] : cfg.domains) {
    const std::vector<fs::path> paths{path};
    eval_sets.emplace_back(label, count_corpus(ingest(paths, cfg.format, false), cfg.workers));
  }
  if (eval_sets.empty()) throw InvalidArgument("no evaluation data: set holdout_bytes or domains");
  for (const auto& [label, table] : eval_sets) {
    save(art / "tables" / ("eval_" + label + ".tsv"), detail::table_text(table));
  }
  const PretokenTable& primary = eval_sets.front().second;

  std::optional<GoldSegmentation> gold;
  std::optional<CognitiveLexicon> lexicon;
  if (cfg.gold) {
    std::ifstream in(*cfg.gold);
    if (!in) throw IoError("cannot read gold segmentation '" + cfg.gold->string() + "'");
    gold = read_gold(in);
  }
  if (cfg.cognitive) {
    std::ifstream in(*cfg.cognitive);
    if (!in) throw IoError("cannot read lexicon '" + cfg.cognitive->string() + "'");
    lexicon = read_lexicon(in);
  }

  const auto labels = cfg.labels();
  const std::size_t n_slices = labels.size();
  struct Cell {
    Algorithm algorithm;
    std::size_t size;
    std::size_t slice;
    std::optional<Vocabulary> vocab;
    std::optional<CellFailure> failure;
  };
  std::vector<Cell> cells;
  for (const Algorithm a : cfg.algorithms) {
    for (const std::size_t v : cfg.vocab_sizes) {
      for (std::size_t k = 0; k < n_slices; ++k) cells.push_back({a, v, k, std::nullopt, std::nullopt});
    }
  }
  auto cell_name = [&](const Cell& c) {
    return std::string(to_string(c.algorithm)) + "_" + std::to_string(c.size) + "_" + labels[c.slice];
  };
  auto fail = [&](Cell& c, std::string stage, std::string message) {
    c.failure = CellFailure{std::string(to_string(c.algorithm)), c.size, labels[c.slice], std::move(stage),
                            std::move(message)};
  };

  // Cumulative tables: slice k = slice k-1 plus the documents it adds.
  PretokenTable table;
  std::mutex artifacts_mu;
  for (std::size_t k = 0; k < n_slices; ++k) {
    const Slice& s = slices.slices[k];
    const std::size_t begin = k == 0 ? 0 : slices.slices[k - 1].doc_end;
    std::vector<Document> delta;
    for (std::size_t i = begin; i < s.doc_end; ++i) delta.push_back(split.train[slices.order[i]]);
    table.merge(count_corpus(delta, cfg.workers));
    note("slice " + s.label + ": " + std::to_string(table.size()) + " unique pre-tokens");
    const std::string ttext = detail::table_text(table);
    const std::string tdigest = sha256_hex(ttext);
    save(art / "tables" / (s.label + ".tsv"), ttext);

    std::vector<Cell*> todo;
    for (auto& c : cells) {
      if (c.slice == k) todo.push_back(&c);
    }
    detail::parallel_for(todo.size(), cfg.workers, [&](std::size_t i) {
      Cell& c = *todo[i];
      TrainerConfig tc = cfg.trainer;
      tc.vocab_size = c.size;
      const std::string key =
          sha256_hex(tdigest + "|" + std::string(to_string(c.algorithm)) + "|" + to_json(tc).dump());
      const fs::path cached = cache / (key + ".json");
      try {
        if (fs::exists(cached)) {
          c.vocab = load_vocabulary(cached.string());
        } else {
          c.vocab = train(c.algorithm, table, tc);
          write_file_atomic(cached, serialize_vocabulary(*c.vocab));
        }
        const std::string vtext = serialize_vocabulary(*c.vocab);
        std::lock_guard lock(artifacts_mu);
        save(art / "vocab" / (cell_name(c) + ".json"), vtext);
      } catch (const Error& e) {
        c.vocab.reset();
        fail(c, "train", e.what());
      }
    });
  }
  table = PretokenTable();

  // Reference cells and their usage on every evaluation set.
  const std::size_t ref_slice =
      cfg.reference_slice
          ? static_cast<std::size_t>(std::find(labels.begin(), labels.end(), *cfg.reference_slice) - labels.begin())
          : n_slices - 1;
  struct Usage {
    std::vector<TokenUsage> per_set;
    TokenUsageStats primary;
  };
  auto usage_of = [&](const Cell& c, const Tokenizer& tok) {
    Usage u;
    for (std::size_t d = 0; d < eval_sets.size(); ++d) {
      const auto stats = encode_table(tok, eval_sets[d].second, 1);
      {
        std::lock_guard lock(artifacts_mu);
        save(art / "stats" / (cell_name(c) + "_" + eval_sets[d].first + ".tsv"), detail::stats_text(stats));
      }
      u.per_set.push_back(usage_by_token(tok.vocabulary(), stats));
      if (d == 0) u.primary = stats;
    }
    return u;
  };

  std::vector<MetricsRow> rows(cells.size());
  std::vector<bool> have_row(cells.size(), false);
  std::vector<std::vector<DomainJaccard>> dj(cells.size());
  const std::size_t groups = cfg.algorithms.size() * cfg.vocab_sizes.size();
  // Groups are contiguous runs of n_slices cells. Each group evaluates its
  // reference first; groups run in parallel.
  detail::parallel_for(groups, cfg.workers, [&](std::size_t g) {
    Cell* group = &cells[g * n_slices];
    Cell& ref = group[ref_slice];
    std::optional<Usage> ref_usage;
    if (ref.vocab) {
      try {
        ref_usage = usage_of(ref, Tokenizer(*ref.vocab));
      } catch (const Error& e) {
        fail(ref, "evaluate", e.what());
        ref.vocab.reset();
      }
    }
    for (std::size_t k = 0; k < n_slices; ++k) {
      Cell& c = group[k];
      if (!c.vocab) continue;
      const std::size_t idx = g * n_slices + k;
      try {
        const Tokenizer tok(*c.vocab);
        const Usage u = k == ref_slice ? *ref_usage : usage_of(c, tok);
        MetricsRow r;
        r.algorithm = std::string(to_string(c.algorithm));
        r.vocab_size = c.size;
        r.slice_label = labels[k];
        r.slice_bytes = slices.slices[k].achieved_bytes;
        if (ref_usage) {
          r.vocab_overlap = vocab_overlap(*c.vocab, *ref.vocab);
          double plain = 0.0, weighted = 0.0;
          for (std::size_t d = 0; d < eval_sets.size(); ++d) {
            const auto j = jaccard(u.per_set[d], ref_usage->per_set[d]);
            plain += j.plain;
            weighted += j.weighted;
            dj[idx].push_back({r.algorithm, c.size, r.slice_label, eval_sets[d].first, j.plain, j.weighted});
          }
          r.jaccard_plain_avg = plain / static_cast<double>(eval_sets.size());
          r.jaccard_weighted_avg = weighted / static_cast<double>(eval_sets.size());
        }
        if (u.primary.total_tokens > 0) {
          r.renyi_efficiency = renyi_efficiency(u.primary, {cfg.renyi_alpha});
          r.freq_cov_20 = frequency_coverage(u.primary, 0.2);
          r.bytes_per_token =
              static_cast<double>(u.primary.total_bytes) / static_cast<double>(u.primary.total_tokens);
        }
        const Coverage cov = pretoken_coverage(*c.vocab, primary);
        r.pretoken_cov_type = cov.type_weighted;
        r.pretoken_cov_count = cov.count_weighted;
        if (gold) r.morph_f1 = morph_alignment(tok, *gold).f1;
        if (lexicon) r.cognitive_corr = cognitive_correlation(tok, *lexicon);
        rows[idx] = std::move(r);
        have_row[idx] = true;
      } catch (const Error& e) {
        fail(c, "evaluate", e.what());
      }
    }
  });

  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (have_row[i]) report.rows.push_back(rows[i]);
    for (auto& d : dj[i]) report.domain_jaccard.push_back(std::move(d));
    if (cells[i].failure) report.failures.push_back(*cells[i].failure);
  }

  for (std::size_t g = 0; g < groups; ++g) {
    const Cell* group = &cells[g * n_slices];
    OverlapMatrix m;
    m.algorithm = std::string(to_string(group[0].algorithm));
    m.vocab_size = group[0].size;
    std::vector<Vocabulary> vocabs;
    for (std::size_t k = 0; k < n_slices; ++k) {
      if (group[k].vocab) {
        m.labels.push_back(labels[k]);
        vocabs.push_back(*group[k].vocab);
      }
    }
    m.values = overlap_matrix(vocabs);
    PlateauResult p{m.algorithm, m.vocab_size, "renyi_efficiency", std::nullopt};
    report.matrices.push_back(std::move(m));

    std::vector<SeriesPoint> series;
    for (std::size_t k = 0; k < n_slices; ++k) {
      const std::size_t idx = g * n_slices + k;
      if (have_row[idx] && rows[idx].renyi_efficiency) {
        series.push_back({labels[k], rows[idx].slice_bytes, *rows[idx].renyi_efficiency});
      }
    }
    if (series.size() >= cfg.plateau_window + 1) {
      try {
        p.slice_label = detect_plateau(series, cfg.plateau_threshold, cfg.plateau_window);
      } catch (const Error&) {
      }
    }
    report.plateaus.push_back(std::move(p));
  }

  manifest["artifacts"] = artifacts;
  emit_report(report, out);
  note("wrote " + (out / "metrics.csv").string());
  return report;
}

}  // namespace tokscale
