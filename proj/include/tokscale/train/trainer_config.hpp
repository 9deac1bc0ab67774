#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "json.hpp"
#include "tokscale/error.hpp"
#include "tokscale/vocabulary.hpp"

namespace tokscale {

struct TrainerConfig {
  std::size_t vocab_size = 8000;
  // Number of candidate substrings seeding UnigramLM training, on top of the
  // single bytes. 0 selects 4 x vocab_size.
  std::size_t unigram_seed_size = 0;
  double unigram_prune_keep_fraction = 0.75;
  int unigram_em_iterations_per_round = 2;
  std::uint64_t wordpiece_min_pair_count = 2;
  std::size_t max_token_bytes = 16;

  std::size_t effective_seed_size() const {
    return unigram_seed_size == 0 ? 4 * vocab_size : unigram_seed_size;
  }

  void validate() const {
    if (vocab_size == 0) throw InvalidArgument("vocab_size must be positive");
    if (!(unigram_prune_keep_fraction > 0.0 && unigram_prune_keep_fraction < 1.0)) {
      throw InvalidArgument("unigram_prune_keep_fraction must be in (0,1)");
    }
    if (unigram_em_iterations_per_round < 1) {
      throw InvalidArgument("unigram_em_iterations_per_round must be >= 1");
    }
    if (max_token_bytes < 1) throw InvalidArgument("max_token_bytes must be >= 1");
    if (unigram_seed_size != 0 && unigram_seed_size <= vocab_size) {
      throw InvalidArgument("unigram_seed_size (" + std::to_string(unigram_seed_size) +
                            ") must exceed vocab_size (" + std::to_string(vocab_size) + ")");
    }
  }

  friend bool operator==(const TrainerConfig&, const TrainerConfig&) = default;
};

inline nlohmann::ordered_json to_json(const TrainerConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"unigram_seed_size", c.unigram_seed_size},
          {"unigram_prune_keep_fraction", c.unigram_prune_keep_fraction},
          {"unigram_em_iterations_per_round", c.unigram_em_iterations_per_round},
          {"wordpiece_min_pair_count", c.wordpiece_min_pair_count},
          {"max_token_bytes", c.max_token_bytes}};
}

// Missing keys keep their defaults.
inline TrainerConfig trainer_config_from_json(const nlohmann::json& j, TrainerConfig c = {}) {
  try {
    if (j.contains("vocab_size")) c.vocab_size = j.at("vocab_size").get<std::size_t>();
    if (j.contains("unigram_seed_size")) c.unigram_seed_size = j.at("unigram_seed_size").get<std::size_t>();
    if (j.contains("unigram_prune_keep_fraction")) {
      c.unigram_prune_keep_fraction = j.at("unigram_prune_keep_fraction").get<double>();
    }
    if (j.contains("unigram_em_iterations_per_round")) {
      c.unigram_em_iterations_per_round = j.at("unigram_em_iterations_per_round").get<int>();
    }
    if (j.contains("wordpiece_min_pair_count")) {
      c.wordpiece_min_pair_count = j.at("wordpiece_min_pair_count").get<std::uint64_t>();
    }
    if (j.contains("max_token_bytes")) c.max_token_bytes = j.at("max_token_bytes").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad trainer config: ") + e.what());
  }
  return c;
}

}  // namespace tokscale
