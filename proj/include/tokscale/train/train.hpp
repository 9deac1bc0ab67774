#pragma once

#include "tokscale/pretoken_table.hpp"
#include "tokscale/train/bpe.hpp"
#include "tokscale/train/trainer_config.hpp"
#include "tokscale/train/unigram.hpp"
#include "tokscale/train/wordpiece.hpp"
#include "tokscale/vocabulary.hpp"

namespace tokscale {

inline Vocabulary train(Algorithm algorithm, const PretokenTable& table, const TrainerConfig& cfg) {
  switch (algorithm) {
    case Algorithm::Bpe: return train_bpe(table, cfg);
    case Algorithm::Unigram: return train_unigram(table, cfg);
    case Algorithm::WordPiece: return train_wordpiece(table, cfg);
  }
  throw InvalidArgument("unknown algorithm");
}

}  // namespace tokscale
