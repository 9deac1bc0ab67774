#pragma once

#include "tokscale/corpus.hpp"
#include "tokscale/experiment.hpp"
#include "tokscale/metrics.hpp"
#include "tokscale/pretoken_table.hpp"
#include "tokscale/pretokenize.hpp"
#include "tokscale/segment.hpp"
#include "tokscale/train/train.hpp"
#include "tokscale/vocabulary.hpp"
