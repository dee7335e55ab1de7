#pragma once

#include <cstdint>

#include "itar/corpus.hpp"
#include "itar/matrix.hpp"

namespace itar {

struct SynthParams {
  std::uint64_t seed = 0;
  int vocab_size = 50;
  int topics = 5;
  int documents = 200;
  double mean_length = 100.0;
  double concentration = 0.3;  // symmetric Dirichlet parameter for theta*
};

struct SynthCorpus {
  Corpus corpus;    // with sequences
  Matrix phi;       // W x T_true
  Matrix theta;     // T_true x D
};

// Each true topic owns a disjoint block of the vocabulary (a random
// partition) with Gamma(1)-distributed weights. Document lengths are
// Poisson(mean_length), at least 1. Tokens are drawn i.i.d. from the mixture
// and then emitted grouped by topic draw, in order of each topic's first
// draw, so documents have segment structure.
SynthCorpus synth_corpus(const SynthParams& params);

}  // namespace itar
