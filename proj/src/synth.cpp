#include "itar/synth.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

namespace itar {

SynthCorpus synth_corpus(const SynthParams& params) {
  if (params.vocab_size < 1 || params.topics < 1 || params.documents < 1 || !(params.mean_length > 0.0) ||
      !(params.concentration > 0.0)) {
    throw std::invalid_argument("synthetic corpus parameters must be positive");
  }
  if (params.topics > params.vocab_size) throw std::invalid_argument("more topics than words");

  std::mt19937_64 rng(params.seed);
  const int W = params.vocab_size;
  const int T = params.topics;
  const int D = params.documents;

  std::vector<int> perm(static_cast<std::size_t>(W));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  SynthCorpus out;
  out.phi = Matrix::Zero(W, T);
  std::gamma_distribution<double> unit_gamma(1.0, 1.0);
  for (int i = 0; i < W; ++i) {
    const int t = i * T / W;
    out.phi(perm[static_cast<std::size_t>(i)], t) = unit_gamma(rng) + 1e-3;
  }
  for (int t = 0; t < T; ++t) out.phi.col(t) /= out.phi.col(t).sum();

  out.theta = Matrix::Zero(T, D);
  std::gamma_distribution<double> dir_gamma(params.concentration, 1.0);
  for (int d = 0; d < D; ++d) {
    double sum = 0.0;
    for (int t = 0; t < T; ++t) sum += (out.theta(t, d) = dir_gamma(rng));
    if (sum <= 0.0) {
      out.theta(std::uniform_int_distribution<int>(0, T - 1)(rng), d) = 1.0;
    } else {
      out.theta.col(d) /= sum;
    }
  }

  std::vector<std::discrete_distribution<int>> word_dists;
  word_dists.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) word_dists.emplace_back(out.phi.col(t).data(), out.phi.col(t).data() + W);

  Vocabulary vocab;
  for (int w = 0; w < W; ++w) vocab.intern(fmt::format("w{:03d}", w));

  std::poisson_distribution<int> length_dist(params.mean_length);
  std::vector<Document> docs;
  docs.reserve(static_cast<std::size_t>(D));
  for (int d = 0; d < D; ++d) {
    const int length = std::max(1, length_dist(rng));
    std::discrete_distribution<int> topic_dist(out.theta.col(d).data(), out.theta.col(d).data() + T);
    std::vector<std::vector<TokenId>> by_topic(static_cast<std::size_t>(T));
    std::vector<int> first_seen;
    for (int i = 0; i < length; ++i) {
      const int t = topic_dist(rng);
      auto& bucket = by_topic[static_cast<std::size_t>(t)];
      if (bucket.empty()) first_seen.push_back(t);
      bucket.push_back(static_cast<TokenId>(word_dists[static_cast<std::size_t>(t)](rng)));
    }
    Document doc;
    doc.id = fmt::format("doc{:05d}", d);
    std::vector<TokenId> sequence;
    sequence.reserve(static_cast<std::size_t>(length));
    for (int t : first_seen) {
      const auto& bucket = by_topic[static_cast<std::size_t>(t)];
      sequence.insert(sequence.end(), bucket.begin(), bucket.end());
    }
    std::vector<std::int64_t> counts(static_cast<std::size_t>(W), 0);
    for (TokenId w : sequence) {
      if (counts[static_cast<std::size_t>(w)]++ == 0) doc.bow.push_back({w, 0});
    }
    for (auto& tc : doc.bow) tc.count = counts[static_cast<std::size_t>(tc.token)];
    doc.sequence = std::move(sequence);
    docs.push_back(std::move(doc));
  }
  out.corpus = Corpus(std::move(vocab), std::move(docs));
  return out;
}

}  // namespace itar
