#include <doctest.h>

#include <cmath>
#include <random>

#include "itar/error.hpp"
#include "itar/metrics.hpp"
#include "itar/synth.hpp"
#include "test_util.hpp"

using namespace itar;

namespace {

// Enumerates documents directly; shares nothing with CooccurrenceStats.
double brute_force_coherence(const Corpus& corpus, const std::vector<TokenId>& words) {
  if (words.size() < 2) return 0.0;
  const double n = static_cast<double>(corpus.num_documents());
  auto contains = [](const Document& doc, TokenId w) {
    for (const auto& tc : doc.bow)
      if (tc.token == w) return true;
    return false;
  };
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (std::size_t j = i + 1; j < words.size(); ++j) {
      double ci = 0, cj = 0, cij = 0;
      for (const auto& doc : corpus.documents()) {
        const bool hi = contains(doc, words[i]);
        const bool hj = contains(doc, words[j]);
        ci += hi;
        cj += hj;
        cij += hi && hj;
      }
      double pmi = 0.0;
      if (cij > 0) pmi = std::log((cij / n) / ((ci / n) * (cj / n)));
      sum += pmi > 0 ? pmi : 0.0;
      ++pairs;
    }
  }
  return sum / pairs;
}

}  // namespace

TEST_CASE("perplexity of uniform and perfect models") {
  auto corpus = test_util::random_corpus(2, 15, 9);
  const auto W = static_cast<Eigen::Index>(corpus.vocab_size());
  Matrix phi = Matrix::Constant(W, 2, 1.0 / static_cast<double>(W));
  Matrix theta = Matrix::Constant(2, static_cast<Eigen::Index>(corpus.num_documents()), 0.5);
  CHECK(std::abs(perplexity(phi, theta, corpus) - static_cast<double>(W)) <= 1e-9 * static_cast<double>(W));

  auto one = parse_bow_text("d a:1 b:1\n");
  Matrix p(2, 1);
  p << 0.5, 0.5;
  CHECK(perplexity(p, Matrix::Ones(1, 1), one) == doctest::Approx(2.0));
}

TEST_CASE("top_words order and size") {
  Vector col(6);
  col << 0.1, 0.3, 0.0, 0.3, 0.25, 0.05;
  CHECK(top_words(col, 3) == std::vector<TokenId>{1, 3, 4});
  CHECK(top_words(col, 20).size() == 5);
  Vector zero = Vector::Zero(4);
  CHECK(top_words(zero, 5).empty());
}

TEST_CASE("positive PMI coherence") {
  // Both words in 2 of 4 documents, together in 2: ln(0.5 / 0.25) = ln 2.
  auto corpus = parse_bow_text("d1 a:1 b:1\nd2 a:1 b:1\nd3 c:1\nd4 c:1\n");
  auto cooc = build_cooccurrence(corpus);
  std::vector<TokenId> ab{0, 1};
  CHECK(coherence_toptoken(ab, cooc) == doctest::Approx(0.6931471805599453));

  // Independent pair: p(a,b) = p(a) p(b).
  auto indep = parse_bow_text("d1 a:1 b:1\nd2 a:1\nd3 b:1\nd4 c:1\n");
  CHECK(ppmi(build_cooccurrence(indep), 0, 1) == doctest::Approx(0.0));

  // Everything everywhere: PMI = 0.
  auto all = parse_bow_text("d1 a:1 b:1 c:1\nd2 a:2 b:1 c:1\n");
  std::vector<TokenId> abc{0, 1, 2};
  CHECK(coherence_toptoken(abc, build_cooccurrence(all)) == 0.0);

  std::vector<TokenId> single{0};
  CHECK(coherence_toptoken(single, cooc) == 0.0);
}

TEST_CASE("PMI coherence equals brute-force enumeration on small corpora") {
  std::mt19937_64 rng(77);
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const int docs = 1 + static_cast<int>(seed % 6);
    auto corpus = test_util::random_corpus(seed, docs, 8, 5);
    auto cooc = build_cooccurrence(corpus);
    std::vector<TokenId> words;
    for (TokenId w = 0; w < static_cast<TokenId>(corpus.vocab_size()); ++w) words.push_back(w);
    std::shuffle(words.begin(), words.end(), rng);
    const double fast = coherence_toptoken(words, cooc);
    CHECK(fast == doctest::Approx(brute_force_coherence(corpus, words)).epsilon(1e-12));
    CHECK(fast >= 0.0);
  }
}

TEST_CASE("segment lengths and intra-text coherence") {
  std::vector<std::vector<int>> stream{{1, 1, 2, 1, 1, 1}};
  auto lengths = mean_segment_lengths(stream, 3);
  CHECK(lengths[1] == doctest::Approx(2.5));
  CHECK(lengths[2] == doctest::Approx(1.0));
  CHECK(lengths[0] == 0.0);

  auto corpus = parse_sequences_text("d1\ta b a c\nd2\tb b\n");
  Matrix single = Matrix::Constant(3, 1, 1.0 / 3.0);
  std::vector<double> sizes{6.0};
  auto coh = coherence_intratext(single, sizes, corpus);
  CHECK(coh[0] == doctest::Approx(3.0));  // mean document length

  CHECK_THROWS_AS(coherence_intratext(single, sizes, parse_bow_text("d a:1\n")), DataError);
}

TEST_CASE("intra-text assignment uses topic sizes and breaks ties low") {
  Matrix phi(2, 2);
  phi << 0.6, 0.4, 0.4, 0.6;
  std::vector<TokenId> seq{0, 1, 0};
  std::vector<double> equal{1.0, 1.0};
  CHECK(assign_topics(phi, equal, TopicPrior::topic_size, seq) == std::vector<int>{0, 1, 0});
  std::vector<double> skewed{1.0, 2.0};
  CHECK(assign_topics(phi, skewed, TopicPrior::topic_size, seq) == std::vector<int>{1, 1, 1});
  CHECK(assign_topics(phi, skewed, TopicPrior::uniform, seq) == std::vector<int>{0, 1, 0});
  std::vector<double> scaled{10.0, 20.0};
  CHECK(assign_topics(phi, scaled, TopicPrior::topic_size, seq) == assign_topics(phi, skewed, TopicPrior::topic_size, seq));

  Matrix tie = Matrix::Constant(2, 2, 0.5);
  CHECK(assign_topics(tie, equal, TopicPrior::topic_size, seq) == std::vector<int>{0, 0, 0});
}

TEST_CASE("diversity") {
  Matrix same(2, 2);
  same << 0.5, 0.5, 0.5, 0.5;
  CHECK(diversity(same) == doctest::Approx(0.0));

  Matrix pq(2, 2);
  pq << 0.5, 0.25, 0.5, 0.75;
  CHECK(diversity(pq) == doctest::Approx(0.37057595184187775));

  Matrix onehot(2, 2);
  onehot << 1, 0, 0, 1;
  CHECK(diversity(onehot) == doctest::Approx(5.256521769751675).epsilon(1e-9));

  std::mt19937_64 rng(4);
  auto phi = test_util::random_stochastic(rng, 15, 5);
  Matrix permuted(15, 5);
  const int order[] = {3, 0, 4, 1, 2};
  for (int i = 0; i < 5; ++i) permuted.col(i) = phi.col(order[i]);
  CHECK(diversity(phi) == doctest::Approx(diversity(permuted)));

  CHECK_THROWS(diversity(Matrix::Constant(3, 1, 1.0 / 3)));
}

TEST_CASE("percentile") {
  std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(percentile(v, 0.8) == doctest::Approx(8.2));
  CHECK(percentile(v, 0.2) == doctest::Approx(2.8));
  CHECK(percentile(v, 0.0) == 1.0);
  CHECK(percentile(v, 1.0) == 10.0);
  std::vector<double> one{4.5};
  CHECK(percentile(one, 0.3) == 4.5);
  std::vector<double> empty;
  CHECK_THROWS(percentile(empty, 0.5));

  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> sample(37);
  for (auto& x : sample) x = g(rng);
  double prev = -1e300;
  for (double q = 0.0; q <= 1.0; q += 0.05) {
    const double p = percentile(sample, q);
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("relative density") {
  CHECK(relative_density(2, 20, 0.2) == doctest::Approx(0.5));
  CHECK(relative_density(1, 2, 0.2) == doctest::Approx(2.5));
  CHECK(relative_density(4, 20, 0.2) == doctest::Approx(1.0));
  CHECK_THROWS(relative_density(1, 2, 0.0));
}

TEST_CASE("evaluate_topics fills per-topic quality") {
  auto synth = synth_corpus(SynthParams{.seed = 6, .documents = 60});
  auto model = init_model(50, 4, 0);
  em_fit(model, synth.corpus, {}, FitOptions{.iterations = 10});
  auto cooc = build_cooccurrence(synth.corpus);
  auto q = evaluate_topics(model, synth.corpus, cooc);
  REQUIRE(q.size() == 4);
  for (const auto& tq : q) {
    CHECK(tq.top_words.size() == 20);
    CHECK(tq.coherence_intra.has_value());
    CHECK(tq.coherence_toptoken >= 0.0);
  }
}
