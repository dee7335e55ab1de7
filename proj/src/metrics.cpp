#include "itar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "itar/error.hpp"

namespace itar {

double perplexity(const Matrix& phi, const Matrix& theta, const Corpus& corpus) {
  if (corpus.total_tokens() <= 0) throw std::invalid_argument("perplexity of an empty corpus");
  return std::exp(-log_likelihood(phi, theta, corpus) / static_cast<double>(corpus.total_tokens()));
}

double perplexity(const TopicModel& model, const Corpus& corpus) { return perplexity(model.phi, model.theta, corpus); }

std::vector<TokenId> top_words(const Eigen::Ref<const Vector>& column, int k) {
  std::vector<TokenId> ids;
  for (Eigen::Index w = 0; w < column.size(); ++w) {
    if (column(w) > 0.0) ids.push_back(static_cast<TokenId>(w));
  }
  const auto keep = std::min<std::size_t>(ids.size(), static_cast<std::size_t>(std::max(k, 0)));
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(keep), ids.end(),
                    [&](TokenId a, TokenId b) {
                      if (column(a) != column(b)) return column(a) > column(b);
                      return a < b;
                    });
  ids.resize(keep);
  return ids;
}

double ppmi(const CooccurrenceStats& cooc, TokenId a, TokenId b) {
  const auto joint = cooc.pair_doc_freq(a, b);
  if (joint == 0) return 0.0;
  const double n = static_cast<double>(cooc.doc_count());
  const double pa = static_cast<double>(cooc.token_doc_freq(a)) / n;
  const double pb = static_cast<double>(cooc.token_doc_freq(b)) / n;
  const double pab = static_cast<double>(joint) / n;
  return std::max(std::log(pab / (pa * pb)), 0.0);
}

double coherence_toptoken(std::span<const TokenId> words, const CooccurrenceStats& cooc) {
  if (words.size() < 2) return 0.0;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    for (std::size_t j = i + 1; j < words.size(); ++j) {
      sum += ppmi(cooc, words[i], words[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

std::vector<int> assign_topics(const Matrix& phi, std::span<const double> sizes, TopicPrior prior,
                               std::span<const TokenId> sequence) {
  const auto T = phi.cols();
  if (prior == TopicPrior::topic_size && sizes.size() != static_cast<std::size_t>(T)) {
    throw std::invalid_argument("topic sizes do not match the number of topics");
  }
  // The argmax depends only on the word, so cache it per vocabulary entry.
  std::vector<int> best(static_cast<std::size_t>(phi.rows()), -2);
  std::vector<int> out;
  out.reserve(sequence.size());
  for (TokenId token : sequence) {
    auto& cached = best.at(static_cast<std::size_t>(token));
    if (cached == -2) {
      int arg = -1;
      double top = 0.0;
      for (Eigen::Index t = 0; t < T; ++t) {
        const double weight = prior == TopicPrior::topic_size ? sizes[static_cast<std::size_t>(t)] : 1.0;
        const double score = phi(token, t) * weight;
        if (score > top) {
          top = score;
          arg = static_cast<int>(t);
        }
      }
      cached = arg;
    }
    out.push_back(cached);
  }
  return out;
}

std::vector<double> mean_segment_lengths(std::span<const std::vector<int>> streams, int num_topics) {
  std::vector<double> total(static_cast<std::size_t>(num_topics), 0.0);
  std::vector<double> segments(static_cast<std::size_t>(num_topics), 0.0);
  for (const auto& stream : streams) {
    std::size_t i = 0;
    while (i < stream.size()) {
      std::size_t j = i;
      while (j < stream.size() && stream[j] == stream[i]) ++j;
      const int t = stream[i];
      if (t >= 0 && t < num_topics) {
        total[static_cast<std::size_t>(t)] += static_cast<double>(j - i);
        segments[static_cast<std::size_t>(t)] += 1.0;
      }
      i = j;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(num_topics), 0.0);
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (segments[t] > 0.0) out[t] = total[t] / segments[t];
  }
  return out;
}

std::vector<double> coherence_intratext(const Matrix& phi, std::span<const double> sizes, const Corpus& corpus,
                                        TopicPrior prior) {
  if (!corpus.has_sequences()) throw DataError("intra-text coherence needs documents in natural word order");
  std::vector<std::vector<int>> streams;
  streams.reserve(corpus.num_documents());
  for (const auto& doc : corpus.documents()) streams.push_back(assign_topics(phi, sizes, prior, *doc.sequence));
  return mean_segment_lengths(streams, static_cast<int>(phi.cols()));
}

std::vector<double> coherence_intratext(const TopicModel& model, const Corpus& corpus, TopicPrior prior) {
  return coherence_intratext(model.phi, model.topic_sizes, corpus, prior);
}

namespace {

Vector floored(const Eigen::Ref<const Vector>& p) {
  Vector out = p.cwiseMax(kDiversityFloor);
  return out / out.sum();
}

double kl(const Vector& p, const Vector& q) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) sum += p(i) * std::log(p(i) / q(i));
  return sum;
}

}  // namespace

double symmetric_kl_distance(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& q) {
  const Vector a = floored(p);
  const Vector b = floored(q);
  // Rounding can push a tiny KL slightly below zero for identical inputs.
  return std::sqrt(std::max(0.5 * (kl(a, b) + kl(b, a)), 0.0));
}

double diversity(const Matrix& phi, std::span<const int> topics) {
  std::vector<int> cols(topics.begin(), topics.end());
  if (cols.empty()) {
    cols.resize(static_cast<std::size_t>(phi.cols()));
    std::iota(cols.begin(), cols.end(), 0);
  }
  if (cols.size() < 2) throw std::invalid_argument("diversity needs at least two topics");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    for (std::size_t j = i + 1; j < cols.size(); ++j) {
      sum += symmetric_kl_distance(phi.col(cols[i]), phi.col(cols[j]));
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty list");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("percentile fraction must be in [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double relative_density(long good_count, long total, double baseline_density) {
  if (total <= 0) throw std::invalid_argument("relative density needs a positive total");
  if (!(baseline_density > 0.0)) throw std::invalid_argument("baseline density must be positive");
  return (static_cast<double>(good_count) / static_cast<double>(total)) / baseline_density;
}

std::vector<TopicQuality> evaluate_topics(const TopicModel& model, const Corpus& corpus, const CooccurrenceStats& cooc,
                                          int k) {
  std::vector<TopicQuality> out;
  const auto T = model.phi.cols();
  out.reserve(static_cast<std::size_t>(T));
  std::vector<double> intra;
  if (corpus.has_sequences()) intra = coherence_intratext(model, corpus);
  for (Eigen::Index t = 0; t < T; ++t) {
    TopicQuality q;
    q.topic = static_cast<int>(t);
    q.degenerate = model.is_degenerate(t);
    q.top_words = top_words(model.phi.col(t), k);
    q.too_few_words = q.top_words.size() < 2;
    q.coherence_toptoken = coherence_toptoken(q.top_words, cooc);
    if (!intra.empty()) q.coherence_intra = intra[static_cast<std::size_t>(t)];
    if (static_cast<std::size_t>(t) < model.topic_sizes.size()) q.size = model.topic_sizes[static_cast<std::size_t>(t)];
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace itar
