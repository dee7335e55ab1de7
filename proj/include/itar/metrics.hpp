#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "itar/corpus.hpp"
#include "itar/matrix.hpp"
#include "itar/model.hpp"

namespace itar {

inline constexpr int kDefaultTopWords = 20;

struct TopicQuality {
  int topic = 0;
  double coherence_toptoken = 0.0;
  std::optional<double> coherence_intra;
  std::vector<TokenId> top_words;
  double size = 0.0;         // n_t
  bool degenerate = false;   // zero phi column
  bool too_few_words = false;  // fewer than two nonzero words; coherence forced to 0
};

struct Thresholds {
  double theta_good = 0.0;
  double theta_bad = 0.0;
  std::string source;

  bool operator==(const Thresholds&) const = default;
};

// exp(-L / n), n = total corpus tokens.
double perplexity(const Matrix& phi, const Matrix& theta, const Corpus& corpus);
double perplexity(const TopicModel& model, const Corpus& corpus);

// Up to k tokens with nonzero probability, by phi descending then token id.
std::vector<TokenId> top_words(const Eigen::Ref<const Vector>& column, int k);

// max(ln p(i,j) / (p(i) p(j)), 0) with document-frequency probabilities;
// 0 when the pair never co-occurs.
double ppmi(const CooccurrenceStats& cooc, TokenId a, TokenId b);

// Mean positive PMI over all unordered pairs of `words`; 0 for fewer than 2.
double coherence_toptoken(std::span<const TokenId> words, const CooccurrenceStats& cooc);

enum class TopicPrior { topic_size, uniform };

// Per-position argmax assignment of p(t|w) = norm_t(phi_wt * n_t), ties to the
// lowest topic. Positions whose word has zero probability in every topic stay
// unassigned (-1).
std::vector<int> assign_topics(const Matrix& phi, std::span<const double> sizes, TopicPrior prior,
                               std::span<const TokenId> sequence);

// Mean length of maximal same-topic runs inside each of the given streams
// (one stream per document); 0 for topics with no assigned position.
std::vector<double> mean_segment_lengths(std::span<const std::vector<int>> streams, int num_topics);

std::vector<double> coherence_intratext(const Matrix& phi, std::span<const double> sizes, const Corpus& corpus,
                                        TopicPrior prior = TopicPrior::topic_size);
std::vector<double> coherence_intratext(const TopicModel& model, const Corpus& corpus,
                                        TopicPrior prior = TopicPrior::topic_size);

inline constexpr double kDiversityFloor = 1e-12;

// sqrt(0.5 (KL(p||q) + KL(q||p))) after flooring both at kDiversityFloor and
// renormalizing.
double symmetric_kl_distance(const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& q);

// Mean pairwise distance over `topics` (all columns when empty).
double diversity(const Matrix& phi, std::span<const int> topics = {});

// Linear interpolation between order statistics at rank q (N - 1).
double percentile(std::span<const double> values, double q);

double relative_density(long good_count, long total, double baseline_density);

// Quality of every topic in the model. Intra-text coherence is filled only
// when the corpus carries sequences.
std::vector<TopicQuality> evaluate_topics(const TopicModel& model, const Corpus& corpus, const CooccurrenceStats& cooc,
                                          int k = kDefaultTopWords);

}  // namespace itar
