#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "itar/bank.hpp"
#include "itar/corpus.hpp"
#include "itar/metrics.hpp"
#include "itar/model.hpp"
#include "itar/regularizers.hpp"

namespace itar {

enum class QualityCriterion { toptoken, intratext };
enum class LabelingMode { automatic, interactive };

std::string_view to_string(QualityCriterion c);
QualityCriterion quality_criterion_from_string(std::string_view s);
std::string_view to_string(SiftVersion v);
SiftVersion sift_version_from_string(std::string_view s);

struct AblationFlags {
  bool fix_good = true;
  bool sift_bad = true;
  bool sift_good = true;

  // "1-0-1" style names, in the order fix-bad-good.
  std::string name() const;
  static AblationFlags parse(std::string_view name);
  // All eight combinations, from 0-0-0 to 1-1-1.
  static std::vector<AblationFlags> all();

  bool operator==(const AblationFlags&) const = default;
};

struct ThresholdSet {
  std::optional<Thresholds> toptoken;
  std::optional<Thresholds> intratext;

  const Thresholds& get(QualityCriterion c) const;
  bool operator==(const ThresholdSet&) const = default;
};

struct ItarConfig {
  int topics = 20;
  int max_iterations = 20;
  ThresholdSet thresholds;
  double tau_fix = 1e9;
  double tau_sift_bad = 1e5;
  double tau_sift_good = 1e5;
  SiftVersion sift_version = SiftVersion::v1;
  AblationFlags ablation;
  double stop_good_fraction = 0.9;
  QualityCriterion criterion = QualityCriterion::toptoken;
  LabelingMode labeling_mode = LabelingMode::automatic;

  // Base model the iterations are built on.
  int em_iterations = 30;
  double sparse_tau = -0.05;        // relative, on free topics
  double decorrelation_tau = 0.01;  // relative, on all topics
  int top_k = kDefaultTopWords;
  int workers = 1;

  // Throws ConfigError.
  void validate() const;
  // Banked good topics needed to stop: ceil(stop_good_fraction * topics).
  int good_quota() const;

  bool operator==(const ItarConfig&) const = default;
};

// 80th and 20th percentiles of the pooled coherences.
Thresholds compute_thresholds(std::span<const double> pooled, std::string source = {});

double criterion_coherence(const TopicQuality& q, QualityCriterion criterion);

// One label per topic; fixed and background topics get nullopt. Degenerate
// topics are neutral. Overrides (by topic index) replace the automatic label.
std::vector<std::optional<TopicLabel>> classify_topics(const TopicModel& model, std::span<const TopicQuality> qualities,
                                                       const Thresholds& thresholds, QualityCriterion criterion,
                                                       const std::map<int, TopicLabel>& overrides = {});

// Appends good and bad topics as "i{iteration}t{topic}"; neutral topics are
// dropped. `coherences` holds each topic's criterion coherence. Returns the
// number of (good, bad) entries added.
std::pair<int, int> update_bank(TopicBank& bank, const TopicModel& model, std::span<const double> coherences,
                                std::span<const std::optional<TopicLabel>> labels, int iteration);

// What a reviewer sees for one topic of a trained iteration.
struct TopicCard {
  int topic = 0;
  TopicRole role = TopicRole::domain;
  std::string bank_ref;  // for fixed topics
  std::vector<TokenId> top_words;
  double coherence_toptoken = 0.0;
  std::optional<double> coherence_intra;
  bool degenerate = false;
  double size = 0.0;
  std::optional<TopicLabel> auto_label;  // free topics only

  bool operator==(const TopicCard&) const = default;
};

// A trained iteration whose labels are not yet applied to the bank.
struct PendingIteration {
  int iteration = 0;
  std::uint64_t seed = 0;
  TopicModel model;
  std::vector<TopicCard> cards;
  double perplexity = 0.0;
  double coherence = 0.0;  // mean criterion coherence, non-degenerate non-background topics
  double diversity = 0.0;
  std::optional<double> density_toptoken;
  std::optional<double> density_toptoken_at_intra;
};

struct TopicOutcome {
  int topic = 0;
  std::string role;
  std::string bank_ref;
  std::string label;  // good, bad, neutral, or the role for unclassified topics
  bool human = false;
  bool degenerate = false;
  double coherence_toptoken = 0.0;
  std::optional<double> coherence_intra;

  bool operator==(const TopicOutcome&) const = default;
};

struct IterationRecord {
  int iteration = 0;
  std::uint64_t seed = 0;
  std::vector<TopicOutcome> topics;
  int good_added = 0;
  int bad_added = 0;
  int bank_good = 0;
  int bank_bad = 0;
  double perplexity = 0.0;
  double coherence = 0.0;
  double good_percent = 0.0;  // good topics in this model (fixed + newly good), % of T
  double diversity = 0.0;
  double bad_percent_cumulative = 0.0;  // all bad topics banked so far, % of T
  std::optional<double> density_toptoken;
  std::optional<double> density_toptoken_at_intra;
  bool stop = false;
  std::string stop_reason;

  bool operator==(const IterationRecord&) const = default;
};

struct StopDecision {
  bool stop = false;
  std::string reason;  // good-quota, zero-intra, all-free-degenerate, max-iterations
};

StopDecision check_stopping(const TopicBank& bank, std::span<const TopicCard> cards, const ItarConfig& cfg,
                            int iteration);

// Sparsing on free topics and decorrelation on all topics, both relative.
std::vector<RegularizerConfig> base_artm_configs(double sparse_tau, double decorrelation_tau);

// Builds the iteration's model: banked good topics first (fixed, when
// fix_good is on), then free topics seeded by `iteration`.
TopicModel itar_initial_model(const TopicBank& bank, const ItarConfig& cfg, std::size_t vocab_size, int iteration);
std::vector<Regularizer> itar_regularizers(const TopicModel& model, const TopicBank& bank, const ItarConfig& cfg,
                                           const Corpus& corpus);

// Trains and evaluates; leaves the bank alone.
PendingIteration train_iteration(const TopicBank& bank, const ItarConfig& cfg, const Corpus& corpus,
                                 const CooccurrenceStats& cooc, int iteration,
                                 std::function<void(int, int)> progress = {});

// Applies labels (automatic, replaced by any override) to the bank and
// produces the iteration's record. Throws DataError when an override names a
// topic that is not free.
IterationRecord commit_iteration(TopicBank& bank, const PendingIteration& pending, const ItarConfig& cfg,
                                 const std::map<int, TopicLabel>& overrides = {});

struct IterationResult {
  TopicModel model;
  IterationRecord record;
};

IterationResult run_iteration(TopicBank& bank, const ItarConfig& cfg, const Corpus& corpus,
                              const CooccurrenceStats& cooc, int iteration);

struct ItarResult {
  TopicModel model;  // last iteration's
  TopicBank bank;
  std::vector<IterationRecord> history;
};

using IterationObserver = std::function<void(const IterationResult&, const TopicBank&)>;

ItarResult run_itar(const ItarConfig& cfg, const Corpus& corpus, const IterationObserver& observer = {});

}  // namespace itar
