#pragma once

#include <filesystem>
#include <functional>
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
#include "itar/trainer.hpp"

namespace itar {

enum class ModelKind { plsa, lda, sparse, decorr, artm, topicbank, topicbank2, itar, itar2 };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view s);
bool is_iterative(ModelKind kind);
bool is_bank_model(ModelKind kind);

struct ModelSpec {
  std::string name;  // row label in reports
  ModelKind kind = ModelKind::plsa;
  int topics = 20;  // domain topics
  int runs = 20;
  int background_topics = 0;
  std::vector<RegularizerConfig> regularizers;
  int em_iterations = 30;
  ItarConfig itar;               // itar, itar2; also the iteration budget of bank models
  ModelKind bank_base = ModelKind::artm;  // topicbank, topicbank2: model trained per iteration
  int infer_iterations = 100;    // theta inference for bank perplexity

  bool operator==(const ModelSpec&) const = default;
};

// The model zoo with its default coefficients.
ModelSpec make_model_spec(ModelKind kind, int topics);

// Roles of a non-iterative spec: domain topics first, background last.
std::vector<TopicRole> spec_roles(const ModelSpec& spec);

struct RunMetrics {
  int run = 0;
  std::uint64_t seed = 0;
  double perplexity = 0.0;
  double coherence = 0.0;      // mean criterion coherence over non-degenerate domain topics
  double good_percent = 0.0;   // % of domain topics at or above theta_good
  double diversity = 0.0;
  int good_topics = 0;
  int degenerate_topics = 0;

  bool operator==(const RunMetrics&) const = default;
};

// Everything the report needs about one model; serializable, so reports can
// be regenerated from files.
struct SeriesSummary {
  std::string name;
  ModelKind kind = ModelKind::plsa;
  QualityCriterion criterion = QualityCriterion::toptoken;
  int topics = 0;
  int max_iterations = 0;  // iterative models
  std::vector<RunMetrics> runs;
  int best_run = 0;
  std::optional<double> ppl_with_background;     // bank models
  std::optional<double> ppl_without_background;  // bank models
  std::vector<IterationRecord> history;          // iterative models

  const RunMetrics& best() const { return runs.at(static_cast<std::size_t>(best_run)); }
  bool operator==(const SeriesSummary&) const = default;
};

struct SeriesResult {
  SeriesSummary summary;
  TopicModel best_model;  // for bank models, the bank as a model
  TopicBank bank;         // iterative kinds
  std::vector<double> pooled_toptoken;
  std::vector<double> pooled_intratext;
  std::vector<std::vector<TopicQuality>> run_qualities;  // non-iterative kinds
};

// Lowest index among runs with the most good topics.
int best_run_index(std::span<const RunMetrics> runs);

// Metrics of a fitted model against optional thresholds.
RunMetrics model_metrics(const TopicModel& model, std::span<const TopicQuality> qualities, double perplexity,
                         const Thresholds* thresholds, QualityCriterion criterion);

// Trains `runs` models with seeds 0..runs-1 (non-iterative kinds) or a single
// ITAR / TopicBank run (iterative kinds). Thresholds may be empty while the
// pool is being built; good counts are then zero.
SeriesResult run_series(const ModelSpec& spec, const Corpus& corpus, const CooccurrenceStats& cooc,
                        const ThresholdSet& thresholds, QualityCriterion criterion);

// Recounts good topics of a non-iterative series under new thresholds. The
// best model is refit from its seed when the best run changes.
void rescore_series(SeriesResult& result, const ModelSpec& spec, const Corpus& corpus, const ThresholdSet& thresholds);

// Fits one non-iterative model with the given seed. `observer` is passed to
// em_fit.
TopicModel fit_spec(const ModelSpec& spec, const Corpus& corpus, std::uint64_t seed, TrainStats* stats = nullptr,
                    std::function<void(int, const TopicModel&)> observer = {});

// Pools coherences from the non-iterative ARTM-family series (plsa only when
// asked) and takes the 80th/20th percentiles per criterion.
ThresholdSet pooled_thresholds(std::span<const SeriesResult> series, bool include_plsa = false);

enum class GridObjective { min_perplexity, perplexity_degradation };

struct GridPoint {
  double tau = 0.0;
  double perplexity = 0.0;
};

struct GridSearchResult {
  double tau = 0.0;
  std::vector<GridPoint> points;
  std::optional<double> baseline;  // perplexity at tau = 0 (degradation objective)
  bool warning = false;            // no grid point met the degradation target
};

// min_perplexity: argmin over the grid (first on ties). perplexity_degradation:
// smallest tau whose perplexity exceeds the tau = 0 baseline by at least
// `target`; the largest tau with a warning when none does.
GridSearchResult grid_search(std::span<const double> grid, GridObjective objective,
                             const std::function<double(double)>& perplexity_at, double target = 0.1);

// Varies the coefficient of spec.regularizers[index]; perplexity is the mean
// over `runs` seeds.
GridSearchResult grid_search_tau(const ModelSpec& spec, std::size_t index, const Corpus& corpus,
                                 std::span<const double> grid, GridObjective objective, int runs = 3,
                                 double target = 0.1);

// Sets both sift coefficients to each grid value and scores the final
// perplexity of a short ITAR run.
GridSearchResult grid_search_sift(const ItarConfig& cfg, const Corpus& corpus, std::span<const double> grid,
                                  int iterations = 5, double target = 0.1);

inline constexpr double kBankDedupCosine = 0.9;

struct TopicBankRun {
  TopicBank bank;
  std::vector<IterationRecord> history;
};

// Per iteration, trains a fresh base model (seed = iteration) and banks the
// topics at or above the cut: the model's own 90th percentile (topicbank) or
// the shared theta_good (topicbank2). Candidates within cosine 0.9 of a banked
// topic are skipped.
TopicBankRun run_topicbank(const Corpus& corpus, const CooccurrenceStats& cooc, const ModelSpec& spec,
                           const ThresholdSet& thresholds, QualityCriterion criterion);

// Perplexity of a fixed set of topics after fitting theta only. With
// `with_background` the corpus unigram distribution is appended as an extra
// topic.
double bank_perplexity(const Matrix& bank_phi, const Corpus& corpus, bool with_background, int iterations = 100,
                       int workers = 1);

// Itar specs for all eight fix/sift-bad/sift-good combinations, named
// "itar_f-b-g".
std::vector<ModelSpec> ablation_specs(const ModelSpec& itar_spec);

struct ReportFiles {
  std::filesystem::path table_csv;
  std::filesystem::path table_txt;
  std::filesystem::path good_series_json;
  std::filesystem::path density_csv;
  std::filesystem::path ablation_csv;
  std::filesystem::path ablation_txt;
};

// Writes the comparison table, per-iteration good-topic series, density table
// and (when itar_f-b-g series are present) the ablation table.
ReportFiles generate_report(std::span<const SeriesSummary> series, const std::filesystem::path& out_dir);

}  // namespace itar
