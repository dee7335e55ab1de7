#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "itar/corpus.hpp"
#include "itar/harness.hpp"
#include "itar/trainer.hpp"

namespace itar {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Binary corpus (see docs/corpus_format.md).

inline constexpr char kCorpusMagic[8] = {'I', 'T', 'A', 'R', 'C', 'O', 'R', 'P'};
inline constexpr std::uint32_t kCorpusFormatVersion = 1;

void write_corpus_binary(std::ostream& out, const Corpus& corpus);
void write_corpus_binary(const std::filesystem::path& path, const Corpus& corpus);
Corpus read_corpus_binary(std::istream& in);
Corpus read_corpus_binary(const std::filesystem::path& path);

// Binary corpus when the file starts with the magic bytes, a sequence file
// when its first non-blank line has a tab, a BoW file otherwise.
Corpus load_corpus(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Model output.

// Header `token<TAB>t0<TAB>t1...`, then one row per token, 9 significant digits.
void write_phi_tsv(std::ostream& out, const Matrix& phi, const Vocabulary& vocab);
void write_phi_tsv(const std::filesystem::path& path, const Matrix& phi, const Vocabulary& vocab);
// Rows are matched to `vocab` by surface; unknown surfaces are dropped and
// missing ones read as zero, then each column is renormalized.
Matrix read_phi_tsv(const std::filesystem::path& path, const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Files.

// Writes to a temporary sibling, fsyncs, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
// Appends one line and fsyncs before returning.
void append_line_durable(const std::filesystem::path& path, const std::string& line);
std::string read_file(const std::filesystem::path& path);
std::vector<std::string> read_lines(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// JSON forms. Every *_from_json throws ConfigError (configuration) or
// DataError (records) on missing or mistyped fields.

Json to_json(const Thresholds& t);
Thresholds thresholds_from_json(const Json& j);
Json to_json(const ThresholdSet& t);
ThresholdSet threshold_set_from_json(const Json& j);

// Unknown keys are rejected; absent keys keep `base` values.
Json to_json(const ItarConfig& cfg);
ItarConfig itar_config_from_json(const Json& j, ItarConfig base = {});

Json to_json(const IterationRecord& r);
IterationRecord iteration_record_from_json(const Json& j);
std::vector<IterationRecord> read_history(const std::filesystem::path& path);
void write_history(const std::filesystem::path& path, const std::vector<IterationRecord>& history);

Json to_json(const TopicCard& c);
TopicCard topic_card_from_json(const Json& j);
Json to_json(const PendingIteration& p);
PendingIteration pending_iteration_from_json(const Json& j);

Json to_json(const RegularizerConfig& c);
RegularizerConfig regularizer_config_from_json(const Json& j);
Json to_json(const ModelSpec& s);
// Starts from make_model_spec(kind, topics) and applies the given keys.
ModelSpec model_spec_from_json(const Json& j, int default_topics);

Json to_json(const RunMetrics& m);
RunMetrics run_metrics_from_json(const Json& j);
Json to_json(const SeriesSummary& s);
SeriesSummary series_summary_from_json(const Json& j);

// ---------------------------------------------------------------------------
// Experiment configuration file.

struct ThresholdSource {
  std::string mode = "pool";  // pool: from the pool models; file: read `file`
  std::filesystem::path file;
  std::vector<std::string> pool_models{"lda", "sparse", "decorr", "artm"};
  bool include_plsa = false;
};

struct ExperimentConfig {
  std::filesystem::path corpus;
  std::filesystem::path output_dir = "out";
  int topics = 20;
  int runs = 20;
  QualityCriterion criterion = QualityCriterion::toptoken;
  std::vector<ModelSpec> models;
  ThresholdSource thresholds;
  ItarConfig itar;
  bool ablation = false;  // add the eight itar_f-b-g series
  int workers = 1;
};

ExperimentConfig experiment_config_from_json(const Json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace itar
