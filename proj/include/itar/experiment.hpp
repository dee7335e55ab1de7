#pragma once

#include <filesystem>
#include <vector>

#include "itar/corpus.hpp"
#include "itar/harness.hpp"
#include "itar/io.hpp"

namespace itar {

struct PoolSeries {
  std::vector<ModelSpec> specs;
  std::vector<SeriesResult> series;  // scored without thresholds
};

// Thresholds for an experiment: inline ones from the itar section, a file, or
// pooled from fresh series of the pool models. Pool series are returned
// through `pool` so callers can reuse them.
ThresholdSet resolve_thresholds(const ExperimentConfig& cfg, const Corpus& corpus, const CooccurrenceStats& cooc,
                                PoolSeries* pool = nullptr);

// The specs an experiment trains, in report order: the configured models,
// then the eight ablation configurations when asked.
std::vector<ModelSpec> experiment_specs(const ExperimentConfig& cfg);

struct ExperimentResult {
  ThresholdSet thresholds;
  std::vector<SeriesSummary> series;
  ReportFiles report;
};

// Runs every series and writes under `cfg.output_dir`:
//   thresholds.json, series/NN-name.json, phi/name.tsv, banks/name.jsonl,
//   histories/name.jsonl and the report files.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Corpus& corpus);

// series/NN-name.json; NN keeps the report order.
void write_series_summary(const std::filesystem::path& dir, int index, const SeriesSummary& summary);
std::vector<SeriesSummary> read_series_dir(const std::filesystem::path& dir);

}  // namespace itar
