#include "itar/experiment.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "itar/error.hpp"

namespace itar {

ThresholdSet resolve_thresholds(const ExperimentConfig& cfg, const Corpus& corpus, const CooccurrenceStats& cooc,
                                PoolSeries* pool) {
  const auto inline_th = cfg.criterion == QualityCriterion::toptoken ? cfg.itar.thresholds.toptoken
                                                                      : cfg.itar.thresholds.intratext;
  if (inline_th) return cfg.itar.thresholds;
  if (cfg.thresholds.mode == "file") {
    Json j;
    try {
      j = Json::parse(read_file(cfg.thresholds.file));
    } catch (const Json::parse_error& e) {
      throw ConfigError(cfg.thresholds.file.string() + ": " + e.what());
    }
    auto th = threshold_set_from_json(j);
    th.get(cfg.criterion);  // throws when the file lacks the criterion
    return th;
  }

  PoolSeries local;
  PoolSeries& out = pool ? *pool : local;
  for (const auto& name : cfg.thresholds.pool_models) {
    const auto kind = model_kind_from_string(name);
    if (is_iterative(kind)) throw ConfigError("pool model " + name + " is iterative");
    auto it = std::find_if(cfg.models.begin(), cfg.models.end(), [&](const ModelSpec& s) { return s.name == name; });
    ModelSpec spec = it != cfg.models.end() ? *it : make_model_spec(kind, cfg.topics);
    if (it == cfg.models.end()) spec.runs = cfg.runs;
    spdlog::info("pool series {} ({} runs)", spec.name, spec.runs);
    out.series.push_back(run_series(spec, corpus, cooc, ThresholdSet{}, cfg.criterion));
    out.specs.push_back(std::move(spec));
  }
  if (cfg.thresholds.include_plsa &&
      std::find(cfg.thresholds.pool_models.begin(), cfg.thresholds.pool_models.end(), "plsa") ==
          cfg.thresholds.pool_models.end()) {
    ModelSpec spec = make_model_spec(ModelKind::plsa, cfg.topics);
    spec.runs = cfg.runs;
    out.series.push_back(run_series(spec, corpus, cooc, ThresholdSet{}, cfg.criterion));
    out.specs.push_back(std::move(spec));
  }
  auto th = pooled_thresholds(out.series, cfg.thresholds.include_plsa);
  th.get(cfg.criterion);
  return th;
}

std::vector<ModelSpec> experiment_specs(const ExperimentConfig& cfg) {
  std::vector<ModelSpec> specs = cfg.models;
  if (cfg.ablation) {
    auto it = std::find_if(specs.begin(), specs.end(),
                           [](const ModelSpec& s) { return s.kind == ModelKind::itar || s.kind == ModelKind::itar2; });
    ModelSpec base;
    if (it != specs.end()) {
      base = *it;
    } else {
      base = make_model_spec(ModelKind::itar, cfg.topics);
      const auto version = base.itar.sift_version;
      base.itar = cfg.itar;
      base.itar.sift_version = version;
    }
    for (auto& s : ablation_specs(base)) specs.push_back(std::move(s));
  }
  return specs;
}

void write_series_summary(const std::filesystem::path& dir, int index, const SeriesSummary& summary) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / fmt::format("{:02d}-{}.json", index, summary.name), to_json(summary).dump(1) + "\n");
}

std::vector<SeriesSummary> read_series_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("no series directory " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SeriesSummary> out;
  for (const auto& f : files) {
    try {
      out.push_back(series_summary_from_json(Json::parse(read_file(f))));
    } catch (const Json::parse_error& e) {
      throw DataError(f.string() + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError("no series files in " + dir.string());
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Corpus& corpus) {
  const auto& out_dir = cfg.output_dir;
  std::filesystem::create_directories(out_dir);
  const CooccurrenceStats cooc(corpus);
  const auto& vocab = corpus.vocabulary();

  PoolSeries pool;
  ExperimentResult result;
  result.thresholds = resolve_thresholds(cfg, corpus, cooc, &pool);
  write_file_atomic(out_dir / "thresholds.json", to_json(result.thresholds).dump(2) + "\n");
  const auto& th = result.thresholds.get(cfg.criterion);
  spdlog::info("thresholds ({}): good {:.6g}, bad {:.6g}", to_string(cfg.criterion), th.theta_good, th.theta_bad);

  const auto specs = experiment_specs(cfg);
  int index = 0;
  for (const auto& spec : specs) {
    SeriesResult series;
    auto pooled = std::find(pool.specs.begin(), pool.specs.end(), spec);
    if (pooled != pool.specs.end()) {
      const auto at = pooled - pool.specs.begin();
      series = std::move(pool.series[static_cast<std::size_t>(at)]);
      rescore_series(series, spec, corpus, result.thresholds);
      pool.specs.erase(pooled);
      pool.series.erase(pool.series.begin() + at);
    } else {
      spdlog::info("series {}", spec.name);
      series = run_series(spec, corpus, cooc, result.thresholds, cfg.criterion);
    }
    write_series_summary(out_dir / "series", index++, series.summary);
    if (series.best_model.num_topics() > 0) {
      std::filesystem::create_directories(out_dir / "phi");
      write_phi_tsv(out_dir / "phi" / (spec.name + ".tsv"), series.best_model.phi, vocab);
    }
    if (is_iterative(spec.kind)) {
      std::filesystem::create_directories(out_dir / "banks");
      std::filesystem::create_directories(out_dir / "histories");
      std::ostringstream bank;
      if (series.bank.vocab_size() == vocab.size()) write_bank(bank, series.bank, vocab);
      write_file_atomic(out_dir / "banks" / (spec.name + ".jsonl"), bank.str());
      write_history(out_dir / "histories" / (spec.name + ".jsonl"), series.summary.history);
    }
    result.series.push_back(std::move(series.summary));
  }
  result.report = generate_report(result.series, out_dir);
  return result;
}

}  // namespace itar
