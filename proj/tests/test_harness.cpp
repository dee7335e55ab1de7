#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "itar/error.hpp"
#include "itar/experiment.hpp"
#include "itar/harness.hpp"
#include "itar/io.hpp"
#include "itar/metrics.hpp"
#include "itar/model.hpp"
#include "itar/synth.hpp"

using namespace itar;

namespace {

const SynthCorpus& small_synth() {
  static const SynthCorpus s = synth_corpus(SynthParams{.seed = 11, .vocab_size = 40, .topics = 4, .documents = 80,
                                                        .mean_length = 50.0, .concentration = 0.3});
  return s;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("itar_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

RunMetrics run_with_good(int run, int good) {
  RunMetrics m;
  m.run = run;
  m.good_topics = good;
  return m;
}

}  // namespace

TEST_CASE("model zoo defaults") {
  auto plsa = make_model_spec(ModelKind::plsa, 20);
  CHECK(plsa.regularizers.empty());
  CHECK(plsa.runs == 20);
  CHECK(plsa.background_topics == 0);
  for (auto kind : {ModelKind::sparse, ModelKind::decorr}) {
    auto s = make_model_spec(kind, 20);
    CHECK(s.background_topics == 1);
    CHECK(std::any_of(s.regularizers.begin(), s.regularizers.end(),
                      [](const RegularizerConfig& r) { return r.topics == TopicSelector::background; }));
  }
  CHECK(make_model_spec(ModelKind::itar, 20).runs == 1);
  CHECK(make_model_spec(ModelKind::itar2, 20).itar.sift_version == SiftVersion::v2);
  CHECK(spec_roles(make_model_spec(ModelKind::sparse, 3)) ==
        std::vector<TopicRole>{TopicRole::domain, TopicRole::domain, TopicRole::domain, TopicRole::background});
  CHECK_THROWS_AS(model_kind_from_string("nmf"), ConfigError);
  for (auto k : {ModelKind::plsa, ModelKind::lda, ModelKind::sparse, ModelKind::decorr, ModelKind::artm,
                 ModelKind::topicbank, ModelKind::topicbank2, ModelKind::itar, ModelKind::itar2}) {
    CHECK(model_kind_from_string(to_string(k)) == k);
  }
}

TEST_CASE("best run: most good topics, lowest index on ties") {
  std::vector<RunMetrics> runs{run_with_good(0, 2), run_with_good(1, 5), run_with_good(2, 5), run_with_good(3, 1)};
  CHECK(best_run_index(runs) == 1);
  std::vector<RunMetrics> flat{run_with_good(0, 0), run_with_good(1, 0)};
  CHECK(best_run_index(flat) == 0);
}

TEST_CASE("run_series trains seeds 0..runs-1 and pools every topic") {
  const auto& s = small_synth();
  const CooccurrenceStats cooc(s.corpus);
  auto spec = make_model_spec(ModelKind::sparse, 4);
  spec.runs = 3;
  auto series = run_series(spec, s.corpus, cooc, {}, QualityCriterion::toptoken);
  REQUIRE(series.summary.runs.size() == 3);
  for (int r = 0; r < 3; ++r) CHECK(series.summary.runs[static_cast<std::size_t>(r)].seed == static_cast<std::uint64_t>(r));
  int live = 0;
  for (const auto& m : series.summary.runs) live += 4 - m.degenerate_topics;
  CHECK(series.pooled_toptoken.size() == static_cast<std::size_t>(live));
  CHECK(series.pooled_intratext.size() == series.pooled_toptoken.size());
  CHECK(series.best_model.num_topics() == 5);

  SUBCASE("a single run is a single training") {
    spec.runs = 1;
    auto one = run_series(spec, s.corpus, cooc, {}, QualityCriterion::toptoken);
    CHECK(one.summary.runs.size() == 1);
    CHECK(one.summary.runs[0] == series.summary.runs[0]);
  }
  SUBCASE("rescoring matches scoring with the thresholds up front") {
    ThresholdSet th;
    th.toptoken = compute_thresholds(series.pooled_toptoken);
    auto direct = run_series(spec, s.corpus, cooc, th, QualityCriterion::toptoken);
    rescore_series(series, spec, s.corpus, th);
    CHECK(series.summary == direct.summary);
    CHECK(series.best_model.phi == direct.best_model.phi);
  }
}

TEST_CASE("pooled thresholds skip plsa unless asked") {
  std::vector<SeriesResult> series(2);
  series[0].summary.kind = ModelKind::plsa;
  series[0].summary.name = "plsa";
  series[0].pooled_toptoken = {100, 100, 100};
  series[1].summary.kind = ModelKind::artm;
  series[1].summary.name = "artm";
  series[1].pooled_toptoken = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  auto th = pooled_thresholds(series);
  CHECK(th.toptoken->theta_good == doctest::Approx(8.2));
  CHECK_FALSE(th.intratext);
  auto with = pooled_thresholds(series, true);
  CHECK(with.toptoken->theta_good > 8.2);
  std::vector<SeriesResult> only_plsa(series.begin(), series.begin() + 1);
  CHECK_THROWS_AS(pooled_thresholds(only_plsa), DataError);
}

TEST_CASE("grid search") {
  auto ppl = [](double tau) { return 100.0 + tau; };
  SUBCASE("one element") {
    std::vector<double> g{7.0};
    CHECK(grid_search(g, GridObjective::min_perplexity, ppl).tau == 7.0);
    CHECK(grid_search(g, GridObjective::perplexity_degradation, ppl).tau == 7.0);
  }
  SUBCASE("min perplexity picks the first argmin") {
    std::vector<double> g{-0.05, -0.1, 0.5};
    auto r = grid_search(g, GridObjective::min_perplexity, [](double tau) { return tau < 0 ? 1.0 : 2.0; });
    CHECK(r.tau == -0.05);
    CHECK(r.points.size() == 3);
  }
  SUBCASE("degradation picks the smallest tau reaching the target") {
    std::vector<double> g{1000, 10, 100, 1};
    auto r = grid_search(g, GridObjective::perplexity_degradation, ppl, 0.1);
    CHECK(r.tau == 10);
    CHECK(*r.baseline == 100.0);
    CHECK_FALSE(r.warning);
  }
  SUBCASE("no point degrades enough: largest tau with a warning") {
    std::vector<double> g{1, 2, 3};
    auto r = grid_search(g, GridObjective::perplexity_degradation, ppl, 0.5);
    CHECK(r.tau == 3);
    CHECK(r.warning);
  }
  CHECK_THROWS_AS(grid_search({}, GridObjective::min_perplexity, ppl), ConfigError);
}

TEST_CASE("grid_search_tau varies one coefficient") {
  const auto& s = small_synth();
  auto spec = make_model_spec(ModelKind::sparse, 4);
  std::vector<double> grid{-0.05, -0.1};
  auto r = grid_search_tau(spec, 0, s.corpus, grid, GridObjective::min_perplexity, 2);
  CHECK(r.points.size() == 2);
  CHECK((r.tau == -0.05 || r.tau == -0.1));
  CHECK(r.points[0].perplexity != r.points[1].perplexity);
}

TEST_CASE("bank perplexity") {
  const auto& s = small_synth();
  auto spec = make_model_spec(ModelKind::plsa, 4);
  auto model = fit_spec(spec, s.corpus, 0);
  const Matrix theta = infer_theta_fixed_phi(model.phi, s.corpus, 100);
  const double refit = perplexity(model.phi, theta, s.corpus);
  CHECK(bank_perplexity(model.phi, s.corpus, false) == doctest::Approx(refit).epsilon(1e-6));
  // The background column can only help at the optimum; 100 EM steps get
  // within a few parts per million of it.
  CHECK(bank_perplexity(model.phi, s.corpus, true) <= bank_perplexity(model.phi, s.corpus, false) * (1.0 + 1e-5));
  Matrix half = model.phi.leftCols(2);
  CHECK(bank_perplexity(half, s.corpus, true) < bank_perplexity(half, s.corpus, false));
  CHECK_THROWS_AS(bank_perplexity(Matrix(40, 0), s.corpus, false), DataError);
}

TEST_CASE("ablation specs cover all eight flag combinations") {
  auto specs = ablation_specs(make_model_spec(ModelKind::itar, 20));
  REQUIRE(specs.size() == 8);
  std::set<std::string> names;
  for (const auto& s : specs) {
    names.insert(s.name);
    CHECK(s.name == "itar_" + s.itar.ablation.name());
  }
  CHECK(names.size() == 8);
  CHECK(names.contains("itar_0-0-0"));
  CHECK(names.contains("itar_1-1-1"));
  CHECK_THROWS_AS(ablation_specs(make_model_spec(ModelKind::lda, 20)), ConfigError);
}

TEST_CASE("TopicBank baselines") {
  const auto& s = small_synth();
  const CooccurrenceStats cooc(s.corpus);
  auto spec = make_model_spec(ModelKind::topicbank, 4);
  spec.itar.max_iterations = 4;
  auto run = run_topicbank(s.corpus, cooc, spec, {}, QualityCriterion::toptoken);
  REQUIRE_FALSE(run.history.empty());
  for (std::size_t i = 1; i < run.history.size(); ++i) CHECK(run.history[i].bank_good >= run.history[i - 1].bank_good);
  // Dedup: no two banked columns are cosine-0.9 twins.
  const auto& e = run.bank.entries();
  for (std::size_t a = 0; a < e.size(); ++a) {
    for (std::size_t b = a + 1; b < e.size(); ++b) CHECK(cosine(e[a].column, e[b].column) < kBankDedupCosine);
  }
  auto series = run_series(spec, s.corpus, cooc, {}, QualityCriterion::toptoken);
  REQUIRE(series.summary.ppl_with_background);
  CHECK(*series.summary.ppl_with_background <= *series.summary.ppl_without_background + 1e-9);
}

TEST_CASE("report files") {
  auto dir = temp_dir("report");
  SeriesSummary plsa;
  plsa.name = "plsa";
  plsa.runs = {RunMetrics{0, 0, 3210.0, 1.25, 40.0, 0.5, 8, 0}};
  SeriesSummary tb = plsa;
  tb.name = "topicbank";
  tb.kind = ModelKind::topicbank;
  tb.ppl_with_background = 4220.0;
  tb.ppl_without_background = 6110.0;
  SeriesSummary it = plsa;
  it.name = "itar_1-0-1";
  it.kind = ModelKind::itar;
  it.max_iterations = 4;
  for (int i = 0; i < 2; ++i) {
    IterationRecord r;
    r.iteration = i;
    r.good_percent = 10.0 * (i + 1);
    r.density_toptoken = relative_density(2, 20, 0.2);
    r.density_toptoken_at_intra = relative_density(10, 20, 0.2);
    it.history.push_back(r);
  }

  SUBCASE("one series gives one table row") {
    std::vector<SeriesSummary> one{plsa};
    auto files = generate_report(one, dir);
    auto lines = read_lines(files.table_csv);
    CHECK(lines.size() == 2);
    CHECK(lines[1] == "plsa,toptoken,3.2100,,1.2500,40.0,0.5000");
    CHECK(read_lines(files.table_txt).size() == 2);
    CHECK(read_file(files.good_series_json) == "{}\n");
    CHECK(files.ablation_csv.empty());
  }
  SUBCASE("bank models show both perplexities; iterative models get series, densities and ablation rows") {
    std::vector<SeriesSummary> all{plsa, tb, it};
    auto files = generate_report(all, dir);
    const auto txt = read_file(files.table_txt);
    CHECK(txt.find("4.2200/6.1100") != std::string::npos);
    const auto good = Json::parse(read_file(files.good_series_json));
    CHECK(good.size() == 1);
    CHECK(good["itar_1-0-1"].size() == 2);
    const auto density = read_lines(files.density_csv);
    REQUIRE(density.size() == 3);
    CHECK(density[1] == "itar_1-0-1,0,0.5000,2.5000");
    REQUIRE_FALSE(files.ablation_csv.empty());
    CHECK(read_lines(files.ablation_csv).size() == 2);
  }
  SUBCASE("reports rebuilt from summary files are byte-identical") {
    std::vector<SeriesSummary> all{plsa, tb, it};
    auto first = generate_report(all, dir / "a");
    for (int i = 0; i < 3; ++i) write_series_summary(dir / "series", i, all[static_cast<std::size_t>(i)]);
    auto reread = read_series_dir(dir / "series");
    CHECK(reread == all);
    auto second = generate_report(reread, dir / "b");
    for (const char* f : {"table.csv", "table.txt", "good_series.json", "density.csv", "ablation.csv", "ablation.txt"}) {
      CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
    }
  }
  CHECK_THROWS_AS(generate_report({}, dir), ConfigError);
}

TEST_CASE("experiment config drives a full run") {
  const auto& s = small_synth();
  auto dir = temp_dir("experiment");
  ExperimentConfig cfg;
  cfg.output_dir = dir;
  cfg.topics = 4;
  cfg.runs = 2;
  cfg.thresholds.pool_models = {"artm"};
  cfg.models = {make_model_spec(ModelKind::plsa, 4), make_model_spec(ModelKind::artm, 4),
                make_model_spec(ModelKind::itar, 4)};
  cfg.models[0].runs = cfg.models[1].runs = 2;
  cfg.models[2].itar.max_iterations = 3;
  cfg.models[2].itar.tau_sift_bad = cfg.models[2].itar.tau_sift_good = 10.0;
  auto result = run_experiment(cfg, s.corpus);
  REQUIRE(result.series.size() == 3);
  CHECK(result.series[1].runs.size() == 2);
  CHECK(std::filesystem::exists(dir / "thresholds.json"));
  CHECK(std::filesystem::exists(dir / "banks" / "itar.jsonl"));
  CHECK(std::filesystem::exists(dir / "histories" / "itar.jsonl"));
  CHECK(read_history(dir / "histories" / "itar.jsonl") == result.series[2].history);
  CHECK(read_series_dir(dir / "series") == result.series);
  // The pooled artm series is reused, not retrained: same numbers as a fresh scored run.
  const CooccurrenceStats cooc(s.corpus);
  auto fresh = run_series(cfg.models[1], s.corpus, cooc, result.thresholds, QualityCriterion::toptoken);
  CHECK(fresh.summary == result.series[1]);
}
