#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "itar/corpus.hpp"
#include "itar/error.hpp"
#include "itar/experiment.hpp"
#include "itar/harness.hpp"
#include "itar/io.hpp"
#include "itar/metrics.hpp"
#include "itar/model.hpp"
#include "itar/service.hpp"
#include "itar/synth.hpp"
#include "itar/trainer.hpp"

namespace {

using namespace itar;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDegenerate = 4;

struct DegenerateModel : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by the subcommands that read an experiment config. Unset flags
// leave the config value alone.
struct CommonFlags {
  std::optional<std::string> config;
  std::optional<std::string> corpus;
  std::optional<int> topics;
  std::optional<int> runs;
  std::optional<std::string> criterion;
  std::optional<std::string> thresholds;
  std::optional<std::string> out;
  std::optional<int> workers;

  void add(CLI::App* app, bool with_runs = true) {
    app->add_option("--config", config, "experiment config (JSON)");
    app->add_option("--corpus", corpus, "corpus file (binary, BoW or sequences)");
    app->add_option("--t,--topics", topics, "number of topics");
    if (with_runs) app->add_option("--runs", runs, "runs per non-iterative series");
    app->add_option("--criterion", criterion, "toptoken or intratext");
    app->add_option("--thresholds", thresholds, "thresholds file (JSON)");
    app->add_option("--out", out, "output directory");
    app->add_option("--workers", workers, "E-step threads");
  }

  ExperimentConfig load() const {
    ExperimentConfig cfg = config ? load_experiment_config(*config) : ExperimentConfig{};
    if (corpus) cfg.corpus = *corpus;
    if (topics) {
      cfg.topics = *topics;
      cfg.itar.topics = *topics;
      for (auto& m : cfg.models) {
        m.topics = *topics;
        m.itar.topics = *topics;
      }
    }
    if (runs) {
      cfg.runs = *runs;
      for (auto& m : cfg.models) {
        if (!is_iterative(m.kind)) m.runs = *runs;
      }
    }
    if (criterion) cfg.criterion = quality_criterion_from_string(*criterion);
    cfg.itar.criterion = cfg.criterion;
    if (thresholds) {
      cfg.thresholds.mode = "file";
      cfg.thresholds.file = *thresholds;
      cfg.itar.thresholds = {};
    }
    if (out) cfg.output_dir = *out;
    if (workers) {
      cfg.workers = *workers;
      cfg.itar.workers = *workers;
      for (auto& m : cfg.models) m.itar.workers = *workers;
    }
    if (cfg.corpus.empty()) throw ConfigError("no corpus given (--corpus or \"corpus\" in the config)");
    return cfg;
  }
};

struct ItarFlags {
  std::optional<int> max_iterations;
  std::optional<std::string> sift;
  std::optional<double> tau_sift;
  std::optional<double> tau_sift_bad;
  std::optional<double> tau_sift_good;
  std::optional<double> tau_fix;
  std::optional<std::string> ablation;
  std::optional<double> stop_fraction;
  std::optional<int> em_iterations;

  void add(CLI::App* app) {
    app->add_option("--max-iters", max_iterations, "iteration budget");
    app->add_option("--sift", sift, "v1 or v2");
    app->add_option("--tau-sift", tau_sift, "sift coefficient for both banks");
    app->add_option("--tau-sift-bad", tau_sift_bad, "sift coefficient against bad topics");
    app->add_option("--tau-sift-good", tau_sift_good, "sift coefficient against good topics");
    app->add_option("--tau-fix", tau_fix, "fixation coefficient");
    app->add_option("--ablation", ablation, "fix-siftbad-siftgood flags, e.g. 1-0-1");
    app->add_option("--stop-fraction", stop_fraction, "good-topic fraction that stops the loop");
    app->add_option("--em-iters", em_iterations, "EM iterations per model");
  }

  void apply(ItarConfig& c) const {
    if (max_iterations) c.max_iterations = *max_iterations;
    if (sift) {
      c.sift_version = sift_version_from_string(*sift);
      if (!tau_sift && !tau_sift_bad && !tau_sift_good) {
        const auto defaults = make_model_spec(c.sift_version == SiftVersion::v1 ? ModelKind::itar : ModelKind::itar2,
                                              c.topics);
        c.tau_sift_bad = defaults.itar.tau_sift_bad;
        c.tau_sift_good = defaults.itar.tau_sift_good;
      }
    }
    if (tau_sift) c.tau_sift_bad = c.tau_sift_good = *tau_sift;
    if (tau_sift_bad) c.tau_sift_bad = *tau_sift_bad;
    if (tau_sift_good) c.tau_sift_good = *tau_sift_good;
    if (tau_fix) c.tau_fix = *tau_fix;
    if (ablation) c.ablation = AblationFlags::parse(*ablation);
    if (stop_fraction) c.stop_good_fraction = *stop_fraction;
    if (em_iterations) c.em_iterations = *em_iterations;
  }
};

void write_json_file(const std::filesystem::path& path, const Json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file_atomic(path, j.dump(2) + "\n");
}

void write_sequences_text(const std::filesystem::path& path, const Corpus& corpus) {
  std::ostringstream out;
  const auto& vocab = corpus.vocabulary();
  for (const auto& doc : corpus.documents()) {
    out << doc.id << '\t';
    bool first = true;
    for (TokenId t : *doc.sequence) {
      out << (first ? "" : " ") << vocab.surface(t);
      first = false;
    }
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

ItarConfig itar_config_for(const ExperimentConfig& cfg, const ItarFlags& flags, const Corpus& corpus,
                           const CooccurrenceStats& cooc) {
  ItarConfig c = cfg.itar;
  c.topics = cfg.topics;
  c.criterion = cfg.criterion;
  c.workers = cfg.workers;
  flags.apply(c);
  if (!(c.criterion == QualityCriterion::toptoken ? c.thresholds.toptoken : c.thresholds.intratext)) {
    c.thresholds = resolve_thresholds(cfg, corpus, cooc);
  }
  c.validate();
  return c;
}

// --- subcommands -----------------------------------------------------------------

struct IngestArgs {
  std::string bow, seq, out;
  std::int64_t df_min = 1;
  double df_max = 1.0;
};

int cmd_ingest(const IngestArgs& a) {
  if (a.bow.empty() == a.seq.empty()) throw ConfigError("give exactly one of --bow and --seq");
  const Corpus raw = a.bow.empty() ? parse_sequences(a.seq) : parse_bow(a.bow);
  FilterReport report;
  const Corpus corpus = filter_vocabulary(raw, a.df_min, a.df_max, &report);
  spdlog::info("{} documents, {} tokens; filter removed {} tokens and {} documents in {} passes",
               corpus.num_documents(), corpus.vocab_size(), report.tokens_removed, report.documents_dropped,
               report.passes);
  if (corpus.num_documents() == 0) throw DataError("no documents left after filtering");
  write_corpus_binary(a.out, corpus);
  return 0;
}

struct SynthArgs {
  SynthParams params;
  std::string out, text_out, phi_out;
};

int cmd_synth(const SynthArgs& a) {
  const auto s = synth_corpus(a.params);
  write_corpus_binary(a.out, s.corpus);
  if (!a.text_out.empty()) write_sequences_text(a.text_out, s.corpus);
  if (!a.phi_out.empty()) write_phi_tsv(a.phi_out, s.phi, s.corpus.vocabulary());
  spdlog::info("wrote {} documents over {} tokens", s.corpus.num_documents(), s.corpus.vocab_size());
  return 0;
}

struct ThresholdArgs {
  CommonFlags common;
  std::vector<std::string> models;
  bool include_plsa = false;
  std::string out_file;
};

int cmd_thresholds(const ThresholdArgs& a) {
  auto cfg = a.common.load();
  cfg.thresholds.mode = "pool";
  cfg.itar.thresholds = {};
  if (!a.models.empty()) cfg.thresholds.pool_models = a.models;
  if (a.include_plsa) cfg.thresholds.include_plsa = true;
  const Corpus corpus = load_corpus(cfg.corpus);
  const CooccurrenceStats cooc(corpus);
  const auto th = resolve_thresholds(cfg, corpus, cooc);
  const std::filesystem::path out = a.out_file.empty() ? cfg.output_dir / "thresholds.json" : std::filesystem::path(a.out_file);
  write_json_file(out, to_json(th));
  const auto& t = th.get(cfg.criterion);
  spdlog::info("{}: good {:.6g}, bad {:.6g} -> {}", to_string(cfg.criterion), t.theta_good, t.theta_bad,
               out.string());
  return 0;
}

struct TrainArgs {
  CommonFlags common;
  std::vector<std::string> models;
};

int cmd_train(const TrainArgs& a) {
  auto cfg = a.common.load();
  std::vector<ModelSpec> specs;
  if (!a.models.empty()) {
    for (const auto& name : a.models) {
      auto spec = make_model_spec(model_kind_from_string(name), cfg.topics);
      if (!is_iterative(spec.kind)) spec.runs = cfg.runs;
      specs.push_back(std::move(spec));
    }
  } else {
    for (const auto& m : cfg.models) {
      if (!is_iterative(m.kind)) specs.push_back(m);
    }
  }
  if (specs.empty()) throw ConfigError("no models to train (--model or \"models\" in the config)");
  for (const auto& s : specs) {
    if (is_iterative(s.kind)) throw ConfigError("train takes non-iterative models; use itar or topicbank");
  }
  const Corpus corpus = load_corpus(cfg.corpus);
  const CooccurrenceStats cooc(corpus);
  const auto th = resolve_thresholds(cfg, corpus, cooc);
  bool all_degenerate = true;
  int index = 0;
  for (const auto& spec : specs) {
    auto series = run_series(spec, corpus, cooc, th, cfg.criterion);
    write_series_summary(cfg.output_dir / "series", index++, series.summary);
    std::filesystem::create_directories(cfg.output_dir / "phi");
    write_phi_tsv(cfg.output_dir / "phi" / (spec.name + ".tsv"), series.best_model.phi, corpus.vocabulary());
    const auto& best = series.summary.best();
    spdlog::info("{}: best run {} ppl {:.6g} coherence {:.4g} good {:.1f}%", spec.name, best.run, best.perplexity,
                 best.coherence, best.good_percent);
    if (best.degenerate_topics < spec.topics) all_degenerate = false;
  }
  if (all_degenerate) throw DegenerateModel("every domain topic of every best model is degenerate");
  return 0;
}

ReviewServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int serve_session(const std::filesystem::path& dir, std::shared_ptr<const Corpus> corpus, SessionConfig config,
                  ServerOptions options) {
  ReviewSession session(dir, std::move(corpus), std::move(config));
  ReviewServer server(session, std::move(options));
  const int port = server.bind();
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  spdlog::info("review session {} at http://{}:{}/ (phase {})", dir.string(), "127.0.0.1", port,
               to_string(session.phase()));
  server.serve();
  g_server = nullptr;
  session.wait_idle();
  return 0;
}

struct ServeFlags {
  bool interactive = false;
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string static_dir;

  void add(CLI::App* app, bool with_interactive) {
    if (with_interactive) app->add_flag("--interactive", interactive, "label through the review service");
    app->add_option("--port", port, "HTTP port")->capture_default_str();
    app->add_option("--host", host, "bind address")->capture_default_str();
    app->add_option("--static", static_dir, "UI bundle directory");
  }

  ServerOptions options() const {
    ServerOptions o;
    o.host = host;
    o.port = port;
    o.static_dir = static_dir;
    return o;
  }
};

struct ItarArgs {
  CommonFlags common;
  ItarFlags itar;
  ServeFlags serve;
};

int cmd_itar(const ItarArgs& a) {
  auto cfg = a.common.load();
  auto corpus = std::make_shared<const Corpus>(load_corpus(cfg.corpus));
  const CooccurrenceStats cooc(*corpus);
  auto itar_cfg = itar_config_for(cfg, a.itar, *corpus, cooc);
  const auto& out = cfg.output_dir;
  std::filesystem::create_directories(out);

  if (a.serve.interactive) {
    itar_cfg.labeling_mode = LabelingMode::interactive;
    SessionConfig session;
    session.corpus = std::filesystem::absolute(cfg.corpus);
    session.itar = itar_cfg;
    return serve_session(out, std::move(corpus), std::move(session), a.serve.options());
  }

  const auto& vocab = corpus->vocabulary();
  write_json_file(out / "config.json", Json{{"corpus", std::filesystem::absolute(cfg.corpus).string()},
                                            {"itar", to_json(itar_cfg)}});
  auto result = run_itar(itar_cfg, *corpus);
  std::ostringstream bank;
  write_bank(bank, result.bank, vocab);
  write_file_atomic(out / "bank.jsonl", bank.str());
  write_history(out / "history.jsonl", result.history);
  write_phi_tsv(out / "phi.tsv", result.model.phi, vocab);

  SeriesSummary summary;
  summary.name = itar_cfg.sift_version == SiftVersion::v1 ? "itar" : "itar2";
  summary.kind = itar_cfg.sift_version == SiftVersion::v1 ? ModelKind::itar : ModelKind::itar2;
  summary.criterion = itar_cfg.criterion;
  summary.topics = itar_cfg.topics;
  summary.max_iterations = itar_cfg.max_iterations;
  const auto& last = result.history.back();
  RunMetrics m;
  m.seed = last.seed;
  m.perplexity = last.perplexity;
  m.coherence = last.coherence;
  m.good_percent = last.good_percent;
  m.diversity = last.diversity;
  for (const auto& t : last.topics) {
    m.good_topics += (t.label == "good" || t.label == "fixed") ? 1 : 0;
    m.degenerate_topics += t.degenerate ? 1 : 0;
  }
  summary.runs.push_back(m);
  summary.history = result.history;
  write_series_summary(out / "series", 0, summary);
  spdlog::info("stopped after {} iterations ({}); bank {} good / {} bad", result.history.size(), last.stop_reason,
               last.bank_good, last.bank_bad);
  if (last.stop_reason == "all-free-degenerate") throw DegenerateModel("all free topics degenerated");
  return 0;
}

struct TopicBankArgs {
  CommonFlags common;
  std::string variant = "topicbank";
  std::string base = "artm";
  std::optional<int> max_iterations;
};

int cmd_topicbank(const TopicBankArgs& a) {
  auto cfg = a.common.load();
  auto spec = make_model_spec(model_kind_from_string(a.variant), cfg.topics);
  if (!is_bank_model(spec.kind)) throw ConfigError("--variant must be topicbank or topicbank2");
  spec.bank_base = model_kind_from_string(a.base);
  if (spec.bank_base != ModelKind::artm && spec.bank_base != ModelKind::plsa) {
    throw ConfigError("--base must be artm or plsa");
  }
  spec.itar = cfg.itar;
  spec.itar.topics = cfg.topics;
  if (a.max_iterations) spec.itar.max_iterations = *a.max_iterations;
  const Corpus corpus = load_corpus(cfg.corpus);
  const CooccurrenceStats cooc(corpus);
  const auto th = resolve_thresholds(cfg, corpus, cooc);
  auto series = run_series(spec, corpus, cooc, th, cfg.criterion);
  const auto& out = cfg.output_dir;
  std::filesystem::create_directories(out);
  std::ostringstream bank;
  write_bank(bank, series.bank, corpus.vocabulary());
  write_file_atomic(out / "bank.jsonl", bank.str());
  write_history(out / "history.jsonl", series.summary.history);
  write_series_summary(out / "series", 0, series.summary);
  if (series.bank.empty()) throw DegenerateModel("the bank stayed empty");
  write_phi_tsv(out / "phi.tsv", series.best_model.phi, corpus.vocabulary());
  spdlog::info("{}: {} banked topics, PPL {:.6g}/{:.6g}", spec.name, series.bank.size(),
               series.summary.ppl_with_background.value_or(0.0), series.summary.ppl_without_background.value_or(0.0));
  return 0;
}

struct EvaluateArgs {
  std::string corpus, phi, out;
  int top_k = kDefaultTopWords;
  int infer_iterations = 100;
  int workers = 1;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const Corpus corpus = load_corpus(a.corpus);
  const CooccurrenceStats cooc(corpus);
  TopicModel model;
  model.phi = read_phi_tsv(a.phi, corpus.vocabulary());
  model.roles.assign(static_cast<std::size_t>(model.phi.cols()), TopicRole::domain);
  model.bank_refs.assign(model.roles.size(), "");
  model.theta = infer_theta_fixed_phi(model.phi, corpus, a.infer_iterations, a.workers);
  model.topic_sizes = topic_sizes(model.theta, corpus);
  const auto qualities = evaluate_topics(model, corpus, cooc, a.top_k);
  const auto& vocab = corpus.vocabulary();

  Json topics = Json::array();
  std::vector<int> live;
  for (const auto& q : qualities) {
    Json words = Json::array();
    for (TokenId w : q.top_words) words.push_back(vocab.surface(w));
    Json t = Json::object();
    t["topic"] = q.topic;
    t["top_words"] = std::move(words);
    t["coh_toptoken"] = q.coherence_toptoken;
    t["coh_intra"] = q.coherence_intra ? Json(*q.coherence_intra) : Json(nullptr);
    t["n_t"] = q.size;
    t["degenerate"] = q.degenerate;
    topics.push_back(std::move(t));
    if (!q.degenerate) live.push_back(q.topic);
  }
  Json report = Json::object();
  report["topics"] = std::move(topics);
  report["model"] = Json{{"ppl", perplexity(model, corpus)},
                         {"diversity", live.size() >= 2 ? diversity(model.phi, live) : 0.0}};
  if (a.out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    write_json_file(a.out, report);
  }
  if (live.empty()) throw DegenerateModel("every topic is degenerate");
  return 0;
}

struct ReportArgs {
  CommonFlags common;
  std::string results;
  std::optional<bool> ablation;
};

int cmd_report(const ReportArgs& a) {
  if (!a.results.empty()) {
    const auto series = read_series_dir(std::filesystem::path(a.results) / "series");
    const std::filesystem::path out = a.common.out ? std::filesystem::path(*a.common.out) : std::filesystem::path(a.results);
    generate_report(series, out);
    spdlog::info("report for {} series -> {}", series.size(), out.string());
    return 0;
  }
  auto cfg = a.common.load();
  if (a.ablation) cfg.ablation = *a.ablation;
  if (cfg.models.empty() && !cfg.ablation) throw ConfigError("no models in the config");
  const Corpus corpus = load_corpus(cfg.corpus);
  const auto result = run_experiment(cfg, corpus);
  spdlog::info("{} series -> {}", result.series.size(), cfg.output_dir.string());
  return 0;
}

struct ServeArgs {
  CommonFlags common;
  ItarFlags itar;
  ServeFlags serve;
  std::string session_dir;
};

int cmd_serve(const ServeArgs& a) {
  const std::filesystem::path dir = a.session_dir;
  if (auto stored = read_session_config(dir)) {
    const auto corpus_path = a.common.corpus ? std::filesystem::path(*a.common.corpus) : stored->corpus;
    auto corpus = std::make_shared<const Corpus>(load_corpus(corpus_path));
    return serve_session(dir, std::move(corpus), *stored, a.serve.options());
  }
  auto cfg = a.common.load();
  auto corpus = std::make_shared<const Corpus>(load_corpus(cfg.corpus));
  const CooccurrenceStats cooc(*corpus);
  SessionConfig session;
  session.corpus = std::filesystem::absolute(cfg.corpus);
  session.itar = itar_config_for(cfg, a.itar, *corpus, cooc);
  session.itar.labeling_mode = LabelingMode::interactive;
  return serve_session(dir, std::move(corpus), std::move(session), a.serve.options());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative topic-model training with a topic bank"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")->capture_default_str();

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "convert a BoW or sequence file into a binary corpus");
  auto* bow = c_ingest->add_option("--bow", ingest.bow, "BoW file");
  auto* seq = c_ingest->add_option("--seq", ingest.seq, "sequence file");
  bow->excludes(seq);
  c_ingest->add_option("--df-min", ingest.df_min, "drop tokens in fewer documents")->capture_default_str();
  c_ingest->add_option("--df-max", ingest.df_max, "drop tokens in a larger document fraction")->capture_default_str();
  c_ingest->add_option("--out", ingest.out, "binary corpus")->required();

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic corpus with known topics");
  c_synth->add_option("--seed", synth.params.seed)->capture_default_str();
  c_synth->add_option("--words", synth.params.vocab_size)->capture_default_str();
  c_synth->add_option("--topics", synth.params.topics)->capture_default_str();
  c_synth->add_option("--docs", synth.params.documents)->capture_default_str();
  c_synth->add_option("--mean-length", synth.params.mean_length)->capture_default_str();
  c_synth->add_option("--concentration", synth.params.concentration)->capture_default_str();
  c_synth->add_option("--out", synth.out, "binary corpus")->required();
  c_synth->add_option("--text-out", synth.text_out, "also write a sequence file");
  c_synth->add_option("--phi-out", synth.phi_out, "true topics as TSV");

  ThresholdArgs thresholds;
  auto* c_thresholds = app.add_subcommand("thresholds", "pool coherences of non-iterative models into thresholds");
  thresholds.common.add(c_thresholds);
  c_thresholds->add_option("--models", thresholds.models, "pool models")->delimiter(',');
  c_thresholds->add_flag("--include-plsa", thresholds.include_plsa, "pool plsa topics too");
  c_thresholds->add_option("--file", thresholds.out_file, "thresholds file to write");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "train series of non-iterative models");
  train.common.add(c_train);
  c_train->add_option("--model", train.models, "plsa, lda, sparse, decorr, artm")->delimiter(',');

  ItarArgs itar_args;
  auto* c_itar = app.add_subcommand("itar", "run the iterative training loop");
  itar_args.common.add(c_itar, false);
  itar_args.itar.add(c_itar);
  itar_args.serve.add(c_itar, true);

  TopicBankArgs topicbank;
  auto* c_topicbank = app.add_subcommand("topicbank", "run a TopicBank baseline");
  topicbank.common.add(c_topicbank, false);
  c_topicbank->add_option("--variant", topicbank.variant, "topicbank or topicbank2")->capture_default_str();
  c_topicbank->add_option("--base", topicbank.base, "artm or plsa")->capture_default_str();
  c_topicbank->add_option("--max-iters", topicbank.max_iterations, "iteration budget");

  EvaluateArgs evaluate;
  auto* c_evaluate = app.add_subcommand("evaluate", "score a topic matrix on a corpus");
  c_evaluate->add_option("--corpus", evaluate.corpus)->required();
  c_evaluate->add_option("--phi", evaluate.phi, "TSV written by train/itar")->required();
  c_evaluate->add_option("--out", evaluate.out, "JSON report (stdout when absent)");
  c_evaluate->add_option("--top-k", evaluate.top_k)->capture_default_str();
  c_evaluate->add_option("--infer-iters", evaluate.infer_iterations)->capture_default_str();
  c_evaluate->add_option("--workers", evaluate.workers)->capture_default_str();

  ReportArgs report;
  auto* c_report = app.add_subcommand("report", "run an experiment config, or rebuild a report from results");
  report.common.add(c_report);
  c_report->add_option("--results", report.results, "directory with series/ from an earlier run");
  c_report->add_option("--ablation", report.ablation, "add the eight ablation series");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "serve a labeling session over HTTP");
  serve.common.add(c_serve, false);
  serve.itar.add(c_serve);
  serve.serve.add(c_serve, false);
  c_serve->add_option("--session-dir", serve.session_dir, "session directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*c_ingest) return cmd_ingest(ingest);
    if (*c_synth) return cmd_synth(synth);
    if (*c_thresholds) return cmd_thresholds(thresholds);
    if (*c_train) return cmd_train(train);
    if (*c_itar) return cmd_itar(itar_args);
    if (*c_topicbank) return cmd_topicbank(topicbank);
    if (*c_evaluate) return cmd_evaluate(evaluate);
    if (*c_report) return cmd_report(report);
    if (*c_serve) return cmd_serve(serve);
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    spdlog::error("data: {}", e.what());
    return kExitData;
  } catch (const DegenerateModel& e) {
    spdlog::error("degenerate model: {}", e.what());
    return kExitDegenerate;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
  return 0;
}
