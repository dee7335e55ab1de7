#include "itar/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "itar/error.hpp"

namespace itar {

namespace {

bool is_metric_topic(const TopicModel& model, const TopicQuality& q) {
  return !q.degenerate && model.roles[static_cast<std::size_t>(q.topic)] != TopicRole::background;
}

RegularizerConfig relative(RegularizerKind kind, double tau, TopicSelector topics, Side side = Side::phi) {
  RegularizerConfig c;
  c.kind = kind;
  c.tau = tau;
  c.tau_mode = TauMode::relative;
  c.topics = topics;
  c.side = side;
  return c;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// A fixed set of topics evaluated like a trained model: theta is inferred so
// topic sizes (and with them intra-text assignment) are defined.
struct FixedPhiEvaluation {
  TopicModel model;
  std::vector<TopicQuality> qualities;
  double perplexity = 0.0;
};

FixedPhiEvaluation evaluate_fixed_phi(const Matrix& phi, const Corpus& corpus, const CooccurrenceStats& cooc,
                                      int iterations, int top_k) {
  FixedPhiEvaluation out;
  out.model.phi = phi;
  out.model.roles.assign(static_cast<std::size_t>(phi.cols()), TopicRole::domain);
  out.model.bank_refs.assign(static_cast<std::size_t>(phi.cols()), std::string());
  out.model.theta = infer_theta_fixed_phi(phi, corpus, iterations);
  out.model.topic_sizes = topic_sizes(out.model.theta, corpus);
  out.perplexity = perplexity(out.model, corpus);
  out.qualities = evaluate_topics(out.model, corpus, cooc, top_k);
  return out;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::plsa: return "plsa";
    case ModelKind::lda: return "lda";
    case ModelKind::sparse: return "sparse";
    case ModelKind::decorr: return "decorr";
    case ModelKind::artm: return "artm";
    case ModelKind::topicbank: return "topicbank";
    case ModelKind::topicbank2: return "topicbank2";
    case ModelKind::itar: return "itar";
    case ModelKind::itar2: return "itar2";
  }
  return "plsa";
}

ModelKind model_kind_from_string(std::string_view s) {
  for (auto k : {ModelKind::plsa, ModelKind::lda, ModelKind::sparse, ModelKind::decorr, ModelKind::artm,
                 ModelKind::topicbank, ModelKind::topicbank2, ModelKind::itar, ModelKind::itar2}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown model '" + std::string(s) + "'");
}

bool is_iterative(ModelKind kind) {
  return kind == ModelKind::itar || kind == ModelKind::itar2 || is_bank_model(kind);
}

bool is_bank_model(ModelKind kind) { return kind == ModelKind::topicbank || kind == ModelKind::topicbank2; }

ModelSpec make_model_spec(ModelKind kind, int topics) {
  ModelSpec spec;
  spec.name = std::string(to_string(kind));
  spec.kind = kind;
  spec.topics = topics;
  spec.itar.topics = topics;
  switch (kind) {
    case ModelKind::plsa:
      break;
    case ModelKind::lda: {
      // Smoothing with 0.1 per cell of both matrices; fit_spec scales the
      // coefficients by W and |H| once the corpus is known.
      RegularizerConfig phi_prior;
      phi_prior.kind = RegularizerKind::smooth_sparse;
      phi_prior.tau = 0.1;
      phi_prior.side = Side::phi;
      RegularizerConfig theta_prior = phi_prior;
      theta_prior.side = Side::theta;
      spec.regularizers = {phi_prior, theta_prior};
      break;
    }
    case ModelKind::sparse:
      spec.background_topics = 1;
      spec.regularizers = {relative(RegularizerKind::smooth_sparse, -0.05, TopicSelector::domain),
                           relative(RegularizerKind::smooth_sparse, 0.05, TopicSelector::background, Side::both)};
      break;
    case ModelKind::decorr:
      spec.background_topics = 1;
      spec.regularizers = {relative(RegularizerKind::decorrelation, 0.01, TopicSelector::domain),
                           relative(RegularizerKind::smooth_sparse, 0.05, TopicSelector::background, Side::both)};
      break;
    case ModelKind::artm:
      spec.regularizers = base_artm_configs(-0.05, 0.01);
      break;
    case ModelKind::topicbank:
    case ModelKind::topicbank2:
      spec.runs = 1;
      break;
    case ModelKind::itar:
      spec.runs = 1;
      spec.itar.sift_version = SiftVersion::v1;
      spec.itar.tau_sift_bad = spec.itar.tau_sift_good = 1e5;
      break;
    case ModelKind::itar2:
      spec.runs = 1;
      spec.itar.sift_version = SiftVersion::v2;
      spec.itar.tau_sift_bad = spec.itar.tau_sift_good = 1e8;
      break;
  }
  return spec;
}

std::vector<TopicRole> spec_roles(const ModelSpec& spec) {
  std::vector<TopicRole> roles(static_cast<std::size_t>(spec.topics), TopicRole::domain);
  roles.insert(roles.end(), static_cast<std::size_t>(spec.background_topics), TopicRole::background);
  return roles;
}

TopicModel fit_spec(const ModelSpec& spec, const Corpus& corpus, std::uint64_t seed, TrainStats* stats,
                    std::function<void(int, const TopicModel&)> observer) {
  if (spec.topics < 1) throw ConfigError("a model needs at least one topic");
  auto roles = spec_roles(spec);
  auto model = init_model(corpus.vocab_size(), roles.size(), seed, roles);
  ResolveContext ctx;
  ctx.vocab_size = corpus.vocab_size();
  ctx.num_documents = corpus.num_documents();
  ctx.total_tokens = corpus.total_tokens();
  ctx.roles = model.roles;
  std::vector<Regularizer> regs;
  for (const auto& c : spec.regularizers) {
    auto reg = resolve(c, ctx);
    if (spec.kind == ModelKind::lda) {
      // Per-cell prior: beta0 * (1/W) = tau and alpha0 * (1/|H|) = tau.
      auto& r = std::get<SmoothSparse>(reg);
      r.beta0 *= static_cast<double>(corpus.vocab_size());
      r.alpha0 *= static_cast<double>(r.topics.size());
    }
    regs.push_back(std::move(reg));
  }
  FitOptions options;
  options.iterations = spec.em_iterations;
  options.workers = spec.itar.workers;
  options.observer = std::move(observer);
  auto s = em_fit(model, corpus, regs, options);
  if (stats) *stats = std::move(s);
  return model;
}

RunMetrics model_metrics(const TopicModel& model, std::span<const TopicQuality> qualities, double ppl,
                         const Thresholds* thresholds, QualityCriterion criterion) {
  RunMetrics m;
  m.perplexity = ppl;
  std::vector<int> topics;
  int counted = 0;
  double coh_sum = 0.0;
  for (const auto& q : qualities) {
    if (model.roles[static_cast<std::size_t>(q.topic)] == TopicRole::background) continue;
    ++counted;
    if (q.degenerate) {
      ++m.degenerate_topics;
      continue;
    }
    const double c = criterion_coherence(q, criterion);
    coh_sum += c;
    topics.push_back(q.topic);
    if (thresholds && c >= thresholds->theta_good) ++m.good_topics;
  }
  if (!topics.empty()) m.coherence = coh_sum / static_cast<double>(topics.size());
  if (counted > 0) m.good_percent = 100.0 * m.good_topics / counted;
  if (topics.size() >= 2) m.diversity = diversity(model.phi, topics);
  return m;
}

int best_run_index(std::span<const RunMetrics> runs) {
  int best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].good_topics > runs[static_cast<std::size_t>(best)].good_topics) best = static_cast<int>(i);
  }
  return best;
}

SeriesResult run_series(const ModelSpec& spec, const Corpus& corpus, const CooccurrenceStats& cooc,
                        const ThresholdSet& thresholds, QualityCriterion criterion) {
  SeriesResult out;
  auto& summary = out.summary;
  summary.name = spec.name;
  summary.kind = spec.kind;
  summary.criterion = criterion;
  summary.topics = spec.topics;
  const Thresholds* th = nullptr;
  if (criterion == QualityCriterion::toptoken && thresholds.toptoken) th = &*thresholds.toptoken;
  if (criterion == QualityCriterion::intratext && thresholds.intratext) th = &*thresholds.intratext;

  if (spec.kind == ModelKind::itar || spec.kind == ModelKind::itar2) {
    ItarConfig cfg = spec.itar;
    cfg.topics = spec.topics;
    cfg.criterion = criterion;
    cfg.thresholds = thresholds;
    cfg.em_iterations = spec.em_iterations;
    summary.max_iterations = cfg.max_iterations;
    auto result = run_itar(cfg, corpus);
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
    summary.history = std::move(result.history);
    out.best_model = std::move(result.model);
    out.bank = std::move(result.bank);
    return out;
  }

  if (is_bank_model(spec.kind)) {
    summary.max_iterations = spec.itar.max_iterations;
    auto tb = run_topicbank(corpus, cooc, spec, thresholds, criterion);
    summary.history = std::move(tb.history);
    out.bank = tb.bank;
    if (tb.bank.empty()) {
      spdlog::warn("{}: bank is empty, no metrics", spec.name);
      summary.runs.push_back(RunMetrics{});
      return out;
    }
    const Matrix phi = tb.bank.columns(TopicLabel::good);
    auto eval = evaluate_fixed_phi(phi, corpus, cooc, spec.infer_iterations, spec.itar.top_k);
    summary.ppl_without_background = eval.perplexity;
    summary.ppl_with_background = bank_perplexity(phi, corpus, true, spec.infer_iterations);
    auto m = model_metrics(eval.model, eval.qualities, eval.perplexity, th, criterion);
    // T+ is relative to the model size the bank competes with.
    m.good_percent = 100.0 * m.good_topics / spec.topics;
    summary.runs.push_back(m);
    out.best_model = std::move(eval.model);
    return out;
  }

  if (spec.runs < 1) throw ConfigError("runs must be positive");
  std::vector<TopicModel> models;
  for (int r = 0; r < spec.runs; ++r) {
    TrainStats stats;
    auto model = fit_spec(spec, corpus, static_cast<std::uint64_t>(r), &stats);
    const auto qualities = evaluate_topics(model, corpus, cooc, spec.itar.top_k);
    auto m = model_metrics(model, qualities, stats.perplexity.back(), th, criterion);
    m.run = r;
    m.seed = static_cast<std::uint64_t>(r);
    for (const auto& q : qualities) {
      if (!is_metric_topic(model, q)) continue;
      out.pooled_toptoken.push_back(q.coherence_toptoken);
      if (q.coherence_intra) out.pooled_intratext.push_back(*q.coherence_intra);
    }
    summary.runs.push_back(m);
    out.run_qualities.push_back(qualities);
    models.push_back(std::move(model));
  }
  summary.best_run = best_run_index(summary.runs);
  out.best_model = std::move(models[static_cast<std::size_t>(summary.best_run)]);
  return out;
}

void rescore_series(SeriesResult& result, const ModelSpec& spec, const Corpus& corpus, const ThresholdSet& thresholds) {
  auto& summary = result.summary;
  if (is_iterative(spec.kind)) throw ConfigError("rescore_series takes non-iterative series only");
  if (result.run_qualities.size() != summary.runs.size()) throw DataError("series has no per-run qualities");
  const Thresholds* th = nullptr;
  if (summary.criterion == QualityCriterion::toptoken && thresholds.toptoken) th = &*thresholds.toptoken;
  if (summary.criterion == QualityCriterion::intratext && thresholds.intratext) th = &*thresholds.intratext;
  const auto roles = spec_roles(spec);
  for (std::size_t r = 0; r < summary.runs.size(); ++r) {
    auto& m = summary.runs[r];
    int counted = 0;
    m.good_topics = 0;
    for (const auto& q : result.run_qualities[r]) {
      if (roles[static_cast<std::size_t>(q.topic)] == TopicRole::background) continue;
      ++counted;
      if (!q.degenerate && th && criterion_coherence(q, summary.criterion) >= th->theta_good) ++m.good_topics;
    }
    m.good_percent = counted > 0 ? 100.0 * m.good_topics / counted : 0.0;
  }
  const int best = best_run_index(summary.runs);
  if (best != summary.best_run) {
    summary.best_run = best;
    result.best_model = fit_spec(spec, corpus, summary.runs[static_cast<std::size_t>(best)].seed);
  }
}

ThresholdSet pooled_thresholds(std::span<const SeriesResult> series, bool include_plsa) {
  std::vector<double> toptoken;
  std::vector<double> intratext;
  std::string source;
  for (const auto& s : series) {
    if (is_iterative(s.summary.kind)) continue;
    if (s.summary.kind == ModelKind::plsa && !include_plsa) continue;
    toptoken.insert(toptoken.end(), s.pooled_toptoken.begin(), s.pooled_toptoken.end());
    intratext.insert(intratext.end(), s.pooled_intratext.begin(), s.pooled_intratext.end());
    source += (source.empty() ? "" : ",") + s.summary.name;
  }
  if (toptoken.empty()) throw DataError("no non-iterative ARTM-family series to pool thresholds from");
  ThresholdSet out;
  out.toptoken = compute_thresholds(toptoken, "toptoken pool: " + source);
  if (!intratext.empty()) out.intratext = compute_thresholds(intratext, "intratext pool: " + source);
  return out;
}

GridSearchResult grid_search(std::span<const double> grid, GridObjective objective,
                             const std::function<double(double)>& perplexity_at, double target) {
  if (grid.empty()) throw ConfigError("grid search needs at least one value");
  GridSearchResult out;
  for (double tau : grid) out.points.push_back({tau, perplexity_at(tau)});
  if (objective == GridObjective::min_perplexity) {
    auto best = out.points.begin();
    for (auto it = out.points.begin(); it != out.points.end(); ++it) {
      if (it->perplexity < best->perplexity) best = it;
    }
    out.tau = best->tau;
    return out;
  }
  out.baseline = perplexity_at(0.0);
  std::vector<GridPoint> sorted = out.points;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.tau < b.tau; });
  for (const auto& p : sorted) {
    // Relative slack so an exact 10% step is not lost to rounding.
    if (p.perplexity >= *out.baseline * (1.0 + target) * (1.0 - 1e-12)) {
      out.tau = p.tau;
      return out;
    }
  }
  out.tau = sorted.back().tau;
  out.warning = true;
  spdlog::warn("no grid value degrades perplexity by {:.0f}%; using the largest, {:g}", 100.0 * target, out.tau);
  return out;
}

GridSearchResult grid_search_tau(const ModelSpec& spec, std::size_t index, const Corpus& corpus,
                                 std::span<const double> grid, GridObjective objective, int runs, double target) {
  if (index >= spec.regularizers.size()) throw ConfigError("grid search index out of range");
  if (runs < 1) throw ConfigError("grid search needs at least one run");
  return grid_search(
      grid, objective,
      [&](double tau) {
        ModelSpec s = spec;
        s.regularizers[index].tau = tau;
        double sum = 0.0;
        for (int r = 0; r < runs; ++r) {
          TrainStats stats;
          fit_spec(s, corpus, static_cast<std::uint64_t>(r), &stats);
          sum += stats.perplexity.back();
        }
        return sum / runs;
      },
      target);
}

GridSearchResult grid_search_sift(const ItarConfig& cfg, const Corpus& corpus, std::span<const double> grid,
                                  int iterations, double target) {
  if (iterations < 2) throw ConfigError("sift grid search needs at least two iterations");
  return grid_search(
      grid, GridObjective::perplexity_degradation,
      [&](double tau) {
        ItarConfig c = cfg;
        c.tau_sift_bad = c.tau_sift_good = tau;
        c.max_iterations = iterations;
        c.stop_good_fraction = 1.0;
        auto result = run_itar(c, corpus);
        return result.history.back().perplexity;
      },
      target);
}

TopicBankRun run_topicbank(const Corpus& corpus, const CooccurrenceStats& cooc, const ModelSpec& spec,
                           const ThresholdSet& thresholds, QualityCriterion criterion) {
  if (!is_bank_model(spec.kind)) throw ConfigError("run_topicbank needs a topicbank spec");
  const bool shared = spec.kind == ModelKind::topicbank2;
  const Thresholds* th = nullptr;
  if (criterion == QualityCriterion::toptoken && thresholds.toptoken) th = &*thresholds.toptoken;
  if (criterion == QualityCriterion::intratext && thresholds.intratext) th = &*thresholds.intratext;
  if (shared && !th) throw ConfigError("topicbank2 needs shared thresholds");

  ModelSpec base = make_model_spec(spec.bank_base, spec.topics);
  base.em_iterations = spec.em_iterations;
  base.itar.workers = spec.itar.workers;
  const int max_iterations = spec.itar.max_iterations;
  ItarConfig quota_cfg = spec.itar;
  quota_cfg.topics = spec.topics;

  TopicBankRun out;
  out.bank = TopicBank(corpus.vocab_size());
  for (int it = 0; it < max_iterations; ++it) {
    TrainStats stats;
    const auto model = fit_spec(base, corpus, static_cast<std::uint64_t>(it), &stats);
    const auto qualities = evaluate_topics(model, corpus, cooc, spec.itar.top_k);
    std::vector<double> own;
    for (const auto& q : qualities) {
      if (is_metric_topic(model, q)) own.push_back(criterion_coherence(q, criterion));
    }
    IterationRecord rec;
    rec.iteration = it;
    rec.seed = static_cast<std::uint64_t>(it);
    rec.perplexity = stats.perplexity.back();
    if (!own.empty()) {
      const double cut = shared ? th->theta_good : percentile(own, 0.9);
      const Matrix banked = out.bank.columns(TopicLabel::good);
      std::vector<Vector> accepted;
      for (const auto& q : qualities) {
        if (!is_metric_topic(model, q)) continue;
        const double c = criterion_coherence(q, criterion);
        if (c < cut) continue;
        const auto col = model.phi.col(q.topic);
        bool duplicate = false;
        for (Eigen::Index k = 0; k < banked.cols() && !duplicate; ++k) {
          duplicate = cosine(col, banked.col(k)) >= kBankDedupCosine;
        }
        for (const auto& a : accepted) duplicate = duplicate || cosine(col, a) >= kBankDedupCosine;
        if (duplicate) continue;
        accepted.push_back(col);
        out.bank.append(BankEntry{fmt::format("i{}t{}", it, q.topic), TopicLabel::good, it, c, col});
        ++rec.good_added;
      }
    }
    rec.bank_good = static_cast<int>(out.bank.size());
    int good_by_shared = 0;
    double coh_sum = 0.0;
    for (const auto& e : out.bank.entries()) {
      coh_sum += e.coherence;
      if (th && e.coherence >= th->theta_good) ++good_by_shared;
    }
    rec.good_percent = 100.0 * good_by_shared / spec.topics;
    if (!out.bank.empty()) rec.coherence = coh_sum / static_cast<double>(out.bank.size());
    if (out.bank.size() >= 2) rec.diversity = diversity(out.bank.columns(TopicLabel::good));
    if (th && good_by_shared >= quota_cfg.good_quota()) {
      rec.stop = true;
      rec.stop_reason = "good-quota";
    } else if (it + 1 >= max_iterations) {
      rec.stop = true;
      rec.stop_reason = "max-iterations";
    }
    spdlog::info("{} iteration {}: +{} topics, bank {}", spec.name, it, rec.good_added, rec.bank_good);
    out.history.push_back(std::move(rec));
    if (out.history.back().stop) break;
  }
  return out;
}

double bank_perplexity(const Matrix& bank_phi, const Corpus& corpus, bool with_background, int iterations,
                       int workers) {
  if (bank_phi.cols() == 0) throw DataError("bank is empty");
  if (bank_phi.rows() != static_cast<Eigen::Index>(corpus.vocab_size())) {
    throw DataError("bank vocabulary does not match the corpus");
  }
  Matrix phi = bank_phi;
  if (with_background) {
    const auto unigram = unigram_distribution(corpus);
    phi.conservativeResize(Eigen::NoChange, phi.cols() + 1);
    phi.col(phi.cols() - 1) = Eigen::Map<const Vector>(unigram.data(), static_cast<Eigen::Index>(unigram.size()));
  }
  const Matrix theta = infer_theta_fixed_phi(phi, corpus, iterations, workers);
  return perplexity(phi, theta, corpus);
}

std::vector<ModelSpec> ablation_specs(const ModelSpec& itar_spec) {
  if (itar_spec.kind != ModelKind::itar && itar_spec.kind != ModelKind::itar2) {
    throw ConfigError("ablation needs an itar or itar2 spec");
  }
  std::vector<ModelSpec> out;
  for (const auto& flags : AblationFlags::all()) {
    ModelSpec s = itar_spec;
    s.itar.ablation = flags;
    s.name = std::string(to_string(itar_spec.kind)) + "_" + flags.name();
    out.push_back(std::move(s));
  }
  return out;
}

ReportFiles generate_report(std::span<const SeriesSummary> series, const std::filesystem::path& out_dir) {
  if (series.empty()) throw ConfigError("report needs at least one series");
  std::filesystem::create_directories(out_dir);
  ReportFiles files;
  files.table_csv = out_dir / "table.csv";
  files.table_txt = out_dir / "table.txt";
  files.good_series_json = out_dir / "good_series.json";
  files.density_csv = out_dir / "density.csv";

  std::string csv = "model,criterion,ppl_per_1000,ppl_background_per_1000,coherence,good_percent,diversity\n";
  std::vector<std::array<std::string, 5>> rows;
  for (const auto& s : series) {
    const auto& m = s.best();
    std::string ppl = fmt::format("{:.4f}", m.perplexity / 1000.0);
    std::string ppl_bg;
    if (s.ppl_with_background && s.ppl_without_background) {
      ppl_bg = fmt::format("{:.4f}", *s.ppl_with_background / 1000.0);
      ppl = fmt::format("{:.4f}", *s.ppl_without_background / 1000.0);
    }
    csv += fmt::format("{},{},{},{},{:.4f},{:.1f},{:.4f}\n", s.name, to_string(s.criterion), ppl, ppl_bg, m.coherence,
                       m.good_percent, m.diversity);
    rows.push_back({s.name, ppl_bg.empty() ? ppl : ppl_bg + "/" + ppl, fmt::format("{:.4f}", m.coherence),
                    fmt::format("{:.1f}", m.good_percent), fmt::format("{:.4f}", m.diversity)});
  }
  write_text(files.table_csv, csv);

  const std::array<std::string, 5> header{"model", "PPL/1000", "Coh", "T+,%", "Div"};
  std::array<std::size_t, 5> width{};
  for (std::size_t c = 0; c < 5; ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::array<std::string, 5>& r) {
    std::string out = fmt::format("{:<{}}", r[0], width[0]);
    for (std::size_t c = 1; c < 5; ++c) out += fmt::format("  {:>{}}", r[c], width[c]);
    return out + "\n";
  };
  std::string txt = line(header);
  for (const auto& r : rows) txt += line(r);
  write_text(files.table_txt, txt);

  nlohmann::ordered_json good = nlohmann::ordered_json::object();
  std::string density = "model,iteration,density_toptoken,density_toptoken_at_intra\n";
  for (const auto& s : series) {
    if (s.history.empty()) continue;
    auto points = nlohmann::ordered_json::array();
    for (const auto& rec : s.history) {
      points.push_back({{"iteration", rec.iteration}, {"good_percent", rec.good_percent}});
    }
    good[s.name] = std::move(points);
    for (const auto* rec : {&s.history.front(), &s.history.back()}) {
      if (!rec->density_toptoken && !rec->density_toptoken_at_intra) continue;
      auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : std::string(); };
      density += fmt::format("{},{},{},{}\n", s.name, rec->iteration, opt(rec->density_toptoken),
                             opt(rec->density_toptoken_at_intra));
      if (s.history.size() == 1) break;
    }
  }
  write_text(files.good_series_json, good.dump(2) + "\n");
  write_text(files.density_csv, density);

  std::vector<const SeriesSummary*> ablation;
  for (const auto& s : series) {
    const auto pos = s.name.find('_');
    if (pos == std::string::npos || s.history.empty()) continue;
    try {
      AblationFlags::parse(std::string_view(s.name).substr(pos + 1));
      ablation.push_back(&s);
    } catch (const ConfigError&) {
    }
  }
  if (!ablation.empty()) {
    files.ablation_csv = out_dir / "ablation.csv";
    files.ablation_txt = out_dir / "ablation.txt";
    std::string acsv = "model,iters_percent,ppl_per_1000,coherence,good_percent,bad_percent,diversity\n";
    std::string atxt = fmt::format("{:<16}  {:>9}  {:>9}  {:>8}  {:>6}  {:>6}  {:>8}\n", "model", "# iters,%", "PPL/1000",
                                   "Coh", "T+,%", "T-,%", "Div");
    for (const auto* s : ablation) {
      const auto& last = s->history.back();
      const double iters = 100.0 * static_cast<double>(s->history.size()) / std::max(1, s->max_iterations);
      acsv += fmt::format("{},{:.1f},{:.4f},{:.4f},{:.1f},{:.1f},{:.4f}\n", s->name, iters, last.perplexity / 1000.0,
                          last.coherence, last.good_percent, last.bad_percent_cumulative, last.diversity);
      atxt += fmt::format("{:<16}  {:>9.1f}  {:>9.4f}  {:>8.4f}  {:>6.1f}  {:>6.1f}  {:>8.4f}\n", s->name, iters,
                          last.perplexity / 1000.0, last.coherence, last.good_percent, last.bad_percent_cumulative,
                          last.diversity);
    }
    write_text(files.ablation_csv, acsv);
    write_text(files.ablation_txt, atxt);
  }
  return files;
}

}  // namespace itar
