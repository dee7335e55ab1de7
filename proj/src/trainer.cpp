#include "itar/trainer.hpp"

#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "itar/error.hpp"

namespace itar {

namespace {

constexpr double kBaselineDensity = 0.2;

double card_coherence(const TopicCard& card, QualityCriterion criterion) {
  if (criterion == QualityCriterion::toptoken) return card.coherence_toptoken;
  if (!card.coherence_intra) throw DataError("intra-text coherence needs a corpus with word order");
  return *card.coherence_intra;
}

bool counts_for_metrics(const TopicCard& card) { return !card.degenerate && card.role != TopicRole::background; }

}  // namespace

std::string_view to_string(QualityCriterion c) { return c == QualityCriterion::toptoken ? "toptoken" : "intratext"; }

QualityCriterion quality_criterion_from_string(std::string_view s) {
  if (s == "toptoken") return QualityCriterion::toptoken;
  if (s == "intratext") return QualityCriterion::intratext;
  throw ConfigError("unknown quality criterion '" + std::string(s) + "'");
}

std::string_view to_string(SiftVersion v) { return v == SiftVersion::v1 ? "v1" : "v2"; }

SiftVersion sift_version_from_string(std::string_view s) {
  if (s == "v1") return SiftVersion::v1;
  if (s == "v2") return SiftVersion::v2;
  throw ConfigError("unknown sift version '" + std::string(s) + "'");
}

std::string AblationFlags::name() const {
  return fmt::format("{}-{}-{}", fix_good ? 1 : 0, sift_bad ? 1 : 0, sift_good ? 1 : 0);
}

AblationFlags AblationFlags::parse(std::string_view name) {
  if (name.starts_with("itar_")) name.remove_prefix(5);
  auto bit = [&](std::size_t i) {
    if (name[i] == '0') return false;
    if (name[i] == '1') return true;
    throw ConfigError("ablation flags must look like 1-0-1, got '" + std::string(name) + "'");
  };
  if (name.size() != 5 || name[1] != '-' || name[3] != '-') {
    throw ConfigError("ablation flags must look like 1-0-1, got '" + std::string(name) + "'");
  }
  return AblationFlags{bit(0), bit(2), bit(4)};
}

std::vector<AblationFlags> AblationFlags::all() {
  std::vector<AblationFlags> out;
  for (int mask = 0; mask < 8; ++mask) out.push_back({(mask & 4) != 0, (mask & 2) != 0, (mask & 1) != 0});
  return out;
}

const Thresholds& ThresholdSet::get(QualityCriterion c) const {
  const auto& t = c == QualityCriterion::toptoken ? toptoken : intratext;
  if (!t) throw ConfigError(fmt::format("no {} thresholds configured", to_string(c)));
  return *t;
}

void ItarConfig::validate() const {
  if (topics < 1) throw ConfigError("topics must be positive");
  if (max_iterations < 1) throw ConfigError("max_iterations must be positive");
  if (!(stop_good_fraction > 0.0 && stop_good_fraction <= 1.0)) throw ConfigError("stop_good_fraction must be in (0, 1]");
  if (!(tau_fix >= 0.0) || !(tau_sift_bad >= 0.0) || !(tau_sift_good >= 0.0)) {
    throw ConfigError("fix and sift coefficients must be nonnegative");
  }
  if (em_iterations < 1) throw ConfigError("em_iterations must be positive");
  if (top_k < 2) throw ConfigError("top_k must be at least 2");
  if (workers < 1) throw ConfigError("workers must be positive");
  thresholds.get(criterion);
}

int ItarConfig::good_quota() const {
  // The small slack keeps 0.9 * 20 at 18 despite binary rounding.
  return static_cast<int>(std::ceil(stop_good_fraction * topics - 1e-9));
}

Thresholds compute_thresholds(std::span<const double> pooled, std::string source) {
  if (pooled.empty()) throw DataError("cannot compute thresholds from an empty coherence pool");
  return Thresholds{percentile(pooled, 0.8), percentile(pooled, 0.2), std::move(source)};
}

double criterion_coherence(const TopicQuality& q, QualityCriterion criterion) {
  if (criterion == QualityCriterion::toptoken) return q.coherence_toptoken;
  if (!q.coherence_intra) throw DataError("intra-text coherence needs a corpus with word order");
  return *q.coherence_intra;
}

std::vector<std::optional<TopicLabel>> classify_topics(const TopicModel& model, std::span<const TopicQuality> qualities,
                                                       const Thresholds& thresholds, QualityCriterion criterion,
                                                       const std::map<int, TopicLabel>& overrides) {
  const auto T = static_cast<std::size_t>(model.num_topics());
  if (qualities.size() != T) throw DataError("one quality entry per topic required");
  std::vector<std::optional<TopicLabel>> labels(T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto role = t < model.roles.size() ? model.roles[t] : TopicRole::domain;
    if (role != TopicRole::domain) continue;
    const auto& q = qualities[t];
    TopicLabel label = TopicLabel::neutral;
    if (!q.degenerate && !model.is_degenerate(static_cast<Eigen::Index>(t))) {
      const double c = criterion_coherence(q, criterion);
      if (c >= thresholds.theta_good) {
        label = TopicLabel::good;
      } else if (c <= thresholds.theta_bad) {
        label = TopicLabel::bad;
      }
    }
    labels[t] = label;
  }
  for (const auto& [topic, label] : overrides) {
    if (topic < 0 || static_cast<std::size_t>(topic) >= T || !labels[static_cast<std::size_t>(topic)]) {
      throw DataError(fmt::format("topic {} is not a free topic of this model", topic));
    }
    labels[static_cast<std::size_t>(topic)] = label;
  }
  return labels;
}

std::pair<int, int> update_bank(TopicBank& bank, const TopicModel& model, std::span<const double> coherences,
                                std::span<const std::optional<TopicLabel>> labels, int iteration) {
  int good = 0;
  int bad = 0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (!labels[t] || *labels[t] == TopicLabel::neutral) continue;
    const auto ti = static_cast<Eigen::Index>(t);
    if (model.is_degenerate(ti)) continue;
    bank.append(BankEntry{fmt::format("i{}t{}", iteration, t), *labels[t], iteration, coherences[t], model.phi.col(ti)});
    (*labels[t] == TopicLabel::good ? good : bad) += 1;
  }
  return {good, bad};
}

StopDecision check_stopping(const TopicBank& bank, std::span<const TopicCard> cards, const ItarConfig& cfg,
                            int iteration) {
  if (static_cast<int>(bank.count(TopicLabel::good)) >= cfg.good_quota()) return {true, "good-quota"};
  if (cfg.criterion == QualityCriterion::intratext) {
    for (const auto& card : cards) {
      if (counts_for_metrics(card) && card.coherence_intra && *card.coherence_intra == 0.0) return {true, "zero-intra"};
    }
  }
  bool any_free = false;
  bool all_degenerate = true;
  for (const auto& card : cards) {
    if (card.role != TopicRole::domain) continue;
    any_free = true;
    all_degenerate = all_degenerate && card.degenerate;
  }
  if (any_free && all_degenerate) return {true, "all-free-degenerate"};
  if (iteration + 1 >= cfg.max_iterations) return {true, "max-iterations"};
  return {};
}

std::vector<RegularizerConfig> base_artm_configs(double sparse_tau, double decorrelation_tau) {
  std::vector<RegularizerConfig> out;
  RegularizerConfig c;
  c.tau_mode = TauMode::relative;
  if (sparse_tau != 0.0) {
    c.kind = RegularizerKind::smooth_sparse;
    c.tau = sparse_tau;
    c.topics = TopicSelector::free;
    out.push_back(c);
  }
  if (decorrelation_tau != 0.0) {
    c.kind = RegularizerKind::decorrelation;
    c.tau = decorrelation_tau;
    c.topics = TopicSelector::all;
    out.push_back(c);
  }
  return out;
}

TopicModel itar_initial_model(const TopicBank& bank, const ItarConfig& cfg, std::size_t vocab_size, int iteration) {
  const auto T = static_cast<std::size_t>(cfg.topics);
  const std::size_t K = cfg.ablation.fix_good ? bank.count(TopicLabel::good) : 0;
  if (K >= T) throw DataError(fmt::format("bank holds {} good topics, the model has only {}", K, T));
  std::vector<TopicRole> roles(T, TopicRole::domain);
  std::fill(roles.begin(), roles.begin() + static_cast<std::ptrdiff_t>(K), TopicRole::fixed);
  auto model = init_model(vocab_size, T, static_cast<std::uint64_t>(iteration), std::move(roles));
  if (K > 0) {
    const Matrix good = bank.columns(TopicLabel::good);
    const auto ids = bank.ids(TopicLabel::good);
    for (std::size_t k = 0; k < K; ++k) {
      model.phi.col(static_cast<Eigen::Index>(k)) = good.col(static_cast<Eigen::Index>(k));
      model.bank_refs[k] = ids[k];
    }
  }
  return model;
}

std::vector<Regularizer> itar_regularizers(const TopicModel& model, const TopicBank& bank, const ItarConfig& cfg,
                                           const Corpus& corpus) {
  ResolveContext ctx;
  ctx.vocab_size = corpus.vocab_size();
  ctx.num_documents = corpus.num_documents();
  ctx.total_tokens = corpus.total_tokens();
  ctx.roles = model.roles;
  std::vector<Regularizer> regs;
  for (const auto& c : base_artm_configs(cfg.sparse_tau, cfg.decorrelation_tau)) regs.push_back(resolve(c, ctx));

  const std::vector<int> free = select_topics(TopicSelector::free, {}, model.roles);
  const Matrix good = bank.columns(TopicLabel::good);
  const Matrix bad = bank.columns(TopicLabel::bad);
  if (cfg.ablation.fix_good && good.cols() > 0) {
    FixTopics fix{good, {}, cfg.tau_fix};
    for (Eigen::Index k = 0; k < good.cols(); ++k) fix.mapping.emplace_back(static_cast<int>(k), static_cast<int>(k));
    regs.push_back(std::move(fix));
  }
  if (cfg.ablation.sift_bad && bad.cols() > 0 && cfg.tau_sift_bad > 0.0) {
    regs.push_back(Sift{bad, free, cfg.tau_sift_bad, cfg.sift_version});
  }
  if (cfg.ablation.sift_good && good.cols() > 0 && cfg.tau_sift_good > 0.0) {
    regs.push_back(Sift{good, free, cfg.tau_sift_good, cfg.sift_version});
  }
  return regs;
}

PendingIteration train_iteration(const TopicBank& bank, const ItarConfig& cfg, const Corpus& corpus,
                                 const CooccurrenceStats& cooc, int iteration, std::function<void(int, int)> progress) {
  cfg.validate();
  const auto& thresholds = cfg.thresholds.get(cfg.criterion);
  if (cfg.criterion == QualityCriterion::intratext && !corpus.has_sequences()) {
    throw DataError("intra-text criterion needs a corpus with word order");
  }
  if (bank.vocab_size() != corpus.vocab_size() && !bank.empty()) {
    throw DataError("bank vocabulary does not match the corpus");
  }

  PendingIteration out;
  out.iteration = iteration;
  out.seed = static_cast<std::uint64_t>(iteration);
  out.model = itar_initial_model(bank, cfg, corpus.vocab_size(), iteration);
  const auto regs = itar_regularizers(out.model, bank, cfg, corpus);
  FitOptions options;
  options.iterations = cfg.em_iterations;
  options.workers = cfg.workers;
  options.progress = std::move(progress);
  const auto stats = em_fit(out.model, corpus, regs, options);
  out.perplexity = stats.perplexity.back();

  const auto qualities = evaluate_topics(out.model, corpus, cooc, cfg.top_k);
  const auto labels = classify_topics(out.model, qualities, thresholds, cfg.criterion);
  std::vector<int> metric_topics;
  double coh_sum = 0.0;
  for (std::size_t t = 0; t < qualities.size(); ++t) {
    const auto& q = qualities[t];
    TopicCard card;
    card.topic = q.topic;
    card.role = out.model.roles[t];
    card.bank_ref = out.model.bank_refs[t];
    card.top_words = q.top_words;
    card.coherence_toptoken = q.coherence_toptoken;
    card.coherence_intra = q.coherence_intra;
    card.degenerate = q.degenerate;
    card.size = q.size;
    card.auto_label = labels[t];
    if (counts_for_metrics(card)) {
      metric_topics.push_back(card.topic);
      coh_sum += card_coherence(card, cfg.criterion);
    }
    out.cards.push_back(std::move(card));
  }
  if (!metric_topics.empty()) out.coherence = coh_sum / static_cast<double>(metric_topics.size());
  if (metric_topics.size() >= 2) out.diversity = diversity(out.model.phi, metric_topics);

  if (cfg.thresholds.toptoken && cfg.thresholds.intratext && corpus.has_sequences()) {
    long total = 0;
    long tok_good = 0;
    long intra_good = 0;
    long both_good = 0;
    for (const auto& card : out.cards) {
      if (card.role == TopicRole::background) continue;
      ++total;
      if (card.degenerate) continue;
      const bool tg = card.coherence_toptoken >= cfg.thresholds.toptoken->theta_good;
      const bool ig = *card.coherence_intra >= cfg.thresholds.intratext->theta_good;
      tok_good += tg;
      intra_good += ig;
      both_good += tg && ig;
    }
    if (total > 0) out.density_toptoken = relative_density(tok_good, total, kBaselineDensity);
    if (intra_good > 0) out.density_toptoken_at_intra = relative_density(both_good, intra_good, kBaselineDensity);
  }
  return out;
}

IterationRecord commit_iteration(TopicBank& bank, const PendingIteration& pending, const ItarConfig& cfg,
                                 const std::map<int, TopicLabel>& overrides) {
  if (bank.vocab_size() != static_cast<std::size_t>(pending.model.num_words())) {
    if (!bank.empty()) throw DataError("bank vocabulary does not match the model");
    bank = TopicBank(static_cast<std::size_t>(pending.model.num_words()));
  }
  std::vector<std::optional<TopicLabel>> labels;
  std::vector<double> coherences;
  for (const auto& card : pending.cards) {
    labels.push_back(card.auto_label);
    coherences.push_back(card.degenerate ? 0.0 : card_coherence(card, cfg.criterion));
  }
  for (const auto& [topic, label] : overrides) {
    if (topic < 0 || static_cast<std::size_t>(topic) >= labels.size() || !labels[static_cast<std::size_t>(topic)]) {
      throw DataError(fmt::format("topic {} is not a free topic of this iteration", topic));
    }
    labels[static_cast<std::size_t>(topic)] = label;
  }

  IterationRecord rec;
  rec.iteration = pending.iteration;
  rec.seed = pending.seed;
  std::tie(rec.good_added, rec.bad_added) = update_bank(bank, pending.model, coherences, labels, pending.iteration);
  rec.bank_good = static_cast<int>(bank.count(TopicLabel::good));
  rec.bank_bad = static_cast<int>(bank.count(TopicLabel::bad));

  int good_in_model = 0;
  for (std::size_t t = 0; t < pending.cards.size(); ++t) {
    const auto& card = pending.cards[t];
    TopicOutcome o;
    o.topic = card.topic;
    o.role = std::string(to_string(card.role));
    o.bank_ref = card.bank_ref;
    o.degenerate = card.degenerate;
    o.coherence_toptoken = card.coherence_toptoken;
    o.coherence_intra = card.coherence_intra;
    o.human = overrides.contains(card.topic);
    if (labels[t]) {
      o.label = std::string(to_string(*labels[t]));
      good_in_model += (*labels[t] == TopicLabel::good && !card.degenerate) ? 1 : 0;
    } else {
      o.label = o.role;
      good_in_model += card.role == TopicRole::fixed ? 1 : 0;
    }
    rec.topics.push_back(std::move(o));
  }
  const double T = static_cast<double>(cfg.topics);
  rec.perplexity = pending.perplexity;
  rec.coherence = pending.coherence;
  rec.diversity = pending.diversity;
  rec.good_percent = 100.0 * good_in_model / T;
  rec.bad_percent_cumulative = 100.0 * rec.bank_bad / T;
  rec.density_toptoken = pending.density_toptoken;
  rec.density_toptoken_at_intra = pending.density_toptoken_at_intra;
  const auto decision = check_stopping(bank, pending.cards, cfg, pending.iteration);
  rec.stop = decision.stop;
  rec.stop_reason = decision.reason;
  return rec;
}

IterationResult run_iteration(TopicBank& bank, const ItarConfig& cfg, const Corpus& corpus,
                              const CooccurrenceStats& cooc, int iteration) {
  auto pending = train_iteration(bank, cfg, corpus, cooc, iteration);
  auto record = commit_iteration(bank, pending, cfg);
  return IterationResult{std::move(pending.model), std::move(record)};
}

ItarResult run_itar(const ItarConfig& cfg, const Corpus& corpus, const IterationObserver& observer) {
  cfg.validate();
  const auto cooc = build_cooccurrence(corpus);
  ItarResult result;
  result.bank = TopicBank(corpus.vocab_size());
  for (int it = 0; it < cfg.max_iterations; ++it) {
    auto step = run_iteration(result.bank, cfg, corpus, cooc, it);
    spdlog::info("iteration {}: +{} good, +{} bad, bank {}/{}{}", it, step.record.good_added, step.record.bad_added,
                 step.record.bank_good, step.record.bank_bad,
                 step.record.stop ? ", stop: " + step.record.stop_reason : std::string());
    if (observer) observer(step, result.bank);
    result.history.push_back(step.record);
    result.model = std::move(step.model);
    if (result.history.back().stop) break;
  }
  return result;
}

}  // namespace itar
