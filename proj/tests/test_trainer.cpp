#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "itar/error.hpp"
#include "itar/harness.hpp"
#include "itar/metrics.hpp"
#include "itar/synth.hpp"
#include "itar/trainer.hpp"
#include "test_util.hpp"

using namespace itar;

namespace {

TopicModel model_with_roles(std::vector<TopicRole> roles, int words = 8, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  TopicModel m;
  m.phi = test_util::random_stochastic(rng, words, static_cast<int>(roles.size()));
  m.roles = std::move(roles);
  m.bank_refs.assign(m.roles.size(), "");
  m.topic_sizes.assign(m.roles.size(), 1.0);
  return m;
}

std::vector<TopicQuality> qualities_for(const std::vector<double>& coh) {
  std::vector<TopicQuality> out;
  for (std::size_t t = 0; t < coh.size(); ++t) {
    TopicQuality q;
    q.topic = static_cast<int>(t);
    q.coherence_toptoken = coh[t];
    out.push_back(q);
  }
  return out;
}

TopicCard card(int topic, TopicRole role, bool degenerate = false, std::optional<double> intra = std::nullopt) {
  TopicCard c;
  c.topic = topic;
  c.role = role;
  c.degenerate = degenerate;
  c.coherence_intra = intra;
  return c;
}

// Small synthetic problem plus thresholds pooled from base ARTM runs on it.
struct Fixture {
  SynthCorpus synth = synth_corpus(SynthParams{.seed = 3, .vocab_size = 60, .topics = 6, .documents = 150,
                                               .mean_length = 60.0, .concentration = 0.3});
  CooccurrenceStats cooc{synth.corpus};
  ItarConfig cfg;

  Fixture() {
    auto spec = make_model_spec(ModelKind::artm, 6);
    spec.runs = 3;
    auto series = run_series(spec, synth.corpus, cooc, {}, QualityCriterion::toptoken);
    cfg.topics = 6;
    cfg.max_iterations = 6;
    cfg.thresholds.toptoken = compute_thresholds(series.pooled_toptoken);
    cfg.tau_sift_bad = cfg.tau_sift_good = 10.0;
  }
};

}  // namespace

TEST_CASE("compute_thresholds takes the 80th and 20th percentiles") {
  std::vector<double> pool{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  auto t = compute_thresholds(pool);
  CHECK(t.theta_good == doctest::Approx(8.2).epsilon(1e-12));
  CHECK(t.theta_bad == doctest::Approx(2.8).epsilon(1e-12));
  std::vector<double> constant(7, 1.5);
  auto c = compute_thresholds(constant);
  CHECK(c.theta_good == 1.5);
  CHECK(c.theta_bad == 1.5);
  CHECK_THROWS_AS(compute_thresholds({}), DataError);
}

TEST_CASE("classify_topics applies the threshold rule to free topics only") {
  auto model = model_with_roles({TopicRole::fixed, TopicRole::domain, TopicRole::domain, TopicRole::domain,
                                 TopicRole::domain, TopicRole::background});
  model.phi.col(4).setZero();
  const Thresholds th{2.0, 1.0, ""};
  const auto q = qualities_for({5.0, 2.5, 1.5, 1.0, 9.0, 9.0});
  auto labels = classify_topics(model, q, th, QualityCriterion::toptoken);
  REQUIRE(labels.size() == 6);
  CHECK_FALSE(labels[0]);
  CHECK(labels[1] == TopicLabel::good);
  CHECK(labels[2] == TopicLabel::neutral);
  CHECK(labels[3] == TopicLabel::bad);  // at theta_bad
  CHECK(labels[4] == TopicLabel::neutral);  // degenerate
  CHECK_FALSE(labels[5]);

  SUBCASE("coherence equal to theta_good is good") {
    auto l = classify_topics(model, qualities_for({0, 2.0, 0, 0, 0, 0}), th, QualityCriterion::toptoken);
    CHECK(l[1] == TopicLabel::good);
  }
  SUBCASE("an override changes exactly one label") {
    auto l = classify_topics(model, q, th, QualityCriterion::toptoken, {{2, TopicLabel::good}});
    CHECK(l[2] == TopicLabel::good);
    for (std::size_t t : {0u, 1u, 3u, 4u, 5u}) CHECK(l[t] == labels[t]);
  }
  SUBCASE("overriding a fixed topic is rejected") {
    CHECK_THROWS(classify_topics(model, q, th, QualityCriterion::toptoken, {{0, TopicLabel::bad}}));
  }
}

TEST_CASE("update_bank appends good and bad free topics and drops neutral ones") {
  auto model = model_with_roles(std::vector<TopicRole>(5, TopicRole::domain));
  std::vector<double> coh{3, 2, 1, 0, 0};
  std::vector<std::optional<TopicLabel>> labels{TopicLabel::good, TopicLabel::neutral, TopicLabel::good,
                                                TopicLabel::bad, TopicLabel::neutral};
  TopicBank bank(8);
  auto [good, bad] = update_bank(bank, model, coh, labels, 4);
  CHECK(good == 2);
  CHECK(bad == 1);
  CHECK(bank.size() == 3);
  CHECK(bank.entries()[0].id == "i4t0");
  CHECK(bank.entries()[2].label == TopicLabel::bad);
  CHECK(bank.entries()[2].source_iteration == 4);

  SUBCASE("nothing good or bad leaves the bank unchanged") {
    const TopicBank before = bank;
    std::vector<std::optional<TopicLabel>> none(5, TopicLabel::neutral);
    update_bank(bank, model, coh, none, 5);
    CHECK(bank == before);
  }
  SUBCASE("a near copy of a banked good topic is still appended") {
    auto copy = model;
    copy.phi.col(0) = model.phi.col(0);
    std::vector<std::optional<TopicLabel>> first_good{TopicLabel::good, std::nullopt, std::nullopt, std::nullopt,
                                                      std::nullopt};
    update_bank(bank, copy, coh, first_good, 5);
    CHECK(bank.count(TopicLabel::good) == 3);
  }
}

TEST_CASE("check_stopping") {
  ItarConfig cfg;
  cfg.topics = 20;
  cfg.max_iterations = 20;
  cfg.thresholds.toptoken = Thresholds{1, 0, ""};
  CHECK(cfg.good_quota() == 18);
  ItarConfig big = cfg;
  big.topics = 50;
  CHECK(big.good_quota() == 45);

  std::mt19937_64 rng(2);
  const Matrix cols = test_util::random_stochastic(rng, 8, 18);
  TopicBank bank(8);
  std::vector<TopicCard> cards{card(0, TopicRole::domain), card(1, TopicRole::domain)};

  CHECK_FALSE(check_stopping(bank, cards, cfg, 3).stop);
  CHECK(check_stopping(bank, cards, cfg, 19).reason == "max-iterations");

  for (int k = 0; k < 17; ++k) bank.append(BankEntry{"g" + std::to_string(k), TopicLabel::good, 0, 1.0, cols.col(k)});
  CHECK_FALSE(check_stopping(bank, cards, cfg, 3).stop);
  bank.append(BankEntry{"g17", TopicLabel::good, 0, 1.0, cols.col(17)});
  auto d = check_stopping(bank, cards, cfg, 3);
  CHECK(d.stop);
  CHECK(d.reason == "good-quota");

  TopicBank empty(8);
  SUBCASE("zero intra-text coherence stops in intratext mode only") {
    std::vector<TopicCard> c{card(0, TopicRole::domain, false, 0.0), card(1, TopicRole::domain, false, 2.0)};
    CHECK_FALSE(check_stopping(empty, c, cfg, 3).stop);
    ItarConfig intra = cfg;
    intra.criterion = QualityCriterion::intratext;
    intra.thresholds.intratext = Thresholds{1, 0, ""};
    CHECK(check_stopping(empty, c, intra, 3).reason == "zero-intra");
    std::vector<TopicCard> degenerate_zero{card(0, TopicRole::domain, true, 0.0), card(1, TopicRole::domain)};
    CHECK_FALSE(check_stopping(empty, degenerate_zero, intra, 3).stop);
  }
  SUBCASE("all free topics degenerate") {
    std::vector<TopicCard> c{card(0, TopicRole::fixed), card(1, TopicRole::domain, true),
                             card(2, TopicRole::domain, true)};
    CHECK(check_stopping(empty, c, cfg, 3).reason == "all-free-degenerate");
  }
}

TEST_CASE("ablation flags") {
  CHECK(AblationFlags{}.name() == "1-1-1");
  auto f = AblationFlags::parse("itar_1-0-1");
  CHECK(f.fix_good);
  CHECK_FALSE(f.sift_bad);
  CHECK(f.sift_good);
  CHECK(AblationFlags::parse(f.name()) == f);
  CHECK_THROWS_AS(AblationFlags::parse("1-2-1"), ConfigError);
  CHECK_THROWS_AS(AblationFlags::parse("101"), ConfigError);
  auto all = AblationFlags::all();
  CHECK(all.size() == 8);
  std::vector<std::string> names;
  for (const auto& a : all) names.push_back(a.name());
  std::sort(names.begin(), names.end());
  CHECK(std::unique(names.begin(), names.end()) == names.end());
}

TEST_CASE("ItarConfig validation") {
  ItarConfig cfg;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);  // no thresholds
  cfg.thresholds.toptoken = Thresholds{1, 0, ""};
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.stop_good_fraction = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.tau_sift_bad = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.criterion = QualityCriterion::intratext;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("the initial model fixes banked good topics first") {
  std::mt19937_64 rng(5);
  const Matrix cols = test_util::random_stochastic(rng, 10, 3);
  TopicBank bank(10);
  bank.append(BankEntry{"i0t1", TopicLabel::good, 0, 1.0, cols.col(0)});
  bank.append(BankEntry{"i0t2", TopicLabel::bad, 0, 0.0, cols.col(1)});
  bank.append(BankEntry{"i1t0", TopicLabel::good, 1, 1.0, cols.col(2)});
  ItarConfig cfg;
  cfg.topics = 5;
  auto m = itar_initial_model(bank, cfg, 10, 2);
  CHECK(m.roles[0] == TopicRole::fixed);
  CHECK(m.roles[1] == TopicRole::fixed);
  CHECK(m.roles[2] == TopicRole::domain);
  CHECK(m.bank_refs[0] == "i0t1");
  CHECK(m.bank_refs[1] == "i1t0");
  CHECK(m.phi.col(1).isApprox(bank.entries()[2].column));
  CHECK(m.seed == 2);

  cfg.ablation.fix_good = false;
  auto free = itar_initial_model(bank, cfg, 10, 2);
  CHECK(std::all_of(free.roles.begin(), free.roles.end(), [](TopicRole r) { return r == TopicRole::domain; }));

  cfg.ablation.fix_good = true;
  cfg.topics = 2;
  CHECK_THROWS_AS(itar_initial_model(bank, cfg, 10, 2), DataError);
}

TEST_CASE("iterative training on a synthetic corpus") {
  Fixture fx;
  const auto& corpus = fx.synth.corpus;
  int fixed_checks = 0;
  double min_fixed_cos = 1.0;
  auto result = run_itar(fx.cfg, corpus, [&](const IterationResult& step, const TopicBank& bank) {
    for (Eigen::Index t = 0; t < step.model.num_topics(); ++t) {
      if (step.model.roles[static_cast<std::size_t>(t)] != TopicRole::fixed) continue;
      const auto* entry = bank.find(step.model.bank_refs[static_cast<std::size_t>(t)]);
      REQUIRE(entry);
      min_fixed_cos = std::min(min_fixed_cos, cosine(step.model.phi.col(t), entry->column));
      ++fixed_checks;
    }
  });
  const auto& h = result.history;
  REQUIRE_FALSE(h.empty());

  SUBCASE("seed equals the iteration index") {
    for (std::size_t i = 0; i < h.size(); ++i) {
      CHECK(h[i].iteration == static_cast<int>(i));
      CHECK(h[i].seed == i);
    }
  }
  SUBCASE("banked good count never decreases and is never clipped") {
    int total = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      total += h[i].good_added;
      CHECK(h[i].bank_good == total);
      if (i > 0) CHECK(h[i].bank_good >= h[i - 1].bank_good);
    }
    CHECK(static_cast<int>(result.bank.count(TopicLabel::good)) == total);
  }
  SUBCASE("fixed topics stay on their banked columns") {
    if (fixed_checks > 0) CHECK(min_fixed_cos >= 0.99);
  }
  SUBCASE("only the last record stops") {
    for (std::size_t i = 0; i + 1 < h.size(); ++i) CHECK_FALSE(h[i].stop);
    CHECK(h.back().stop);
  }
  SUBCASE("identical runs give identical histories") {
    auto again = run_itar(fx.cfg, corpus);
    CHECK(again.history == h);
    CHECK(again.bank == result.bank);
  }
}

TEST_CASE("iteration 0 with an empty bank is the base ARTM model") {
  Fixture fx;
  TopicBank bank(fx.synth.corpus.vocab_size());
  auto pending = train_iteration(bank, fx.cfg, fx.synth.corpus, fx.cooc, 0);
  auto spec = make_model_spec(ModelKind::artm, fx.cfg.topics);
  auto base = fit_spec(spec, fx.synth.corpus, 0);
  CHECK((pending.model.phi - base.phi).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("history runs to max_iterations when the quota is out of reach") {
  Fixture fx;
  fx.cfg.max_iterations = 3;
  fx.cfg.stop_good_fraction = 1.0;
  fx.cfg.thresholds.toptoken = Thresholds{1e9, -1e9, ""};  // nothing is ever good or bad
  auto result = run_itar(fx.cfg, fx.synth.corpus);
  CHECK(result.history.size() == 3);
  CHECK(result.history.back().stop_reason == "max-iterations");
  CHECK(result.bank.empty());
}

TEST_CASE("commit_iteration with a human override") {
  Fixture fx;
  TopicBank bank(fx.synth.corpus.vocab_size());
  auto pending = train_iteration(bank, fx.cfg, fx.synth.corpus, fx.cooc, 0);
  TopicBank automatic = bank;
  auto auto_record = commit_iteration(automatic, pending, fx.cfg);

  // Flip the first free topic to the opposite of its automatic label.
  int topic = -1;
  TopicLabel flipped = TopicLabel::good;
  for (const auto& c : pending.cards) {
    if (c.role == TopicRole::domain && !c.degenerate) {
      topic = c.topic;
      flipped = c.auto_label == TopicLabel::good ? TopicLabel::bad : TopicLabel::good;
      break;
    }
  }
  REQUIRE(topic >= 0);
  TopicBank human = bank;
  auto human_record = commit_iteration(human, pending, fx.cfg, {{topic, flipped}});
  CHECK(human_record.topics[static_cast<std::size_t>(topic)].human);
  CHECK(human_record.topics[static_cast<std::size_t>(topic)].label == to_string(flipped));
  const std::string id = "i0t" + std::to_string(topic);
  REQUIRE(human.find(id));
  CHECK(human.find(id)->label == flipped);
  // Every other entry is unchanged.
  for (const auto& e : automatic.entries()) {
    if (e.id == id) continue;
    REQUIRE(human.find(e.id));
    CHECK(*human.find(e.id) == e);
  }
  CHECK(human.size() == automatic.size() + (automatic.find(id) ? 0 : 1));
  CHECK_THROWS_AS(commit_iteration(human, pending, fx.cfg, {{99, TopicLabel::good}}), DataError);
  (void)auto_record;
}
