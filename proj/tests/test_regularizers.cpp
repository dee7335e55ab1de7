#include <doctest.h>

#include <cmath>
#include <random>

#include "itar/error.hpp"
#include "itar/model.hpp"
#include "itar/regularizers.hpp"
#include "itar/synth.hpp"
#include "test_util.hpp"

using namespace itar;

namespace {

Matrix column(std::initializer_list<double> values) {
  Matrix m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

// phi_wt * dR/dphi_wt by central differences of R.
double fd_additive(const Regularizer& reg, Matrix phi, const Matrix& theta, Eigen::Index w, Eigen::Index t) {
  const double x = phi(w, t);
  const double h = 1e-5 * x;
  phi(w, t) = x + h;
  const double up = evaluate(reg, phi, theta).value;
  phi(w, t) = x - h;
  const double down = evaluate(reg, phi, theta).value;
  return x * (up - down) / (2.0 * h);
}

}  // namespace

TEST_CASE("smooth_sparse additive is beta0 * beta on the subset") {
  Matrix phi = Matrix::Constant(4, 3, 0.25);
  Matrix theta = Matrix::Constant(3, 2, 1.0 / 3.0);
  auto add = smooth_sparse(phi, theta, SmoothSparse{.topics = {0, 2}, .beta0 = 2.0});
  CHECK(add.phi_add(1, 0) == doctest::Approx(2.0 / 4.0));
  CHECK(add.phi_add(1, 1) == 0.0);
  CHECK(add.theta_add.size() == 0);
  CHECK(add.value == doctest::Approx(2.0 * 2.0 * std::log(0.25)));

  auto empty = smooth_sparse(phi, theta, SmoothSparse{.topics = {}, .beta0 = 2.0});
  CHECK(empty.value == 0.0);
  CHECK(empty.phi_add.size() == 0);

  auto with_theta = smooth_sparse(phi, theta, SmoothSparse{.topics = {1, 2}, .alpha0 = 0.4});
  CHECK(with_theta.theta_add(1, 0) == doctest::Approx(0.2));
  CHECK(with_theta.theta_add(0, 1) == 0.0);
}

TEST_CASE("decorrelation examples") {
  Matrix phi(2, 2);
  phi << 0.5, 0.5, 0.5, 0.5;
  auto add = decorrelation(phi, Decorrelation{{0, 1}, 3.0});
  CHECK(add.phi_add(0, 0) == doctest::Approx(-0.25 * 3.0));
  CHECK(add.value == doctest::Approx(-0.5 * 3.0 * 2 * 0.5));

  auto single = decorrelation(column({0.3, 0.7}), Decorrelation{{0}, 3.0});
  CHECK(single.phi_add.size() == 0);

  Matrix orth(2, 2);
  orth << 1, 0, 0, 1;
  auto o = decorrelation(orth, Decorrelation{{0, 1}, 3.0});
  CHECK(o.value == 0.0);
  CHECK((o.phi_add.array() == 0.0).all());
}

TEST_CASE("fix_topics additive equals tau times the banked column") {
  Matrix phi = Matrix::Constant(3, 2, 1.0 / 3.0);
  Matrix bank = column({0.2, 0.3, 0.5});
  auto add = fix_topics(phi, FixTopics{bank, {{1, 0}}, 7.0});
  CHECK(add.phi_add(2, 1) == doctest::Approx(3.5));
  CHECK((add.phi_add.col(0).array() == 0.0).all());
  CHECK(fix_topics(phi, FixTopics{bank, {}, 7.0}).phi_add.size() == 0);
  CHECK_THROWS_AS(fix_topics(phi, FixTopics{bank, {{1, 3}}, 7.0}), DataError);
  CHECK_THROWS(fix_topics(phi, FixTopics{Matrix::Constant(3, 2, 1.0 / 3), {{0, 0}, {1, 0}}, 7.0}));
}

TEST_CASE("fixing at tau = 1e9 holds a topic to its banked column") {
  auto synth = synth_corpus(SynthParams{.seed = 3});
  auto model = init_model(50, 5, 1);
  Matrix bank = synth.phi.col(2) * 0.5 + synth.phi.col(4) * 0.5;
  std::vector<Regularizer> regs{FixTopics{bank, {{0, 0}}, 1e9}};
  em_fit(model, synth.corpus, regs, FitOptions{.iterations = 20});
  CHECK(cosine(model.phi.col(0), bank.col(0)) >= 0.99);
}

TEST_CASE("sift_v1 examples") {
  Matrix phi(3, 2);
  phi << 0.2, 0.5, 0.3, 0.25, 0.5, 0.25;
  Matrix onehot = column({1.0, 0.0, 0.0});
  auto add = sift_v1(phi, onehot, std::vector<int>{0, 1}, 10.0);
  CHECK(add.phi_add(0, 0) == doctest::Approx(-10.0 * 0.2));
  CHECK(add.phi_add(0, 1) == doctest::Approx(-10.0 * 0.5));
  CHECK(add.phi_add(1, 0) == 0.0);
  CHECK(add.phi_add(2, 1) == 0.0);

  // Two bank columns act through their sum.
  Matrix two(3, 2);
  two << 0.6, 0.2, 0.2, 0.2, 0.2, 0.6;
  auto add2 = sift_v1(phi, two, std::vector<int>{1}, 1.0);
  const Vector sum = two.rowwise().sum();
  for (Eigen::Index w = 0; w < 3; ++w) CHECK(add2.phi_add(w, 1) == doctest::Approx(-phi(w, 1) * sum(w)));
  CHECK((add2.phi_add.col(0).array() == 0.0).all());

  auto inert = sift_v1(phi, Matrix(3, 0), std::vector<int>{0, 1}, 10.0);
  CHECK(inert.phi_add.size() == 0);
  CHECK(inert.value == 0.0);
}

TEST_CASE("sift_v2 examples") {
  Matrix phi(2, 2);
  phi << 1.0, 0.3, 0.0, 0.7;
  Matrix bank = column({0.0, 1.0});
  // topic 0 is orthogonal to the bank column
  auto orth = sift_v2(phi, bank, std::vector<int>{0}, 5.0);
  CHECK((orth.phi_add.array() == 0.0).all());

  // topic 1 equal to the bank column c = [0.3, 0.7]; ||c||^2 = 0.58
  Matrix c = column({0.3, 0.7});
  auto eq = sift_v2(phi, c, std::vector<int>{1}, 5.0);
  CHECK(eq.phi_add(0, 1) == doctest::Approx(-5.0 * 0.3 * 0.3 * 0.58));
  CHECK(eq.phi_add(1, 1) == doctest::Approx(-5.0 * 0.7 * 0.7 * 0.58));
  CHECK(eq.value == doctest::Approx(-0.5 * 5.0 * 0.58 * 0.58));
}

TEST_CASE("sift_v2 additives are much smaller than sift_v1 at equal tau") {
  std::mt19937_64 rng(17);
  auto phi = test_util::random_stochastic(rng, 200, 6);
  auto bank = test_util::random_stochastic(rng, 200, 4);
  std::vector<int> free{0, 1, 2, 3, 4, 5};
  auto v1 = sift_v1(phi, bank, free, 1.0);
  auto v2 = sift_v2(phi, bank, free, 1.0);
  CHECK(v2.phi_add.cwiseAbs().sum() < 0.05 * v1.phi_add.cwiseAbs().sum());
}

TEST_CASE("gradient oracle: additives match finite differences of R") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> tau_dist(0.1, 5.0);
  for (int trial = 0; trial < 10; ++trial) {
    auto phi = test_util::random_stochastic(rng, 10, 4);
    auto theta = test_util::random_stochastic(rng, 4, 3);
    auto bank = test_util::random_stochastic(rng, 10, 3);
    std::vector<Regularizer> regs{
        SmoothSparse{.topics = {0, 2, 3}, .beta0 = -tau_dist(rng)},
        Decorrelation{{0, 1, 3}, tau_dist(rng)},
        FixTopics{bank, {{1, 0}, {3, 2}}, tau_dist(rng)},
        Sift{bank, {0, 2}, tau_dist(rng), SiftVersion::v1},
        Sift{bank, {0, 1, 2}, tau_dist(rng), SiftVersion::v2},
    };
    for (const auto& reg : regs) {
      auto add = evaluate(reg, phi, theta);
      for (Eigen::Index w = 0; w < phi.rows(); ++w) {
        for (Eigen::Index t = 0; t < phi.cols(); ++t) {
          if (phi(w, t) < 1e-6) continue;
          const double analytic = add.phi_add.size() ? add.phi_add(w, t) : 0.0;
          const double numeric = fd_additive(reg, phi, theta, w, t);
          CHECK(std::abs(analytic - numeric) <= 1e-4 * std::max(std::abs(analytic), 1e-8));
        }
      }
    }
  }
}

TEST_CASE("additives vanish outside the configured topics and have the right sign") {
  std::mt19937_64 rng(5);
  auto phi = test_util::random_stochastic(rng, 12, 5);
  auto theta = test_util::random_stochastic(rng, 5, 4);
  auto bank = test_util::random_stochastic(rng, 12, 2);
  auto s1 = sift_v1(phi, bank, std::vector<int>{1, 3}, 4.0);
  auto s2 = sift_v2(phi, bank, std::vector<int>{1, 3}, 4.0);
  auto fx = fix_topics(phi, FixTopics{bank, {{0, 1}}, 4.0});
  auto dc = decorrelation(phi, Decorrelation{{2, 4}, 4.0});
  for (int t : {0, 2, 4}) {
    CHECK((s1.phi_add.col(t).array() == 0.0).all());
    CHECK((s2.phi_add.col(t).array() == 0.0).all());
  }
  for (int t : {1, 2, 3, 4}) CHECK((fx.phi_add.col(t).array() == 0.0).all());
  for (int t : {0, 1, 3}) CHECK((dc.phi_add.col(t).array() == 0.0).all());
  CHECK((s1.phi_add.array() <= 0.0).all());
  CHECK((s2.phi_add.array() <= 0.0).all());
  CHECK((fx.phi_add.array() >= 0.0).all());
}

TEST_CASE("relative coefficients") {
  CHECK(absolute_tau(0.0, Side::phi, 1000, 10, 5) == 0.0);
  CHECK(absolute_tau(-0.05, Side::phi, 1000, 10, 5) == doctest::Approx(-10.0));
  CHECK(absolute_tau(0.1, Side::theta, 1000, 10, 5) == doctest::Approx(10.0));
  double prev = -1e300;
  for (double tau : {-0.1, -0.05, 0.0, 0.01, 0.05, 0.1}) {
    const double a = absolute_tau(tau, Side::phi, 20000, 200, 20);
    CHECK(a > prev);
    prev = a;
  }

  std::vector<TopicRole> roles{TopicRole::domain, TopicRole::domain, TopicRole::background};
  ResolveContext ctx{.vocab_size = 10, .num_documents = 4, .total_tokens = 400, .roles = roles};
  RegularizerConfig sparse{.kind = RegularizerKind::smooth_sparse, .tau = -0.05, .tau_mode = TauMode::relative,
                           .topics = TopicSelector::domain};
  auto r = std::get<SmoothSparse>(resolve(sparse, ctx));
  CHECK(r.topics == std::vector<int>{0, 1});
  CHECK(r.beta0 == doctest::Approx(-0.05 * 400 / 2));
  CHECK(r.alpha0 == 0.0);

  RegularizerConfig rel_fix{.kind = RegularizerKind::fix, .tau = 1.0, .tau_mode = TauMode::relative};
  CHECK_THROWS_AS(resolve(rel_fix, ctx), ConfigError);

  RegularizerConfig sift{.kind = RegularizerKind::sift_v1, .tau = 10.0, .target = BankTarget::bad};
  auto inert = std::get<Sift>(resolve(sift, ctx));
  CHECK(inert.bank.cols() == 0);
}
