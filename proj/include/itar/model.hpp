#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "itar/corpus.hpp"
#include "itar/matrix.hpp"
#include "itar/regularizers.hpp"
#include "itar/topic_role.hpp"

namespace itar {

struct TopicModel {
  Matrix phi;    // W x T
  Matrix theta;  // T x D
  std::vector<TopicRole> roles;
  std::vector<std::string> bank_refs;  // bank entry id for fixed topics, empty otherwise
  std::uint64_t seed = 0;
  std::vector<double> topic_sizes;  // n_t = sum_d theta_td n_d

  Eigen::Index num_words() const { return phi.rows(); }
  Eigen::Index num_topics() const { return phi.cols(); }
  bool is_degenerate(Eigen::Index t) const { return is_zero_column(phi, t); }
};

struct NormalizeResult {
  std::vector<double> values;
  bool degenerate = false;
};

// Clamps negatives to zero, then divides by the sum. A zero sum yields the
// all-zero vector with `degenerate` set.
NormalizeResult normalize_column(std::span<const double> values);

// Normalizes `v` in place with the same rule; returns false when degenerate.
bool normalize_in_place(Eigen::Ref<Vector> v);

// Phi columns drawn from a generator seeded with `seed`; theta uniform 1/T.
// The model has no documents until fitted (theta is T x 0).
TopicModel init_model(std::size_t num_words, std::size_t num_topics, std::uint64_t seed,
                      std::vector<TopicRole> roles = {});

// Floor substituted for a zero mixture probability inside ln().
inline constexpr double kLikelihoodFloor = 1e-37;

struct TrainStats {
  std::vector<double> log_likelihood;  // after each iteration's M-step
  std::vector<double> perplexity;
  std::vector<std::vector<double>> regularizer_values;  // [iteration][regularizer]
  int iterations = 0;
  std::int64_t floor_hits = 0;  // zero-mixture terms replaced by kLikelihoodFloor

  bool operator==(const TrainStats&) const = default;
};

struct FitOptions {
  int iterations = 30;
  int workers = 1;
  bool update_phi = true;
  // Called after each EM iteration with (done, total). Must be thread safe
  // with respect to whatever it touches.
  std::function<void(int, int)> progress;
  // Sees the model after each iteration's M-step (iteration is 1-based).
  std::function<void(int, const TopicModel&)> observer;
};

// Regularized EM. Additives from every regularizer are evaluated at the
// pre-update (Phi, Theta) and summed before the M-step. Theta is
// (re)initialized to uniform when its shape does not match the corpus.
TrainStats em_fit(TopicModel& model, const Corpus& corpus, std::span<const Regularizer> regularizers,
                  const FitOptions& options);

// Fits theta only, with phi held fixed.
Matrix infer_theta_fixed_phi(const Matrix& phi, const Corpus& corpus, int iterations, int workers = 1);

struct LikelihoodResult {
  double value = 0.0;
  std::int64_t floor_hits = 0;
};

LikelihoodResult log_likelihood_detail(const Matrix& phi, const Matrix& theta, const Corpus& corpus);
double log_likelihood(const Matrix& phi, const Matrix& theta, const Corpus& corpus);
double log_likelihood(const TopicModel& model, const Corpus& corpus);

// n_t = sum_d theta_td n_d.
std::vector<double> topic_sizes(const Matrix& theta, const Corpus& corpus);

}  // namespace itar
