#include "itar/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "itar/error.hpp"

namespace itar {

NormalizeResult normalize_column(std::span<const double> values) {
  NormalizeResult out;
  out.values.resize(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.values[i] = std::max(values[i], 0.0);
    sum += out.values[i];
  }
  if (sum <= 0.0) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    out.degenerate = true;
    return out;
  }
  for (auto& v : out.values) v /= sum;
  return out;
}

bool normalize_in_place(Eigen::Ref<Vector> v) {
  v = v.cwiseMax(0.0);
  const double sum = v.sum();
  if (sum <= 0.0) {
    v.setZero();
    return false;
  }
  v /= sum;
  return true;
}

TopicModel init_model(std::size_t num_words, std::size_t num_topics, std::uint64_t seed, std::vector<TopicRole> roles) {
  if (num_words < 1 || num_topics < 1) throw std::invalid_argument("init_model needs W >= 1 and T >= 1");
  if (roles.empty()) roles.assign(num_topics, TopicRole::domain);
  if (roles.size() != num_topics) throw std::invalid_argument("one role per topic required");

  TopicModel model;
  const auto W = static_cast<Eigen::Index>(num_words);
  const auto T = static_cast<Eigen::Index>(num_topics);
  model.phi.resize(W, T);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index w = 0; w < W; ++w) model.phi(w, t) = unif(rng);
    normalize_in_place(model.phi.col(t));
  }
  model.theta.resize(T, 0);
  model.roles = std::move(roles);
  model.bank_refs.assign(num_topics, std::string());
  model.seed = seed;
  model.topic_sizes.assign(num_topics, 0.0);
  return model;
}

namespace {

struct EStepPartial {
  Matrix n_wt_t;  // T x W (transposed so a word's topic vector is contiguous)
  double log_likelihood = 0.0;
  std::int64_t floor_hits = 0;
};

// Accumulates expected counts for documents [begin, end). n_td columns of
// those documents are written directly; they never overlap between workers.
void e_step_range(const Matrix& phi_t, const Matrix& theta, const Corpus& corpus, std::size_t begin,
                  std::size_t end, bool accumulate_words, Matrix& n_td, EStepPartial& part) {
  const auto T = phi_t.rows();
  Vector p(T);
  for (std::size_t d = begin; d < end; ++d) {
    const auto& doc = corpus.document(d);
    const auto di = static_cast<Eigen::Index>(d);
    auto theta_d = theta.col(di);
    auto n_td_d = n_td.col(di);
    n_td_d.setZero();
    for (const auto& [token, count] : doc.bow) {
      const auto w = static_cast<Eigen::Index>(token);
      p = phi_t.col(w).cwiseProduct(theta_d);
      const double z = p.sum();
      const double c = static_cast<double>(count);
      if (z > 0.0) {
        part.log_likelihood += c * std::log(z);
        p *= c / z;
        n_td_d += p;
        if (accumulate_words) part.n_wt_t.col(w) += p;
      } else {
        part.log_likelihood += c * std::log(kLikelihoodFloor);
        ++part.floor_hits;
      }
    }
  }
}

struct EStepResult {
  Matrix n_wt;  // W x T
  Matrix n_td;  // T x D
  double log_likelihood = 0.0;
  std::int64_t floor_hits = 0;
};

EStepResult e_step(const Matrix& phi, const Matrix& theta, const Corpus& corpus, int workers, bool accumulate_words) {
  const auto T = phi.cols();
  const auto W = phi.rows();
  const std::size_t D = corpus.num_documents();
  const Matrix phi_t = phi.transpose();

  EStepResult out;
  out.n_td = Matrix::Zero(T, static_cast<Eigen::Index>(D));
  const auto num_workers = static_cast<std::size_t>(std::clamp<int>(workers, 1, std::max<int>(1, static_cast<int>(D))));
  std::vector<EStepPartial> parts(num_workers);
  for (auto& part : parts) part.n_wt_t = Matrix::Zero(T, accumulate_words ? W : 0);

  auto chunk_begin = [&](std::size_t k) { return D * k / num_workers; };
  if (num_workers == 1) {
    e_step_range(phi_t, theta, corpus, 0, D, accumulate_words, out.n_td, parts[0]);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(num_workers);
    for (std::size_t k = 0; k < num_workers; ++k) {
      threads.emplace_back([&, k] {
        e_step_range(phi_t, theta, corpus, chunk_begin(k), chunk_begin(k + 1), accumulate_words, out.n_td, parts[k]);
      });
    }
    for (auto& th : threads) th.join();
  }

  // Fixed merge order keeps results reproducible for a given worker count.
  Matrix n_wt_t = std::move(parts[0].n_wt_t);
  out.log_likelihood = parts[0].log_likelihood;
  out.floor_hits = parts[0].floor_hits;
  for (std::size_t k = 1; k < num_workers; ++k) {
    if (accumulate_words) n_wt_t += parts[k].n_wt_t;
    out.log_likelihood += parts[k].log_likelihood;
    out.floor_hits += parts[k].floor_hits;
  }
  if (accumulate_words) out.n_wt = n_wt_t.transpose();
  return out;
}

bool all_finite(const Matrix& m) { return m.size() == 0 || m.allFinite(); }

}  // namespace

std::vector<double> topic_sizes(const Matrix& theta, const Corpus& corpus) {
  std::vector<double> sizes(static_cast<std::size_t>(theta.rows()), 0.0);
  for (std::size_t d = 0; d < corpus.num_documents() && static_cast<Eigen::Index>(d) < theta.cols(); ++d) {
    const double nd = static_cast<double>(corpus.document(d).length);
    for (Eigen::Index t = 0; t < theta.rows(); ++t) {
      sizes[static_cast<std::size_t>(t)] += theta(t, static_cast<Eigen::Index>(d)) * nd;
    }
  }
  return sizes;
}

TrainStats em_fit(TopicModel& model, const Corpus& corpus, std::span<const Regularizer> regularizers,
                  const FitOptions& options) {
  const auto W = static_cast<Eigen::Index>(corpus.vocab_size());
  const auto D = static_cast<Eigen::Index>(corpus.num_documents());
  const auto T = model.phi.cols();
  if (model.phi.rows() != W) {
    throw DataError(fmt::format("model has {} words, corpus vocabulary has {}", model.phi.rows(), W));
  }
  if (options.iterations < 1) throw std::invalid_argument("em_fit needs at least one iteration");
  if (corpus.total_tokens() <= 0) throw DataError("cannot fit an empty corpus");
  if (model.theta.rows() != T || model.theta.cols() != D) {
    model.theta = Matrix::Constant(T, D, 1.0 / static_cast<double>(T));
  }
  if (model.roles.size() != static_cast<std::size_t>(T)) model.roles.assign(static_cast<std::size_t>(T), TopicRole::domain);
  if (model.bank_refs.size() != static_cast<std::size_t>(T)) model.bank_refs.resize(static_cast<std::size_t>(T));

  const double n = static_cast<double>(corpus.total_tokens());
  TrainStats stats;
  stats.iterations = options.iterations;
  stats.log_likelihood.resize(static_cast<std::size_t>(options.iterations));
  stats.regularizer_values.resize(static_cast<std::size_t>(options.iterations));

  for (int it = 0; it < options.iterations; ++it) {
    Matrix phi_add;
    Matrix theta_add;
    auto& values = stats.regularizer_values[static_cast<std::size_t>(it)];
    values.reserve(regularizers.size());
    for (const auto& reg : regularizers) {
      auto add = evaluate(reg, model.phi, model.theta);
      if (!all_finite(add.phi_add) || !all_finite(add.theta_add)) {
        throw std::runtime_error("regularizer " + describe(reg) + " produced a non-finite additive");
      }
      if (add.phi_add.size() > 0) {
        if (phi_add.size() == 0) phi_add = Matrix::Zero(W, T);
        phi_add += add.phi_add;
      }
      if (add.theta_add.size() > 0) {
        if (theta_add.size() == 0) theta_add = Matrix::Zero(T, D);
        theta_add += add.theta_add;
      }
      values.push_back(add.value);
    }

    auto counts = e_step(model.phi, model.theta, corpus, options.workers, options.update_phi);
    if (it > 0) stats.log_likelihood[static_cast<std::size_t>(it - 1)] = counts.log_likelihood;

    if (options.update_phi) {
      if (phi_add.size() > 0) counts.n_wt += phi_add;
      model.phi = std::move(counts.n_wt);
      for (Eigen::Index t = 0; t < T; ++t) normalize_in_place(model.phi.col(t));
    }
    if (theta_add.size() > 0) counts.n_td += theta_add;
    model.theta = std::move(counts.n_td);
    for (Eigen::Index d = 0; d < D; ++d) normalize_in_place(model.theta.col(d));

    if (options.observer) options.observer(it + 1, model);
    if (options.progress) options.progress(it + 1, options.iterations);
  }

  const auto last = log_likelihood_detail(model.phi, model.theta, corpus);
  stats.log_likelihood.back() = last.value;
  stats.floor_hits = last.floor_hits;
  stats.perplexity.reserve(stats.log_likelihood.size());
  for (double ll : stats.log_likelihood) stats.perplexity.push_back(std::exp(-ll / n));
  model.topic_sizes = topic_sizes(model.theta, corpus);
  return stats;
}

Matrix infer_theta_fixed_phi(const Matrix& phi, const Corpus& corpus, int iterations, int workers) {
  if (phi.size() == 0 || (phi.array() == 0.0).all()) throw DataError("cannot infer theta from an all-zero phi");
  TopicModel model;
  model.phi = phi;
  model.roles.assign(static_cast<std::size_t>(phi.cols()), TopicRole::domain);
  FitOptions options;
  options.iterations = iterations;
  options.workers = workers;
  options.update_phi = false;
  em_fit(model, corpus, {}, options);
  return model.theta;
}

LikelihoodResult log_likelihood_detail(const Matrix& phi, const Matrix& theta, const Corpus& corpus) {
  if (phi.rows() != static_cast<Eigen::Index>(corpus.vocab_size()) ||
      theta.cols() != static_cast<Eigen::Index>(corpus.num_documents()) || theta.rows() != phi.cols()) {
    throw DataError("log_likelihood: model and corpus dimensions differ");
  }
  LikelihoodResult out;
  const Matrix phi_t = phi.transpose();
  for (std::size_t d = 0; d < corpus.num_documents(); ++d) {
    auto theta_d = theta.col(static_cast<Eigen::Index>(d));
    for (const auto& [token, count] : corpus.document(d).bow) {
      const double z = phi_t.col(static_cast<Eigen::Index>(token)).cwiseProduct(theta_d).sum();
      if (z > 0.0) {
        out.value += static_cast<double>(count) * std::log(z);
      } else {
        out.value += static_cast<double>(count) * std::log(kLikelihoodFloor);
        ++out.floor_hits;
      }
    }
  }
  return out;
}

double log_likelihood(const Matrix& phi, const Matrix& theta, const Corpus& corpus) {
  return log_likelihood_detail(phi, theta, corpus).value;
}

double log_likelihood(const TopicModel& model, const Corpus& corpus) {
  return log_likelihood(model.phi, model.theta, corpus);
}

}  // namespace itar
