#include "itar/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "itar/error.hpp"

namespace itar {

namespace {

double safe_log(double x) { return std::log(std::max(x, kLogFloor)); }

void check_topics(std::span<const int> topics, Eigen::Index num_topics) {
  for (int t : topics) {
    if (t < 0 || t >= num_topics) throw std::out_of_range(fmt::format("topic index {} out of range", t));
  }
}

void check_bank(const Matrix& phi, const Matrix& bank) {
  if (bank.size() > 0 && bank.rows() != phi.rows()) {
    throw DataError(fmt::format("bank has {} rows, model vocabulary has {}", bank.rows(), phi.rows()));
  }
}

}  // namespace

RegularizerAdditive smooth_sparse(const Matrix& phi, const Matrix& theta, const SmoothSparse& p) {
  RegularizerAdditive out;
  if (p.topics.empty()) return out;
  check_topics(p.topics, phi.cols());
  const auto W = phi.rows();
  const double uniform_beta = 1.0 / static_cast<double>(W);
  const double uniform_alpha = 1.0 / static_cast<double>(p.topics.size());

  if (p.beta0 != 0.0) {
    out.phi_add = Matrix::Zero(phi.rows(), phi.cols());
    for (int t : p.topics) {
      for (Eigen::Index w = 0; w < W; ++w) {
        const double beta = p.beta.size() > 0 ? p.beta(w, t) : uniform_beta;
        out.phi_add(w, t) = p.beta0 * beta;
        if (beta != 0.0) out.value += p.beta0 * beta * safe_log(phi(w, t));
      }
    }
  }
  if (p.alpha0 != 0.0) {
    out.theta_add = Matrix::Zero(theta.rows(), theta.cols());
    for (Eigen::Index d = 0; d < theta.cols(); ++d) {
      for (int t : p.topics) {
        const double alpha = p.alpha.size() > 0 ? p.alpha(t, d) : uniform_alpha;
        out.theta_add(t, d) = p.alpha0 * alpha;
        if (alpha != 0.0) out.value += p.alpha0 * alpha * safe_log(theta(t, d));
      }
    }
  }
  return out;
}

RegularizerAdditive decorrelation(const Matrix& phi, const Decorrelation& p) {
  RegularizerAdditive out;
  if (p.topics.size() < 2 || p.tau == 0.0) return out;
  check_topics(p.topics, phi.cols());
  Vector row_sum = Vector::Zero(phi.rows());
  for (int t : p.topics) row_sum += phi.col(t);

  out.phi_add = Matrix::Zero(phi.rows(), phi.cols());
  double cross = 0.0;
  for (int t : p.topics) {
    // sum over s != t of phi_ws
    const Vector others = row_sum - phi.col(t);
    out.phi_add.col(t) = -p.tau * phi.col(t).cwiseProduct(others);
    cross += phi.col(t).dot(others);
  }
  out.value = -0.5 * p.tau * cross;
  return out;
}

RegularizerAdditive fix_topics(const Matrix& phi, const FixTopics& p) {
  RegularizerAdditive out;
  if (p.mapping.empty()) return out;
  if (p.tau < 0.0) throw std::invalid_argument("fixing coefficient must be nonnegative");
  check_bank(phi, p.bank);
  std::set<int> topics_seen;
  std::set<int> columns_seen;
  for (const auto& [t, b] : p.mapping) {
    if (t < 0 || t >= phi.cols()) throw std::out_of_range(fmt::format("fixed topic {} out of range", t));
    if (b < 0 || b >= p.bank.cols()) {
      throw DataError(fmt::format("fixed topic {} references missing bank column {}", t, b));
    }
    if (!topics_seen.insert(t).second || !columns_seen.insert(b).second) {
      throw std::invalid_argument("fixing map must be injective");
    }
  }
  out.phi_add = Matrix::Zero(phi.rows(), phi.cols());
  for (const auto& [t, b] : p.mapping) {
    out.phi_add.col(t) = p.tau * p.bank.col(b);
    for (Eigen::Index w = 0; w < phi.rows(); ++w) {
      if (p.bank(w, b) != 0.0) out.value += p.tau * p.bank(w, b) * safe_log(phi(w, t));
    }
  }
  return out;
}

RegularizerAdditive sift_v1(const Matrix& phi, const Matrix& bank, std::span<const int> free_topics, double tau) {
  RegularizerAdditive out;
  if (bank.cols() == 0 || free_topics.empty() || tau == 0.0) return out;
  if (tau < 0.0) throw std::invalid_argument("sifting coefficient must be nonnegative");
  check_bank(phi, bank);
  check_topics(free_topics, phi.cols());
  // Sum of banked columns: the "average" banked topic up to scale.
  const Vector bank_sum = bank.rowwise().sum();
  out.phi_add = Matrix::Zero(phi.rows(), phi.cols());
  for (int t : free_topics) {
    out.phi_add.col(t) = -tau * phi.col(t).cwiseProduct(bank_sum);
    out.value -= tau * phi.col(t).dot(bank_sum);
  }
  return out;
}

RegularizerAdditive sift_v2(const Matrix& phi, const Matrix& bank, std::span<const int> free_topics, double tau) {
  RegularizerAdditive out;
  if (bank.cols() == 0 || free_topics.empty() || tau == 0.0) return out;
  if (tau < 0.0) throw std::invalid_argument("sifting coefficient must be nonnegative");
  check_bank(phi, bank);
  check_topics(free_topics, phi.cols());
  out.phi_add = Matrix::Zero(phi.rows(), phi.cols());
  for (int t : free_topics) {
    const Vector inner = bank.transpose() * phi.col(t);  // <phi_t, bank_s> for every s
    const Vector weighted = bank * inner;
    out.phi_add.col(t) = -tau * phi.col(t).cwiseProduct(weighted);
    out.value -= 0.5 * tau * inner.squaredNorm();
  }
  return out;
}

RegularizerAdditive evaluate(const Regularizer& reg, const Matrix& phi, const Matrix& theta) {
  return std::visit(
      [&](const auto& r) -> RegularizerAdditive {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, SmoothSparse>) {
          return smooth_sparse(phi, theta, r);
        } else if constexpr (std::is_same_v<T, Decorrelation>) {
          return decorrelation(phi, r);
        } else if constexpr (std::is_same_v<T, FixTopics>) {
          return fix_topics(phi, r);
        } else {
          return r.version == SiftVersion::v1 ? sift_v1(phi, r.bank, r.free_topics, r.tau)
                                              : sift_v2(phi, r.bank, r.free_topics, r.tau);
        }
      },
      reg);
}

std::string describe(const Regularizer& reg) {
  return std::visit(
      [](const auto& r) -> std::string {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, SmoothSparse>) {
          return fmt::format("smooth_sparse(beta0={:g}, alpha0={:g}, |H|={})", r.beta0, r.alpha0, r.topics.size());
        } else if constexpr (std::is_same_v<T, Decorrelation>) {
          return fmt::format("decorrelation(tau={:g}, |H|={})", r.tau, r.topics.size());
        } else if constexpr (std::is_same_v<T, FixTopics>) {
          return fmt::format("fix(tau={:g}, fixed={})", r.tau, r.mapping.size());
        } else {
          return fmt::format("sift_{}(tau={:g}, bank={}, free={})", r.version == SiftVersion::v1 ? "v1" : "v2",
                             r.tau, r.bank.cols(), r.free_topics.size());
        }
      },
      reg);
}

std::vector<int> select_topics(TopicSelector selector, std::span<const int> list, std::span<const TopicRole> roles) {
  std::vector<int> out;
  if (selector == TopicSelector::list) {
    out.assign(list.begin(), list.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    for (int t : out) {
      if (t < 0 || static_cast<std::size_t>(t) >= roles.size()) {
        throw ConfigError(fmt::format("regularizer topic {} out of range", t));
      }
    }
    return out;
  }
  for (std::size_t t = 0; t < roles.size(); ++t) {
    const TopicRole role = roles[t];
    bool take = false;
    switch (selector) {
      case TopicSelector::all: take = true; break;
      case TopicSelector::domain: take = role != TopicRole::background; break;
      case TopicSelector::background: take = role == TopicRole::background; break;
      case TopicSelector::free: take = role == TopicRole::domain; break;
      case TopicSelector::list: break;
    }
    if (take) out.push_back(static_cast<int>(t));
  }
  return out;
}

double absolute_tau(double tau_rel, Side side, std::int64_t total_tokens, std::size_t num_documents,
                    std::size_t subset_size) {
  if (tau_rel == 0.0) return 0.0;
  const double n = static_cast<double>(total_tokens);
  if (side == Side::theta) {
    if (num_documents == 0) return 0.0;
    return tau_rel * n / static_cast<double>(num_documents);
  }
  if (subset_size == 0) return 0.0;
  return tau_rel * n / static_cast<double>(subset_size);
}

Regularizer resolve(const RegularizerConfig& cfg, const ResolveContext& ctx) {
  const bool relative = cfg.tau_mode == TauMode::relative;
  if (relative && cfg.kind != RegularizerKind::smooth_sparse && cfg.kind != RegularizerKind::decorrelation) {
    throw ConfigError(fmt::format("relative tau is not supported for {}", to_string(cfg.kind)));
  }
  switch (cfg.kind) {
    case RegularizerKind::smooth_sparse: {
      SmoothSparse r;
      r.topics = select_topics(cfg.topics, cfg.topic_list, ctx.roles);
      const auto h = r.topics.size();
      auto coef = [&](Side side) {
        return relative ? absolute_tau(cfg.tau, side, ctx.total_tokens, ctx.num_documents, h) : cfg.tau;
      };
      if (cfg.side != Side::theta) r.beta0 = coef(Side::phi);
      if (cfg.side != Side::phi) r.alpha0 = coef(Side::theta);
      if (cfg.topics == TopicSelector::background && cfg.tau < 0.0) {
        spdlog::warn("negative tau on background topics sparses what is usually smoothed");
      }
      return r;
    }
    case RegularizerKind::decorrelation: {
      Decorrelation r;
      r.topics = select_topics(cfg.topics, cfg.topic_list, ctx.roles);
      r.tau = relative ? absolute_tau(cfg.tau, Side::phi, ctx.total_tokens, ctx.num_documents, r.topics.size())
                       : cfg.tau;
      return r;
    }
    case RegularizerKind::fix: {
      FixTopics r;
      r.tau = cfg.tau;
      if (ctx.bank_good && ctx.bank_good->cols() > 0) {
        r.bank = *ctx.bank_good;
        r.mapping = ctx.fixed_mapping;
      }
      return r;
    }
    case RegularizerKind::sift_v1:
    case RegularizerKind::sift_v2: {
      Sift r;
      r.tau = cfg.tau;
      r.version = cfg.kind == RegularizerKind::sift_v1 ? SiftVersion::v1 : SiftVersion::v2;
      const Matrix* bank = cfg.target == BankTarget::good ? ctx.bank_good
                           : cfg.target == BankTarget::bad ? ctx.bank_bad
                                                           : nullptr;
      if (cfg.target == BankTarget::none) throw ConfigError("sift regularizer needs target good or bad");
      if (bank && bank->cols() > 0) {
        r.bank = *bank;
        r.free_topics = select_topics(TopicSelector::free, {}, ctx.roles);
      }
      return r;
    }
  }
  throw ConfigError("unknown regularizer kind");
}

std::string_view to_string(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::smooth_sparse: return "smooth_sparse";
    case RegularizerKind::decorrelation: return "decorrelation";
    case RegularizerKind::fix: return "fix";
    case RegularizerKind::sift_v1: return "sift_v1";
    case RegularizerKind::sift_v2: return "sift_v2";
  }
  return "smooth_sparse";
}

RegularizerKind regularizer_kind_from_string(std::string_view s) {
  if (s == "smooth_sparse") return RegularizerKind::smooth_sparse;
  if (s == "decorrelation") return RegularizerKind::decorrelation;
  if (s == "fix") return RegularizerKind::fix;
  if (s == "sift_v1") return RegularizerKind::sift_v1;
  if (s == "sift_v2") return RegularizerKind::sift_v2;
  throw ConfigError("unknown regularizer kind '" + std::string(s) + "'");
}

}  // namespace itar
