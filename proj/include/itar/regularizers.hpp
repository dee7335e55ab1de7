#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "itar/matrix.hpp"
#include "itar/topic_role.hpp"

namespace itar {

// R(Phi, Theta) at the current point together with the M-step additives
// phi_wt * dR/dphi_wt and theta_td * dR/dtheta_td. An empty matrix means the
// additive is identically zero.
struct RegularizerAdditive {
  double value = 0.0;
  Matrix phi_add;
  Matrix theta_add;
};

enum class SiftVersion { v1, v2 };

// beta0 * sum beta_wt ln phi_wt + alpha0 * sum alpha_td ln theta_td over t in H.
// Empty targets mean uniform: beta_wt = 1/W, alpha_td = 1/|H|.
struct SmoothSparse {
  std::vector<int> topics;
  double beta0 = 0.0;
  double alpha0 = 0.0;
  Matrix beta;
  Matrix alpha;
};

struct Decorrelation {
  std::vector<int> topics;
  double tau = 0.0;
};

// Pulls each model topic in `mapping` toward a column of `bank` (W x K).
struct FixTopics {
  Matrix bank;
  std::vector<std::pair<int, int>> mapping;  // (model topic, bank column)
  double tau = 0.0;
};

// Decorrelates the free topics from every column of `bank` (W x K).
struct Sift {
  Matrix bank;
  std::vector<int> free_topics;
  double tau = 0.0;
  SiftVersion version = SiftVersion::v1;
};

using Regularizer = std::variant<SmoothSparse, Decorrelation, FixTopics, Sift>;

// Floor used inside logarithms of regularizer values.
inline constexpr double kLogFloor = 1e-37;

RegularizerAdditive smooth_sparse(const Matrix& phi, const Matrix& theta, const SmoothSparse& params);
RegularizerAdditive decorrelation(const Matrix& phi, const Decorrelation& params);
RegularizerAdditive fix_topics(const Matrix& phi, const FixTopics& params);
RegularizerAdditive sift_v1(const Matrix& phi, const Matrix& bank, std::span<const int> free_topics, double tau);
RegularizerAdditive sift_v2(const Matrix& phi, const Matrix& bank, std::span<const int> free_topics, double tau);

RegularizerAdditive evaluate(const Regularizer& reg, const Matrix& phi, const Matrix& theta);
std::string describe(const Regularizer& reg);

// ---------------------------------------------------------------------------
// Configuration layer: what an experiment file says, before it is bound to a
// concrete model and bank.

enum class RegularizerKind { smooth_sparse, decorrelation, fix, sift_v1, sift_v2 };
enum class TauMode { absolute, relative };
enum class Side { phi, theta, both };
enum class TopicSelector { all, domain, background, free, list };
enum class BankTarget { none, good, bad };

struct RegularizerConfig {
  RegularizerKind kind = RegularizerKind::smooth_sparse;
  double tau = 0.0;
  TauMode tau_mode = TauMode::absolute;
  TopicSelector topics = TopicSelector::all;
  std::vector<int> topic_list;  // used when topics == list
  Side side = Side::phi;
  BankTarget target = BankTarget::none;

  bool operator==(const RegularizerConfig&) const = default;
};

struct ResolveContext {
  std::size_t vocab_size = 0;
  std::size_t num_documents = 0;
  std::int64_t total_tokens = 0;
  std::span<const TopicRole> roles;
  const Matrix* bank_good = nullptr;  // W x K_good
  const Matrix* bank_bad = nullptr;   // W x K_bad
  std::vector<std::pair<int, int>> fixed_mapping;
};

std::vector<int> select_topics(TopicSelector selector, std::span<const int> list, std::span<const TopicRole> roles);

// Relative coefficients are scaled by token mass so that the additive is
// tau_rel times the average count it competes with:
//   phi side:   tau_abs = tau_rel * n / |H|      (n = corpus tokens)
//   theta side: tau_abs = tau_rel * n / D
double absolute_tau(double tau_rel, Side side, std::int64_t total_tokens, std::size_t num_documents,
                    std::size_t subset_size);

// Binds a config to a model's topic roles and the current bank. Fix and sift
// configs with an empty bank resolve to an inert regularizer.
Regularizer resolve(const RegularizerConfig& cfg, const ResolveContext& ctx);

std::string_view to_string(RegularizerKind kind);
RegularizerKind regularizer_kind_from_string(std::string_view s);

}  // namespace itar
