#pragma once

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "itar/corpus.hpp"
#include "itar/matrix.hpp"

namespace test_util {

// Small random BoW corpus: `docs` documents over at most `words` tokens.
inline itar::Corpus random_corpus(std::uint64_t seed, int docs, int words, int max_len = 6) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> word(0, words - 1);
  std::uniform_int_distribution<int> len(1, max_len);
  std::uniform_int_distribution<int> count(1, 3);
  std::ostringstream out;
  for (int d = 0; d < docs; ++d) {
    out << "d" << d;
    std::vector<bool> used(static_cast<std::size_t>(words), false);
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      const int w = word(rng);
      if (used[static_cast<std::size_t>(w)]) continue;
      used[static_cast<std::size_t>(w)] = true;
      out << " w" << w << ":" << count(rng);
    }
    out << "\n";
  }
  return itar::parse_bow_text(out.str());
}

// Every column sums to 1 within tol, or is entirely zero.
inline bool columns_stochastic(const itar::Matrix& m, double tol = 1e-6) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if ((m.col(c).array() < 0.0).any()) return false;
    const double s = m.col(c).sum();
    if (s == 0.0) continue;
    if (std::abs(s - 1.0) > tol) return false;
  }
  return true;
}

inline itar::Matrix random_stochastic(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  itar::Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = u(rng);
    m.col(c) /= m.col(c).sum();
  }
  return m;
}


// Greedy max-cosine matching of found columns to true columns. Returns the
// matched cosine for each true column (0 when left unmatched).
inline std::vector<double> greedy_match_cosines(const itar::Matrix& found, const itar::Matrix& truth) {
  std::vector<bool> used_found(static_cast<std::size_t>(found.cols()), false);
  std::vector<bool> used_true(static_cast<std::size_t>(truth.cols()), false);
  std::vector<double> out(static_cast<std::size_t>(truth.cols()), 0.0);
  const auto rounds = std::min(found.cols(), truth.cols());
  for (Eigen::Index r = 0; r < rounds; ++r) {
    double best = -1.0;
    Eigen::Index bi = -1, bj = -1;
    for (Eigen::Index i = 0; i < found.cols(); ++i) {
      if (used_found[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < truth.cols(); ++j) {
        if (used_true[static_cast<std::size_t>(j)]) continue;
        const double c = itar::cosine(found.col(i), truth.col(j));
        if (c > best) {
          best = c;
          bi = i;
          bj = j;
        }
      }
    }
    used_found[static_cast<std::size_t>(bi)] = true;
    used_true[static_cast<std::size_t>(bj)] = true;
    out[static_cast<std::size_t>(bj)] = best;
  }
  return out;
}

}  // namespace test_util
