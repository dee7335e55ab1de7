#pragma once

#include <Eigen/Dense>

namespace itar {

// Column-major dense storage. Phi is W x T (column t = p(w|t)); Theta is
// T x D (column d = p(t|d)).
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline bool is_zero_column(const Matrix& m, Eigen::Index col) {
  return (m.col(col).array() == 0.0).all();
}

inline double cosine(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

}  // namespace itar
