// Symplectic structure on R^{2n} with phase-space ordering z = (q, p).
#pragma once

#include "gtrace/core.hpp"

namespace gtrace {

/// J = [[0, I], [-I, 0]]; Hamilton's equations read zdot = J grad H.
inline Mat symplectic_matrix(int n) {
  Mat J = Mat::Zero(2 * n, 2 * n);
  J.topRightCorner(n, n).setIdentity();
  J.bottomLeftCorner(n, n) = -Mat::Identity(n, n);
  return J;
}

/// sigma(a, b) = p . q' - p' . q for a = (q, p), b = (q', p').
inline double symplectic_form(const Vec& a, const Vec& b) {
  const Eigen::Index n = a.size() / 2;
  return a.tail(n).dot(b.head(n)) - b.tail(n).dot(a.head(n));
}

/// max |(F^T J F - J)_ij|; zero exactly when F is symplectic.
inline double symplectic_defect(const Mat& F) {
  if (F.rows() != F.cols() || F.rows() % 2 != 0) {
    throw Error("symplectic_defect: matrix must be square with even size");
  }
  const Mat J = symplectic_matrix(static_cast<int>(F.rows() / 2));
  return (F.transpose() * J * F - J).cwiseAbs().maxCoeff();
}

/// The four n x n blocks of a 2n x 2n matrix [[A, B], [C, D]].
struct Blocks {
  Mat A, B, C, D;
};

inline Blocks split_blocks(const Mat& F) {
  const Eigen::Index n = F.rows() / 2;
  return {F.topLeftCorner(n, n), F.topRightCorner(n, n), F.bottomLeftCorner(n, n),
          F.bottomRightCorner(n, n)};
}

}  // namespace gtrace
