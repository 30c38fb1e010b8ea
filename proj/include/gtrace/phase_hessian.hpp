// The complex phase Phi_E(t, y, alpha) of the coherent-state trace integral and
// its (1 + 3n) x (1 + 3n) Hessian at a point of a periodic orbit, variables
// ordered (t, y, p, q).
//
//   Phi_E = S(alpha, t) + q.p + (y - q_t).p_t + (1/2)(y - q_t).M(t)(y - q_t)
//           + (i/2)|y - q|^2 - y.p + E t
#pragma once

#include "gtrace/core.hpp"
#include "gtrace/dynamics.hpp"
#include "gtrace/symplectic.hpp"

#include <vector>

namespace gtrace {

/// Phi_E'' from the gradient (H_q, H_p) at alpha_t and the blocks of F(t).
inline CMat assemble_phase_hessian(const Vec& Hq, const Vec& Hp, const Blocks& F, const CMat& M) {
  const Eigen::Index n = Hq.size();
  const CMat A = F.A.cast<cplx>(), B = F.B.cast<cplx>(), C = F.C.cast<cplx>(), D = F.D.cast<cplx>();
  const CVec hq = Hq.cast<cplx>(), hp = Hp.cast<cplx>();
  const CMat I = CMat::Identity(n, n);
  const CMat iI = kI * I;

  const CMat D_MB = D - M * B;
  const CMat C_MA = C - M * A;
  const CMat Dt_BtM = D.transpose() - B.transpose() * M;
  const CMat Ct_AtM = C.transpose() - A.transpose() * M;

  CMat H = CMat::Zero(1 + 3 * n, 1 + 3 * n);
  // row/column blocks: 0 -> t, [1, 1+n) -> y, [1+n, 1+2n) -> p, [1+2n, 1+3n) -> q
  H(0, 0) = hp.dot(hq + M * hp);  // dot() conjugates the first argument; hp is real
  H.block(0, 1, 1, n) = (-hq - M * hp).transpose();
  H.block(0, 1 + n, 1, n) = -(hp.transpose() * D_MB);
  H.block(0, 1 + 2 * n, 1, n) = -(hp.transpose() * C_MA);

  H.block(1, 0, n, 1) = -hq - M * hp;
  H.block(1, 1, n, n) = M + iI;
  H.block(1, 1 + n, n, n) = D_MB - I;
  H.block(1, 1 + 2 * n, n, n) = C_MA - iI;

  H.block(1 + n, 0, n, 1) = -(Dt_BtM * hp);
  H.block(1 + n, 1, n, n) = Dt_BtM - I;
  H.block(1 + n, 1 + n, n, n) = B.transpose() * M * B - D.transpose() * B;
  H.block(1 + n, 1 + 2 * n, n, n) = B.transpose() * M * A - B.transpose() * C;

  H.block(1 + 2 * n, 0, n, 1) = -(Ct_AtM * hp);
  H.block(1 + 2 * n, 1, n, n) = Ct_AtM - iI;
  H.block(1 + 2 * n, 1 + n, n, n) = A.transpose() * M * B - C.transpose() * B;
  H.block(1 + 2 * n, 1 + 2 * n, n, n) = A.transpose() * M * A - C.transpose() * A + iI;
  return H;
}

/// (0, H_p, -H_q, H_p): the tangent of the critical manifold.
inline Vec critical_tangent(const Vec& Hq, const Vec& Hp) {
  const Eigen::Index n = Hq.size();
  Vec v(1 + 3 * n);
  v << 0.0, Hp, -Hq, Hp;
  return v;
}

/// M = (C + iD)(A + iB)^{-1} from a linearized flow matrix.
inline CMat width_matrix(const Mat& F) {
  const Blocks b = split_blocks(F);
  const CMat U = b.A.cast<cplx>() + kI * b.B.cast<cplx>();
  const CMat Vc = b.C.cast<cplx>() + kI * b.D.cast<cplx>();
  return U.transpose().partialPivLu().solve(Vc.transpose()).transpose();
}

/// Phi_E at (t, y, alpha) given the flowed point alpha_t, S(alpha, t) and M(t).
inline cplx phase_function(double E, double t, const Vec& y, const Vec& alpha, const Vec& alpha_t,
                           double S, const CMat& M) {
  const Eigen::Index n = y.size();
  const Vec q = alpha.head(n), p = alpha.tail(n);
  const Vec qt = alpha_t.head(n), pt = alpha_t.tail(n);
  const CVec w = (y - qt).cast<cplx>();
  const cplx quad = (w.transpose() * M * w)(0, 0);
  return S + q.dot(p) + (y - qt).dot(pt) + 0.5 * quad + 0.5 * kI * (y - q).squaredNorm() - y.dot(p) + E * t;
}

struct PhaseHessianReport {
  int n = 0;
  CMat hessian;
  double symmetry_defect = 0.0;       // max |H - H^T| / max |H|
  int null_dimension = 0;             // singular values below null_tol * sigma_max
  Eigen::VectorXd singular_values;
  double null_residual = 0.0;         // |H v| / (|H| |v|) for v = (0, H_p, -H_q, H_p)
  double null_alignment = 0.0;        // 1 - |<v, v_svd>| for the computed null vector
  cplx det_restricted;                // det of H on the orthogonal complement of v
  cplx det_projected;                 // det(H + P_v)
  cplx det_predicted;                 // (-1)^{n-1} (-i)^n det(U/2)^{-1} |v|^2 det(P - I)
  double identity_residual = 0.0;     // |det_projected - det_predicted| / |det_predicted|
  double restricted_vs_projected = 0.0;
};

/// Evaluates Phi_E'' at a periodic-orbit point alpha (= alpha_T) with monodromy F
/// and compares its normal determinant with the closed form.
inline PhaseHessianReport phase_hessian_at_orbit(const Vec& grad_H, const Mat& F, double det_P_minus_I,
                                                 double null_tol = 1e-8) {
  PhaseHessianReport r;
  const Eigen::Index n = grad_H.size() / 2;
  r.n = static_cast<int>(n);
  const Vec Hq = grad_H.head(n), Hp = grad_H.tail(n);
  const Blocks b = split_blocks(F);
  const CMat M = width_matrix(F);
  r.hessian = assemble_phase_hessian(Hq, Hp, b, M);
  const CMat& H = r.hessian;
  const double hmax = H.cwiseAbs().maxCoeff();
  r.symmetry_defect = (H - H.transpose()).cwiseAbs().maxCoeff() / hmax;

  Eigen::JacobiSVD<CMat> svd(H, Eigen::ComputeFullV);
  r.singular_values = svd.singularValues();
  const double smax = r.singular_values(0);
  r.null_dimension = 0;
  for (Eigen::Index i = 0; i < r.singular_values.size(); ++i) {
    if (r.singular_values(i) < null_tol * smax) ++r.null_dimension;
  }

  const Vec v = critical_tangent(Hq, Hp);
  const Vec vn = v.normalized();
  r.null_residual = (H * vn.cast<cplx>()).norm() / H.norm();
  const CVec vsvd = svd.matrixV().col(svd.matrixV().cols() - 1);
  r.null_alignment = 1.0 - std::abs(vsvd.dot(vn.cast<cplx>()));

  const Mat P = vn * vn.transpose();
  r.det_projected = (H + P.cast<cplx>()).determinant();

  // real orthonormal basis of v^perp
  Eigen::HouseholderQR<Mat> qr(vn);
  const Mat Q = Mat(qr.householderQ()).rightCols(3 * n);
  r.det_restricted = (Q.transpose().cast<cplx>() * H * Q.cast<cplx>()).determinant();

  const CMat U = b.A.cast<cplx>() + kI * b.B.cast<cplx>();
  const cplx det_half_U = (0.5 * U).determinant();
  const cplx sign_n = (n % 2 == 1) ? 1.0 : -1.0;  // (-1)^{n-1}
  r.det_predicted = sign_n * std::pow(-kI, static_cast<double>(n)) / det_half_U * v.squaredNorm() * det_P_minus_I;
  r.identity_residual = std::abs(r.det_projected - r.det_predicted) / std::abs(r.det_predicted);
  r.restricted_vs_projected = std::abs(r.det_restricted - r.det_projected) / std::abs(r.det_projected);
  return r;
}

/// [det(Phi''|_N / i)]_*^{-1/2}: product of principal reciprocal square roots of
/// the eigenvalues of the Hessian restricted to the complement of `tangent`.
inline cplx normal_inv_sqrt_det(const CMat& H, const Vec& tangent) {
  const Eigen::Index m = H.rows();
  Eigen::HouseholderQR<Mat> qr(tangent.normalized());
  const Mat Q = Mat(qr.householderQ()).rightCols(m - 1);
  const CMat R = Q.transpose().cast<cplx>() * H * Q.cast<cplx>() / kI;
  return inv_sqrt_det_star(R);
}

}  // namespace gtrace
