// Coherent states and leading-order propagation of Gaussian wave packets.
//
// Phase convention (Weyl-Heisenberg translation applied to the ground state):
//   phi_alpha(x) = (pi hbar)^{-n/4} exp{(i/hbar)(p.x - p.q/2) - |x - q|^2/(2 hbar)}.
#pragma once

#include "gtrace/core.hpp"
#include "gtrace/dynamics.hpp"
#include "gtrace/hamiltonians.hpp"
#include "gtrace/quantum_oracle.hpp"
#include "gtrace/symplectic.hpp"

#include <cmath>

namespace gtrace {

struct CoherentState {
  Vec alpha;
  double hbar;

  CoherentState(Vec a, double h) : alpha(std::move(a)), hbar(h) {
    if (!(hbar > 0.0)) throw ConfigError("hbar", "must be positive");
    if (alpha.size() < 2 || alpha.size() % 2 != 0) throw Error("CoherentState: bad phase-space point");
  }

  int dim() const { return static_cast<int>(alpha.size() / 2); }

  cplx operator()(const Vec& x) const {
    const int n = dim();
    const Vec q = alpha.head(n), p = alpha.tail(n);
    const double pref = std::pow(kPi * hbar, -0.25 * n);
    return pref * std::exp(kI * (p.dot(x) - 0.5 * p.dot(q)) / hbar - (x - q).squaredNorm() / (2.0 * hbar));
  }
};

/// Samples phi_alpha on the grid; throws when the sampled norm misses 1 by more than tol.
inline CVec sample_coherent_state(const CoherentState& cs, const Grid& g, double tol = 1e-6) {
  if (g.n != cs.dim()) throw GridError("sample_coherent_state: grid dimension mismatch");
  CVec psi(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) psi(i) = cs(g.point(i));
  if (std::abs(l2_norm(psi, g) - 1.0) > tol) {
    throw GridError("sample_coherent_state: grid too small or too coarse for the state (norm deficit " +
                    std::to_string(std::abs(l2_norm(psi, g) - 1.0)) + ")");
  }
  return psi;
}

/// <phi_a, phi_b> in closed form (product of one-dimensional Gaussian integrals).
inline cplx coherent_overlap(const Vec& a, const Vec& b, double hbar) {
  const Eigen::Index n = a.size() / 2;
  cplx out = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double qa = a(i), pa = a(n + i), qb = b(i), pb = b(n + i);
    const cplx lin = (cplx(qa + qb, pb - pa)) / hbar;
    const cplx e = hbar * lin * lin / 4.0 - (qa * qa + qb * qb) / (2.0 * hbar) +
                   kI * (pa * qa - pb * qb) / (2.0 * hbar);
    out *= std::exp(e);
  }
  return out;
}

/// e^{i delta/hbar} (det U)_c^{-1/2} (pi hbar)^{-n/4}
///   exp{(i/hbar) p_t.(x - q_t/2) + (i/2hbar)(x - q_t).M(x - q_t)}
struct GaussianPacket {
  Vec center;       // alpha_t
  CMat M;
  double delta = 0.0;
  cplx prefactor = 1.0;  // (det U)_c^{-1/2}
  double hbar = 1.0;

  int dim() const { return static_cast<int>(center.size() / 2); }

  cplx operator()(const Vec& x) const {
    const int n = dim();
    const Vec qt = center.head(n), pt = center.tail(n);
    const CVec w = (x - qt).cast<cplx>();
    const cplx quad = (w.transpose() * M * w)(0, 0);
    const double pref = std::pow(kPi * hbar, -0.25 * n);
    return std::exp(kI * delta / hbar) * prefactor * pref *
           std::exp(kI * pt.dot(x - 0.5 * qt) / hbar + 0.5 * kI * quad / hbar);
  }

  CVec sample(const Grid& g) const {
    CVec psi(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) psi(i) = (*this)(g.point(i));
    return psi;
  }

  /// Analytic L2 norm |prefactor| det(Im M)^{-1/4}; equals 1 for symplectic F.
  double analytic_norm() const {
    const Mat im = M.imag();
    const double det_im = im.determinant();
    return std::abs(prefactor) * std::pow(det_im, -0.25);
  }
};

/// Leading-order packet e^{i delta/hbar} T(alpha_t) Met(F(t)) psi_0 from a flow result.
inline GaussianPacket packet_from_flow(const FlowResult& fr, std::size_t i, double hbar) {
  GaussianPacket g;
  g.center = fr.trajectory.states[i];
  g.M = fr.flow.M(i);
  g.delta = fr.trajectory.action_delta(i);
  g.prefactor = fr.flow.detU_inv_sqrt(i);
  g.hbar = hbar;
  return g;
}

inline GaussianPacket propagate_leading(const HamiltonianSystem& sys, const Vec& alpha, double t, double hbar,
                                        const IntegrationOptions& opts = {}) {
  if (!(hbar > 0.0)) throw ConfigError("hbar", "must be positive");
  IntegrationOptions o = opts;
  o.report_dt = 0.0;
  const auto fr = integrate_with_jacobi(sys, alpha, t, o);
  return packet_from_flow(fr, fr.trajectory.size() - 1, hbar);
}

/// m0(alpha, t) = (det U)_c^{-1/2} pi^{-n/2} int exp{(i/2)(M + iI)x.x - i(x - a/2).(b + ia)} dx
/// with a = (q - q_t)/sqrt(hbar), b = (p - p_t)/sqrt(hbar). Closed form:
///   (det U)_c^{-1/2} 2^{n/2} [det Q]_*^{-1/2} exp(c.Q^{-1}c/2 + i a.b/2 - |a|^2/2),
///   Q = I - iM, c = a - ib.
inline cplx m0_closed_form(const Vec& alpha, const Vec& alpha_t, const CMat& M, cplx detU_inv_sqrt, double hbar) {
  const Eigen::Index n = alpha.size() / 2;
  const double sh = std::sqrt(hbar);
  const Vec a = (alpha.head(n) - alpha_t.head(n)) / sh;
  const Vec b = (alpha.tail(n) - alpha_t.tail(n)) / sh;
  const CMat Q = CMat::Identity(n, n) - kI * M;
  if (Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (Q.real() + Q.real().transpose())).eigenvalues().minCoeff() <= 0.0) {
    throw Error("m0: quadratic form has no positive-definite real part (Im M not positive)");
  }
  const CVec c = a.cast<cplx>() - kI * b.cast<cplx>();
  const cplx quad = (c.transpose() * Q.partialPivLu().solve(c))(0, 0);
  return detU_inv_sqrt * std::pow(2.0, 0.5 * n) * inv_sqrt_det_star(Q) *
         std::exp(0.5 * quad + 0.5 * kI * a.dot(b) - 0.5 * a.squaredNorm());
}

inline cplx overlap_m0(const HamiltonianSystem& sys, const Vec& alpha, double t, double hbar,
                       const IntegrationOptions& opts = {}) {
  IntegrationOptions o = opts;
  o.report_dt = 0.0;
  const auto fr = integrate_with_jacobi(sys, alpha, t, o);
  const std::size_t last = fr.trajectory.size() - 1;
  return m0_closed_form(alpha, fr.trajectory.states[last], fr.flow.M(last), fr.flow.detU_inv_sqrt(last), hbar);
}

/// <phi_alpha, packet(alpha, t)> = e^{i delta/hbar} e^{-i sigma(alpha, alpha_t)/2hbar} m0(alpha, t).
inline cplx leading_overlap(const Vec& alpha, const Vec& alpha_t, double delta, const CMat& M, cplx detU_inv_sqrt,
                            double hbar) {
  return std::exp(kI * (delta - 0.5 * symplectic_form(alpha, alpha_t)) / hbar) *
         m0_closed_form(alpha, alpha_t, M, detU_inv_sqrt, hbar);
}

struct PacketErrorOptions {
  double L = 1.5;              // box half-width
  int min_points = 256;
  int max_points = 8192;
  int steps = 400;             // split-operator steps (doubled until the Richardson check passes)
  int max_step_doublings = 4;
  double richardson_tol = 1e-8;
  double spread = 10.0;        // momentum coverage p_max + spread sqrt(hbar)
};

struct PacketErrorPoint {
  double hbar = 0.0;
  double error = 0.0;       // || exact - leading ||_2
  double richardson = 0.0;  // split-operator step-halving change
  double norm_defect = 0.0;
  double phase = 0.0;       // arg <leading, exact>
  int N = 0;
  int steps = 0;
};

/// L2 distance between the exact (split-operator) evolution of phi_alpha and the
/// leading-order packet at time t. The grid covers momenta up to the largest
/// |p| along the trajectory plus opts.spread sqrt(hbar).
inline PacketErrorPoint packet_error(const HamiltonianSystem& sys, const Vec& alpha, double t, double hbar,
                                     const PacketErrorOptions& opts = {}) {
  if (!sys.potential() || sys.dim() != 1) throw Error("packet_error: needs a one-dimensional H = p^2 + V(q)");
  IntegrationOptions io;
  io.report_dt = std::max(std::abs(t) / 200.0, 1e-3);
  const auto tr = integrate(sys, alpha, t, io);
  double pmax = 0.0;
  for (const auto& z : tr.states) pmax = std::max(pmax, std::abs(z(1)));
  const double kneed = (pmax + opts.spread * std::sqrt(hbar)) / hbar;
  int N = opts.min_points;
  while (kPi * N / (2.0 * opts.L) < kneed) {
    N *= 2;
    if (N > opts.max_points) throw GridError("packet_error: required grid exceeds max_points");
  }
  const Grid g(1, opts.L, N);
  const GridHamiltonian gh(g, sys.potential()->value, hbar);
  const CVec psi0 = sample_coherent_state(CoherentState(alpha, hbar), g);

  PacketErrorPoint out;
  out.hbar = hbar;
  out.N = N;
  int steps = opts.steps;
  CheckedPropagation cp;
  for (int k = 0;; ++k) {
    cp = split_operator_propagate_checked(gh, psi0, t, steps);
    if (cp.richardson <= opts.richardson_tol) break;
    if (k == opts.max_step_doublings) {
      throw ConvergenceError("packet_error: split-operator Richardson change " + std::to_string(cp.richardson) +
                             " above tolerance");
    }
    steps *= 2;
  }
  const CVec lead = propagate_leading(sys, alpha, t, hbar).sample(g);
  out.steps = 2 * steps;
  out.richardson = cp.richardson;
  out.norm_defect = cp.norm_defect;
  out.error = l2_norm(cp.psi - lead, g);
  out.phase = std::arg(l2_inner(lead, cp.psi, g));
  return out;
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("loglog_slope: need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a, sy += b, sxx += a * a, sxy += a * b;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace gtrace
